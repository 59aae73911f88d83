import numpy as np
import pytest

from dopawp.chaos import forecasting_series, lorenz_trajectory, make_windows, min_max_bounds
from dopawp.errors import EmptyWindowError


def test_window_count_and_first_pair():
    windows = make_windows(np.arange(10.0), 3)
    assert len(windows) == 7
    assert windows.inputs.shape == (7, 3, 1)
    assert windows.inputs[0, :, 0].tolist() == [0.0, 1.0, 2.0]
    assert windows.targets[0].tolist() == [3.0]
    assert windows.step_targets[0, :, 0].tolist() == [1.0, 2.0, 3.0]
    assert windows.inputs[-1, :, 0].tolist() == [6.0, 7.0, 8.0]
    assert windows.targets[-1].tolist() == [9.0]


def test_longest_window_gives_one_pair():
    windows = make_windows(np.arange(10.0), 9)
    assert len(windows) == 1
    assert windows.targets.tolist() == [[9.0]]


def test_series_too_short():
    with pytest.raises(EmptyWindowError) as error:
        make_windows(np.arange(5.0), 5)
    assert str(error.value) == "Series of length 5 is too short for a look-back window of 5"
    with pytest.raises(EmptyWindowError):
        make_windows(np.arange(5.0), 0)


def test_targets_reconstruct_the_series():
    states = lorenz_trajectory(n_steps=300).states
    windows = make_windows(states, 16)
    assert windows.targets.tobytes() == states[16:].tobytes()
    assert not windows.normalized


def test_normalization_round_trip():
    states = lorenz_trajectory(n_steps=300).states
    windows = make_windows(states, 8, normalize=True)
    assert windows.normalized
    assert windows.inputs.min() >= 0.0 and windows.inputs.max() <= 1.0
    np.testing.assert_allclose(windows.denormalize(windows.targets), states[8:], rtol=0, atol=1e-12)


def test_constant_column_bounds():
    series = np.column_stack([np.arange(4.0), np.full(4, 2.0)])
    low, span = min_max_bounds(series)
    assert low.tolist() == [0.0, 2.0]
    assert span.tolist() == [3.0, 1.0]


def test_to_batch_subsets():
    windows = make_windows(np.arange(20.0).reshape(10, 2), 4)
    batch = windows.to_batch(np.array([0, 2]))
    assert batch.is_sequence
    assert batch.lookback == 4
    assert batch.inputs[1, 0].tolist() == [4.0, 5.0]
    assert batch.targets[1].tolist() == [12.0, 13.0]
    assert len(windows.to_batch().inputs) == 6


def test_forecasting_series_coordinate():
    trajectory = lorenz_trajectory(n_steps=10)
    assert forecasting_series(trajectory).shape == (10, 3)
    column = forecasting_series(trajectory, "y")
    assert column.shape == (10, 1)
    np.testing.assert_array_equal(column[:, 0], trajectory.states[:, 1])
