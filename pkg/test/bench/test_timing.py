import math

import numpy as np
import pytest

from dopawp.chaos import lorenz_trajectory, min_max_bounds
from dopawp.enums import OptimizerId, TimingPhase
from dopawp.gradients import bptt_memory_bytes
from dopawp.timing import CSV_HEADER, time_optimizer, write_timing_csv

from test.conftest import small_rnn


@pytest.fixture(name="series", scope="module")
def fixture_series():
    states = lorenz_trajectory(n_steps=200).states
    low, span = min_max_bounds(states)
    return (states - low) / span


@pytest.mark.parametrize("optimizer", ["wp", "swp", "dopamine1", "dopamine2", "sgd", "adam"])
@pytest.mark.parametrize("phase", ["update", "full"])
def test_every_optimizer_is_timed(series, optimizer, phase):
    records = time_optimizer(optimizer, small_rnn(), series, [4, 8, 16], n_trials=2, phase=phase)
    assert [record.seq_len for record in records] == [4, 8, 16]
    for record in records:
        assert record.optimizer == OptimizerId.coerce(optimizer)
        assert record.phase == TimingPhase.coerce(phase)
        assert not record.failed
        assert record.n_trials == 2
        assert record.mean_s >= 0 and record.sem_s >= 0
        assert not record.low_confidence


def test_memory_cap_failure(series):
    cap = bptt_memory_bytes(8, 8, 5)
    records = time_optimizer("adam", small_rnn(), series, [8, 16], n_trials=1, memory_cap_bytes=cap)
    assert not records[0].failed
    assert records[1].failed
    assert records[1].reason == "memory"
    assert math.isnan(records[1].mean_s)
    assert records[1].row()[-1] == 1


def test_memory_cap_does_not_apply_to_perturbations(series):
    (record,) = time_optimizer("dopamine2", small_rnn(), series, [16], n_trials=1, memory_cap_bytes=1)
    assert not record.failed


def test_single_trial_is_low_confidence(series):
    (record,) = time_optimizer("wp", small_rnn(), series, [4], n_trials=1)
    assert record.low_confidence
    assert record.sem_s == 0.0
    assert record.median_s == record.mean_s


def test_too_short_series_is_a_failure(series):
    (record,) = time_optimizer("sgd", small_rnn(), series[:10], [32], n_trials=1)
    assert record.failed
    assert record.reason == "EmptyWindowError"


def test_network_is_left_untouched(series):
    net = small_rnn()
    before = net.checksum()
    time_optimizer("dopamine2", net, series, [8], n_trials=3, phase="full")
    time_optimizer("adam", net, series, [8], n_trials=3, phase="full")
    assert net.checksum() == before


def test_write_timing_csv(tmp_path, series):
    records = time_optimizer("dopamine2", small_rnn(), series, [4, 8], n_trials=2)
    path = write_timing_csv(records, tmp_path / "out" / "timing.csv")
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    assert len(lines) == 3
    assert lines[1].startswith("dopamine2,4,update,")
    assert lines[2].endswith(",2,0")


def test_series_may_be_one_dimensional():
    series = np.sin(np.linspace(0, 10, 100))[:, None]
    net = small_rnn(dims=1)
    (record,) = time_optimizer("dopamine1", net, series, [16], n_trials=1)
    assert not record.failed
