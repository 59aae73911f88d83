import hashlib
from typing import Iterable, List, NamedTuple, Union

import numpy as np


class SeedStreams(NamedTuple):
    """
    Independent random streams derived from one run seed.

    Every stream is a `numpy.random.Generator` backed by the Philox
    counter-based bit generator, so a given seed produces the same numbers on
    every platform. Gaussian variates come from `Generator.standard_normal`.
    """

    init: np.random.Generator
    "Parameter initialisation"
    perturbation: np.random.Generator
    "Perturbation noise and minibatch selection"
    data: np.random.Generator
    "Dataset noise (XOR clusters) and train/test splits"


def make_rng(seed: Union[int, np.random.SeedSequence]) -> np.random.Generator:
    """
    Build a seeded generator.

    Args:
        seed (int, numpy.random.SeedSequence): the seed material.
    Returns:
        numpy.random.Generator: a Philox-backed generator.
    """
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return np.random.Generator(np.random.Philox(seed))


def split_seed(seed: int) -> SeedStreams:
    """
    Split a run seed into its three streams.

    The split is `SeedSequence(seed).spawn(3)` in the order
    (init, perturbation, data). Because the init stream depends only on the
    seed, two optimizers run with the same seed start from the same weights.
    """
    init, perturbation, data = np.random.SeedSequence(seed).spawn(3)
    return SeedStreams(make_rng(init), make_rng(perturbation), make_rng(data))


def params_checksum(arrays: Iterable[np.ndarray]) -> str:
    "SHA-256 over the shapes and float64 bytes of a sequence of arrays"
    digest = hashlib.sha256()
    for array in arrays:
        array = np.ascontiguousarray(array, dtype=np.float64)
        digest.update(repr(array.shape).encode())
        digest.update(array.tobytes())
    return digest.hexdigest()


def parse_seq_lens(text: str) -> List[int]:
    """
    Parse a list of sequence lengths.

    Accepts a comma-separated list ("16,32,64") or a doubling range
    ("16..1024" gives 16, 32, ..., 1024). Both forms can be mixed.

    Raises:
        ValueError
    """
    seq_lens = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        if ".." in chunk:
            start, stop = (int(part) for part in chunk.split("..", 1))
            if start < 1 or stop < start:
                raise ValueError(f"Incorrect sequence length range: {chunk}")
            length = start
            while length <= stop:
                seq_lens.append(length)
                length *= 2
        else:
            length = int(chunk)
            if length < 1:
                raise ValueError(f"Incorrect sequence length: {chunk}")
            seq_lens.append(length)
    if not seq_lens:
        raise ValueError(f"No sequence length in: {text!r}")
    return seq_lens


def format_float(value: float) -> str:
    "Shortest round-tripping representation, so that CSV outputs are byte-stable"
    return repr(float(value))
