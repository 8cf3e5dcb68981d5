"""Raw IQ sample files: interleaved little-endian float32 I,Q pairs."""

from __future__ import annotations

import numpy as np

from .errors import NonFiniteValue, TruncatedFile

IQ_DTYPE = np.dtype("<f4")


def write_iq(samples: np.ndarray, path) -> None:
    samples = np.asarray(samples)
    if not np.isfinite(samples).all():
        raise NonFiniteValue("IQ stream contains non-finite samples")
    pairs = np.empty((samples.size, 2), dtype=IQ_DTYPE)
    pairs[:, 0] = samples.real
    pairs[:, 1] = samples.imag
    pairs.tofile(path)


def read_iq(path) -> np.ndarray:
    flat = np.fromfile(path, dtype=IQ_DTYPE)
    if flat.size % 2:
        raise TruncatedFile(f"{path}: odd float count, expected I,Q pairs")
    if not np.isfinite(flat).all():
        raise NonFiniteValue(f"{path}: non-finite IQ samples")
    pairs = flat.reshape(-1, 2).astype(np.float64)
    return pairs[:, 0] + 1j * pairs[:, 1]


def quantize_to_wire(samples: np.ndarray) -> np.ndarray:
    """Round-trip through the float32 wire format without touching a file.

    In-process pipelines use this at stage boundaries so their output is
    bit-identical to the same stages chained through .iqf32 files.
    """
    return np.asarray(samples, dtype=np.complex64).astype(np.complex128)
