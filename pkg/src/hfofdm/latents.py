"""Latent-vector streams: a Gaussian stand-in source and the raw file format.

A latent stream is a float32 array of shape (count, dim); the row index is
the 40 ms timestep. Files are raw little-endian float32, dim values per
record, no header, so dumped tensors from any numeric tool can be replayed.
"""

from __future__ import annotations

import numpy as np

from .errors import NonFiniteValue, TruncatedFile

LATENT_DTYPE = np.dtype("<f4")
DEFAULT_DIM = 80


def gaussian_source(seed: int, count: int, scale: float = 1.0, dim: int = DEFAULT_DIM) -> np.ndarray:
    """Deterministic zero-mean Gaussian latents with standard deviation `scale`.

    The payload distribution of a trained encoder is noise-like, so an
    elementwise Gaussian is the neutral test source; `scale` sets the drive
    level into any downstream amplitude limiter.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if scale < 0:
        raise ValueError("scale must be non-negative")
    rng = np.random.default_rng(seed)
    values = rng.standard_normal((count, dim)) * scale
    return values.astype(LATENT_DTYPE)


def write_latents(stream: np.ndarray, path) -> None:
    stream = np.asarray(stream)
    if stream.ndim != 2:
        raise ValueError("latent stream must be a (count, dim) array")
    if not np.isfinite(stream).all():
        raise NonFiniteValue("latent stream contains non-finite values")
    np.ascontiguousarray(stream, dtype=LATENT_DTYPE).tofile(path)


def read_latents(path, dim: int = DEFAULT_DIM) -> np.ndarray:
    flat = np.fromfile(path, dtype=LATENT_DTYPE)
    if flat.size % dim:
        raise TruncatedFile(
            f"{path}: {flat.size} floats is not a multiple of the {dim}-value record"
        )
    if not np.isfinite(flat).all():
        raise NonFiniteValue(f"{path}: non-finite latent values")
    return flat.reshape(-1, dim)
