"""OFDM transmit path: quadrature mapping, frame assembly, modulation.

Conventions frozen here (the receiver must agree, nothing else cares):

* quadrature pairing: symbol k = z[2k] + j*z[2k+1];
* payload order: the 120 symbols from three consecutive latents fill the
  payload region one OFDM symbol at a time, carriers in ascending order;
* gain: one unit-magnitude symbol on one carrier becomes a complex
  exponential of amplitude 1/sqrt(n_carriers), so a frame of unit-RMS
  symbols has unit RMS in the time domain and mean waveform power equals
  mean symbol power.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .config import ModemConfig, pilot_sequence
from .errors import OddDimension, WrongLatentCount, ZeroSignal


@dataclass
class QamGrid:
    """One frequency-domain frame: column 0 is the pilot row, 1..N_s payload."""

    symbols: np.ndarray  # (n_carriers, 1 + payload_symbols_per_frame) complex
    frame_index: int = 0


def quad_map(z) -> np.ndarray:
    """Pack consecutive real pairs into complex symbols, q[k] = z[2k] + j z[2k+1]."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape[-1] % 2:
        raise OddDimension(f"cannot pair {z.shape[-1]} values")
    return z[..., 0::2] + 1j * z[..., 1::2]


def quad_demap(q) -> np.ndarray:
    """Exact inverse of quad_map."""
    q = np.asarray(q)
    z = np.empty(q.shape[:-1] + (2 * q.shape[-1],), dtype=np.float64)
    z[..., 0::2] = q.real
    z[..., 1::2] = q.imag
    return z


def frame_assemble(latents, config: ModemConfig, frame_index: int = 0) -> QamGrid:
    """Map latents_per_frame latent vectors into one pilot-led frame."""
    latents = np.asarray(latents, dtype=np.float64)
    if latents.ndim != 2 or latents.shape[0] != config.latents_per_frame:
        raise WrongLatentCount(
            f"expected {config.latents_per_frame} latent vectors, got shape {latents.shape}"
        )
    q = quad_map(latents).reshape(-1)
    n_c, n_s = config.n_carriers, config.payload_symbols_per_frame
    symbols = np.empty((n_c, 1 + n_s), dtype=np.complex128)
    symbols[:, 0] = pilot_sequence(config)
    symbols[:, 1:] = q.reshape(n_s, n_c).T
    return QamGrid(symbols=symbols, frame_index=frame_index)


def frame_disassemble(grid: QamGrid, config: ModemConfig) -> np.ndarray:
    """Recover the latent vectors from a frame's payload region."""
    q = np.asarray(grid.symbols)[:, 1:].T.reshape(-1)
    half = config.latent_dim // 2
    return quad_demap(q.reshape(config.latents_per_frame, half))


def build_frames(latents, config: ModemConfig) -> list:
    """Split a latent stream into frames, zero-padding a final partial frame."""
    latents = np.asarray(latents, dtype=np.float64)
    per = config.latents_per_frame
    n = latents.shape[0]
    n_frames = -(-n // per)
    if n_frames * per != n:
        pad = np.zeros((n_frames * per - n, latents.shape[1]))
        latents = np.vstack([latents, pad])
    return [
        frame_assemble(latents[k * per:(k + 1) * per], config, frame_index=k)
        for k in range(n_frames)
    ]


@lru_cache(maxsize=16)
def synthesis_matrix(config: ModemConfig, with_cp: bool = True) -> np.ndarray:
    """(n_carriers, samples) map from one symbol's carrier row to time samples.

    Carrier bins are exact DFT frequencies, so the cyclic prefix falls out
    of the same exponential evaluated at negative time indices.
    """
    bins = np.asarray(config.carrier_bins)
    start = -config.cp_len if with_cp else 0
    n = np.arange(start, config.dft_len)
    w = np.exp(2j * np.pi * np.outer(bins, n) / config.dft_len)
    w /= math.sqrt(config.n_carriers)
    w.flags.writeable = False
    return w


@lru_cache(maxsize=16)
def analysis_matrix(config: ModemConfig, backoff: int = 0) -> np.ndarray:
    """(dft_len, n_carriers) inverse of synthesis_matrix for a DFT window
    taken `backoff` samples before the end of the cyclic prefix."""
    bins = np.asarray(config.carrier_bins)
    m = np.arange(config.dft_len) - backoff
    w = np.exp(-2j * np.pi * np.outer(m, bins) / config.dft_len)
    w *= math.sqrt(config.n_carriers) / config.dft_len
    w.flags.writeable = False
    return w


def multicarrier_block(symbols, config: ModemConfig, with_cp: bool = False) -> np.ndarray:
    """Synthesize a single OFDM symbol from one carrier row."""
    symbols = np.asarray(symbols, dtype=np.complex128)
    return symbols @ synthesis_matrix(config, with_cp)


def ofdm_modulate(grids, config: ModemConfig) -> np.ndarray:
    """Frames to waveform: per column, inverse DFT plus cyclic prefix.

    Output length is exactly frame_samples per frame.
    """
    if isinstance(grids, QamGrid):
        grids = [grids]
    stacked = np.stack([np.asarray(g.symbols) for g in grids])     # (F, Nc, 1+Ns)
    columns = stacked.transpose(0, 2, 1).reshape(-1, config.n_carriers)
    return (columns @ synthesis_matrix(config, True)).reshape(-1)


def ctanh(x) -> np.ndarray:
    """Saturating amplitude limiter: magnitude through tanh, phase untouched.

    Models a power amplifier driven into compression; output magnitude is
    always below 1 and ctanh(0) = 0.
    """
    x = np.asarray(x, dtype=np.complex128)
    mag = np.abs(x)
    scale = np.ones_like(mag)
    nz = mag > 0
    scale[nz] = np.tanh(mag[nz]) / mag[nz]
    return x * scale


def papr(x) -> float:
    """Peak-to-average power ratio in dB."""
    x = np.asarray(x)
    if x.size == 0:
        raise ZeroSignal("empty stream")
    power = np.abs(x) ** 2
    mean = power.mean()
    if mean == 0:
        raise ZeroSignal("zero-power stream")
    return float(10.0 * np.log10(power.max() / mean))


def transmit(latents, config: ModemConfig, bottleneck: bool = False, drive: float = 1.0) -> np.ndarray:
    """Latent stream to transmit waveform.

    With `bottleneck` the waveform is drive-scaled and passed through the
    amplitude limiter, which caps the peak near unity regardless of drive.
    """
    x = ofdm_modulate(build_frames(latents, config), config)
    if bottleneck:
        x = ctanh(drive * x)
    return x
