"""Receive path: acquisition, demodulation, pilot equalization, demapping.

Acquisition correlates the known time-domain pilot body against the stream
over a coarse frequency grid, combines the correlation magnitude across
several frame-spaced pilot repeats, then refines frequency from the phase
slope between those repeats. Equalization fits a per-carrier channel
estimate at each pilot column from the carrier and its two neighbours,
interpolates the phase across the frame, and normalizes magnitude with a
single per-frame scalar; per-carrier magnitudes are deliberately left
faded.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from .config import ModemConfig, pilot_sequence
from .errors import EqDiverged, NoLock, StreamUnderrun
from .modem import QamGrid, analysis_matrix, multicarrier_block, quad_demap

# DFT window starts this many samples before the end of the cyclic prefix:
# tolerates the same amount of late timing while leaving cp_len - backoff
# samples of multipath protection
DEFAULT_BACKOFF = 8


@dataclass
class SyncEstimate:
    frame_start: int       # sample index of the first located frame
    coarse_freq: float     # Hz
    confidence: float      # normalized pilot correlation in [0, 1]


@dataclass
class EqualizerState:
    pilot_estimates: np.ndarray   # (frames, n_carriers) complex, leading pilots
    gains: np.ndarray             # (frames,) scalar magnitude normalizers
    flagged: np.ndarray           # (frames, n_carriers) bool, phase left alone


def pilot_body(config: ModemConfig) -> np.ndarray:
    """Time-domain pilot symbol body (no cyclic prefix)."""
    return multicarrier_block(pilot_sequence(config), config, with_cp=False)


def _pilot_correlations(y, body_starts, freq_hz, config):
    """Complex pilot correlations at absolute body positions, derotated at
    freq_hz with a global time reference."""
    p = pilot_body(config)
    b = config.dft_len
    out = np.empty(len(body_starts), dtype=np.complex128)
    for i, t in enumerate(body_starts):
        n = t + np.arange(b)
        w = np.exp(-2j * np.pi * freq_hz * n / config.sample_rate)
        out[i] = np.dot(y[t:t + b] * w, np.conj(p))
    return out


def _half_correlations(y, body_starts, freq_hz, config):
    """Pilot correlations split into first/second half-windows, (K, 2)."""
    p = pilot_body(config)
    b = config.dft_len
    half = b // 2
    out = np.empty((len(body_starts), 2), dtype=np.complex128)
    for i, t in enumerate(body_starts):
        n = t + np.arange(b)
        w = np.exp(-2j * np.pi * freq_hz * n / config.sample_rate)
        seg = y[t:t + b] * w * np.conj(p)
        out[i, 0] = seg[:half].sum()
        out[i, 1] = seg[half:].sum()
    return out


def _cp_frequency_estimate(y, start, span, config):
    """Offset estimate from the lag-dft_len self-correlation of the stream.

    Cyclic-prefix samples repeat one body length later, so the correlation
    phase measures the offset modulo sample_rate / dft_len without needing
    symbol timing; payload regions only add zero-mean noise.
    """
    b = config.dft_len
    seg = y[start:start + span]
    z = np.sum(seg[b:] * np.conj(seg[:-b]))
    return float(np.angle(z) * config.sample_rate / (2.0 * np.pi * b))


def acquire(
    samples,
    config: ModemConfig,
    *,
    freq_range: float = 50.0,
    freq_step: float = 2.5,
    max_pilots: int = 8,
    confidence_floor: float = 0.18,
) -> SyncEstimate:
    """Locate frame timing and coarse frequency offset.

    Searches offsets in +-freq_range Hz. Raises NoLock when the best
    normalized correlation stays below confidence_floor (no credible
    signal), StreamUnderrun when fewer than two frames of samples are given.
    """
    y = np.asarray(samples, dtype=np.complex128)
    m = config.frame_samples
    b = config.dft_len
    if y.size < 2 * m:
        raise StreamUnderrun(f"acquisition needs at least {2 * m} samples, got {y.size}")

    p = pilot_body(config)
    energy_p = float(np.sum(np.abs(p) ** 2))
    n_pilots = min(max_pilots, (y.size - b) // m)
    freqs = np.arange(-freq_range, freq_range + freq_step / 2, freq_step)

    # coarse search: per frequency hypothesis, correlate a modulated pilot
    # template across all lags and sum the magnitude over n_pilots repeats
    best = (-1.0, 0, 0.0)   # metric, body lag, freq
    n_tmpl = np.arange(b)
    for f in freqs:
        tmpl = p * np.exp(2j * np.pi * f * n_tmpl / config.sample_rate)
        corr = np.abs(fftconvolve(y, np.conj(tmpl[::-1]), mode="valid"))
        span = corr.size - (n_pilots - 1) * m
        metric = corr[:span].copy()
        for k in range(1, n_pilots):
            metric += corr[k * m:k * m + span]
        t = int(np.argmax(metric))
        if metric[t] > best[0]:
            best = (metric[t], t, f)

    _, t_hat, f_grid = best

    # the summed metric ramps over n_pilots frames around the signal onset,
    # so step back to the earliest boundary whose own pilot correlation still
    # reaches the level of the locked pilots
    locked = np.abs(_pilot_correlations(y, t_hat + m * np.arange(n_pilots), f_grid, config))
    pilot_level = float(np.median(locked))
    for _ in range(64):
        if t_hat < m:
            break
        c_prev = _pilot_correlations(y, np.array([t_hat - m]), f_grid, config)
        if np.abs(c_prev[0]) < 0.55 * pilot_level:
            break
        t_hat -= m

    # frequency refinement ladder, short to long baselines so each stage
    # lands inside the next one's unambiguous range:
    #   1. cyclic-prefix self-correlation (timing-free, +-Fs/2B range)
    #      fused with intra-pilot half-window phase (+-Fs/B range);
    #   2. frame-to-frame pilot phase (+-1/(2 T_frame) range);
    #   3. weighted least-squares phase slope over all pilot repeats.
    starts = t_hat + m * np.arange(n_pilots)
    grid_ambig = config.sample_rate / config.dft_len        # 50 Hz default
    f_cp = _cp_frequency_estimate(y, t_hat, n_pilots * m, config)
    f_cp += grid_ambig * round((f_grid - f_cp) / grid_ambig)
    halves = _half_correlations(y, starts, f_cp, config)
    d_half = np.angle(np.sum(halves[:, 1] * np.conj(halves[:, 0])))
    f_mid = f_cp + 0.45 * d_half * config.sample_rate / (np.pi * config.dft_len)

    c = _pilot_correlations(y, starts, f_mid, config)
    if n_pilots > 1:
        d_frame = np.angle(np.sum(c[1:] * np.conj(c[:-1])))
        f_mid += d_frame * config.sample_rate / (2.0 * np.pi * m)
        c = _pilot_correlations(y, starts, f_mid, config)

    phases = np.unwrap(np.angle(c))
    weights = np.abs(c) ** 2
    k = np.arange(n_pilots)
    wsum = weights.sum()
    if wsum > 0 and n_pilots > 1:
        kw = (weights * k).sum() / wsum
        pw = (weights * phases).sum() / wsum
        denom = (weights * (k - kw) ** 2).sum()
        slope = (weights * (k - kw) * (phases - pw)).sum() / denom if denom > 0 else 0.0
    else:
        slope = 0.0
    f_hat = f_mid + slope * config.sample_rate / (2.0 * np.pi * m)

    # re-check timing in a small neighbourhood at the refined frequency
    lo = max(0, t_hat - 3)
    hi = min(y.size - b - (n_pilots - 1) * m, t_hat + 3)
    cands = np.arange(lo, hi + 1)
    scores = [
        np.sum(np.abs(_pilot_correlations(y, t + m * np.arange(n_pilots), f_hat, config)))
        for t in cands
    ]
    t_hat = int(cands[int(np.argmax(scores))])

    # normalized confidence at the final hypothesis
    starts = t_hat + m * np.arange(n_pilots)
    c = _pilot_correlations(y, starts, f_hat, config)
    window_energy = np.array([np.sum(np.abs(y[t:t + b]) ** 2) for t in starts])
    norm = np.sqrt(energy_p * np.maximum(window_energy, 1e-300))
    confidence = float(np.mean(np.abs(c) / norm))

    if confidence < confidence_floor:
        raise NoLock(f"confidence {confidence:.3f} below {confidence_floor}")

    frame_start = t_hat - config.cp_len
    if frame_start < 0:
        frame_start += m
    return SyncEstimate(frame_start=frame_start, coarse_freq=float(f_hat),
                        confidence=min(confidence, 1.0))


def ofdm_demodulate(
    samples,
    sync: SyncEstimate,
    config: ModemConfig,
    *,
    n_frames: int | None = None,
    backoff: int = DEFAULT_BACKOFF,
) -> list:
    """Raw (unequalized) frames from a locked stream.

    Per symbol: take the DFT window `backoff` samples before the cyclic
    prefix ends, transform, and pick the carrier bins; the deterministic
    window rotation is folded into the analysis matrix, so under ideal
    conditions this is the exact inverse of modulation.
    """
    y = np.asarray(samples, dtype=np.complex128)
    m = config.frame_samples
    available = (y.size - sync.frame_start) // m
    if n_frames is None:
        n_frames = available
    if n_frames < 1 or available < 1:
        raise StreamUnderrun("no complete frame after the sync point")
    if n_frames > available:
        raise StreamUnderrun(f"asked for {n_frames} frames, stream holds {available}")

    if sync.coarse_freq:
        idx = np.arange(y.size) - sync.frame_start
        y = y * np.exp(-2j * np.pi * sync.coarse_freq * idx / config.sample_rate)

    backoff = min(backoff, config.cp_len)
    n_sym = config.frame_symbols
    col_starts = (
        sync.frame_start
        + m * np.arange(n_frames)[:, None]
        + config.symbol_samples * np.arange(n_sym)[None, :]
        + config.cp_len - backoff
    ).reshape(-1)
    windows = y[col_starts[:, None] + np.arange(config.dft_len)[None, :]]
    symbols = windows @ analysis_matrix(config, backoff)
    symbols = symbols.reshape(n_frames, n_sym, config.n_carriers)
    return [
        QamGrid(symbols=symbols[k].T.copy(), frame_index=k)
        for k in range(n_frames)
    ]


def _smooth_across_carriers(u):
    """Local least-squares channel estimate per carrier from itself and its
    two neighbours (linear fit, one-sided at the band edges)."""
    h = np.empty_like(u)
    h[..., 1:-1] = (u[..., :-2] + u[..., 1:-1] + u[..., 2:]) / 3.0
    h[..., 0] = (5.0 * u[..., 0] + 2.0 * u[..., 1] - u[..., 2]) / 6.0
    h[..., -1] = (5.0 * u[..., -1] + 2.0 * u[..., -2] - u[..., -3]) / 6.0
    return h


# pilot estimates below this fraction of the frame mean are too faded to
# give a usable phase; those carriers pass through uncorrected
DEEP_FADE_FRACTION = 0.05


def equalize(raw_grids, config: ModemConfig):
    """Pilot-aided phase correction and coarse magnitude normalization.

    Payload phase comes from linear interpolation between the complex
    channel estimates at the bracketing pilot columns (the trailing pilot of
    the last frame is reused from its leading one). Returns corrected grids
    and the EqualizerState.
    """
    if len(raw_grids) < 2:
        raise ValueError("equalization needs at least 2 consecutive frames")
    p = pilot_sequence(config)
    n_s = config.payload_symbols_per_frame
    raw = np.stack([np.asarray(g.symbols) for g in raw_grids])   # (F, Nc, 1+Ns)
    u = raw[:, :, 0] / p[None, :]
    h = _smooth_across_carriers(u)                               # (F, Nc)
    h_lead = h
    h_trail = np.vstack([h[1:], h[-1:]])

    mags = (np.abs(h_lead) + np.abs(h_trail)) / 2.0
    gains = mags.mean(axis=1)
    if np.any(gains < 1e-12):
        raise EqDiverged("pilot power vanished across the whole band")

    floor = DEEP_FADE_FRACTION * gains[:, None]
    flagged = (np.abs(h_lead) < floor) | (np.abs(h_trail) < floor)

    alpha = (np.arange(1, n_s + 1) / (n_s + 1))[None, :, None]
    h_interp = (1.0 - alpha) * h_lead[:, None, :] + alpha * h_trail[:, None, :]
    phase = np.angle(h_interp)                                   # (F, Ns, Nc)
    phase[np.broadcast_to(flagged[:, None, :], phase.shape)] = 0.0

    payload = raw[:, :, 1:].transpose(0, 2, 1)                   # (F, Ns, Nc)
    corrected = payload * np.exp(-1j * phase) / gains[:, None, None]
    pilots_eq = raw[:, :, 0] * np.exp(-1j * np.angle(h_lead)) / gains[:, None]

    out = []
    for k, g in enumerate(raw_grids):
        sym = np.empty_like(raw[k])
        sym[:, 0] = pilots_eq[k]
        sym[:, 1:] = corrected[k].T
        out.append(QamGrid(symbols=sym, frame_index=g.frame_index))
    state = EqualizerState(pilot_estimates=h, gains=gains, flagged=flagged)
    return out, state


def demap(corrected_grids, config: ModemConfig) -> np.ndarray:
    """Equalized frames back to latent vectors, inverse of the assembly order."""
    half = config.latent_dim // 2
    payload = np.stack([np.asarray(g.symbols)[:, 1:].T for g in corrected_grids])
    q = payload.reshape(len(corrected_grids) * config.latents_per_frame, half)
    return quad_demap(q)


@dataclass
class RxResult:
    latents: np.ndarray
    sync: SyncEstimate
    raw_grids: list
    corrected_grids: list
    state: EqualizerState
    telemetry: list = field(default_factory=list)


def receive(
    samples,
    config: ModemConfig,
    *,
    sync: SyncEstimate | None = None,
    acquire_span_frames: int = 12,
    **acquire_kwargs,
) -> RxResult:
    """Full receive chain; pass `sync` to skip acquisition."""
    y = np.asarray(samples, dtype=np.complex128)
    if sync is None:
        span = min(y.size, acquire_span_frames * config.frame_samples)
        sync = acquire(y[:span], config, **acquire_kwargs)
    raw = ofdm_demodulate(y, sync, config)
    if len(raw) < 2:
        raise StreamUnderrun("need at least 2 frames to equalize")
    corrected, state = equalize(raw, config)
    latents = demap(corrected, config)

    telemetry = []
    from .metrics import snr_estimate_from_grids   # local import, no cycle at module load
    for k in range(len(raw)):
        snr_db = None
        if k + 1 >= 10:
            snr_db = snr_estimate_from_grids(raw[max(0, k - 49):k + 1], config)
        telemetry.append({
            "frame": k,
            "gain": float(state.gains[k]),
            "snr_db": None if snr_db is None else round(float(snr_db), 2),
            "confidence": round(float(sync.confidence), 4),
            "flagged_carriers": int(state.flagged[k].sum()),
        })
    return RxResult(latents=latents, sync=sync, raw_grids=raw,
                    corrected_grids=corrected, state=state, telemetry=telemetry)
