"""Quality metrics and the SNR sweep harness.

The sweep drives Gaussian latents through the whole transmit / channel /
receive chain and reports latent RMS error, symbol EVM, the pilot-derived
SNR estimate, and waveform PAPR per operating point, as a CSV whose rows
can be replayed exactly from their seed.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from .channel import CHANNEL_KINDS, make_channel
from .config import ModemConfig, pilot_sequence
from .errors import InsufficientPilots, LengthMismatch, NoLock
from .latents import gaussian_source
from .modem import build_frames, ofdm_modulate, ctanh, papr
from .receiver import acquire, receive

EVM_FLOOR_DB = -120.0
SNR_REPORT_CEILING_DB = 60.0
SNR_REPORT_FLOOR_DB = -30.0

# payload symbol RMS equals the unit pilot magnitude at this latent scale
DEFAULT_SWEEP_SCALE = 1.0 / math.sqrt(2.0)


def evm(reference, received) -> float:
    """Error vector magnitude in dB: error power relative to reference power."""
    reference = np.asarray(reference).reshape(-1)
    received = np.asarray(received).reshape(-1)
    if reference.size != received.size:
        raise LengthMismatch(f"{reference.size} reference vs {received.size} received")
    if reference.size == 0:
        raise LengthMismatch("empty symbol streams")
    err = np.mean(np.abs(received - reference) ** 2)
    ref = np.mean(np.abs(reference) ** 2)
    if err == 0.0:
        return EVM_FLOOR_DB
    return max(float(10.0 * np.log10(err / ref)), EVM_FLOOR_DB)


def snr_estimate(pilot_observations) -> float:
    """Symbol SNR in dB from raw pilot-column observations (rows = pilot
    columns, columns = carriers), already divided by the known pilots.

    Noise is taken from the second difference across carriers, which cancels
    any channel response that is locally linear in frequency; signal power is
    the bias-corrected mean square. Needs at least 10 pilot columns.
    """
    u = np.asarray(pilot_observations)
    if u.ndim != 2 or u.shape[0] < 10:
        raise InsufficientPilots(f"need >= 10 pilot columns, got {u.shape}")
    resid = u[:, 2:] + u[:, :-2] - 2.0 * u[:, 1:-1]
    noise_var = float(np.mean(np.abs(resid) ** 2) / 6.0)
    signal = float(np.mean(np.abs(u) ** 2) - noise_var)
    if noise_var <= 0.0 or signal <= 0.0:
        return SNR_REPORT_CEILING_DB if noise_var <= 0.0 else SNR_REPORT_FLOOR_DB
    snr_db = 10.0 * np.log10(signal / noise_var)
    return float(np.clip(snr_db, SNR_REPORT_FLOOR_DB, SNR_REPORT_CEILING_DB))


def snr_estimate_from_grids(raw_grids, config: ModemConfig) -> float:
    p = pilot_sequence(config)
    u = np.stack([np.asarray(g.symbols)[:, 0] / p for g in raw_grids])
    return snr_estimate(u)


@dataclass(frozen=True)
class SweepRequest:
    eq_n0_db: float
    channel_kind: str
    frames: int
    seed: int


@dataclass
class SweepPoint:
    eq_n0_db: float
    channel_kind: str
    frames: int
    seed: int
    latent_rmse: float
    symbol_evm_db: float
    measured_snr_db: float
    papr_db: float
    sync_failures: int


def _validate_requests(requests):
    if not requests:
        raise ValueError("empty sweep grid")
    for r in requests:
        if r.channel_kind not in CHANNEL_KINDS:
            raise ValueError(f"unknown channel kind {r.channel_kind!r}")
        if r.frames < 100:
            raise ValueError(f"sweep points need >= 100 frames, got {r.frames}")
        if not math.isfinite(r.eq_n0_db):
            raise ValueError("eq_n0_db must be finite")


def run_point(
    request: SweepRequest,
    config: ModemConfig,
    *,
    latent_scale: float = DEFAULT_SWEEP_SCALE,
    bottleneck: bool = False,
    drive: float = 1.0,
) -> SweepPoint:
    """One closed-loop measurement; the channel is reseeded as seed + 1."""
    r = request
    n_latents = r.frames * config.latents_per_frame
    z = gaussian_source(r.seed, n_latents, latent_scale, config.latent_dim)
    grids = build_frames(z, config)
    x = ofdm_modulate(grids, config)
    if bottleneck:
        x = ctanh(drive * x)
    papr_db = papr(x)

    a_q = float(np.sqrt(2.0 * np.mean(np.square(z, dtype=np.float64))))
    chan = make_channel(r.channel_kind, config, eq_n0_db=r.eq_n0_db,
                        a_q=a_q, seed=r.seed + 1)
    y = chan.process(x)

    sync = None
    sync_failures = 0
    span = 12 * config.frame_samples
    for attempt in range(3):
        try:
            sync = acquire(y[attempt * config.frame_samples:
                             attempt * config.frame_samples + span], config)
            sync.frame_start += attempt * config.frame_samples
            break
        except NoLock:
            sync_failures += 1
    if sync is None:
        raise NoLock(f"no lock after 3 attempts at {r.eq_n0_db} dB {r.channel_kind}")

    # a late lock under fading starts the recovered stream a few frames in;
    # align reference and estimate before scoring
    result = receive(y, config, sync=sync)
    k0 = int(round(sync.frame_start / config.frame_samples))
    z64 = z.astype(np.float64)[k0 * config.latents_per_frame:]
    n = min(len(z64), len(result.latents))
    latent_rmse = float(np.sqrt(np.mean((result.latents[:n] - z64[:n]) ** 2)))

    ref = np.concatenate([np.asarray(g.symbols)[:, 1:].reshape(-1) for g in grids[k0:]])
    got = np.concatenate(
        [np.asarray(g.symbols)[:, 1:].reshape(-1) for g in result.corrected_grids]
    )
    n = min(ref.size, got.size)
    symbol_evm_db = evm(ref[:n], got[:n])
    measured_snr_db = snr_estimate_from_grids(result.raw_grids, config)

    return SweepPoint(
        eq_n0_db=r.eq_n0_db, channel_kind=r.channel_kind, frames=r.frames,
        seed=r.seed, latent_rmse=latent_rmse, symbol_evm_db=symbol_evm_db,
        measured_snr_db=measured_snr_db, papr_db=papr_db,
        sync_failures=sync_failures,
    )


def run_sweep(requests, config: ModemConfig, **point_kwargs) -> list:
    """All points of a sweep grid; validates every request before running
    anything so a bad grid produces no partial output."""
    requests = list(requests)
    _validate_requests(requests)
    return [run_point(r, config, **point_kwargs) for r in requests]


def parse_grid(spec: str, frames: int, seed: int) -> list:
    """Grid strings like 'awgn:-3:17:1;mpp:0:10:5' into sweep requests.

    Each segment is channel:start:stop:step in dB, stop inclusive. Seeds
    count up from `seed` in grid order so every row replays independently.
    """
    requests = []
    k = 0
    for segment in spec.split(";"):
        segment = segment.strip()
        if not segment:
            continue
        parts = segment.split(":")
        if len(parts) != 4:
            raise ValueError(f"bad grid segment {segment!r}, want channel:start:stop:step")
        kind = parts[0].strip()
        start, stop, step = (float(p) for p in parts[1:])
        if step <= 0:
            raise ValueError("grid step must be positive")
        for eq in np.arange(start, stop + step / 2, step):
            requests.append(SweepRequest(float(eq), kind, frames, seed + k))
            k += 1
    return requests


def sweep_csv(points, config: ModemConfig) -> str:
    """Stable CSV with the fixed geometry constants in comment rows."""
    buf = io.StringIO()
    buf.write(f"# occupied_bandwidth_hz={config.occupied_bandwidth:.1f}\n")
    buf.write(f"# pilot_cp_overhead_db={config.overhead_db:.4f}\n")
    buf.write("eq_n0_db,channel,frames,seed,latent_rmse,evm_db,snr_est_db,papr_db,sync_failures\n")
    for p in points:
        buf.write(
            f"{p.eq_n0_db:g},{p.channel_kind},{p.frames},{p.seed},"
            f"{p.latent_rmse:.6g},{p.symbol_evm_db:.3f},{p.measured_snr_db:.3f},"
            f"{p.papr_db:.3f},{p.sync_failures}\n"
        )
    return buf.getvalue()
