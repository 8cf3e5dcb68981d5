import numpy as np
import pytest

from hfofdm.channel import make_channel
from hfofdm.errors import InsufficientPilots, LengthMismatch
from hfofdm.metrics import (
    SweepRequest,
    evm,
    parse_grid,
    run_point,
    run_sweep,
    snr_estimate,
    snr_estimate_from_grids,
    sweep_csv,
)
from hfofdm.modem import QamGrid, ofdm_modulate
from hfofdm.receiver import SyncEstimate, ofdm_demodulate

IDEAL = SyncEstimate(0, 0.0, 1.0)


# --- EVM ---------------------------------------------------------------------

def test_evm_identical_hits_floor():
    x = np.ones(100, dtype=complex)
    assert evm(x, x) == -120.0


def test_evm_known_noise():
    rng = np.random.default_rng(0)
    sigma = 0.2
    ref = np.exp(2j * np.pi * rng.random(100000))
    noise = (sigma / np.sqrt(2)) * (rng.standard_normal(100000)
                                    + 1j * rng.standard_normal(100000))
    assert evm(ref, ref + noise) == pytest.approx(20 * np.log10(sigma), abs=0.2)


def test_evm_double_amplitude_is_zero_db():
    x = np.ones(50, dtype=complex) * (1 + 1j)
    assert evm(x, 2 * x) == pytest.approx(0.0, abs=1e-12)


def test_evm_length_mismatch():
    with pytest.raises(LengthMismatch):
        evm(np.ones(3), np.ones(4))
    with pytest.raises(LengthMismatch):
        evm(np.ones(0), np.ones(0))


# --- pilot SNR estimator -----------------------------------------------------

def unit_grids(cfg, rng, frames):
    from hfofdm.config import pilot_sequence
    grids = []
    for k in range(frames):
        sym = np.exp(2j * np.pi * rng.random((30, 5)))
        sym[:, 0] = pilot_sequence(cfg)
        grids.append(QamGrid(sym, k))
    return grids


@pytest.mark.parametrize("set_db", [0.0, 10.0])
def test_snr_estimate_closed_loop(cfg, set_db):
    rng = np.random.default_rng(1)
    grids = unit_grids(cfg, rng, 500)
    x = ofdm_modulate(grids, cfg)
    chan = make_channel("awgn", cfg, eq_n0_db=set_db, a_q=1.0, seed=2)
    raw = ofdm_demodulate(chan.process(x), IDEAL, cfg)
    assert snr_estimate_from_grids(raw, cfg) == pytest.approx(set_db, abs=1.0)


def test_snr_estimate_noiseless_ceiling(cfg):
    rng = np.random.default_rng(3)
    grids = unit_grids(cfg, rng, 20)
    raw = ofdm_demodulate(ofdm_modulate(grids, cfg), IDEAL, cfg)
    assert snr_estimate_from_grids(raw, cfg) >= 40.0


def test_snr_estimate_needs_ten_columns():
    with pytest.raises(InsufficientPilots):
        snr_estimate(np.ones((9, 30), dtype=complex))


# --- sweep -------------------------------------------------------------------

def test_parse_grid():
    reqs = parse_grid("awgn:-3:17:5;mpp:0:10:10", frames=100, seed=7)
    kinds = [(r.channel_kind, r.eq_n0_db) for r in reqs]
    assert kinds == [("awgn", -3.0), ("awgn", 2.0), ("awgn", 7.0), ("awgn", 12.0),
                     ("awgn", 17.0), ("mpp", 0.0), ("mpp", 10.0)]
    assert [r.seed for r in reqs] == [7, 8, 9, 10, 11, 12, 13]
    with pytest.raises(ValueError):
        parse_grid("awgn:0:10", frames=100, seed=1)


def test_sweep_rejects_bad_requests(cfg):
    with pytest.raises(ValueError):
        run_sweep([], cfg)
    with pytest.raises(ValueError):
        run_sweep([SweepRequest(10.0, "awgn", 0, 1)], cfg)
    with pytest.raises(ValueError):
        run_sweep([SweepRequest(10.0, "thunderstorm", 100, 1)], cfg)


def test_sweep_point_and_csv(cfg):
    points = run_sweep(
        [SweepRequest(17.0, "awgn", 100, 1), SweepRequest(0.0, "awgn", 100, 2)],
        cfg,
    )
    assert points[0].latent_rmse < points[1].latent_rmse
    assert points[0].sync_failures == 0
    assert points[0].measured_snr_db == pytest.approx(17.0, abs=1.0)
    assert points[1].measured_snr_db == pytest.approx(0.0, abs=1.0)
    text = sweep_csv(points, cfg)
    lines = text.strip().splitlines()
    assert lines[0].startswith("# occupied_bandwidth_hz=1500")
    assert lines[1].startswith("# pilot_cp_overhead_db=1.76")
    assert lines[2] == ("eq_n0_db,channel,frames,seed,latent_rmse,evm_db,"
                        "snr_est_db,papr_db,sync_failures")
    assert len(lines) == 5
    row = lines[3].split(",")
    assert row[0] == "17" and row[1] == "awgn" and row[2] == "100"


def test_sweep_mpp_worse_than_awgn(cfg):
    awgn = run_point(SweepRequest(10.0, "awgn", 100, 3), cfg)
    mpp = run_point(SweepRequest(10.0, "mpp", 100, 3), cfg)
    assert mpp.latent_rmse >= awgn.latent_rmse
