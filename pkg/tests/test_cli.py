import numpy as np
import pytest

from hfofdm.cli import main
from hfofdm.io import read_iq
from hfofdm.latents import gaussian_source, read_latents, write_latents


def run(*argv):
    return main(list(argv))


def test_dump_config(capsys):
    assert run("--dump-config") == 0
    pairs = dict(line.split("=", 1)
                 for line in capsys.readouterr().out.strip().splitlines())
    assert float(pairs["frame_duration_ms"]) == 120.0
    assert int(pairs["payload_symbols_total"]) == 120
    assert float(pairs["occupied_bandwidth_hz"]) == 1500.0
    assert abs(float(pairs["pilot_cp_overhead_db"]) - 2.0) <= 0.3


def test_dump_config_with_overrides(capsys):
    assert run("--set", "n_carriers=20", "--set", "payload_symbols_per_frame=6",
               "--dump-config") == 0
    pairs = dict(line.split("=", 1)
                 for line in capsys.readouterr().out.strip().splitlines())
    assert int(pairs["n_carriers"]) == 20


def test_bad_config_exit_code():
    assert run("--set", "symbol_rate=60", "--dump-config") == 2
    assert run("--set", "bogus=1", "--dump-config") == 2


def test_tx_writes_expected_length(tmp_path):
    out = tmp_path / "x.iqf32"
    assert run("tx", "--latent-seed", "3", "--latent-count", "30",
               "--iq-out", str(out)) == 0
    x = read_iq(out)
    assert x.size == 10 * 960


def test_tx_from_file(tmp_path):
    z = gaussian_source(9, 6, 1.0)
    zpath = tmp_path / "z.f32"
    write_latents(z, zpath)
    out = tmp_path / "x.iqf32"
    assert run("tx", "--latent-in", str(zpath), "--iq-out", str(out)) == 0
    assert read_iq(out).size == 2 * 960


def test_chan_identity_passthrough(tmp_path):
    x = tmp_path / "x.iqf32"
    y = tmp_path / "y.iqf32"
    run("tx", "--latent-seed", "4", "--latent-count", "6", "--iq-out", str(x))
    assert run("chan", "--iq-in", str(x), "--iq-out", str(y)) == 0
    assert x.read_bytes() == y.read_bytes()


def test_rx_empty_file_underrun(tmp_path):
    empty = tmp_path / "empty.iqf32"
    empty.touch()
    out = tmp_path / "z.f32"
    assert run("rx", "--iq-in", str(empty), "--latent-out", str(out)) == 5
    assert not out.exists()


def test_rx_noise_nolock(tmp_path):
    rng = np.random.default_rng(0)
    noise = rng.standard_normal(4000) + 1j * rng.standard_normal(4000)
    from hfofdm.io import write_iq
    path = tmp_path / "noise.iqf32"
    write_iq(noise, path)
    out = tmp_path / "z.f32"
    assert run("rx", "--iq-in", str(path), "--latent-out", str(out)) == 3
    assert not out.exists()


def test_missing_input_is_io_error(tmp_path):
    assert run("rx", "--iq-in", str(tmp_path / "nope.iqf32"),
               "--latent-out", str(tmp_path / "z.f32")) == 4


def test_loopback_high_snr_rmse(tmp_path, capsys):
    assert run("loopback", "--channel", "awgn", "--EqN0", "17", "--seed", "1",
               "--latent-seed", "1", "--latent-count", "100") == 0
    out = capsys.readouterr().out
    rmse = float(dict(kv.split("=") for kv in out.split())["latent_rmse"])
    assert rmse < 0.15   # 0.15 * latent scale (scale is 1.0 here)


def test_pipe_equals_loopback_bit_exact(tmp_path, capsys):
    x = tmp_path / "x.iqf32"
    y = tmp_path / "y.iqf32"
    z_pipe = tmp_path / "z_pipe.f32"
    z_loop = tmp_path / "z_loop.f32"
    tele_pipe = tmp_path / "t_pipe.jsonl"
    tele_loop = tmp_path / "t_loop.jsonl"
    flags = ["--latent-seed", "5", "--latent-count", "60"]
    chan_flags = ["--channel", "mpp", "--EqN0", "10", "--seed", "9",
                  "--freq-offset", "1.0"]
    assert run("tx", *flags, "--iq-out", str(x)) == 0
    assert run("chan", "--iq-in", str(x), "--iq-out", str(y), *chan_flags) == 0
    assert run("rx", "--iq-in", str(y), "--latent-out", str(z_pipe),
               "--telemetry", str(tele_pipe)) == 0
    assert run("loopback", *flags, *chan_flags,
               "--latent-out", str(z_loop), "--telemetry", str(tele_loop)) == 0
    assert z_pipe.read_bytes() == z_loop.read_bytes()
    assert tele_pipe.read_bytes() == tele_loop.read_bytes()


def test_loopback_telemetry_jsonl(tmp_path):
    import json
    tele = tmp_path / "t.jsonl"
    assert run("loopback", "--latent-seed", "2", "--latent-count", "30",
               "--telemetry", str(tele)) == 0
    records = [json.loads(line) for line in tele.read_text().splitlines()]
    assert len(records) == 10
    assert {"frame", "gain", "snr_db", "confidence", "flagged_carriers"} == set(records[0])


def test_sweep_csv_output(tmp_path):
    out = tmp_path / "sweep.csv"
    assert run("sweep", "--grid", "awgn:10:10:1", "--frames", "100",
               "--seed", "2", "--out", str(out)) == 0
    lines = out.read_text().strip().splitlines()
    assert lines[2].startswith("eq_n0_db,")
    assert len(lines) == 4


def test_sweep_zero_frames_fails_without_output(tmp_path):
    out = tmp_path / "sweep.csv"
    assert run("sweep", "--grid", "awgn:10:10:1", "--frames", "0",
               "--out", str(out)) != 0
    assert not out.exists()
