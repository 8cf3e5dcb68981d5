"""Single entry point: tx / chan / rx / loopback / sweep over raw files.

Streams stay raw (.f32 latents, .iqf32 interleaved float32 IQ); telemetry
goes to a JSON-lines side channel. loopback chains the same stages in one
process, quantizing to the float32 wire format at each boundary, so its
output is bit-identical to tx | chan | rx via files with equal seeds.

Exit codes: 0 success, 2 configuration, 3 no acquisition lock, 4 file I/O
or format, 5 stream underrun, 1 other processing errors.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import io as iqio
from .channel import make_channel
from .config import (
    ModemConfig,
    apply_overrides,
    dump_config,
    load_config_file,
    validate,
)
from .errors import (
    ConfigError,
    ModemError,
    NoLock,
    NonFiniteValue,
    StreamUnderrun,
    TruncatedFile,
)
from .latents import gaussian_source, read_latents, write_latents
from .metrics import (
    DEFAULT_SWEEP_SCALE,
    parse_grid,
    run_sweep,
    sweep_csv,
)
from .modem import transmit
from .receiver import receive

EXIT_CONFIG = 2
EXIT_NOLOCK = 3
EXIT_IO = 4
EXIT_UNDERRUN = 5


def _add_latent_source_args(sub):
    sub.add_argument("--latent-in", help="latent .f32 file to transmit")
    sub.add_argument("--latent-seed", type=int, default=1,
                     help="seed for generated Gaussian latents")
    sub.add_argument("--latent-count", type=int, default=100,
                     help="number of generated latent vectors")
    sub.add_argument("--latent-scale", type=float, default=1.0,
                     help="standard deviation of generated latents")


def _add_channel_args(sub):
    sub.add_argument("--channel", choices=("awgn", "mpp"), default="awgn")
    sub.add_argument("--EqN0", dest="eq_n0_db", type=float, default=None,
                     help="symbol SNR in dB; omit for a noiseless channel")
    sub.add_argument("--freq-offset", type=float, default=0.0, help="Hz")
    sub.add_argument("--gain", type=float, default=1.0)
    sub.add_argument("--seed", type=int, default=0, help="channel realization seed")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="hfofdm",
        description="OFDM modem and HF channel simulation toolkit",
    )
    parser.add_argument("--config", help="key=value config file")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config field (repeatable)")
    parser.add_argument("--dump-config", action="store_true",
                        help="print all derived constants and exit")
    sub = parser.add_subparsers(dest="command")

    tx = sub.add_parser("tx", help="latents to IQ waveform")
    _add_latent_source_args(tx)
    tx.add_argument("--iq-out", required=True)
    tx.add_argument("--bottleneck", action="store_true",
                    help="apply the saturating amplitude limiter")
    tx.add_argument("--drive", type=float, default=1.0,
                    help="drive gain into the limiter")

    chan = sub.add_parser("chan", help="IQ through the channel simulator")
    chan.add_argument("--iq-in", required=True)
    chan.add_argument("--iq-out", required=True)
    _add_channel_args(chan)

    rx = sub.add_parser("rx", help="IQ waveform to latents")
    rx.add_argument("--iq-in", required=True)
    rx.add_argument("--latent-out", required=True)
    rx.add_argument("--telemetry", help="JSON-lines sync/equalizer telemetry file")

    loop = sub.add_parser("loopback", help="tx, channel and rx in one process")
    _add_latent_source_args(loop)
    _add_channel_args(loop)
    loop.add_argument("--latent-out")
    loop.add_argument("--telemetry")
    loop.add_argument("--bottleneck", action="store_true")
    loop.add_argument("--drive", type=float, default=1.0)

    sweep = sub.add_parser("sweep", help="closed-loop metric sweep to CSV")
    sweep.add_argument("--grid", required=True,
                       help="channel:start:stop:step dB segments, ';'-separated")
    sweep.add_argument("--frames", type=int, default=100)
    sweep.add_argument("--seed", type=int, default=1)
    sweep.add_argument("--out", help="CSV path (default stdout)")
    sweep.add_argument("--latent-scale", type=float, default=DEFAULT_SWEEP_SCALE)
    sweep.add_argument("--bottleneck", action="store_true")
    sweep.add_argument("--drive", type=float, default=1.0)

    return parser


def _config_from_args(args) -> ModemConfig:
    cfg = ModemConfig()
    if args.config:
        cfg = load_config_file(args.config, cfg)
    overrides = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    if overrides:
        cfg = apply_overrides(cfg, overrides)
    return validate(cfg)


def _load_source_latents(args, cfg):
    if args.latent_in:
        return read_latents(args.latent_in, cfg.latent_dim)
    return gaussian_source(args.latent_seed, args.latent_count,
                           args.latent_scale, cfg.latent_dim)


def _write_telemetry(path, records):
    if not path:
        return
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")


def _cmd_tx(args, cfg):
    z = _load_source_latents(args, cfg)
    x = transmit(z, cfg, bottleneck=args.bottleneck, drive=args.drive)
    iqio.write_iq(x, args.iq_out)
    return 0


def _cmd_chan(args, cfg):
    x = iqio.read_iq(args.iq_in)
    chan = make_channel(args.channel, cfg, eq_n0_db=args.eq_n0_db,
                        freq_offset_hz=args.freq_offset, gain=args.gain,
                        seed=args.seed)
    iqio.write_iq(chan.process(x), args.iq_out)
    return 0


def _cmd_rx(args, cfg):
    y = iqio.read_iq(args.iq_in)
    result = receive(y, cfg)
    write_latents(result.latents.astype(np.float32), args.latent_out)
    _write_telemetry(args.telemetry, result.telemetry)
    return 0


def _cmd_loopback(args, cfg):
    z = _load_source_latents(args, cfg)
    x = transmit(z, cfg, bottleneck=args.bottleneck, drive=args.drive)
    x = iqio.quantize_to_wire(x)
    chan = make_channel(args.channel, cfg, eq_n0_db=args.eq_n0_db,
                        freq_offset_hz=args.freq_offset, gain=args.gain,
                        seed=args.seed)
    y = iqio.quantize_to_wire(chan.process(x))
    result = receive(y, cfg)
    z_hat = result.latents.astype(np.float32)
    if args.latent_out:
        write_latents(z_hat, args.latent_out)
    _write_telemetry(args.telemetry, result.telemetry)
    n = min(len(z), len(z_hat))
    rmse = float(np.sqrt(np.mean(
        (z_hat[:n].astype(np.float64) - z[:n].astype(np.float64)) ** 2)))
    print(f"latents={n} latent_rmse={rmse:.6g} "
          f"confidence={result.sync.confidence:.3f} "
          f"coarse_freq={result.sync.coarse_freq:.3f}")
    return 0


def _cmd_sweep(args, cfg):
    requests = parse_grid(args.grid, args.frames, args.seed)
    points = run_sweep(requests, cfg, latent_scale=args.latent_scale,
                       bottleneck=args.bottleneck, drive=args.drive)
    text = sweep_csv(points, cfg)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


_COMMANDS = {
    "tx": _cmd_tx,
    "chan": _cmd_chan,
    "rx": _cmd_rx,
    "loopback": _cmd_loopback,
    "sweep": _cmd_sweep,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    stage = args.command or "config"
    try:
        cfg = _config_from_args(args)
        if args.dump_config:
            sys.stdout.write(dump_config(cfg))
            return 0
        if args.command is None:
            parser.print_usage(sys.stderr)
            return EXIT_CONFIG
        return _COMMANDS[args.command](args, cfg)
    except ConfigError as err:
        print(f"hfofdm {stage}: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except NoLock as err:
        print(f"hfofdm {stage}: {err}", file=sys.stderr)
        return EXIT_NOLOCK
    except StreamUnderrun as err:
        print(f"hfofdm {stage}: {err}", file=sys.stderr)
        return EXIT_UNDERRUN
    except (TruncatedFile, NonFiniteValue, OSError) as err:
        print(f"hfofdm {stage}: {err}", file=sys.stderr)
        return EXIT_IO
    except (ModemError, ValueError) as err:
        print(f"hfofdm {stage}: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
