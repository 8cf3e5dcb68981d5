"""Frame geometry and rate constants, with all derived sample counts.

Everything downstream (modulator, channel, receiver) works in integer
sample counts computed once by :func:`validate`; no floating-point timing
is carried past this module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from functools import lru_cache

import numpy as np

from .errors import (
    CapacityMismatch,
    CarrierOutOfBand,
    ConfigError,
    NonIntegerTiming,
)

# absolute slack when deciding whether a float product is an exact integer
_INT_TOL = 1e-9


@dataclass(frozen=True)
class ModemConfig:
    """Waveform geometry. Derived fields are zero until :func:`validate` runs.

    The default waveform: 30 carriers at 50 baud starting at 750 Hz, an
    8 kHz complex sample rate, 4 ms cyclic prefix, and frames of one pilot
    symbol followed by four payload symbols carrying three 80-dim latent
    vectors (120 complex payload symbols per 120 ms frame).
    """

    n_carriers: int = 30
    symbol_rate: float = 50.0          # Hz per carrier
    sample_rate: float = 8000.0        # Hz
    cp_duration: float = 0.004         # seconds
    payload_symbols_per_frame: int = 4
    latents_per_frame: int = 3
    latent_dim: int = 80
    carrier_base_freq: float = 750.0   # Hz of carrier 0
    pilot_seed: int = 73

    # derived; populated by validate()
    dft_len: int = 0
    cp_len: int = 0
    symbol_samples: int = 0
    frame_samples: int = 0
    carrier_bins: tuple = ()

    @property
    def validated(self):
        return self.dft_len > 0

    @property
    def frame_symbols(self):
        """Symbols per frame including the leading pilot."""
        return self.payload_symbols_per_frame + 1

    @property
    def payload_symbols_total(self):
        return self.payload_symbols_per_frame * self.n_carriers

    @property
    def frame_duration(self):
        return self.frame_samples / self.sample_rate

    @property
    def carrier_freqs(self):
        return tuple(b * self.symbol_rate for b in self.carrier_bins)

    @property
    def occupied_bandwidth(self):
        return self.n_carriers * self.symbol_rate

    @property
    def overhead_db(self):
        """Pilot plus cyclic-prefix energy overhead relative to payload."""
        sym = self.frame_symbols / self.payload_symbols_per_frame
        cp = self.symbol_samples / self.dft_len
        return 10.0 * math.log10(sym * cp)


def _exact_int(value, what):
    rounded = round(value)
    if abs(value - rounded) > _INT_TOL * max(1.0, abs(value)):
        raise NonIntegerTiming(f"{what} = {value!r} is not an integer")
    return int(rounded)


def validate(config: ModemConfig) -> ModemConfig:
    """Check all geometry invariants and return a config with derived counts.

    Raises NonIntegerTiming, CapacityMismatch or CarrierOutOfBand when the
    field values cannot form a coherent frame.
    """
    c = config
    if c.n_carriers < 1 or c.payload_symbols_per_frame < 1 or c.latents_per_frame < 1:
        raise ConfigError("counts must be positive")
    if c.symbol_rate <= 0 or c.sample_rate <= 0 or c.cp_duration < 0:
        raise ConfigError("rates must be positive and cp_duration non-negative")
    if c.latent_dim < 2:
        raise ConfigError("latent_dim must be at least 2")

    dft_len = _exact_int(c.sample_rate / c.symbol_rate, "sample_rate/symbol_rate")
    cp_len = _exact_int(c.cp_duration * c.sample_rate, "cp_duration*sample_rate")

    if c.latent_dim % 2:
        raise CapacityMismatch(f"latent_dim {c.latent_dim} is odd")
    payload = c.payload_symbols_per_frame * c.n_carriers
    capacity = c.latents_per_frame * (c.latent_dim // 2)
    if payload != capacity:
        raise CapacityMismatch(
            f"{c.latents_per_frame} latents x {c.latent_dim // 2} symbols = {capacity} "
            f"does not fill the {payload}-symbol payload region"
        )

    # every carrier must land on an exact bin of the dft_len-point transform
    # and sit strictly inside (0, Fs/2)
    bins = []
    for k in range(c.n_carriers):
        freq = c.carrier_base_freq + k * c.symbol_rate
        try:
            b = _exact_int(freq / c.symbol_rate, f"carrier {k} bin")
        except NonIntegerTiming as err:
            raise CarrierOutOfBand(str(err)) from None
        if not 0 < b < dft_len / 2:
            raise CarrierOutOfBand(
                f"carrier {k} at {freq} Hz is outside (0, {c.sample_rate / 2}) Hz"
            )
        bins.append(b)

    symbol_samples = dft_len + cp_len
    return replace(
        c,
        dft_len=dft_len,
        cp_len=cp_len,
        symbol_samples=symbol_samples,
        frame_samples=(c.payload_symbols_per_frame + 1) * symbol_samples,
        carrier_bins=tuple(bins),
    )


def default_config() -> ModemConfig:
    return validate(ModemConfig())


@lru_cache(maxsize=16)
def pilot_sequence(config: ModemConfig) -> np.ndarray:
    """Fixed unit-magnitude QPSK pilot row, identical at both ends of the link.

    Drawn once from pilot_seed so transmitter and receiver agree without a
    side channel; flat per-carrier power keeps the estimator noise uniform.
    """
    rng = np.random.default_rng(config.pilot_seed)
    quadrant = rng.integers(0, 4, size=config.n_carriers)
    phases = np.pi / 4 + quadrant * np.pi / 2
    seq = np.exp(1j * phases)
    seq.flags.writeable = False
    return seq


# --- key=value config files and CLI overrides -------------------------------

_USER_FIELDS = {
    f.name: f.type for f in fields(ModemConfig)
    if f.name not in ("dft_len", "cp_len", "symbol_samples", "frame_samples", "carrier_bins")
}
_INT_FIELDS = {
    "n_carriers", "payload_symbols_per_frame", "latents_per_frame",
    "latent_dim", "pilot_seed",
}


def apply_overrides(config: ModemConfig, pairs: dict) -> ModemConfig:
    """Apply string key=value overrides (from a file or the command line)."""
    updates = {}
    for key, raw in pairs.items():
        if key not in _USER_FIELDS:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            updates[key] = int(raw) if key in _INT_FIELDS else float(raw)
        except ValueError:
            raise ConfigError(f"bad value for {key}: {raw!r}") from None
    return replace(config, **updates)


def load_config_file(path, base: ModemConfig | None = None) -> ModemConfig:
    """Read key=value lines ('#' starts a comment) into a config."""
    pairs = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {text!r}")
            key, value = (part.strip() for part in text.split("=", 1))
            pairs[key] = value
    return apply_overrides(base or ModemConfig(), pairs)


def dump_config(config: ModemConfig) -> str:
    """All settings and derived constants as stable key=value lines."""
    c = validate(config) if not config.validated else config
    lines = [
        f"n_carriers={c.n_carriers}",
        f"symbol_rate_hz={c.symbol_rate:g}",
        f"sample_rate_hz={c.sample_rate:g}",
        f"cp_duration_s={c.cp_duration:g}",
        f"payload_symbols_per_frame={c.payload_symbols_per_frame}",
        f"latents_per_frame={c.latents_per_frame}",
        f"latent_dim={c.latent_dim}",
        f"carrier_base_freq_hz={c.carrier_base_freq:g}",
        f"pilot_seed={c.pilot_seed}",
        f"dft_len={c.dft_len}",
        f"cp_len={c.cp_len}",
        f"symbol_samples={c.symbol_samples}",
        f"frame_samples={c.frame_samples}",
        f"frame_duration_ms={1000.0 * c.frame_samples / c.sample_rate:.6f}",
        f"payload_symbols_total={c.payload_symbols_total}",
        f"occupied_bandwidth_hz={c.occupied_bandwidth:.6f}",
        f"pilot_cp_overhead_db={c.overhead_db:.6f}",
        "carrier_bins=" + ",".join(str(b) for b in c.carrier_bins),
        "carrier_freqs_hz=" + ",".join(f"{f:g}" for f in c.carrier_freqs),
    ]
    return "\n".join(lines) + "\n"
