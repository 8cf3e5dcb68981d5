"""Two-path HF fading, band-limited Doppler processes, calibrated noise.

The fading model is two copies of the signal, one delayed, each multiplied
by a slowly varying complex Gaussian process:

    y[n] = x[n] * G1[n] + x[n - D] * G2[n]

with the per-carrier magnitude shortcut

    h_c = |G1 + exp(-2j pi f_c d) G2|

evaluated at the carrier frequencies. Both forms are implemented and the
test suite checks they agree; the processing order in the time-domain path
is frozen as fade, then frequency offset, then gain, then noise, therefore
the noise level always refers to the receiver input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import ModemConfig
from .errors import ConfigError

# each path carries half the power so the two-path channel has unit
# average power gain and the SNR knob keeps its meaning under fading
PATH_RMS = 1.0 / math.sqrt(2.0)


def awgn_sigma(eq_n0_db: float, a_q: float) -> float:
    """Total RMS noise across I and Q for a symbol of magnitude a_q.

    sigma = a_q / sqrt(Eq/N0); each of the real and imaginary components
    receives half the variance.
    """
    if a_q <= 0:
        raise ValueError("a_q must be positive")
    return a_q / math.sqrt(10.0 ** (eq_n0_db / 10.0))


def sample_noise_sigma(eq_n0_db: float, a_q: float, config: ModemConfig) -> float:
    """Per-sample noise RMS at the waveform rate for a symbol-level target.

    The DFT at the receiver concentrates each carrier's energy into one bin,
    so time-domain noise must be scaled by sqrt(dft_len / n_carriers) for the
    demodulated symbols to see exactly awgn_sigma() of noise.
    """
    return awgn_sigma(eq_n0_db, a_q) * math.sqrt(config.dft_len / config.n_carriers)


def gaussian_doppler_taps(bandwidth_hz: float, rate_hz: float) -> np.ndarray:
    """Unit-energy Gaussian FIR whose two-sided -3 dB power bandwidth is
    bandwidth_hz at sampling rate rate_hz."""
    if bandwidth_hz <= 0 or rate_hz <= 0:
        raise ValueError("bandwidth and rate must be positive")
    sigma_t = math.sqrt(math.log(2.0)) / (math.pi * bandwidth_hz)   # seconds
    sigma_n = sigma_t * rate_hz
    half = max(1, int(math.ceil(4.0 * sigma_n)))
    k = np.arange(-half, half + 1)
    taps = np.exp(-(k ** 2) / (2.0 * sigma_n ** 2))
    return taps / np.sqrt(np.sum(taps ** 2))


class DopplerProcess:
    """Band-limited complex Gaussian generator at a fixed sampling rate.

    White complex Gaussian noise through the Gaussian FIR above; filter
    memory is prefilled so the output is stationary from the first sample.
    Long-run RMS equals `rms`.
    """

    def __init__(self, bandwidth_hz: float, rate_hz: float, rms: float = 1.0, rng=None):
        self.bandwidth_hz = bandwidth_hz
        self.rate_hz = rate_hz
        self.rms = rms
        self._taps = gaussian_doppler_taps(bandwidth_hz, rate_hz)
        self._rng = rng if rng is not None else np.random.default_rng()
        self._mem = self._white(len(self._taps) - 1)

    def _white(self, n):
        w = self._rng.standard_normal((n, 2))
        return (w[:, 0] + 1j * w[:, 1]) / math.sqrt(2.0)

    def sample(self, count: int) -> np.ndarray:
        """Next `count` samples of the process."""
        if count < 1:
            return np.empty(0, dtype=np.complex128)
        full = np.concatenate([self._mem, self._white(count)])
        self._mem = full[-(len(self._taps) - 1):]
        return self.rms * np.convolve(full, self._taps, mode="valid")

    def step(self) -> complex:
        return complex(self.sample(1)[0])


def doppler_step(process: DopplerProcess) -> complex:
    return process.step()


def watterson_freq(g1_sample, g2_sample, carrier_freqs, delay_s: float) -> np.ndarray:
    """Per-carrier magnitude fading for frozen path gains.

    h_c = |G1 + exp(-2j pi f_c d) G2| with f_c in Hz and d in seconds.
    """
    freqs = np.asarray(carrier_freqs, dtype=np.float64)
    return np.abs(g1_sample + np.exp(-2j * np.pi * freqs * delay_s) * g2_sample)


@dataclass
class ChannelPaths:
    """Waveform-rate path gains actually applied to a processed chunk."""

    g1: np.ndarray
    g2: np.ndarray
    delay_samples: int


class WattersonChannel:
    """Streaming channel: two-path fading, frequency offset, gain, AWGN.

    A single seed determines the whole realization bit-exactly; chunked and
    one-shot processing of the same samples produce identical output. The
    Doppler processes run at `config.symbol_rate` and are linearly
    interpolated up to the waveform rate. The path delay is quantized to
    whole samples.

    With `eq_n0_db` set, noise is calibrated so demodulated symbols of
    magnitude `a_q` see that symbol-level SNR; if `a_q` is omitted it is
    measured as the RMS of the first processed chunk.
    """

    def __init__(
        self,
        config: ModemConfig,
        *,
        fading: bool = True,
        delay_s: float = 0.002,
        doppler_bandwidth_hz: float = 1.0,
        frozen_paths=None,
        eq_n0_db: float | None = None,
        a_q: float | None = None,
        freq_offset_hz: float = 0.0,
        gain: float = 1.0,
        seed: int = 0,
    ):
        if not config.validated:
            raise ConfigError("channel requires a validated config")
        self.config = config
        self.fading = fading
        self.delay_samples = int(round(delay_s * config.sample_rate))
        if self.delay_samples < 0:
            raise ConfigError("delay must be non-negative")
        self.delay_s = self.delay_samples / config.sample_rate
        self.eq_n0_db = eq_n0_db
        self.a_q = a_q
        self.freq_offset_hz = freq_offset_hz
        self.gain = gain
        self.seed = seed
        self.frozen_paths = frozen_paths

        ss = np.random.SeedSequence(seed)
        kids = ss.spawn(3)
        self._noise_rng = np.random.default_rng(kids[2])
        if fading and frozen_paths is None:
            self.g1 = DopplerProcess(doppler_bandwidth_hz, config.symbol_rate,
                                     PATH_RMS, np.random.default_rng(kids[0]))
            self.g2 = DopplerProcess(doppler_bandwidth_hz, config.symbol_rate,
                                     PATH_RMS, np.random.default_rng(kids[1]))
        else:
            self.g1 = self.g2 = None

        self._n = 0                       # absolute sample index
        self._delay_mem = np.zeros(self.delay_samples, dtype=np.complex128)
        self._grid_step = config.dft_len  # samples between Doppler updates
        self._grid1 = np.empty(0, dtype=np.complex128)
        self._grid2 = np.empty(0, dtype=np.complex128)

    def _noise_sigma_samples(self, x):
        if self.eq_n0_db is None:
            return 0.0
        a_q = self.a_q
        if a_q is None:
            a_q = float(np.sqrt(np.mean(np.abs(x) ** 2)))
            self.a_q = a_q
        return sample_noise_sigma(self.eq_n0_db, a_q, self.config)

    def _ensure_grid(self, k_max):
        need = k_max + 1 - len(self._grid1)
        if need > 0:
            self._grid1 = np.concatenate([self._grid1, self.g1.sample(need)])
            self._grid2 = np.concatenate([self._grid2, self.g2.sample(need)])

    def _paths_for(self, n0, count):
        """Path gains for absolute samples n0 .. n0+count-1."""
        if not self.fading:
            ones = np.ones(count, dtype=np.complex128)
            return ones, np.zeros(count, dtype=np.complex128)
        if self.frozen_paths is not None:
            c1, c2 = self.frozen_paths
            return (np.full(count, c1, dtype=np.complex128),
                    np.full(count, c2, dtype=np.complex128))
        idx = n0 + np.arange(count)
        k = idx // self._grid_step
        frac = (idx - k * self._grid_step) / self._grid_step
        self._ensure_grid(int(k[-1]) + 1)
        g1 = (1.0 - frac) * self._grid1[k] + frac * self._grid1[k + 1]
        g2 = (1.0 - frac) * self._grid2[k] + frac * self._grid2[k + 1]
        return g1, g2

    def process(self, x, return_paths: bool = False):
        """Run a chunk of waveform through the channel."""
        x = np.asarray(x, dtype=np.complex128)
        count = x.size
        sigma = self._noise_sigma_samples(x)

        g1, g2 = self._paths_for(self._n, count)
        delayed = np.concatenate([self._delay_mem, x])
        if self.delay_samples:
            self._delay_mem = delayed[-self.delay_samples:].copy()
            delayed = delayed[:count]
        y = x * g1 + delayed * g2

        if self.freq_offset_hz:
            idx = self._n + np.arange(count)
            y = y * np.exp(2j * np.pi * self.freq_offset_hz * idx / self.config.sample_rate)
        if self.gain != 1.0:
            y = y * self.gain
        if sigma > 0.0:
            w = self._noise_rng.standard_normal((count, 2))
            y = y + (sigma / math.sqrt(2.0)) * (w[:, 0] + 1j * w[:, 1])

        self._n += count
        if return_paths:
            return y, ChannelPaths(g1=g1, g2=g2, delay_samples=self.delay_samples)
        return y


CHANNEL_KINDS = ("awgn", "mpp")


def make_channel(kind: str, config: ModemConfig, **kwargs) -> WattersonChannel:
    """Named presets: 'awgn' is fading-free; 'mpp' is the poor multipath
    profile with 2 ms path delay and 1 Hz Doppler spread."""
    if kind == "awgn":
        return WattersonChannel(config, fading=False, **kwargs)
    if kind == "mpp":
        kwargs.setdefault("delay_s", 0.002)
        kwargs.setdefault("doppler_bandwidth_hz", 1.0)
        return WattersonChannel(config, fading=True, **kwargs)
    raise ConfigError(f"unknown channel kind {kind!r}")
