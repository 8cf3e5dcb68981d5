"""Exception types shared across the toolkit."""


class ModemError(Exception):
    """Base class for every error this package raises on purpose."""


class ConfigError(ModemError):
    """Invalid modem configuration."""


class NonIntegerTiming(ConfigError):
    """A sample count derived from the rate settings is not an integer."""


class CapacityMismatch(ConfigError):
    """Latent payload does not exactly fill the frame payload region."""


class CarrierOutOfBand(ConfigError):
    """A carrier is off the DFT bin grid or outside (0, Fs/2)."""


class OddDimension(ModemError):
    """Quadrature mapping needs an even number of real values."""


class WrongLatentCount(ModemError):
    """A frame must be assembled from exactly latents_per_frame vectors."""


class TruncatedFile(ModemError):
    """File length is not a whole number of records."""


class NonFiniteValue(ModemError):
    """NaN or infinity where finite samples are required."""


class ZeroSignal(ModemError):
    """Metric undefined on an empty or all-zero signal."""


class LengthMismatch(ModemError):
    """Paired sequences must have equal length."""


class NoLock(ModemError):
    """Acquisition found no credible pilot correlation peak."""


class StreamUnderrun(ModemError):
    """Not enough samples to demodulate a full frame."""


class EqDiverged(ModemError):
    """Pilot power collapsed on every carrier; equalizer has no reference."""


class InsufficientPilots(ModemError):
    """Too few pilot observations for a stable estimate."""
