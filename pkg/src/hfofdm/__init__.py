"""Pilot-aided OFDM modem for continuously valued QAM symbols, with a
two-path HF fading channel simulator and a closed-loop metrics harness."""

from .config import ModemConfig, default_config, dump_config, pilot_sequence, validate
from .channel import (
    DopplerProcess,
    WattersonChannel,
    awgn_sigma,
    doppler_step,
    gaussian_doppler_taps,
    make_channel,
    sample_noise_sigma,
    watterson_freq,
)
from .latents import gaussian_source, read_latents, write_latents
from .metrics import (
    SweepPoint,
    SweepRequest,
    evm,
    parse_grid,
    run_point,
    run_sweep,
    snr_estimate,
    sweep_csv,
)
from .modem import (
    QamGrid,
    build_frames,
    ctanh,
    frame_assemble,
    frame_disassemble,
    multicarrier_block,
    ofdm_modulate,
    papr,
    quad_demap,
    quad_map,
    transmit,
)
from .receiver import (
    EqualizerState,
    RxResult,
    SyncEstimate,
    acquire,
    demap,
    equalize,
    ofdm_demodulate,
    receive,
)

__version__ = "0.1.0"
