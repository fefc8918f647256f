"""Carriers, path loss and per-RB achievable rates."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InvalidParameterError, NoCoverageError

SPEED_OF_LIGHT = 3e8  # m/s


@dataclass(frozen=True)
class Carrier:
    """One component carrier.

    Parameters
    ----------
    id : int
    freq : float
        Centre frequency in Hz.
    total_power : float
        Carrier transmit power in W, split equally over its RBs.
    n_rbs : int
        Number of resource blocks.
    rb_bandwidth : float
        Bandwidth of one RB in Hz.
    snr_gap : float
        Multiplier applied to the SNR inside the rate formula.
    """

    id: int
    freq: float
    total_power: float
    n_rbs: int
    rb_bandwidth: float = 180e3
    snr_gap: float = 1.0

    def __post_init__(self):
        if isinstance(self.n_rbs, bool) or int(self.n_rbs) != self.n_rbs or self.n_rbs < 1:
            raise InvalidParameterError(f"carrier {self.id}: n_rbs must be an integer >= 1, got {self.n_rbs!r}")
        for name in ("freq", "total_power", "rb_bandwidth", "snr_gap"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise InvalidParameterError(f"carrier {self.id}: {name} must be > 0, got {v!r}")


class GainMode(enum.Enum):
    EQUAL = "equal"
    PATHLOSS = "pathloss"


@dataclass(frozen=True)
class ChannelModel:
    """Log-distance path loss anchored at free-space loss at ``ref_distance``.

    ``gain_mode`` decides what enters the SNR: ``EQUAL`` uses ``equal_gain``
    for every user/RB pair; ``PATHLOSS`` uses ``10**(-PL/10)``. The path loss
    is used for grouping in both modes.
    """

    ref_distance: float = 1.0
    pathloss_exponent: float = 3.76
    noise_power_per_rb: float = 1e-13
    gain_mode: GainMode = GainMode.EQUAL
    equal_gain: float = 1.0
    log_base: float = 2.0

    def __post_init__(self):
        if not self.ref_distance > 0:
            raise InvalidParameterError(f"ref_distance must be > 0, got {self.ref_distance!r}")
        if not self.pathloss_exponent >= 2:
            raise InvalidParameterError(f"pathloss_exponent must be >= 2, got {self.pathloss_exponent!r}")
        if not self.noise_power_per_rb > 0:
            raise InvalidParameterError(f"noise_power_per_rb must be > 0, got {self.noise_power_per_rb!r}")
        if not self.equal_gain >= 0:
            raise InvalidParameterError(f"equal_gain must be >= 0, got {self.equal_gain!r}")
        if not (self.log_base == 2.0 or self.log_base == math.e):
            raise InvalidParameterError(f"log_base must be 2 or e, got {self.log_base!r}")


def rb_power(carrier: Carrier) -> float:
    return carrier.total_power / carrier.n_rbs


def reference_loss_db(freq: float, model: ChannelModel) -> float:
    """Free-space loss at the reference distance."""
    return 20.0 * math.log10(4.0 * math.pi * model.ref_distance * freq / SPEED_OF_LIGHT)


def pathloss_db(freq: float, distance, model: ChannelModel):
    d = np.asarray(distance, dtype=float)
    if np.any(~(d > 0)):
        raise DomainError(f"distance must be > 0, got {distance!r}")
    out = reference_loss_db(freq, model) + 10.0 * model.pathloss_exponent * np.log10(d / model.ref_distance)
    return float(out) if out.ndim == 0 else out


def coverage_radius(freq: float, loss_threshold: float, model: ChannelModel) -> float:
    """Distance at which the path loss reaches ``loss_threshold``."""
    pl0 = reference_loss_db(freq, model)
    if loss_threshold < pl0:
        raise NoCoverageError(
            f"threshold {loss_threshold} dB is below the reference loss {pl0:.3f} dB at {freq:g} Hz"
        )
    return model.ref_distance * 10.0 ** ((loss_threshold - pl0) / (10.0 * model.pathloss_exponent))


def rb_snr(rb_power: float, gain, noise: float):
    if noise <= 0:
        raise DomainError(f"noise power must be > 0, got {noise!r}")
    out = rb_power * np.asarray(gain, dtype=float) / noise
    return float(out) if out.ndim == 0 else out


def rb_rate(carrier: Carrier, snr, log_base: float = 2.0):
    """Achievable rate ``W log(1 + beta * snr)`` in bit/s (log base 2 by default)."""
    s = np.asarray(snr, dtype=float)
    if np.any(~(s >= 0)):
        raise DomainError(f"snr must be >= 0, got {snr!r}")
    out = carrier.rb_bandwidth * np.log1p(carrier.snr_gap * s) / math.log(log_base)
    return float(out) if out.ndim == 0 else out


def channel_gain(carrier: Carrier, distance: float, model: ChannelModel) -> float:
    if model.gain_mode is GainMode.EQUAL:
        return model.equal_gain
    return 10.0 ** (-pathloss_db(carrier.freq, distance, model) / 10.0)


def rate_table(carrier: Carrier, distances, model: ChannelModel, rate_unit: float = 1.0) -> np.ndarray:
    """Per-RB rate matrix ``[n_users, n_rbs]`` expressed in ``rate_unit`` bit/s.

    The channel is flat across RBs, so every row is constant.
    """
    p = rb_power(carrier)
    rows = []
    for d in distances:
        snr = rb_snr(p, channel_gain(carrier, d, model), model.noise_power_per_rb)
        rows.append(rb_rate(carrier, snr, model.log_base) / rate_unit)
    return np.repeat(np.array(rows, dtype=float)[:, None], carrier.n_rbs, axis=1)
