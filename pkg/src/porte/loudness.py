"""Integrated loudness (BS.1770-4, mono) and gain normalisation to a LUFS target."""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.signal import lfilter

from .exceptions import TooShortError, UnmeasurableLoudnessError

BLOCK_SECONDS = 0.4
BLOCK_OVERLAP = 0.75
ABSOLUTE_GATE_LUFS = -70.0
RELATIVE_GATE_LU = -10.0
_OFFSET = -0.691


@dataclass(frozen=True)
class LoudnessResult:
    lufs: float
    gated_block_count: int


@lru_cache(maxsize=16)
def k_weighting_coefficients(sample_rate):
    """Biquad pair (shelf, high-pass) of the K-weighting curve at ``sample_rate``.

    Derived from the analog prototype via the bilinear transform (the same
    parametrisation libebur128 uses); at 48 kHz it reproduces the tabulated
    BS.1770 coefficients.
    """
    fs = float(sample_rate)

    f0 = 1681.974450955533
    gain_db = 3.999843853973347
    q = 0.7071752369554196
    k = math.tan(math.pi * f0 / fs)
    vh = 10.0 ** (gain_db / 20.0)
    vb = vh ** 0.4996667741545416
    a0 = 1.0 + k / q + k * k
    shelf_b = np.array([(vh + vb * k / q + k * k) / a0, 2.0 * (k * k - vh) / a0, (vh - vb * k / q + k * k) / a0])
    shelf_a = np.array([1.0, 2.0 * (k * k - 1.0) / a0, (1.0 - k / q + k * k) / a0])

    f0 = 38.13547087602444
    q = 0.5003270373238773
    k = math.tan(math.pi * f0 / fs)
    a0 = 1.0 + k / q + k * k
    hp_b = np.array([1.0, -2.0, 1.0])
    hp_a = np.array([1.0, 2.0 * (k * k - 1.0) / a0, (1.0 - k / q + k * k) / a0])
    return (shelf_b, shelf_a), (hp_b, hp_a)


def block_powers(signal):
    """Mean-square of the K-weighted signal over 400 ms blocks with 75 % overlap."""
    sr = signal.sample_rate
    block = int(round(BLOCK_SECONDS * sr))
    step = int(round(BLOCK_SECONDS * (1.0 - BLOCK_OVERLAP) * sr))
    x = np.asarray(signal.samples, dtype=np.float64)
    if len(x) < block:
        raise TooShortError(f"loudness needs at least {BLOCK_SECONDS * 1000:.0f} ms of audio")
    (b1, a1), (b2, a2) = k_weighting_coefficients(sr)
    y = lfilter(b2, a2, lfilter(b1, a1, x))
    csum = np.concatenate(([0.0], np.cumsum(y * y)))
    starts = np.arange(0, len(y) - block + 1, step)
    return (csum[starts + block] - csum[starts]) / block


def integrated_loudness(signal):
    """Gated integrated loudness in LUFS."""
    z = block_powers(signal)
    with np.errstate(divide="ignore"):
        levels = _OFFSET + 10.0 * np.log10(z)
    above_abs = z[levels > ABSOLUTE_GATE_LUFS]
    if len(above_abs) == 0:
        raise UnmeasurableLoudnessError("all blocks fall below the absolute gate")
    relative_gate = _OFFSET + 10.0 * np.log10(above_abs.mean()) + RELATIVE_GATE_LU
    with np.errstate(divide="ignore"):
        gated = above_abs[_OFFSET + 10.0 * np.log10(above_abs) > relative_gate]
    return LoudnessResult(float(_OFFSET + 10.0 * np.log10(gated.mean())), int(len(gated)))


def normalize_loudness(signal, target_lufs):
    """Scale ``signal`` by one linear gain so it measures ``target_lufs``.

    Returns ``(normalised_signal, applied_gain_db)``. No limiting is applied.
    """
    measured = integrated_loudness(signal).lufs
    gain_db = float(target_lufs) - measured
    gain = 10.0 ** (gain_db / 20.0)
    return signal.with_samples(np.asarray(signal.samples, dtype=np.float64) * gain), gain_db


def sample_target_lufs(rng, low=-33.0, high=-25.0):
    return float(rng.uniform(low, high))
