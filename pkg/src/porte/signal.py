"""Waveform container, WAV I/O, resampling, trimming and RMS framing."""

import math
import struct
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy import signal as sps
from scipy.io import wavfile

from ._validation import check_finite_array, check_positive_int
from .exceptions import AudioFormatError, EmptySignalError, UnsupportedFormatError

CANONICAL_RATE = 16000
PCM16_SCALE = 32768.0

# resampler design: passband to 0.9 x target Nyquist, >= 80 dB stopband at Nyquist
_RESAMPLE_ATTEN_DB = 80.0
_RESAMPLE_PASS_FRAC = 0.9


@dataclass(frozen=True)
class AudioSignal:
    """Mono sample buffer plus its sample rate.

    ``samples`` keeps a floating dtype (float32 buffers stay float32 so that
    stems written to disk sum to the mixture exactly); the array is marked
    read-only.
    """

    samples: np.ndarray
    sample_rate: int = CANONICAL_RATE

    def __post_init__(self):
        samples = check_finite_array(self.samples, "samples", ndim=1)
        samples = np.array(samples, copy=True)
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", check_positive_int(self.sample_rate, "sample_rate"))

    def __len__(self):
        return len(self.samples)

    @property
    def duration(self):
        return len(self.samples) / self.sample_rate

    def with_samples(self, samples):
        return AudioSignal(samples, self.sample_rate)


@dataclass(frozen=True)
class FrameEnergies:
    values: np.ndarray
    win_ms: float
    hop_ms: float
    origin_sample: int = 0
    sample_rate: int = CANONICAL_RATE
    win: int = field(default=0, repr=False)
    hop: int = field(default=0, repr=False)

    def __len__(self):
        return len(self.values)

    def frame_start(self, i):
        """Sample index (in the original signal) where frame ``i`` starts."""
        return self.origin_sample + i * self.hop


def ms_to_samples(ms, sample_rate):
    n = int(round(ms * sample_rate / 1000.0))
    if n < 1:
        raise ValueError(f"{ms} ms is shorter than one sample at {sample_rate} Hz")
    return n


def read_wav(path):
    """Read a PCM16 or float32 RIFF/WAVE file as a mono :class:`AudioSignal`.

    Multichannel audio is averaged to mono. PCM16 is scaled by 1/32768.
    """
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", wavfile.WavFileWarning)
            rate, data = wavfile.read(path)
    except FileNotFoundError:
        raise
    except ValueError as exc:
        msg = str(exc)
        if "Unknown wave file format" in msg or "Unsupported bit depth" in msg:
            raise UnsupportedFormatError(f"{path}: {msg}") from exc
        raise AudioFormatError(f"{path}: {msg}") from exc
    except (EOFError, OSError, struct.error) as exc:
        raise AudioFormatError(f"{path}: {exc}") from exc

    if data.dtype == np.int16:
        samples = data.astype(np.float64) / PCM16_SCALE
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise UnsupportedFormatError(f"{path}: sample format {data.dtype} is not PCM16/float32")
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    if not np.all(np.isfinite(samples)):
        raise AudioFormatError(f"{path}: non-finite samples")
    return AudioSignal(samples, int(rate))


def write_wav(path, signal, encoding="float32"):
    """Write ``signal`` as ``pcm16`` or ``float32`` WAV.

    PCM16 maps x -> round(32768 x) clipped to the int16 range, so 1.0 is
    stored as 32767 and the error per sample never exceeds 1/32768.
    """
    x = np.asarray(signal.samples, dtype=np.float64)
    if encoding == "pcm16":
        data = np.clip(np.round(x * PCM16_SCALE), -32768, 32767).astype("<i2")
    elif encoding == "float32":
        data = x.astype("<f4")
    else:
        raise ValueError(f"unknown encoding {encoding!r}; expected 'pcm16' or 'float32'")
    wavfile.write(path, signal.sample_rate, data)


@lru_cache(maxsize=32)
def _resample_filter(up, down):
    max_rate = max(up, down)
    f_pass = _RESAMPLE_PASS_FRAC / max_rate
    f_stop = 1.0 / max_rate
    numtaps, beta = sps.kaiserord(_RESAMPLE_ATTEN_DB, f_stop - f_pass)
    numtaps |= 1  # odd length keeps the filter delay an integer number of samples
    taps = sps.firwin(numtaps, (f_pass + f_stop) / 2, window=("kaiser", beta))
    return taps  # resample_poly applies the gain of `up` itself


def resample(signal, target_hz):
    """Polyphase windowed-sinc (Kaiser) resampling to ``target_hz``."""
    if isinstance(target_hz, bool) or not isinstance(target_hz, (int, np.integer)) or target_hz <= 0:
        raise ValueError(f"target_hz must be a positive integer, got {target_hz!r}")
    if target_hz == signal.sample_rate:
        return signal
    ratio = Fraction(int(target_hz), signal.sample_rate)
    up, down = ratio.numerator, ratio.denominator
    x = np.asarray(signal.samples, dtype=np.float64)
    y = sps.resample_poly(x, up, down, window=_resample_filter(up, down))
    return AudioSignal(y, int(target_hz))


def frame_rms(signal, win_ms=25.0, hop_ms=10.0):
    """Per-frame RMS amplitude; frames shorter than a full window are dropped."""
    if not (win_ms >= hop_ms > 0):
        raise ValueError("need win_ms >= hop_ms > 0")
    sr = signal.sample_rate
    win = ms_to_samples(win_ms, sr)
    hop = ms_to_samples(hop_ms, sr)
    x = np.asarray(signal.samples, dtype=np.float64)
    if len(x) < win:
        values = np.zeros(0)
    else:
        frames = np.lib.stride_tricks.sliding_window_view(x, win)[::hop]
        values = np.sqrt(np.mean(frames * frames, axis=1))
    values.setflags(write=False)
    return FrameEnergies(values, win_ms, hop_ms, 0, sr, win, hop)


def trim_leading_silence(signal, threshold_db_below_peak=-40.0, win_ms=25.0, hop_ms=10.0):
    """Drop everything before the first frame louder than the peak-relative threshold.

    Returns ``(trimmed_signal, trimmed_seconds)``. The cut lands on a frame
    boundary, so trimming an already-trimmed signal is a no-op.
    """
    if len(signal) == 0:
        raise EmptySignalError("cannot trim an empty signal")
    energies = frame_rms(signal, win_ms, hop_ms)
    values = energies.values
    if len(values) == 0:
        # shorter than one frame: judge the whole buffer as a single frame
        values = np.array([np.sqrt(np.mean(np.square(signal.samples, dtype=np.float64)))])
    peak = values.max()
    threshold = peak * 10.0 ** (threshold_db_below_peak / 20.0)
    active = np.flatnonzero(values > threshold)
    if peak == 0.0 or len(active) == 0:
        raise EmptySignalError("signal is silent at the requested threshold")
    start = int(active[0]) * energies.hop if len(energies.values) else 0
    if start == 0:
        return signal, 0.0
    return signal.with_samples(signal.samples[start:]), start / signal.sample_rate


def truncate(signal, max_seconds):
    """Cut ``signal`` to at most ``max_seconds`` (inclusive boundary)."""
    if max_seconds <= 0:
        raise ValueError("max_seconds must be positive")
    max_len = int(math.floor(max_seconds * signal.sample_rate + 1e-9))
    if len(signal) <= max_len:
        return signal
    return signal.with_samples(signal.samples[:max_len])
