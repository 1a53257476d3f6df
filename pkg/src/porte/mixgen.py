"""Overlap-controlled two-speaker mixture planning and rendering."""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ._validation import check_random_state
from .exceptions import CorpusError, RejectedSourceError
from .loudness import normalize_loudness, sample_target_lufs
from .signal import CANONICAL_RATE, AudioSignal, read_wav, resample, trim_leading_silence, truncate

OVERLAP_BINS = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)
MIN_SOURCE_S = 5.0
MAX_SOURCE_S = 10.0
SNR_STD_DB = 4.0
SNR_CLAMP_DB = 12.0
PAUSE_RANGE_S = (0.5, 1.2)
LUFS_RANGE = (-33.0, -25.0)
CLIP_PEAK = 0.999
ROLES = ("first", "later")


@dataclass(frozen=True)
class UtteranceRecord:
    path: str
    speaker_id: str
    gender: str
    duration_s: float


@dataclass(frozen=True)
class MixturePlan:
    first_utt: UtteranceRecord
    second_utt: UtteranceRecord
    target_role: str
    overlap_ratio: float
    snr_db: float
    lufs_first: float
    lufs_second: float
    pause_s: float
    seed: int
    snr_clamped: bool = False

    def __post_init__(self):
        if self.first_utt.speaker_id == self.second_utt.speaker_id:
            raise ValueError("plan sources must come from distinct speakers")
        if self.overlap_ratio not in OVERLAP_BINS:
            raise ValueError(f"overlap_ratio {self.overlap_ratio} is not one of {OVERLAP_BINS}")
        if self.target_role not in ROLES:
            raise ValueError(f"target_role must be one of {ROLES}")

    @property
    def target_utt(self):
        return self.first_utt if self.target_role == "first" else self.second_utt

    @property
    def interferer_utt(self):
        return self.second_utt if self.target_role == "first" else self.first_utt


@dataclass(frozen=True)
class RenderedMixture:
    mixture: AudioSignal
    target_aligned: AudioSignal
    interferer_aligned: AudioSignal
    delay_s: float
    overlap_s: float
    measured_overlap_ratio: float
    clip_gain_db: float
    interferer_gain_db: float
    first_span: tuple
    second_span: tuple
    target_role: str

    @property
    def target_span(self):
        return self.first_span if self.target_role == "first" else self.second_span

    @property
    def interferer_span(self):
        return self.second_span if self.target_role == "first" else self.first_span

    @property
    def duration_s(self):
        return self.mixture.duration


def derive_seed(master_seed, index, attempt=0):
    """64-bit per-item seed; identical for serial and parallel runs."""
    ss = np.random.SeedSequence([int(master_seed) & 0xFFFFFFFFFFFFFFFF, int(index), int(attempt)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def sample_plan(corpus, rng, overlap_ratio=None, seed=None):
    """Draw a random :class:`MixturePlan` from ``corpus``.

    If ``overlap_ratio`` is given it overrides the uniform bin draw (used by
    the generation driver to stratify bins). ``seed`` is stored on the plan
    for provenance; when omitted a seed is drawn from ``rng``.
    """
    rng = check_random_state(rng)
    speakers = {u.speaker_id for u in corpus}
    if len(speakers) < 2:
        raise CorpusError("corpus needs at least two distinct speakers")
    if seed is None:
        seed = int(rng.integers(0, 2**63))
    first = corpus[int(rng.integers(len(corpus)))]
    others = [u for u in corpus if u.speaker_id != first.speaker_id]
    second = others[int(rng.integers(len(others)))]
    raw_snr = float(rng.normal(0.0, SNR_STD_DB))
    snr = float(np.clip(raw_snr, -SNR_CLAMP_DB, SNR_CLAMP_DB))
    lufs_first = sample_target_lufs(rng, *LUFS_RANGE)
    lufs_second = sample_target_lufs(rng, *LUFS_RANGE)
    target_role = ROLES[int(rng.integers(2))]
    drawn_ratio = OVERLAP_BINS[int(rng.integers(len(OVERLAP_BINS)))]
    pause = float(rng.uniform(*PAUSE_RANGE_S))
    return MixturePlan(
        first_utt=first,
        second_utt=second,
        target_role=target_role,
        overlap_ratio=drawn_ratio if overlap_ratio is None else float(overlap_ratio),
        snr_db=snr,
        lufs_first=lufs_first,
        lufs_second=lufs_second,
        pause_s=pause,
        seed=int(seed),
        snr_clamped=snr != raw_snr,
    )


def placement_samples(n_first, n_second, overlap_ratio, pause_samples):
    """Integer placement: returns ``(delay, overlap, total)`` in samples."""
    if overlap_ratio > 0:
        overlap = int(round(overlap_ratio * min(n_first, n_second)))
        delay = n_first - overlap
    else:
        overlap = 0
        delay = n_first + int(pause_samples)
    return delay, overlap, max(n_first, delay + n_second)


def compute_placement(len_first_s, len_second_s, overlap_ratio, pause_s, sample_rate=CANONICAL_RATE):
    """Delay of the second source that realises ``overlap_ratio``.

    The ratio is taken relative to the shorter source. Returns
    ``(delay_s, overlap_s, mixture_len_s)`` after quantising to whole samples.
    """
    tol = 1.0 / sample_rate
    for name, length in (("len_first_s", len_first_s), ("len_second_s", len_second_s)):
        if not (MIN_SOURCE_S - tol <= length <= MAX_SOURCE_S + tol):
            raise ValueError(f"{name}={length} outside [{MIN_SOURCE_S}, {MAX_SOURCE_S}] s")
    if not 0.0 <= overlap_ratio <= 1.0:
        raise ValueError(f"overlap_ratio={overlap_ratio} outside [0, 1]")
    if overlap_ratio == 0 and not (PAUSE_RANGE_S[0] - tol <= pause_s <= PAUSE_RANGE_S[1] + tol):
        raise ValueError(f"pause_s={pause_s} outside {PAUSE_RANGE_S}")
    n1 = int(round(len_first_s * sample_rate))
    n2 = int(round(len_second_s * sample_rate))
    delay, overlap, total = placement_samples(n1, n2, overlap_ratio, round(pause_s * sample_rate))
    return delay / sample_rate, overlap / sample_rate, total / sample_rate


@lru_cache(maxsize=256)
def prepare_source(path, sample_rate=CANONICAL_RATE):
    """read -> trim leading silence -> duration filter -> truncate -> resample."""
    sig = read_wav(path)
    sig, _ = trim_leading_silence(sig)
    if sig.duration < MIN_SOURCE_S:
        raise RejectedSourceError(f"{path}: {sig.duration:.2f} s after trimming (< {MIN_SOURCE_S} s)")
    sig = truncate(sig, MAX_SOURCE_S)
    return resample(sig, sample_rate)


def render_mixture(plan, sample_rate=CANONICAL_RATE):
    """Render ``plan`` into a mixture plus time-aligned, zero-padded stems.

    Stems are quantised to float32 and the mixture is their float32 sum, so
    ``mixture == target + interferer`` holds exactly on disk.
    """
    first = prepare_source(plan.first_utt.path, sample_rate)
    second = prepare_source(plan.second_utt.path, sample_rate)
    first, _ = normalize_loudness(first, plan.lufs_first)
    second, _ = normalize_loudness(second, plan.lufs_second)
    x1 = np.asarray(first.samples, dtype=np.float64)
    x2 = np.asarray(second.samples, dtype=np.float64)

    # one-sided SNR: only the interferer is rescaled
    tgt, itf = (x1, x2) if plan.target_role == "first" else (x2, x1)
    e_t, e_i = float(np.dot(tgt, tgt)), float(np.dot(itf, itf))
    gain = math.sqrt(e_t / (e_i * 10.0 ** (plan.snr_db / 10.0)))
    itf = itf * gain
    if plan.target_role == "first":
        x1, x2 = tgt, itf
    else:
        x1, x2 = itf, tgt

    n1, n2 = len(x1), len(x2)
    delay, overlap, total = placement_samples(n1, n2, plan.overlap_ratio, round(plan.pause_s * sample_rate))
    s1 = np.zeros(total)
    s2 = np.zeros(total)
    s1[:n1] = x1
    s2[delay:delay + n2] = x2

    peak = float(np.max(np.abs(s1 + s2)))
    clip_gain = 1.0
    if peak > CLIP_PEAK:
        clip_gain = CLIP_PEAK / peak
        s1 *= clip_gain
        s2 *= clip_gain
    s1 = s1.astype(np.float32)
    s2 = s2.astype(np.float32)
    mix = s1 + s2
    tgt_stem, itf_stem = (s1, s2) if plan.target_role == "first" else (s2, s1)

    return RenderedMixture(
        mixture=AudioSignal(mix, sample_rate),
        target_aligned=AudioSignal(tgt_stem, sample_rate),
        interferer_aligned=AudioSignal(itf_stem, sample_rate),
        delay_s=delay / sample_rate,
        overlap_s=overlap / sample_rate,
        measured_overlap_ratio=overlap / min(n1, n2),
        clip_gain_db=20.0 * math.log10(clip_gain),
        interferer_gain_db=20.0 * math.log10(gain),
        first_span=(0.0, n1 / sample_rate),
        second_span=(delay / sample_rate, (delay + n2) / sample_rate),
        target_role=plan.target_role,
    )
