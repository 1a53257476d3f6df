"""Extraction metrics: SI-SDR, SI-SDR improvement, SuRE and WER, plus per-bin reports."""

import csv
import io
import json
import math
import re
import string
from dataclasses import dataclass, field

import numpy as np

from .exceptions import UndefinedMetricError
from .signal import AudioSignal, frame_rms

DEFAULT_CLAMP_DB = 60.0
METRICS = ("sisdr", "sisdri", "sure", "wer")
REPORT_BINS = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)
REPORT_COLUMNS = ("metric", "model", "avg", "r0", "r20", "r40", "r60", "r80", "r100")


@dataclass(frozen=True)
class SuREConfig:
    tau_rel: float = 0.01
    beta: float = 0.1
    win_ms: float = 25.0
    hop_ms: float = 10.0

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise ValueError("beta must lie in (0, 1)")
        if not 0.0 < self.tau_rel < 1.0:
            raise ValueError("tau_rel must lie in (0, 1)")
        if not self.win_ms >= self.hop_ms > 0:
            raise ValueError("need win_ms >= hop_ms > 0")


def _as_array(x):
    if isinstance(x, AudioSignal):
        return np.asarray(x.samples, dtype=np.float64)
    return np.asarray(x, dtype=np.float64)


def sisdr(est, ref, zero_mean=True, clamp_db=DEFAULT_CLAMP_DB):
    """Scale-invariant SDR in dB, clamped to ``[-clamp_db, clamp_db]``.

    With ``zero_mean=False`` this is the textbook projection formula with no
    mean removal.
    """
    est, ref = _as_array(est), _as_array(ref)
    if est.shape != ref.shape or est.ndim != 1:
        raise ValueError(f"est and ref must be equal-length 1-D signals, got {est.shape} and {ref.shape}")
    if len(ref) < 1:
        raise ValueError("signals must be non-empty")
    if zero_mean:
        est = est - est.mean()
        ref = ref - ref.mean()
    ref_energy = np.dot(ref, ref)
    if ref_energy == 0.0:
        raise ValueError("reference is all zeros")
    target = (np.dot(est, ref) / ref_energy) * ref
    noise = target - est
    num, den = np.dot(target, target), np.dot(noise, noise)
    if num == 0.0:
        # zero or orthogonal estimate (checked first: a silent estimate also has zero error)
        return float(-clamp_db)
    if den == 0.0:
        return float(clamp_db)
    return float(np.clip(10.0 * math.log10(num / den), -clamp_db, clamp_db))


def sisdr_improvement(est, mixture, ref, zero_mean=True, clamp_db=DEFAULT_CLAMP_DB):
    est, mixture, ref = _as_array(est), _as_array(mixture), _as_array(ref)
    if not est.shape == mixture.shape == ref.shape:
        raise ValueError("est, mixture and ref must have equal lengths")
    return sisdr(est, ref, zero_mean, clamp_db) - sisdr(mixture, ref, zero_mean, clamp_db)


def _active_crop(ref, sample_rate, cfg):
    energies = frame_rms(AudioSignal(ref, sample_rate), cfg.win_ms, cfg.hop_ms)
    g = energies.values
    if len(g) == 0 or g.max() == 0.0:
        raise UndefinedMetricError("reference has no active frames")
    active = np.flatnonzero(g > cfg.tau_rel * g.max())
    return energies.frame_start(active[0]), energies.frame_start(active[-1]) + energies.win


def sure(est, ref, crop=None, cfg=SuREConfig(), sample_rate=None):
    """Suppression ratio on energy, in [0, 1].

    Fraction of reference-active frames (RMS above ``tau_rel`` of the peak)
    where the estimate's RMS falls below ``beta`` times the reference RMS.
    ``crop`` is ``(t_start, t_end)`` in seconds; without it the crop spans
    the first to last active reference frame.
    """
    if sample_rate is None:
        sample_rate = ref.sample_rate if isinstance(ref, AudioSignal) else 16000
    est, ref = _as_array(est), _as_array(ref)
    if est.shape != ref.shape:
        raise ValueError("est and ref must have equal lengths")
    if crop is None:
        lo, hi = _active_crop(ref, sample_rate, cfg)
    else:
        lo = max(0, int(round(crop[0] * sample_rate)))
        hi = min(len(ref), int(round(crop[1] * sample_rate)))
    g = frame_rms(AudioSignal(ref[lo:hi], sample_rate), cfg.win_ms, cfg.hop_ms).values
    g_hat = frame_rms(AudioSignal(est[lo:hi], sample_rate), cfg.win_ms, cfg.hop_ms).values
    if len(g) == 0:
        raise UndefinedMetricError("crop is shorter than one frame")
    active = g > cfg.tau_rel * g.max()
    n_active = int(active.sum())
    if n_active == 0:
        raise UndefinedMetricError("no reference frame above the activity threshold")
    suppressed = active & (g_hat < cfg.beta * g)
    return int(suppressed.sum()) / n_active


_PUNCT = re.compile(f"[{re.escape(string.punctuation)}]")


def normalize_text(text):
    """Lowercase, strip punctuation, collapse whitespace; returns tokens."""
    return _PUNCT.sub("", text.lower()).split()


def edit_distance(hyp, ref):
    """Unit-cost Levenshtein distance between two token sequences."""
    prev = list(range(len(hyp) + 1))
    for i, r_tok in enumerate(ref, 1):
        cur = [i] + [0] * len(hyp)
        for j, h_tok in enumerate(hyp, 1):
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (r_tok != h_tok))
        prev = cur
    return prev[-1]


def wer(hypothesis_tokens, reference_tokens):
    """Word error rate; strings are tokenised with :func:`normalize_text`."""
    if isinstance(hypothesis_tokens, str):
        hypothesis_tokens = normalize_text(hypothesis_tokens)
    if isinstance(reference_tokens, str):
        reference_tokens = normalize_text(reference_tokens)
    if len(reference_tokens) == 0:
        raise ValueError("reference transcript is empty")
    return edit_distance(list(hypothesis_tokens), list(reference_tokens)) / len(reference_tokens)


def bin_label(ratio):
    return f"r{int(round(ratio * 100))}"


@dataclass
class MetricReport:
    """Per-metric averages: overall and per overlap bin (NaN where a bin is empty)."""

    model: str
    overall: dict = field(default_factory=dict)
    per_bin: dict = field(default_factory=dict)
    counts: dict = field(default_factory=dict)
    seed: int = None

    def rows(self):
        for metric in self.overall:
            row = {"metric": metric, "model": self.model, "avg": self.overall[metric]}
            for ratio in REPORT_BINS:
                row[bin_label(ratio)] = self.per_bin[metric].get(ratio, float("nan"))
            yield row

    def to_json(self):
        obj = {
            "model": self.model,
            "seed": self.seed,
            "columns": list(REPORT_COLUMNS),
            "rows": list(self.rows()),
            "counts": {bin_label(r): n for r, n in sorted(self.counts.items())},
        }
        return json.dumps(_nan_to_none(obj), indent=2)


def _nan_to_none(obj):
    if isinstance(obj, float) and math.isnan(obj):
        return None
    if isinstance(obj, dict):
        return {k: _nan_to_none(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_nan_to_none(v) for v in obj]
    return obj


def aggregate_report(scored, model="model", seed=None):
    """Average per-record scores overall and per overlap bin.

    ``scored`` is an iterable of dicts holding ``id``, ``overlap_ratio`` and
    any of the metric keys. Records are sorted by id first so the float sums
    do not depend on evaluation order.
    """
    scored = sorted(scored, key=lambda s: s["id"])
    if not scored:
        raise ValueError("no scored records to aggregate")
    report = MetricReport(model=model, seed=seed)
    for metric in METRICS:
        values = [(s["overlap_ratio"], s[metric]) for s in scored if s.get(metric) is not None]
        if not values:
            continue
        report.overall[metric] = float(np.mean([v for _, v in values]))
        report.per_bin[metric] = {
            ratio: float(np.mean([v for r, v in values if r == ratio]))
            for ratio in REPORT_BINS if any(r == ratio for r, _ in values)
        }
    if not report.overall:
        raise ValueError("records carry no metric values")
    for s in scored:
        report.counts[s["overlap_ratio"]] = report.counts.get(s["overlap_ratio"], 0) + 1
    return report


def reports_to_csv(reports):
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=REPORT_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for report in reports:
        for row in report.rows():
            writer.writerow({k: (f"{v:.4f}" if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()

