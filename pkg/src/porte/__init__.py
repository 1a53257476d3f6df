"""Overlap-controlled two-speaker mixture synthesis with text prompts, suppression-aware
extraction metrics, and a gradient-checked reference of the fusion block and losses."""

from .dataset import MixtureRecord, build_corpus_manifest, read_manifest, split_dataset, write_manifest
from .loudness import LoudnessResult, integrated_loudness, normalize_loudness
from .metrics import MetricReport, SuREConfig, aggregate_report, sisdr, sisdr_improvement, sure, wer
from .mixgen import MixturePlan, RenderedMixture, UtteranceRecord, compute_placement, render_mixture, sample_plan
from .prompts import PromptAnnotation, derive_attributes, render_prompt
from .signal import (
    AudioSignal,
    FrameEnergies,
    frame_rms,
    read_wav,
    resample,
    trim_leading_silence,
    truncate,
    write_wav,
)

__version__ = "0.1.0"
