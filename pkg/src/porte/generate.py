"""Dataset generation driver: plan -> render -> prompt -> WAV triple + manifest record."""

import hashlib
import os
from collections import Counter
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .dataset import MixtureRecord, split_dataset, write_manifest
from .exceptions import UnpromptableMixtureError
from .mixgen import OVERLAP_BINS, derive_seed, render_mixture, sample_plan
from .prompts import derive_attributes, render_prompt
from .signal import write_wav

MAX_PLAN_ATTEMPTS = 50
DEFAULT_TEST_FRACTION = 3.0 / 39.0
MANIFEST_NAME = "manifest.jsonl"


def record_id(index, seed):
    return f"{index:06d}_{hashlib.sha256(str(seed).encode()).hexdigest()[:8]}"


def generate_item(corpus, master_seed, index, overlap_ratio=None, max_attempts=MAX_PLAN_ATTEMPTS):
    """Return ``(plan, rendered, prompt)`` for item ``index``.

    Plans that admit no prompt are redrawn from the next derived seed.
    """
    for attempt in range(max_attempts):
        seed = derive_seed(master_seed, index, attempt)
        rng = np.random.default_rng(seed)
        plan = sample_plan(corpus, rng, overlap_ratio=overlap_ratio, seed=seed)
        rendered = render_mixture(plan)
        try:
            prompt = render_prompt(derive_attributes(rendered, plan), plan.target_role, rng)
        except UnpromptableMixtureError:
            continue
        return plan, rendered, prompt
    raise UnpromptableMixtureError(
        f"item {index}: no promptable plan after {max_attempts} attempts"
    )


def _relpath(path, root):
    return os.path.relpath(path, root) if root else path


def _generate_one(job):
    corpus, master_seed, index, ratio, out_dir, corpus_root = job
    plan, rendered, prompt = generate_item(corpus, master_seed, index, ratio)
    rid = record_id(index, plan.seed)
    rel = {kind: os.path.join("wav", f"{rid}_{kind}.wav") for kind in ("mix", "tgt", "itf")}
    write_wav(os.path.join(out_dir, rel["mix"]), rendered.mixture)
    write_wav(os.path.join(out_dir, rel["tgt"]), rendered.target_aligned)
    write_wav(os.path.join(out_dir, rel["itf"]), rendered.interferer_aligned)
    tgt_span, itf_span = rendered.target_span, rendered.interferer_span
    return MixtureRecord(
        id=rid,
        split="train",
        mixture_path=rel["mix"],
        target_path=rel["tgt"],
        interferer_path=rel["itf"],
        sample_rate=rendered.mixture.sample_rate,
        duration_s=rendered.duration_s,
        overlap_ratio_requested=plan.overlap_ratio,
        overlap_ratio_measured=rendered.measured_overlap_ratio,
        delay_s=rendered.delay_s,
        overlap_s=rendered.overlap_s,
        snr_db=plan.snr_db,
        snr_clamped=plan.snr_clamped,
        lufs_first=plan.lufs_first,
        lufs_second=plan.lufs_second,
        interferer_gain_db=rendered.interferer_gain_db,
        clip_gain_db=rendered.clip_gain_db,
        target_role=plan.target_role,
        target_t_start=tgt_span[0],
        target_t_end=tgt_span[1],
        interferer_t_start=itf_span[0],
        interferer_t_end=itf_span[1],
        prompt_type=prompt.prompt_type,
        prompt_text=prompt.text,
        target_speaker=plan.target_utt.speaker_id,
        target_gender=plan.target_utt.gender,
        interferer_speaker=plan.interferer_utt.speaker_id,
        interferer_gender=plan.interferer_utt.gender,
        first_source=_relpath(plan.first_utt.path, corpus_root),
        second_source=_relpath(plan.second_utt.path, corpus_root),
        seed=plan.seed,
        master_seed=int(master_seed),
    )


def generate_dataset(corpus, out_dir, count, master_seed, bins=OVERLAP_BINS, workers=1,
                     test_fraction=DEFAULT_TEST_FRACTION, corpus_root=None, speaker_disjoint=False):
    """Render ``count`` mixtures into ``out_dir`` and write ``manifest.jsonl``.

    Item ``i`` uses overlap bin ``bins[i % len(bins)]``, so bins are evenly
    stratified. Output is identical for any ``workers`` value.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    bins = tuple(float(b) for b in bins)
    os.makedirs(os.path.join(out_dir, "wav"), exist_ok=True)
    jobs = [(corpus, master_seed, i, bins[i % len(bins)], out_dir, corpus_root) for i in range(count)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_generate_one, jobs, chunksize=max(1, count // (4 * workers))))
    else:
        records = [_generate_one(job) for job in jobs]
    if test_fraction:
        records = split_dataset(records, test_fraction, master_seed, speaker_disjoint=speaker_disjoint)
    write_manifest(records, os.path.join(out_dir, MANIFEST_NAME))
    return records


def bin_counts(records):
    counts = Counter(r.overlap_ratio_requested for r in records)
    return {ratio: counts[ratio] for ratio in sorted(counts)}
