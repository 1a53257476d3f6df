"""Deterministic synthetic speech-like corpus for tests and demos.

Each "utterance" is a harmonic voiced source with a gender-typical pitch
contour, syllable-rate amplitude envelope and short pauses, preceded by a
stretch of near-silence so the trimming path is exercised. Files are written
LibriTTS-style as ``<root>/<speaker>/<speaker>_<n>.wav`` together with a
``speakers.tsv`` gender table.
"""

import os

import numpy as np

from .signal import AudioSignal, write_wav

DEFAULT_SPEAKERS = (
    ("101", "male"), ("102", "female"), ("103", "male"), ("104", "female"),
    ("105", "male"), ("106", "female"), ("107", "male"), ("108", "female"),
)


def synth_utterance(rng, gender, duration_s, sample_rate=24000, lead_silence_s=0.3):
    n = int(round(duration_s * sample_rate))
    t = np.arange(n) / sample_rate
    base_f0 = rng.uniform(95, 135) if gender == "male" else rng.uniform(180, 240)
    f0 = base_f0 * (1.0 + 0.08 * np.sin(2 * np.pi * rng.uniform(0.2, 0.6) * t + rng.uniform(0, 2 * np.pi)))
    phase = 2 * np.pi * np.cumsum(f0) / sample_rate
    voiced = np.zeros(n)
    for h in range(1, 16):
        if h * base_f0 * 1.1 > sample_rate / 2 * 0.8:
            break
        voiced += np.sin(h * phase) / h ** 1.2
    syllable = 0.5 * (1 - np.cos(2 * np.pi * rng.uniform(3.0, 5.0) * t)) ** 1.5
    # word gaps: zero the envelope over a few random 120-250 ms stretches
    gaps = np.ones(n)
    for _ in range(int(duration_s // 1.5)):
        start = rng.uniform(0.5, duration_s - 0.5)
        gaps[(t >= start) & (t < start + rng.uniform(0.12, 0.25))] = 0.0
    x = voiced * syllable * gaps
    x += 0.01 * rng.standard_normal(n) * syllable
    x *= 0.3 / np.max(np.abs(x))
    lead = int(round(lead_silence_s * sample_rate))
    x = np.concatenate([1e-5 * rng.standard_normal(lead), x])
    return AudioSignal(x, sample_rate)


def make_toy_corpus(root, seed=0, speakers=DEFAULT_SPEAKERS, utterances_per_speaker=6,
                    sample_rate=24000, n_short=2):
    """Write the toy corpus under ``root`` and return the speaker TSV path.

    ``n_short`` utterances in total are made shorter than 5 s so duration
    filtering has something to reject.
    """
    rng = np.random.default_rng(seed)
    os.makedirs(root, exist_ok=True)
    short_slots = set(rng.choice(len(speakers) * utterances_per_speaker, size=n_short, replace=False).tolist())
    slot = 0
    for spk, gender in speakers:
        spk_dir = os.path.join(root, spk)
        os.makedirs(spk_dir, exist_ok=True)
        for u in range(utterances_per_speaker):
            duration = rng.uniform(2.5, 4.5) if slot in short_slots else rng.uniform(5.5, 12.0)
            sig = synth_utterance(rng, gender, duration, sample_rate, lead_silence_s=rng.uniform(0.1, 0.6))
            write_wav(os.path.join(spk_dir, f"{spk}_{u:03d}.wav"), sig, encoding="pcm16")
            slot += 1
    tsv = os.path.join(root, "speakers.tsv")
    with open(tsv, "w", encoding="utf-8") as f:
        for spk, gender in speakers:
            f.write(f"{spk}\t{gender}\n")
    return tsv
