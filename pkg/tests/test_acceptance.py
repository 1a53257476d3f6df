"""Acceptance criteria 1-10, one pass/fail line each.

Run on its own with ``pytest tests/test_acceptance.py -v`` (or
``python tests/test_acceptance.py``); the summary block at the end of the
pytest output lists every criterion.
"""

import csv
import filecmp
import io
import json
import math
import os
import re
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, tone
from porte import cli
from porte.dam import (
    Codebook,
    FusionInputs,
    branch_weights,
    dam_forward,
    init_dam_params,
    pathway_outputs,
    rotation_trick,
    rvq_quantize,
)
from porte.dam.checks import run_gradient_suite
from porte.dataset import read_manifest
from porte.loudness import integrated_loudness
from porte.metrics import sisdr, sure
from porte.signal import AudioSignal, read_wav, write_wav

N_MIXTURES = 600
SEED = 2024

TEMPLATE_PATTERNS = {
    "gender_extract": re.compile(r"^Extract only the (male|female) voice from this audio\.$"),
    "gender_remove": re.compile(r"^Please remove the (male|female) voice from this audio\.$"),
    "order": re.compile(r"^Extract the voice of the speaker who spoke (first|later)\.$"),
    "relative_length": re.compile(r"^Extract the speech that contains a (longer|shorter) duration of speech\.$"),
}


def report(number, title, passed, detail):
    line = f"[{'PASS' if passed else 'FAIL'}] AC{number:<2} {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert passed, line


@pytest.fixture(scope="module")
def dataset(tmp_path_factory, toy_corpus):
    root, _ = toy_corpus
    out = tmp_path_factory.mktemp("acceptance")
    start = time.perf_counter()
    code = cli.main(["generate", "--corpus", root, "--out", str(out), "--count", str(N_MIXTURES),
                     "--seed", str(SEED)])
    elapsed = time.perf_counter() - start
    assert code == 0
    return root, out, read_manifest(out / "manifest.jsonl"), elapsed


def energy(x):
    x = np.asarray(x, dtype=np.float64)
    return float(np.dot(x, x))


def test_ac01_generation_fidelity(dataset):
    _, out, records, elapsed = dataset
    worst = {"lufs": 0.0, "snr": 0.0, "overlap": 0.0}
    durations = []
    bins = {}
    for rec in records:
        sr = rec.sample_rate
        tgt = read_wav(out / rec.target_path).samples
        itf = read_wav(out / rec.interferer_path).samples
        durations.append(len(tgt) / sr)
        bins[rec.overlap_ratio_requested] = bins.get(rec.overlap_ratio_requested, 0) + 1

        t_lo, t_hi = (int(round(v * sr)) for v in (rec.target_t_start, rec.target_t_end))
        i_lo, i_hi = (int(round(v * sr)) for v in (rec.interferer_t_start, rec.interferer_t_end))
        # stems carry the shared clip gain; the interferer also carries its SNR gain
        tgt_lufs = integrated_loudness(AudioSignal(tgt[t_lo:t_hi], sr)).lufs - rec.clip_gain_db
        itf_lufs = (integrated_loudness(AudioSignal(itf[i_lo:i_hi], sr)).lufs
                    - rec.clip_gain_db - rec.interferer_gain_db)
        worst["lufs"] = max(worst["lufs"], abs(tgt_lufs - rec.lufs_target), abs(itf_lufs - rec.lufs_interferer))

        snr = 10 * math.log10(energy(tgt) / energy(itf))
        worst["snr"] = max(worst["snr"], abs(snr - rec.snr_db))

        a0, a1 = rec.target_t_start, rec.target_t_end
        b0, b1 = rec.interferer_t_start, rec.interferer_t_end
        from_ts = max(0.0, min(a1, b1) - max(a0, b0)) / min(a1 - a0, b1 - b0)
        worst["overlap"] = max(worst["overlap"], abs(rec.overlap_ratio_measured - rec.overlap_ratio_requested),
                               abs(from_ts - rec.overlap_ratio_requested))
    ok = (len(records) == N_MIXTURES
          and set(bins.values()) == {N_MIXTURES // 6}
          and worst["lufs"] <= 0.5 and worst["snr"] <= 0.2 and worst["overlap"] <= 0.001
          and min(durations) >= 5.0 and max(durations) <= 21.2
          and elapsed < 120.0)
    report(1, "generation fidelity", ok,
           f"{len(records)} mixtures {bins[0.0]}/bin, max |dLUFS|={worst['lufs']:.3f} LU, "
           f"max |dSNR|={worst['snr']:.2e} dB, max |dOverlap|={worst['overlap']:.2e}, "
           f"duration [{min(durations):.2f}, {max(durations):.2f}] s, runtime {elapsed:.1f} s")


def test_ac02_determinism(dataset, tmp_path):
    root, out, _, _ = dataset
    code = cli.main(["generate", "--corpus", root, "--out", str(tmp_path), "--count", str(N_MIXTURES),
                     "--seed", str(SEED), "--workers", "4"])
    names = sorted(os.listdir(out / "wav"))
    same_manifest = (tmp_path / "manifest.jsonl").read_bytes() == (out / "manifest.jsonl").read_bytes()
    same_listing = names == sorted(os.listdir(tmp_path / "wav"))
    _, mismatch, errors = filecmp.cmpfiles(out / "wav", tmp_path / "wav", names, shallow=False)
    ok = code == 0 and same_manifest and same_listing and not mismatch and not errors
    report(2, "determinism", ok,
           f"manifest identical={same_manifest}, {len(names) - len(mismatch) - len(errors)}/{len(names)} "
           "WAV files byte-identical (second run used 4 workers)")


def oracle_target_role(rec):
    """Which role does the prompt point at, using only the manifest metadata?"""
    roles = {"t": rec.target_role, "o": "later" if rec.target_role == "first" else "first"}
    gender = {"t": rec.target_gender, "o": rec.interferer_gender}
    start = {"t": rec.target_t_start, "o": rec.interferer_t_start}
    length = {"t": rec.target_t_end - rec.target_t_start, "o": rec.interferer_t_end - rec.interferer_t_start}
    for kind, pattern in TEMPLATE_PATTERNS.items():
        m = pattern.match(rec.prompt_text)
        if not m:
            continue
        slot = m.group(1)
        if kind == "gender_extract":
            hits = [k for k in gender if gender[k] == slot]
        elif kind == "gender_remove":
            hits = [k for k in gender if gender[k] != slot]
        elif kind == "order":
            if abs(start["t"] - start["o"]) < 0.05:
                return None
            hits = [min(start, key=start.get) if slot == "first" else max(start, key=start.get)]
        else:
            if abs(length["t"] - length["o"]) < 0.5:
                return None
            hits = [max(length, key=length.get) if slot == "longer" else min(length, key=length.get)]
        return roles[hits[0]] if len(hits) == 1 else None
    return None


def test_ac03_prompt_correctness(dataset):
    _, _, records, _ = dataset
    recovered = sum(oracle_target_role(r) == r.target_role for r in records)
    matched = sum(bool(TEMPLATE_PATTERNS[r.prompt_type].match(r.prompt_text)) for r in records)
    types = sorted({r.prompt_type for r in records})
    ok = recovered == matched == len(records)
    report(3, "prompt correctness", ok,
           f"oracle recovered target_role for {recovered}/{len(records)}, "
           f"template byte-match {matched}/{len(records)}, types seen {types}")


def test_ac04_sure_properties():
    rng = np.random.default_rng(4)
    ref = tone(440, 2.0, amp=0.5)
    half = ref.copy()
    half[16000:] = 0.0
    identity = sure(ref, ref)
    silent = sure(np.zeros_like(ref), ref)
    halved = sure(half, ref)
    scale_ok = mono_ok = True
    for _ in range(100):
        r = rng.normal(size=8000) * np.repeat(rng.uniform(0.05, 1.0, size=20), 400)
        e = r * np.repeat(rng.uniform(0.0, 1.2, size=40), 200)
        base = sure(e, r)
        scale_ok &= sure(0.3 * e, 0.3 * r) == base
        z = e.copy()
        start = int(rng.integers(0, 7000))
        z[start:start + int(rng.integers(200, 1000))] = 0.0
        mono_ok &= sure(z, r) >= base
    ok = identity == 0.0 and silent == 1.0 and abs(halved - 0.5) <= 0.02 and scale_ok and mono_ok
    report(4, "SuRE properties", ok,
           f"identity={identity:.3f}, silent={silent:.3f}, half-suppressed={halved:.3f}, "
           f"x0.3 invariance={scale_ok}, monotone on 100 cases={mono_ok}")


def test_ac05_sisdr_oracle():
    rng = np.random.default_rng(5)
    worst_rel = worst_scale = 0.0
    for _ in range(100):
        ref = rng.normal(size=256)
        est = ref + rng.normal(scale=rng.uniform(0.1, 3.0), size=256)
        e, r = est.tolist(), ref.tolist()
        dot = sum(a * b for a, b in zip(e, r))
        rr = sum(b * b for b in r)
        s = [dot / rr * b for b in r]
        err = [si - a for si, a in zip(s, e)]
        direct = 10 * math.log10(sum(v * v for v in s) / sum(v * v for v in err))
        fast = sisdr(est, ref, zero_mean=False, clamp_db=np.inf)
        worst_rel = max(worst_rel, abs(fast - direct) / abs(direct))
        alpha = rng.uniform(0.01, 100.0) * rng.choice([-1.0, 1.0])
        worst_scale = max(worst_scale, abs(sisdr(alpha * est, ref, clamp_db=np.inf) - sisdr(est, ref, clamp_db=np.inf)))
    hand = sisdr([1, -1, 1, -1], [1, -1, 0, 0], zero_mean=False)
    ok = worst_rel <= 1e-9 and worst_scale <= 1e-6 and abs(hand) <= 1e-12
    report(5, "SI-SDR oracle", ok,
           f"max rel err vs direct formula={worst_rel:.1e}, max scale drift={worst_scale:.1e} dB, hand case={hand:.1f} dB")


def test_ac06_gradients():
    start = time.perf_counter()
    results = run_gradient_suite(range(20))
    elapsed = time.perf_counter() - start
    names = {r.name for r in results}
    expected = {"sisdr_loss", "speaker_loss", "commitment_loss"} | {
        f"{p}.{kind}" for p in ("multi_scale", "adaptive", "dual_projection", "dam_forward")
        for kind in ("params", "inputs")}
    worst = max(r.max_rel_error for r in results)
    failed = [r for r in results if not r.passed]
    ok = names == expected and not failed and worst <= 1e-4 and len({r.seed for r in results}) >= 20 and elapsed < 60
    report(6, "gradient verification", ok,
           f"{len(results)} checks over 20 seeds, {len(failed)} failed, worst rel err {worst:.1e}, {elapsed:.1f} s")


def test_ac07_branch_weights():
    rng = np.random.default_rng(7)
    p = init_dam_params(8, rng)
    inp = FusionInputs(z_self=rng.normal(size=(12, 8)), z_cross=rng.normal(size=(12, 8)))
    uniform = np.array_equal(branch_weights(p), np.full(3, 1.0 / 3.0))
    outs = pathway_outputs(inp, p)
    uniform_out = float(np.max(np.abs(dam_forward(inp, p) - sum(outs) / 3)))
    sat = []
    for b in range(3):
        logits = np.zeros(3)
        logits[b] = 40.0
        sat.append(float(np.max(np.abs(dam_forward(inp, p.replace(branch_logits=logits)) - outs[b]))))
    ok = uniform and uniform_out <= 1e-12 and max(sat) <= 1e-6
    report(7, "branch-weight structure", ok,
           f"theta=0 weights exactly 1/3={uniform}, |out-mean|={uniform_out:.1e}, "
           f"saturated max err={max(sat):.1e}")


def test_ac08_rvq_rotation():
    rng = np.random.default_rng(8)
    mono = True
    rot_out = rot_orth = 0.0
    for _ in range(100):
        dim = int(rng.integers(2, 33))
        cb = Codebook.random(4, 16, dim, rng)
        norms = rvq_quantize(rng.normal(size=(8, dim)), cb).residual_norms
        mono &= bool(np.all(np.diff(norms, axis=0) <= 1e-12))
        e, q = rng.normal(size=dim), rng.normal(size=dim)
        y, jac = rotation_trick(e, q)
        R = jac * np.linalg.norm(e) / np.linalg.norm(q)
        rot_out = max(rot_out, float(np.max(np.abs(y - q))))
        rot_orth = max(rot_orth, float(np.max(np.abs(R.T @ R - np.eye(dim)))))
    ok = mono and rot_out <= 1e-6 and rot_orth <= 1e-6
    report(8, "RVQ / rotation", ok,
           f"residual norms non-increasing on 100 inputs={mono}, max |y-q|={rot_out:.1e}, "
           f"max |R^T R - I|={rot_orth:.1e}")


def test_ac09_loudness():
    full = integrated_loudness(AudioSignal(tone(997, 5.0, 48000), 48000)).lufs
    full16 = integrated_loudness(AudioSignal(tone(997, 5.0))).lufs
    rng = np.random.default_rng(9)
    worst = 0.0
    t = np.arange(4 * 16000) / 16000
    for _ in range(50):
        x = 0.3 * (0.5 - 0.5 * np.cos(2 * np.pi * rng.uniform(2, 5) * t)) * (
            np.sin(2 * np.pi * rng.uniform(100, 300) * t) + 0.3 * rng.standard_normal(len(t)))
        g = rng.uniform(0.1, 1.0)
        base = integrated_loudness(AudioSignal(x)).lufs
        worst = max(worst, abs(integrated_loudness(AudioSignal(g * x)).lufs - base - 20 * math.log10(g)))
    ok = abs(full + 3.01) <= 0.1 and abs(full16 + 3.01) <= 0.1 and worst <= 0.1
    report(9, "loudness compliance", ok,
           f"997 Hz full-scale: {full:.3f} LUFS @48k, {full16:.3f} LUFS @16k; max additivity err {worst:.1e} LU")


def test_ac10_end_to_end(dataset, tmp_path):
    _, out, records, _ = dataset
    scores = []
    for kind in ("reference", "mixture", "silence"):
        est = tmp_path / kind
        est.mkdir()
        for rec in records:
            ref = read_wav(out / rec.target_path)
            if kind == "reference":
                sig = ref
            elif kind == "mixture":
                sig = read_wav(out / rec.mixture_path)
            else:
                sig = ref.with_samples(np.zeros(len(ref), dtype=np.float32))
            write_wav(str(est / f"{rec.id}_est.wav"), sig)
        path = tmp_path / f"{kind}.jsonl"
        assert cli.main(["evaluate", "--corpus", str(out), "--estimates", str(est), "--out", str(path),
                         "--model", kind, "--workers", "4", "--seed", str(SEED)]) == 0
        scores.append(str(path))
    table = tmp_path / "report.csv"
    assert cli.main(["report", "--scores", *scores, "--out", str(table)]) == 0
    rows = list(csv.DictReader(io.StringIO(table.read_text())))
    header = list(rows[0])
    got = {(r["model"], r["metric"]): r for r in rows}
    cols = ["avg", "r0", "r20", "r40", "r60", "r80", "r100"]
    sisdr_row = [got["reference", "sisdr"][c] for c in cols]
    sisdri_row = [got["mixture", "sisdri"][c] for c in cols]
    sure_row = [got["silence", "sure"][c] for c in cols]
    ok = (header == ["metric", "model"] + cols
          and sisdr_row == ["60.0000"] * 7 and sisdri_row == ["0.0000"] * 7 and sure_row == ["1.0000"] * 7)
    report(10, "end-to-end smoke", ok,
           f"columns {','.join(header)}; reference sisdr={sisdr_row[0]}, mixture sisdri={sisdri_row[0]}, "
           f"silence sure={sure_row[0]} in every bin")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v", "-s"]))
