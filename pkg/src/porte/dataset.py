"""Corpus ingestion, JSON-Lines manifests and stratified train/test splitting."""

import dataclasses
import json
import logging
import os
from dataclasses import dataclass, field, fields

import numpy as np

from .exceptions import CorpusError, EmptySignalError, ManifestParseError
from .mixgen import MIN_SOURCE_S, UtteranceRecord
from .signal import AudioSignal, read_wav, trim_leading_silence

logger = logging.getLogger(__name__)

AUDIO_EXTENSIONS = (".wav", ".flac")
_GENDER_ALIASES = {"m": "male", "male": "male", "f": "female", "female": "female"}


@dataclass(frozen=True)
class MixtureRecord:
    id: str
    split: str
    mixture_path: str
    target_path: str
    interferer_path: str
    sample_rate: int
    duration_s: float
    overlap_ratio_requested: float
    overlap_ratio_measured: float
    delay_s: float
    overlap_s: float
    snr_db: float
    snr_clamped: bool
    lufs_first: float
    lufs_second: float
    interferer_gain_db: float
    clip_gain_db: float
    target_role: str
    target_t_start: float
    target_t_end: float
    interferer_t_start: float
    interferer_t_end: float
    prompt_type: str
    prompt_text: str
    target_speaker: str
    target_gender: str
    interferer_speaker: str
    interferer_gender: str
    first_source: str
    second_source: str
    seed: int
    master_seed: int

    @property
    def lufs_target(self):
        return self.lufs_first if self.target_role == "first" else self.lufs_second

    @property
    def lufs_interferer(self):
        return self.lufs_second if self.target_role == "first" else self.lufs_first

    def to_dict(self):
        return dataclasses.asdict(self)


FIELD_TYPES = {f.name: f.type.__name__ for f in fields(MixtureRecord)}
_NUMERIC = {"float": (int, float), "int": (int,), "bool": (bool,), "str": (str,)}


@dataclass
class CorpusScan:
    records: list = field(default_factory=list)
    unknown_speaker: int = 0
    too_short: int = 0
    duplicates: int = 0
    unreadable: int = 0


def read_speaker_table(path):
    """Parse ``speaker_id<TAB>gender`` lines; ``M``/``F`` are accepted too."""
    table = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) < 2:
                raise CorpusError(f"{path}:{lineno}: expected 'speaker_id<TAB>gender'")
            gender = _GENDER_ALIASES.get(parts[1].strip().lower())
            if gender is None:
                raise CorpusError(f"{path}:{lineno}: unknown gender {parts[1]!r}")
            table[parts[0].strip()] = gender
    return table


def speaker_of(path):
    """LibriTTS naming: the speaker id is the filename prefix before ``_``."""
    stem = os.path.splitext(os.path.basename(path))[0]
    if "_" in stem:
        return stem.split("_", 1)[0]
    return os.path.basename(os.path.dirname(path))


def _load_audio(path):
    if path.lower().endswith(".flac"):
        import soundfile  # optional extra: pip install artifact[flac]

        data, rate = soundfile.read(path, dtype="float64", always_2d=True)
        return AudioSignal(data.mean(axis=1), rate)
    return read_wav(path)


def scan_corpus(root_dirs, speaker_metadata_file, min_duration_s=MIN_SOURCE_S):
    if isinstance(root_dirs, (str, os.PathLike)):
        root_dirs = [root_dirs]
    genders = read_speaker_table(speaker_metadata_file)
    scan = CorpusScan()
    seen = set()
    for root in root_dirs:
        for dirpath, dirnames, filenames in os.walk(root):
            dirnames.sort()
            for name in sorted(filenames):
                if not name.lower().endswith(AUDIO_EXTENSIONS):
                    continue
                path = os.path.realpath(os.path.join(dirpath, name))
                if path in seen:
                    scan.duplicates += 1
                    continue
                seen.add(path)
                spk = speaker_of(path)
                if spk not in genders:
                    scan.unknown_speaker += 1
                    continue
                try:
                    sig, _ = trim_leading_silence(_load_audio(path))
                except (EmptySignalError, ValueError, ImportError) as exc:
                    logger.warning("skipping %s: %s", path, exc)
                    scan.unreadable += 1
                    continue
                if sig.duration < min_duration_s:
                    scan.too_short += 1
                    continue
                scan.records.append(UtteranceRecord(path, spk, genders[spk], sig.duration))
    if scan.unknown_speaker:
        logger.warning("%d files skipped: speaker missing from %s", scan.unknown_speaker, speaker_metadata_file)
    return scan


def build_corpus_manifest(root_dir, speaker_metadata_file):
    """List usable utterances (post-trim duration >= 5 s) with speaker gender attached."""
    scan = scan_corpus(root_dir, speaker_metadata_file)
    if not scan.records:
        raise CorpusError(f"no usable utterances under {root_dir}")
    return scan.records


def write_manifest(records, path, append=False):
    with open(path, "a" if append else "w", encoding="utf-8", newline="\n") as f:
        for rec in records:
            f.write(json.dumps(rec.to_dict(), ensure_ascii=False))
            f.write("\n")


def _coerce(name, value, lineno):
    kind = FIELD_TYPES[name]
    allowed = _NUMERIC[kind]
    if kind != "bool" and isinstance(value, bool):
        raise ManifestParseError(f"field {name!r} must be {kind}, got bool", lineno, name)
    if not isinstance(value, allowed):
        raise ManifestParseError(f"field {name!r} must be {kind}, got {type(value).__name__}", lineno, name)
    return float(value) if kind == "float" else value


def record_from_dict(obj, lineno=None):
    if not isinstance(obj, dict):
        raise ManifestParseError("expected a JSON object", lineno)
    kwargs = {}
    for name in FIELD_TYPES:
        if name not in obj:
            raise ManifestParseError(f"missing required field {name!r}", lineno, name)
        kwargs[name] = _coerce(name, obj[name], lineno)
    return MixtureRecord(**kwargs)


def read_manifest(path):
    records = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestParseError(f"invalid JSON: {exc.msg}", lineno) from exc
            records.append(record_from_dict(obj, lineno))
    return records


def _stratified_split(records, test_fraction, rng):
    by_bin = {}
    for rec in records:
        by_bin.setdefault(rec.overlap_ratio_requested, []).append(rec)
    test_ids = set()
    for ratio in sorted(by_bin):
        members = sorted(by_bin[ratio], key=lambda r: r.id)
        if len(members) < 2:
            logger.warning("overlap bin %.1f has %d record(s); kept whole in train", ratio, len(members))
            continue
        n_test = int(round(test_fraction * len(members)))
        n_test = min(max(n_test, 1), len(members) - 1)
        order = rng.permutation(len(members))
        test_ids.update(members[i].id for i in order[:n_test])
    return [dataclasses.replace(r, split="test" if r.id in test_ids else "train") for r in records]


def _speaker_disjoint_split(records, test_fraction, rng):
    speakers = sorted({s for r in records for s in (r.target_speaker, r.interferer_speaker)})
    speakers = [speakers[i] for i in rng.permutation(len(speakers))]
    test_spk = set()
    goal = test_fraction * len(records)
    for spk in speakers:
        n_test = sum(1 for r in records if {r.target_speaker, r.interferer_speaker} <= test_spk)
        if n_test >= goal:
            break
        test_spk.add(spk)
    out, dropped = [], 0
    for r in records:
        pair = {r.target_speaker, r.interferer_speaker}
        if pair <= test_spk:
            out.append(dataclasses.replace(r, split="test"))
        elif pair.isdisjoint(test_spk):
            out.append(dataclasses.replace(r, split="train"))
        else:
            dropped += 1
    if dropped:
        logger.warning("speaker-disjoint split dropped %d cross-set record(s)", dropped)
    return out


def split_dataset(records, test_fraction, seed, speaker_disjoint=False):
    """Assign ``split`` to every record.

    The default stratifies by overlap bin so each bin's test share equals
    ``test_fraction`` up to rounding. ``speaker_disjoint=True`` instead keeps
    speakers out of both sets and drops records that would straddle them.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    if speaker_disjoint:
        return _speaker_disjoint_split(records, test_fraction, rng)
    return _stratified_split(records, test_fraction, rng)


def measured_overlap_from_timestamps(rec):
    start = max(rec.target_t_start, rec.interferer_t_start)
    end = min(rec.target_t_end, rec.interferer_t_end)
    shorter = min(rec.target_t_end - rec.target_t_start, rec.interferer_t_end - rec.interferer_t_start)
    return max(0.0, end - start) / shorter


def validate_record(rec, root="."):
    """Check the on-disk invariants of one record; returns a list of problems."""
    problems = []
    paths = [os.path.join(root, p) for p in (rec.mixture_path, rec.target_path, rec.interferer_path)]
    missing = [p for p in paths if not os.path.exists(p)]
    if missing:
        return [f"missing file {p}" for p in missing]
    mix, tgt, itf = (read_wav(p) for p in paths)
    if not len(mix) == len(tgt) == len(itf):
        problems.append("stem lengths differ")
    else:
        m32 = mix.samples.astype(np.float32)
        if not np.array_equal(m32, tgt.samples.astype(np.float32) + itf.samples.astype(np.float32)):
            problems.append("stems do not sum to mixture")
    for role in ("target", "interferer"):
        start, end = getattr(rec, f"{role}_t_start"), getattr(rec, f"{role}_t_end")
        if not 0.0 <= start < end <= mix.duration + 1e-9:
            problems.append(f"{role} timestamps out of range")
    if abs(measured_overlap_from_timestamps(rec) - rec.overlap_ratio_measured) > 1e-3:
        problems.append("measured overlap disagrees with timestamps")
    return problems
