"""Corpus construction: the 10 interference classes, randomized scenario
drawing, rendering to composite images on disk, manifests, splits and
matching-pair sampling.

The 10 classes are the 4 single interference kinds (in canonical order:
fixed tone, linear sweep, periodic pulse, comb spectrum) followed by the 6
unordered pairs in lexicographic order of kind indices.

Randomized scenario parameters:

* fixed tone: 1-3 tones drawn without replacement from {80, 160, 200} kHz
* linear sweep: bandwidth U[50, 100] kHz, start U[0, 100] kHz, period
  U[1, 5] ms by default (a microsecond-scale variant sits behind
  ``fast_sweep_period``), slope = bandwidth / period
* periodic pulse: period U[30, 80] us, duty U[0.2, 0.5]
* comb spectrum: 4-8 teeth evenly spaced over a random sub-band of
  [90, 210] kHz

Every component amplitude is U[0.5, 1.5] before the record is scaled to the
cell's JSR. All draws derive from the corpus master seed through the
counter scheme in hopjam.rng, so a (config, seed) pair reproduces the
corpus byte for byte.
"""

from __future__ import annotations

import dataclasses
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import imgprep, sigsynth, tfa
from .errors import ConfigurationError, SamplingError
from .fileio import atomic_write_bytes, atomic_write_text
from .pipeline import PrepConfig, render_composite
from .rng import STREAM_CORPUS, STREAM_PAIRS, STREAM_SPLIT, child_rng
from .sigsynth import (
    CombSpectrumSpec,
    FhParams,
    FixedToneSpec,
    INTERFERENCE_KINDS,
    LinearSweepSpec,
    PeriodicPulseSpec,
    ScenarioSpec,
    default_fh_params,
)

MANIFEST_FORMAT_VERSION = 1
COMPOSITE_FORMAT_VERSION = 1

MANIFEST_NAME = "manifest.jsonl"
CONFIG_NAME = "corpus_config.json"
IMAGE_DIR = "images"


# ---------------------------------------------------------------------------
# classes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClassLabel:
    """One of the 10 interference classes: a singleton kind or an unordered
    pair of distinct kinds."""

    id: int
    members: tuple

    def __post_init__(self):
        if not 1 <= len(self.members) <= 2:
            raise ConfigurationError("a class holds 1 or 2 interference kinds")
        if len(set(self.members)) != len(self.members):
            raise ConfigurationError("pair classes hold distinct kinds")

    @property
    def name(self) -> str:
        return "+".join(self.members)


def enumerate_classes() -> list:
    """The frozen class ordering: 4 singletons, then 6 pairs."""
    labels = [ClassLabel(i, (kind,)) for i, kind in enumerate(INTERFERENCE_KINDS)]
    next_id = len(INTERFERENCE_KINDS)
    for i in range(len(INTERFERENCE_KINDS)):
        for j in range(i + 1, len(INTERFERENCE_KINDS)):
            labels.append(ClassLabel(
                next_id, (INTERFERENCE_KINDS[i], INTERFERENCE_KINDS[j])))
            next_id += 1
    return labels


# ---------------------------------------------------------------------------
# randomized scenario drawing
# ---------------------------------------------------------------------------

FIXED_TONE_FREQ_SET_HZ = (80e3, 160e3, 200e3)
SWEEP_BANDWIDTH_HZ = (50e3, 100e3)
SWEEP_START_HZ = (0.0, 100e3)
SWEEP_PERIOD_S = (1e-3, 5e-3)
SWEEP_PERIOD_FAST_S = (1e-6, 5e-6)
PULSE_PERIOD_S = (3e-5, 8e-5)
PULSE_DUTY = (0.2, 0.5)
COMB_TEETH = (4, 8)
COMB_BAND_HZ = (90e3, 210e3)
AMPLITUDE_RANGE = (0.5, 1.5)


def _amp(rng) -> float:
    return float(rng.uniform(*AMPLITUDE_RANGE))


def draw_interference(kind: str, rng: np.random.Generator,
                      fast_sweep_period: bool = False):
    """One randomized interference of the given kind."""
    if kind == sigsynth.KIND_FIXED_TONE:
        n = int(rng.integers(1, 4))
        freqs = sorted(rng.choice(FIXED_TONE_FREQ_SET_HZ, size=n, replace=False))
        return FixedToneSpec(
            freqs_hz=tuple(float(f) for f in freqs),
            amplitudes=tuple(_amp(rng) for _ in range(n)),
            phases_rad=tuple(float(rng.uniform(0, 2 * np.pi)) for _ in range(n)),
        )
    if kind == sigsynth.KIND_LINEAR_SWEEP:
        bandwidth = float(rng.uniform(*SWEEP_BANDWIDTH_HZ))
        start = float(rng.uniform(*SWEEP_START_HZ))
        period_range = SWEEP_PERIOD_FAST_S if fast_sweep_period else SWEEP_PERIOD_S
        period = float(rng.uniform(*period_range))
        return LinearSweepSpec(
            amplitude=_amp(rng),
            start_hz=start,
            slope_hz_per_s=bandwidth / period,
            phase_rad=float(rng.uniform(0, 2 * np.pi)),
            period_s=period,
        )
    if kind == sigsynth.KIND_PERIODIC_PULSE:
        period = float(rng.uniform(*PULSE_PERIOD_S))
        duty = float(rng.uniform(*PULSE_DUTY))
        return PeriodicPulseSpec(
            amplitude=_amp(rng),
            period_s=period,
            width_s=duty * period,
        )
    if kind == sigsynth.KIND_COMB_SPECTRUM:
        n = int(rng.integers(COMB_TEETH[0], COMB_TEETH[1] + 1))
        lo = float(rng.uniform(COMB_BAND_HZ[0], COMB_BAND_HZ[0] + 30e3))
        hi = float(rng.uniform(COMB_BAND_HZ[1] - 30e3, COMB_BAND_HZ[1]))
        return CombSpectrumSpec(
            freqs_hz=tuple(np.linspace(lo, hi, n)),
            amplitudes=tuple(_amp(rng) for _ in range(n)),
            phases_rad=tuple(float(rng.uniform(0, 2 * np.pi)) for _ in range(n)),
        )
    raise ConfigurationError(f"unknown interference kind {kind!r}")


def draw_scenario(label: ClassLabel, jsr_db: float, rng: np.random.Generator,
                  fh_template: FhParams, noise_snr_db: Optional[float],
                  fast_sweep_period: bool = False) -> ScenarioSpec:
    interferences = tuple(
        draw_interference(kind, rng, fast_sweep_period) for kind in label.members)
    fh = dataclasses.replace(
        fh_template, hop_sequence_seed=int(rng.integers(2 ** 31)))
    return ScenarioSpec(
        fh=fh,
        interferences=interferences,
        jsr_db=float(jsr_db),
        noise_snr_db=noise_snr_db,
        rng_seed=int(rng.integers(2 ** 31)),
    )


# ---------------------------------------------------------------------------
# corpus configuration and plan
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CorpusConfig:
    jsr_values_db: tuple = (-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0)
    per_cell: int = 100
    sample_rate_hz: float = 16e6
    duration_s: float = 0.05
    fh_n_freqs: int = 16
    fh_band_hz: tuple = (100e3, 220e3)
    hop_rate_hops_per_s: float = 100.0
    noise_snr_db: Optional[float] = None
    train_frac: float = 0.8
    fast_sweep_period: bool = False
    tf: tfa.TfGrid = field(default_factory=tfa.TfGrid)
    prep: PrepConfig = field(default_factory=PrepConfig)

    def __post_init__(self):
        if self.per_cell < 1:
            raise ConfigurationError("per_cell must be >= 1")
        if not 0.0 < self.train_frac < 1.0:
            raise ConfigurationError("train_frac must lie in (0, 1)")

    def grid(self) -> sigsynth.SamplingGrid:
        return sigsynth.SamplingGrid.from_duration(self.sample_rate_hz,
                                                   self.duration_s)

    def fh_template(self) -> FhParams:
        return default_fh_params(self.fh_n_freqs, self.fh_band_hz,
                                 self.hop_rate_hops_per_s)

    def n_samples_total(self) -> int:
        return len(self.jsr_values_db) * len(enumerate_classes()) * self.per_cell


def config_to_dict(cfg: CorpusConfig) -> dict:
    d = dataclasses.asdict(cfg)
    for key in ("jsr_values_db", "fh_band_hz"):
        d[key] = list(d[key])
    d["tf"]["freq_range_hz"] = list(d["tf"]["freq_range_hz"])
    if d["tf"]["scale_set"] is not None:
        d["tf"]["scale_set"] = list(d["tf"]["scale_set"])
    return d


def config_from_dict(d: dict) -> CorpusConfig:
    d = dict(d)
    tf = dict(d.pop("tf"))
    tf["freq_range_hz"] = tuple(tf["freq_range_hz"])
    if tf.get("scale_set") is not None:
        tf["scale_set"] = tuple(tf["scale_set"])
    prep = dict(d.pop("prep"))
    return CorpusConfig(
        jsr_values_db=tuple(d.pop("jsr_values_db")),
        fh_band_hz=tuple(d.pop("fh_band_hz")),
        tf=tfa.TfGrid(**tf),
        prep=PrepConfig(**prep),
        **d,
    )


@dataclass(frozen=True)
class SampleRecord:
    sample_id: str
    class_id: int
    jsr_db: float
    scenario: ScenarioSpec
    split: str
    image_path: str


def _train_count(per_cell: int, train_frac: float) -> int:
    if per_cell == 1:
        return 1
    return min(per_cell - 1, max(1, int(round(train_frac * per_cell))))


def plan_corpus(cfg: CorpusConfig, seed: int) -> list:
    """Deterministic corpus plan: one record per (JSR, class, index) cell
    entry, with scenarios and splits fixed before any rendering happens.

    The split is stratified per (class, JSR) cell: a seeded permutation of
    the cell assigns the first round(train_frac * per_cell) entries to
    train, the rest to test.
    """
    classes = enumerate_classes()
    fh_template = cfg.fh_template()
    n_train = _train_count(cfg.per_cell, cfg.train_frac)
    records = []
    for j, jsr in enumerate(cfg.jsr_values_db):
        for label in classes:
            perm = child_rng(seed, STREAM_SPLIT, j, label.id).permutation(cfg.per_cell)
            train_set = set(int(i) for i in perm[:n_train])
            for k in range(cfg.per_cell):
                rng = child_rng(seed, STREAM_CORPUS, j, label.id, k)
                scenario = draw_scenario(label, jsr, rng, fh_template,
                                         cfg.noise_snr_db,
                                         cfg.fast_sweep_period)
                sample_id = f"c{label.id:02d}_j{j}_k{k:04d}"
                records.append(SampleRecord(
                    sample_id=sample_id,
                    class_id=label.id,
                    jsr_db=float(jsr),
                    scenario=scenario,
                    split="train" if k in train_set else "test",
                    image_path=f"{IMAGE_DIR}/{sample_id}.ppm",
                ))
    return records


# ---------------------------------------------------------------------------
# rendering and manifests
# ---------------------------------------------------------------------------

def render_record(record: SampleRecord, cfg: CorpusConfig) -> imgprep.CompositeImage:
    grid = cfg.grid()
    signal = sigsynth.synthesize_scenario(record.scenario, grid)
    band = sigsynth.scenario_band_hz(record.scenario, grid)
    return render_composite(signal, cfg.tf, band, cfg.prep)


def _composite_sidecar(record: SampleRecord, cfg: CorpusConfig) -> dict:
    return {
        "format_version": COMPOSITE_FORMAT_VERSION,
        "source": {
            "sample_id": record.sample_id,
            "transforms": list(tfa.TRANSFORM_KINDS),
        },
        "pipeline_params": {
            "tf": config_to_dict(cfg)["tf"],
            "prep": dataclasses.asdict(cfg.prep),
        },
    }


def record_to_dict(record: SampleRecord) -> dict:
    return {
        "id": record.sample_id,
        "class_id": record.class_id,
        "jsr_db": record.jsr_db,
        "scenario_spec": sigsynth.scenario_to_dict(record.scenario),
        "files": {"composite": record.image_path},
        "split": record.split,
    }


def record_from_dict(d: dict) -> SampleRecord:
    return SampleRecord(
        sample_id=d["id"],
        class_id=int(d["class_id"]),
        jsr_db=float(d["jsr_db"]),
        scenario=sigsynth.scenario_from_dict(d["scenario_spec"]),
        split=d["split"],
        image_path=d["files"]["composite"],
    )


def write_manifest(path: str, records: Sequence[SampleRecord]) -> None:
    lines = [json.dumps(record_to_dict(r), sort_keys=True) for r in records]
    atomic_write_text(path, "\n".join(lines) + "\n")


def load_manifest(path: str) -> list:
    with open(path, "r", encoding="utf-8") as f:
        return [record_from_dict(json.loads(line))
                for line in f if line.strip()]


def generate_corpus(cfg: CorpusConfig, seed: int, out_dir: str,
                    threads: int = 1) -> str:
    """Render the full corpus under ``out_dir`` and return the manifest path.

    Layout (versioned, see README):

        out_dir/corpus_config.json   corpus config + master seed
        out_dir/images/<id>.ppm      composite image (binary P6)
        out_dir/images/<id>.ppm.json sidecar
        out_dir/manifest.jsonl       one record per sample, plan order

    Rendering parallelizes over samples (each sample's draws use its own
    counter-derived stream); the manifest is assembled by the single caller
    thread in plan order, so the output is byte-identical for any thread
    count.
    """
    records = plan_corpus(cfg, seed)
    os.makedirs(os.path.join(out_dir, IMAGE_DIR), exist_ok=True)

    def render_one(record: SampleRecord):
        try:
            comp = render_record(record, cfg)
        except Exception as exc:
            raise RuntimeError(
                f"pipeline failed for sample {record.sample_id} "
                f"(scenario seed {record.scenario.rng_seed}): {exc}"
            ) from exc
        imgprep.write_ppm(os.path.join(out_dir, record.image_path), comp)
        atomic_write_text(
            os.path.join(out_dir, record.image_path + ".json"),
            json.dumps(_composite_sidecar(record, cfg), sort_keys=True, indent=2))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(render_one, records))
    else:
        for record in records:
            render_one(record)

    atomic_write_text(
        os.path.join(out_dir, CONFIG_NAME),
        json.dumps({"config": config_to_dict(cfg), "seed": seed,
                    "manifest_format_version": MANIFEST_FORMAT_VERSION},
                   sort_keys=True, indent=2))
    manifest_path = os.path.join(out_dir, MANIFEST_NAME)
    write_manifest(manifest_path, records)
    return manifest_path


def load_composite_array(corpus_dir: str, record: SampleRecord) -> np.ndarray:
    """(3, H, W) float array in {0.0, 1.0} for one manifest record."""
    comp = imgprep.read_ppm(os.path.join(corpus_dir, record.image_path))
    return comp.stacked()


def load_split_arrays(corpus_dir: str, records: Sequence[SampleRecord],
                      split: Optional[str] = None):
    """Images, labels and JSRs for a split (or all records).

    Returns (ids, images (N,3,H,W), class_ids (N,), jsr_db (N,)).
    """
    chosen = [r for r in records if split is None or r.split == split]
    if not chosen:
        raise SamplingError(f"no records in split {split!r}")
    images = np.stack([load_composite_array(corpus_dir, r) for r in chosen])
    labels = np.array([r.class_id for r in chosen])
    jsrs = np.array([r.jsr_db for r in chosen])
    ids = [r.sample_id for r in chosen]
    return ids, images, labels, jsrs


# ---------------------------------------------------------------------------
# matching pairs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MatchingPair:
    a: str
    b: str
    same: int


def sample_pairs(records: Sequence[SampleRecord], n_pairs: int, seed: int,
                 balance: float = 0.5, stream: tuple = ()) -> list:
    """Seeded matching pairs from the train split.

    A fraction ``balance`` of pairs are same-class (label 1); the rest pair
    two different classes (label 0). ``stream`` extends the seed path so
    successive training iterations draw independent pair sets. Raises
    SamplingError when a same-class pair is requested for a class with
    fewer than two train samples.
    """
    train = [r for r in records if r.split == "train"]
    if not train:
        raise SamplingError("manifest has an empty train split")
    by_class = {}
    for r in train:
        by_class.setdefault(r.class_id, []).append(r.sample_id)
    class_ids = sorted(by_class)
    rng = child_rng(seed, STREAM_PAIRS, *stream)
    pairs = []
    for _ in range(n_pairs):
        same = int(rng.random() < balance)
        if same:
            cid = class_ids[rng.integers(len(class_ids))]
            members = by_class[cid]
            if len(members) < 2:
                raise SamplingError(
                    f"class {cid} has {len(members)} train samples; "
                    "cannot form a same-class pair"
                )
            i, j = rng.choice(len(members), size=2, replace=False)
            pairs.append(MatchingPair(members[int(i)], members[int(j)], 1))
        else:
            if len(class_ids) < 2:
                raise SamplingError("need at least two classes for different-class pairs")
            ca, cb = rng.choice(len(class_ids), size=2, replace=False)
            a = by_class[class_ids[int(ca)]]
            b = by_class[class_ids[int(cb)]]
            pairs.append(MatchingPair(
                a[int(rng.integers(len(a)))],
                b[int(rng.integers(len(b)))],
                0,
            ))
    return pairs
