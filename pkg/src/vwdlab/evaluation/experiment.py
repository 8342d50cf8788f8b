"""Trial x fold orchestration, per-epoch patient-level scoring and report assembly."""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from ..cnn.estimator import DenseNetClassifier
from ..cnn.inputs import INPUT_MODES
from ..cohort import FlowSeries, Label
from ..errors import ConfigInvalid, DegenerateMorphology, PartialFoldFailure, VwdError
from ..features import window_features
from ..forest import RandomForestClassifier
from ..segmentation import SegmentationConfig, detect_breath_onsets, segment_series
from ..spectral import AblationBand, band_ablate
from ..stats import t_band, t_interval
from .metrics import METRICS, interpolate_roc, patient_label, patient_metrics, patient_score, roc_curve
from .splits import SplitScheme, make_split_plan, oversample_indices

MODELS = ("cnn", "rf")
DEFAULT_CUTOFFS = (20.0, 15.0, 10.0, 8.0, 6.0, 4.0, 2.0, 1.0, 0.5)
ROC_GRID = np.linspace(0.0, 1.0, 101)


@dataclass(frozen=True)
class ExperimentConfig:
    model: str = "cnn"
    input_mode: str = "raw"
    ablation: AblationBand | None = None
    scheme: str = "kfold"
    k: int = 5
    train_fraction: float | None = None
    trials: int = 10
    epochs: int = 10
    master_seed: int = 0
    segmentation: SegmentationConfig = SegmentationConfig()
    learning_rate: float = 0.001
    momentum: float = 0.0
    batch_size: int = 32
    blocks: tuple[int, ...] = (4, 4)
    growth_rate: int = 8
    scaling: str = "channel"
    n_trees: int = 100
    max_depth: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(int(b) for b in self.blocks))
        if self.model not in MODELS:
            raise ConfigInvalid(f"model must be one of {MODELS}")
        if self.model == "rf" and self.input_mode != "features":
            raise ConfigInvalid("the random forest consumes input_mode 'features' only")
        if self.model == "cnn" and self.input_mode not in INPUT_MODES:
            raise ConfigInvalid(f"CNN input_mode must be one of {INPUT_MODES}")
        SplitScheme(self.scheme)
        if self.trials < 1 or self.epochs < 1:
            raise ConfigInvalid("trials and epochs must be >= 1")

    @property
    def n_epochs(self) -> int:
        return self.epochs if self.model == "cnn" else 1

    def for_model(self, model: str) -> "ExperimentConfig":
        if model == "rf":
            return replace(self, model="rf", input_mode="features")
        mode = "raw" if self.input_mode == "features" else self.input_mode
        return replace(self, model="cnn", input_mode=mode)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["blocks"] = list(self.blocks)
        d["ablation"] = None if self.ablation is None else self.ablation.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        if d.get("ablation") is not None:
            d["ablation"] = AblationBand(**d["ablation"])
        if isinstance(d.get("segmentation"), dict):
            d["segmentation"] = SegmentationConfig(**d["segmentation"])
        return cls(**d)


@dataclass
class PatientData:
    """Model-ready windows of one patient. ``inputs`` is ``(n_windows, 20, length)`` flow
    for the CNN or ``(n_windows, 10)`` features for the forest."""

    patient_id: str
    label: Label
    inputs: np.ndarray
    n_windows: int
    n_degenerate: int = 0


def prepare_patient(series: FlowSeries, cfg: ExperimentConfig) -> PatientData:
    """Cut one patient's windows from the (optionally ablated) signal.

    The window grid comes from onsets on the unfiltered signal so that every cutoff
    classifies the same stretches of data; instance values are read from the filtered
    signal, and the feature path re-detects onsets on the filtered signal.
    """
    seg = cfg.segmentation
    _, _, windows = segment_series(series, seg)
    filtered = series
    if cfg.ablation is not None:
        filtered = series.with_samples(band_ablate(series.samples, cfg.ablation, series.sample_rate))
    x = filtered.samples
    if cfg.model == "cnn":
        length = seg.instance_length
        if windows:
            inputs = np.stack([np.stack([x[o : o + length] for o in w.onsets]) for w in windows])
        else:
            inputs = np.zeros((0, seg.window_size, length))
        return PatientData(series.patient_id, series.label, inputs, len(windows))
    onsets = detect_breath_onsets(x, seg)
    rows, bad = [], 0
    for w in windows:
        try:
            rows.append(window_features(w, filtered, seg, onsets).values)
        except DegenerateMorphology:
            bad += 1
    inputs = np.array(rows, dtype=np.float64).reshape(-1, 10)
    return PatientData(series.patient_id, series.label, inputs, len(windows), bad)


def _map(fn, items, threads: int):
    with threadpool_limits(limits=1):
        if threads <= 1:
            return [fn(i) for i in items]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))


def prepare_cohort(series_list, cfg: ExperimentConfig, threads: int = 1) -> dict[str, PatientData]:
    data = _map(lambda s: prepare_patient(s, cfg), list(series_list), threads)
    return {d.patient_id: d for d in data}


def _clean(v):
    """JSON-safe copy: NaN -> None, numpy scalars -> Python numbers."""
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, np.ndarray):
        return _clean(v.tolist())
    if isinstance(v, (np.floating, float)):
        f = float(v)
        return None if math.isnan(f) else f
    if isinstance(v, np.integer):
        return int(v)
    return v


def _window_labels_to_scores(probs_by_patient: dict[str, np.ndarray]) -> dict[str, float]:
    return {pid: patient_score(p > 0.5) for pid, p in sorted(probs_by_patient.items())}


def _score_epoch(epoch: int, probs_by_patient, labels) -> dict:
    scores = _window_labels_to_scores(probs_by_patient)
    out = {"epoch": epoch}
    out.update(patient_metrics(scores, labels))
    out["patient_scores"] = scores
    return out


def run_cell(cohort: dict[str, PatientData], cfg: ExperimentConfig, trial: int, fold: int, assignment) -> dict:
    """Train and score one (trial, fold); component failures mark the cell invalid."""
    cell = {
        "trial": trial,
        "fold": fold,
        "train_patients": len(set(assignment.train)),
        "test_patients": len(assignment.test),
        "valid": True,
        "error": None,
        "epochs": [],
    }
    try:
        overlap = set(assignment.train) & set(assignment.test)
        if overlap:
            raise PartialFoldFailure(f"patients in both train and test: {sorted(overlap)}")
        empty = [pid for pid in assignment.test if cohort[pid].inputs.shape[0] == 0]
        if empty:
            raise PartialFoldFailure(f"test patients without usable windows: {empty}")
        xs, ys = [], []
        for pid in assignment.train:
            d = cohort[pid]
            rows = d.inputs.reshape(-1, d.inputs.shape[-1])
            xs.append(rows)
            ys.append(np.full(rows.shape[0], d.label.y, dtype=np.int64))
        X = np.concatenate(xs)
        y = np.concatenate(ys)
        if X.shape[0] == 0:
            raise PartialFoldFailure("no usable training windows")
        rng = np.random.default_rng([cfg.master_seed, trial, fold])
        idx = oversample_indices(y, rng)
        X, y = X[idx], y[idx]
        cell["train_rows"] = int(X.shape[0])
        model_seed = int(rng.integers(0, 2**31 - 1))
        labels = {pid: cohort[pid].label.y for pid in assignment.test}

        if cfg.model == "rf":
            rf = RandomForestClassifier(n_trees=cfg.n_trees, max_depth=cfg.max_depth, random_state=model_seed).fit(X, y)
            probs = {pid: rf.predict_proba(cohort[pid].inputs)[:, 1] for pid in assignment.test}
            cell["epochs"].append(_score_epoch(1, probs, labels))
        else:
            est = DenseNetClassifier(
                input_mode=cfg.input_mode,
                blocks=cfg.blocks,
                growth_rate=cfg.growth_rate,
                learning_rate=cfg.learning_rate,
                momentum=cfg.momentum,
                batch_size=cfg.batch_size,
                epochs=cfg.epochs,
                scaling=cfg.scaling,
                random_state=model_seed,
            )
            test_windows = [(pid, w) for pid in assignment.test for w in cohort[pid].inputs]

            def on_epoch(epoch, model):
                p = model.window_proba([w for _, w in test_windows])
                probs = {pid: p[[i for i, (q, _) in enumerate(test_windows) if q == pid]] for pid in assignment.test}
                cell["epochs"].append(_score_epoch(epoch, probs, labels))

            est.fit(X, y, on_epoch=on_epoch)
            cell["loss_trace"] = est.loss_trace_
    except VwdError as exc:
        cell["valid"] = False
        cell["error"] = f"{type(exc).__name__}: {exc}"
        cell["epochs"] = []
    return cell


@dataclass
class MetricsReport:
    config: dict
    cells: list[dict]
    per_trial: dict
    aggregate: dict
    by_epoch: dict
    per_fold: dict
    roc: dict
    patients: dict
    split_plan: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return _clean(asdict(self))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1, allow_nan=False)

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json() + "\n", encoding="utf-8")
        return path

    def metric(self, name: str = "auc") -> float:
        v = self.aggregate[name]["mean"]
        return math.nan if v is None else v

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        return cls(**{k: d.get(k, {}) for k in cls.__dataclass_fields__})

    @classmethod
    def load(cls, path) -> "MetricsReport":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _aggregate(cells: list[dict], cfg: ExperimentConfig):
    n_folds = max((c["fold"] for c in cells), default=-1) + 1
    by_epoch, per_trial_all = {}, {}
    for e in range(1, cfg.n_epochs + 1):
        per_trial = {m: [] for m in METRICS}
        for t in range(cfg.trials):
            rows = [c["epochs"][e - 1] for c in cells if c["trial"] == t and c["valid"]]
            for m in METRICS:
                vals = np.array([r[m] for r in rows], dtype=np.float64)
                vals = vals[~np.isnan(vals)]
                per_trial[m].append(float(vals.mean()) if vals.size else math.nan)
        per_trial_all[str(e)] = per_trial
        by_epoch[str(e)] = {m: t_interval(per_trial[m]).to_dict() for m in METRICS}
    final = str(cfg.n_epochs)
    per_fold = {}
    for f in range(n_folds):
        rows = [c["epochs"][-1] for c in cells if c["fold"] == f and c["valid"]]
        per_fold[str(f + 1)] = {m: t_interval([r[m] for r in rows]).to_dict() for m in METRICS}
    return per_trial_all, by_epoch, by_epoch[final], per_fold


def _roc(cells: list[dict], cfg: ExperimentConfig, cohort) -> dict:
    curves = []
    for t in range(cfg.trials):
        scores = {}
        for c in cells:
            if c["trial"] == t and c["valid"]:
                scores.update(c["epochs"][-1]["patient_scores"])
        labels = [cohort[p].label.y for p in scores]
        if len(set(labels)) < 2:
            continue
        fpr, tpr = roc_curve(list(scores.values()), labels)
        curves.append(interpolate_roc(fpr, tpr, ROC_GRID))
    out = {"fpr": ROC_GRID.tolist(), "n_curves": len(curves)}
    if not curves:
        return out
    a = np.array(curves)
    out["tpr_mean"] = a.mean(axis=0).tolist()
    if len(curves) >= 2:
        _, lo, hi = t_band(a)
        out["tpr_low"] = np.clip(lo, 0, 1).tolist()
        out["tpr_high"] = np.clip(hi, 0, 1).tolist()
    return out


def run_experiment(series_list, cfg: ExperimentConfig, threads: int = 1, cohort: dict | None = None) -> MetricsReport:
    """Every (trial, fold) cell of ``cfg`` on the given patients.

    Cells run in a thread pool of ``threads`` workers; each owns an RNG seeded by
    ``(master_seed, trial, fold)`` and BLAS is pinned to one thread, so the report does not
    depend on ``threads``.
    """
    if cohort is None:
        cohort = prepare_cohort(series_list, cfg, threads)
    patients = {pid: d.label for pid, d in cohort.items()}
    plan = make_split_plan(patients, cfg.scheme, cfg.trials, cfg.k, cfg.train_fraction, cfg.master_seed)
    tasks = [(t, f, a) for t, folds in enumerate(plan.assignments) for f, a in enumerate(folds)]
    cells = _map(lambda task: run_cell(cohort, cfg, *task), tasks, threads)
    per_trial, by_epoch, aggregate, per_fold = _aggregate(cells, cfg)
    pinfo = {
        pid: {"label": d.label.value, "windows": d.n_windows, "usable_windows": int(d.inputs.shape[0]), "degenerate_windows": d.n_degenerate}
        for pid, d in sorted(cohort.items())
    }
    return MetricsReport(
        config=cfg.to_dict(),
        cells=cells,
        per_trial=per_trial,
        aggregate=aggregate,
        by_epoch=by_epoch,
        per_fold=per_fold,
        roc=_roc(cells, cfg, cohort),
        patients=pinfo,
        split_plan=plan.to_dict(),
    )


@dataclass
class SweepReport:
    """Baselines plus one report per (model, cutoff), laid out like the ablation table."""

    cutoffs: list[float]
    baselines: dict[str, MetricsReport]
    filtered: dict[str, dict[str, MetricsReport]]

    def to_dict(self) -> dict:
        return {
            "cutoffs": list(self.cutoffs),
            "baselines": {m: r.to_dict() for m, r in self.baselines.items()},
            "filtered": {m: {c: r.to_dict() for c, r in by.items()} for m, by in self.filtered.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1, allow_nan=False)

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json() + "\n", encoding="utf-8")
        return path

    def auc(self, model: str, cutoff=None) -> float:
        rep = self.baselines[model] if cutoff is None else self.filtered[model][cutoff_key(cutoff)]
        return rep.metric("auc")

    @classmethod
    def from_dict(cls, d: dict) -> "SweepReport":
        return cls(
            list(d["cutoffs"]),
            {m: MetricsReport.from_dict(r) for m, r in d["baselines"].items()},
            {m: {c: MetricsReport.from_dict(r) for c, r in by.items()} for m, by in d["filtered"].items()},
        )

    @classmethod
    def load(cls, path) -> "SweepReport":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def cutoff_key(cutoff: float) -> str:
    return f"{float(cutoff):g}"


def ablation_sweep(
    series_list,
    base: ExperimentConfig,
    models=MODELS,
    cutoffs=DEFAULT_CUTOFFS,
    threads: int = 1,
    model_overrides: dict | None = None,
) -> SweepReport:
    """Unfiltered baseline and one lowpass run per cutoff for every model.

    ``model_overrides`` maps a model name to config fields replaced for that model only.
    """
    cutoffs = [float(c) for c in cutoffs]
    for c in cutoffs:
        if not 0 < c <= 25:
            raise ConfigInvalid(f"cutoff {c} Hz outside (0, 25]")
    series_list = list(series_list)
    baselines, filtered = {}, {}
    for model in models:
        cfg = base.for_model(model)
        if model_overrides and model in model_overrides:
            cfg = replace(cfg, **model_overrides[model])
        baselines[model] = run_experiment(series_list, replace(cfg, ablation=None), threads)
        filtered[model] = {
            cutoff_key(c): run_experiment(series_list, replace(cfg, ablation=AblationBand.lowpass(c)), threads)
            for c in cutoffs
        }
    return SweepReport(cutoffs, baselines, filtered)
