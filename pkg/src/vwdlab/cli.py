"""``vwdlab`` command line.

Exit status: 0 success, 1 runtime error, 2 usage error. Errors go to stderr as
``vwdlab: <usage-error|runtime-error>: <detail>``. Outputs given as bare names land in
``$VWDLAB_OUTPUT_DIR`` (default: the working directory).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .cnn.estimator import DenseNetClassifier
from .cnn.inputs import INPUT_MODES
from .cohort import Label, load_cohort, load_manifest
from .errors import VwdError
from .evaluation.experiment import DEFAULT_CUTOFFS, ExperimentConfig, MetricsReport, SweepReport, ablation_sweep, run_experiment
from .evaluation.metrics import patient_label, patient_score
from .evaluation.splits import SplitScheme, oversample_indices
from .forest import RandomForestClassifier, load_forest, save_forest
from .pipeline import cam_document, feature_rows, read_feature_csv, window_instances, write_feature_csv
from .report import gradcam_svg, roc_svg, table1_rows, table2_rows, write_csv, write_text
from .segmentation import SegmentationConfig, segment_series
from .spectral import AblationBand, band_ablate
from .synth import SynthConfig, control_cohort_config, generate_cohort, planted_cohort_config

OUTPUT_ENV = "VWDLAB_OUTPUT_DIR"
PROG = "vwdlab"


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def out_path(value: str) -> Path:
    p = Path(value)
    if p.is_absolute() or p.parent != Path("."):
        return p
    return Path(os.environ.get(OUTPUT_ENV, ".")) / p


def positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def nonneg_float(text):
    v = float(text)
    if not v >= 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative number, got {text}")
    return v


def cutoff_list(text):
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad cutoff list {text!r}") from None
    if not vals or any(not 0 < v <= 25 for v in vals):
        raise argparse.ArgumentTypeError("cutoffs must be comma-separated values in (0, 25]")
    return vals


def lowpass_band(args) -> AblationBand | None:
    return None if args.lowpass is None else AblationBand.lowpass(args.lowpass)


def _seg_args(p):
    p.add_argument("--instance-length", type=positive_int, default=224)
    p.add_argument("--window-size", type=positive_int, default=20)
    p.add_argument("--onset-threshold", type=float, default=2.0)


def _seg(args) -> SegmentationConfig:
    return SegmentationConfig(args.onset_threshold, 5, args.instance_length, args.window_size)


def _lowpass_arg(p):
    p.add_argument("--lowpass", type=float, default=None, metavar="HZ", help="brick-wall lowpass before segmentation")


def _cnn_args(p):
    p.add_argument("--input-mode", choices=INPUT_MODES, default="raw")
    p.add_argument("--epochs", type=positive_int, default=10)
    p.add_argument("--lr", type=nonneg_float, default=0.001)
    p.add_argument("--momentum", type=nonneg_float, default=0.0)
    p.add_argument("--batch-size", type=positive_int, default=32)
    p.add_argument("--blocks", default="4,4", help="layers per dense block, comma-separated")
    p.add_argument("--scaling", choices=("none", "channel", "position"), default="channel")


def _blocks(text) -> tuple[int, ...]:
    try:
        blocks = tuple(int(b) for b in text.split(","))
    except ValueError:
        raise UsageError(f"bad --blocks {text!r}") from None
    if not blocks or min(blocks) < 1:
        raise UsageError("--blocks needs positive layer counts")
    return blocks


def build_parser() -> Parser:
    parser = Parser(prog=PROG, description="Ventilator flow ARDS workbench")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=Parser)

    p = sub.add_parser("synth", help="generate a synthetic cohort")
    p.add_argument("--patients", type=positive_int, default=20, help="patients per class")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--duration", type=float, default=300.0, help="seconds per patient")
    p.add_argument("--preset", choices=("default", "planted", "control"), default="default")
    p.add_argument("--noise", type=nonneg_float, default=None, help="white-noise sd (L/min)")
    p.add_argument("--out", required=True)

    p = sub.add_parser("segment", help="dump onsets, instances and windows")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", default="segments.json")
    _seg_args(p)

    p = sub.add_parser("filter", help="band-ablate every instance of a segment dump")
    p.add_argument("--input", required=True)
    p.add_argument("--out", default="filtered.json")
    p.add_argument("--low", type=nonneg_float, default=0.0)
    p.add_argument("--high", type=nonneg_float, required=True)
    p.add_argument("--drop-dc", action="store_true")

    p = sub.add_parser("featurize", help="window feature matrix as CSV")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", default="features.csv")
    _lowpass_arg(p)
    _seg_args(p)

    p = sub.add_parser("train-cnn", help="train the DenseNet on every window instance")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", default="cnn.npz")
    p.add_argument("--seed", type=int, default=0)
    _cnn_args(p)
    _lowpass_arg(p)
    _seg_args(p)

    p = sub.add_parser("train-rf", help="train the random forest on a feature CSV")
    p.add_argument("--features", required=True)
    p.add_argument("--out", default="forest.json")
    p.add_argument("--trees", type=positive_int, default=100)
    p.add_argument("--max-depth", type=positive_int, default=None)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("predict-rf", help="window and patient predictions from a forest")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", default="predictions.json")

    for name, helptext in (("evaluate", "cross-validated patient-level evaluation"), ("ablation-sweep", "lowpass sweep for CNN and RF")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--manifest", required=True)
        p.add_argument("--out", default=f"{name}.json")
        p.add_argument("--scheme", choices=[s.value for s in SplitScheme], default="kfold")
        p.add_argument("--k", type=positive_int, default=5)
        p.add_argument("--train-fraction", type=float, default=None)
        p.add_argument("--trials", type=positive_int, default=10)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--trees", type=positive_int, default=100)
        p.add_argument("--threads", type=positive_int, default=1)
        _cnn_args(p)
        _seg_args(p)
        if name == "evaluate":
            p.add_argument("--model", choices=("cnn", "rf"), default="cnn")
            _lowpass_arg(p)
        else:
            p.add_argument("--models", default="cnn,rf")
            p.add_argument("--cutoffs", type=cutoff_list, default=list(DEFAULT_CUTOFFS))

    p = sub.add_parser("gradcam", help="class-averaged Grad-CAM of a trained CNN")
    p.add_argument("--model", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", default="gradcam.json")
    p.add_argument("--max-per-class", type=positive_int, default=None)
    _lowpass_arg(p)
    _seg_args(p)

    p = sub.add_parser("report", help="CSV tables and SVG plots from report documents")
    p.add_argument("--evaluation", action="append", default=[], metavar="NAME=PATH", help="evaluate report (repeatable)")
    p.add_argument("--sweep", default=None)
    p.add_argument("--gradcam", default=None)
    p.add_argument("--out", default="report")
    return parser


# -- commands -----------------------------------------------------------------


def cmd_synth(args):
    presets = {
        "default": lambda: SynthConfig(n_patients_per_class=args.patients, duration_s=args.duration, seed=args.seed),
        "planted": lambda: planted_cohort_config(args.patients, args.duration, args.seed),
        "control": lambda: control_cohort_config(args.patients, args.duration, args.seed),
    }
    cfg = presets[args.preset]()
    if args.noise is not None:
        cfg = replace(cfg, noise_sd=args.noise)
    manifest = generate_cohort(cfg, out_path(args.out))
    return f"wrote {len(manifest)} patients to {out_path(args.out)}"


def _series(args):
    return load_cohort(load_manifest(args.manifest))


def cmd_segment(args):
    seg = _seg(args)
    patients, instances = [], []
    for s in _series(args):
        onsets, inst, windows = segment_series(s, seg)
        patients.append(
            {
                "patient_id": s.patient_id,
                "label": s.label.value,
                "n_samples": len(s),
                "onsets": onsets,
                "windows": [w.onsets for w in windows],
            }
        )
        instances += [{"patient_id": s.patient_id, "label": s.label.value, "start_index": i.start_index, "values": i.values.tolist()} for i in inst]
    doc = {"segmentation": seg.__dict__, "patients": patients, "instances": instances}
    write_text(json.dumps(doc) + "\n", out_path(args.out))
    return f"{len(patients)} patients, {len(instances)} instances"


def cmd_filter(args):
    if args.low > args.high or args.high > 25:
        raise UsageError("need 0 <= --low <= --high <= 25")
    band = AblationBand(args.low, args.high, keep_dc=not args.drop_dc)
    doc = json.loads(Path(args.input).read_text(encoding="utf-8"))
    for inst in doc.get("instances", []):
        inst["values"] = band_ablate(np.asarray(inst["values"], dtype=np.float64), band).tolist()
    doc["filter"] = band.to_dict()
    write_text(json.dumps(doc) + "\n", out_path(args.out))
    return f"filtered {len(doc.get('instances', []))} instances"


def cmd_featurize(args):
    rows, total, bad = feature_rows(_series(args), _seg(args), lowpass_band(args))
    write_feature_csv(rows, out_path(args.out))
    return f"{len(rows)} of {total} windows featurized ({bad} degenerate)"


def cmd_train_cnn(args):
    X, y, _ = window_instances(_series(args), _seg(args), lowpass_band(args))
    idx = oversample_indices(y, np.random.default_rng(args.seed))
    model = DenseNetClassifier(
        input_mode=args.input_mode,
        blocks=_blocks(args.blocks),
        learning_rate=args.lr,
        momentum=args.momentum,
        batch_size=args.batch_size,
        epochs=args.epochs,
        scaling=args.scaling,
        random_state=args.seed,
    ).fit(X[idx], y[idx])
    model.save(out_path(args.out))
    return f"trained on {idx.size} instances; final loss {model.loss_trace_[-1]:.4f}"


def cmd_train_rf(args):
    X, y, _ = read_feature_csv(args.features)
    model = RandomForestClassifier(n_trees=args.trees, max_depth=args.max_depth, random_state=args.seed).fit(X, y)
    save_forest(model.forest_, out_path(args.out))
    return f"{args.trees} trees; oob accuracy {model.oob_score_}"


def cmd_predict_rf(args):
    from .forest import rf_predict_proba

    forest = load_forest(args.model)
    X, y, ids = read_feature_csv(args.features)
    p = rf_predict_proba(forest, X)
    by_patient = {}
    for pid, prob in zip(ids, p):
        by_patient.setdefault(pid, []).append(float(prob))
    patients = {}
    for pid, probs in sorted(by_patient.items()):
        score = patient_score(np.array(probs) > 0.5)
        patients[pid] = {"window_probabilities": probs, "score": score, "ards": bool(patient_label(score))}
    write_text(json.dumps({"patients": patients}, sort_keys=True, indent=1) + "\n", out_path(args.out))
    return f"{len(ids)} windows, {len(patients)} patients"


def _experiment_config(args, model: str) -> ExperimentConfig:
    return ExperimentConfig(
        model=model,
        input_mode="features" if model == "rf" else args.input_mode,
        scheme=args.scheme,
        k=args.k,
        train_fraction=args.train_fraction,
        trials=args.trials,
        epochs=args.epochs,
        master_seed=args.seed,
        segmentation=_seg(args),
        learning_rate=args.lr,
        momentum=args.momentum,
        batch_size=args.batch_size,
        blocks=_blocks(args.blocks),
        scaling=args.scaling,
        n_trees=args.trees,
    )


def cmd_evaluate(args):
    cfg = replace(_experiment_config(args, args.model), ablation=lowpass_band(args))
    report = run_experiment(_series(args), cfg, threads=args.threads)
    report.save(out_path(args.out))
    return f"AUC {report.metric('auc'):.3f} over {args.trials} trials"


def cmd_ablation_sweep(args):
    models = [m.strip() for m in args.models.split(",") if m.strip()]
    if not models or any(m not in ("cnn", "rf") for m in models):
        raise UsageError("--models takes a comma-separated subset of cnn,rf")
    base = _experiment_config(args, "cnn")
    sweep = ablation_sweep(_series(args), base, models, args.cutoffs, threads=args.threads)
    sweep.save(out_path(args.out))
    return f"{len(models)} models x {len(args.cutoffs)} cutoffs"


def cmd_gradcam(args):
    model = DenseNetClassifier.load(args.model)
    X, y, _ = window_instances(_series(args), _seg(args), lowpass_band(args))
    doc = cam_document(model, X, y, args.max_per_class)
    write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n", out_path(args.out))
    return f"Grad-CAM over {X.shape[0]} instances"


def cmd_report(args):
    if not (args.evaluation or args.sweep or args.gradcam):
        raise UsageError("report needs at least one of --evaluation, --sweep, --gradcam")
    named = []
    for item in args.evaluation:
        name, sep, path = item.partition("=")
        if not sep:
            name, path = Path(item).stem, item
        named.append((name, path))
    out = out_path(args.out)
    written = []
    curves = {}
    for name, path in named:
        rep = MetricsReport.load(path)
        written.append(write_csv(table1_rows(rep), out / f"table1_{name}.csv"))
        curves[name] = rep.roc
    if args.sweep:
        sweep = SweepReport.load(args.sweep)
        written.append(write_csv(table2_rows(sweep), out / "table2.csv"))
        curves.update({m.upper(): r.roc for m, r in sweep.baselines.items()})
    if curves:
        written.append(write_text(roc_svg(curves), out / "roc.svg"))
    if args.gradcam:
        doc = json.loads(Path(args.gradcam).read_text(encoding="utf-8"))
        written.append(write_text(gradcam_svg(doc), out / "gradcam.svg"))
    return "wrote " + ", ".join(str(p) for p in written)


COMMANDS = {
    "synth": cmd_synth,
    "segment": cmd_segment,
    "filter": cmd_filter,
    "featurize": cmd_featurize,
    "train-cnn": cmd_train_cnn,
    "train-rf": cmd_train_rf,
    "predict-rf": cmd_predict_rf,
    "evaluate": cmd_evaluate,
    "ablation-sweep": cmd_ablation_sweep,
    "gradcam": cmd_gradcam,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "lowpass", None) is not None and not 0 < args.lowpass <= 25:
            raise UsageError("--lowpass must lie in (0, 25]")
        if getattr(args, "blocks", None) is not None:
            _blocks(args.blocks)
        message = COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"{PROG}: usage-error: {exc}", file=sys.stderr)
        return 2
    except (VwdError, OSError, ValueError, KeyError) as exc:
        print(f"{PROG}: runtime-error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    if message:
        print(message)
    return 0


if __name__ == "__main__":
    sys.exit(main())
