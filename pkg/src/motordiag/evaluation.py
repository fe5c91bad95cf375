"""
Repeated random-split evaluation of the DNN and BNN classifiers.

Each trial draws a stratified train/test split with seed `base_seed + t`,
trains the chosen model with that seed, and scores the test side as a 2x2
confusion matrix (positive class = fault).
"""
from __future__ import annotations

import csv
import enum
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import bnn, dnn, spectral
from .audio import ClassLabel, LabeledDataset
from .errors import DatasetTooSmall, IoFailure, LengthMismatch
from .synth import SynthSpec, gen_dataset

log = logging.getLogger(__name__)

REPORT_VERSION = "report-v1"


class ModelKind(enum.Enum):
    DNN = "dnn"
    BNN = "bnn"


@dataclass(frozen=True)
class ConfusionMatrix:
    tn: int = 0
    fp: int = 0
    fn: int = 0
    tp: int = 0

    @property
    def total(self) -> int:
        return self.tn + self.fp + self.fn + self.tp

    def accuracy(self) -> float:
        return (self.tn + self.tp) / self.total if self.total else float("nan")

    def fault_recall(self) -> Optional[float]:
        d = self.tp + self.fn
        return self.tp / d if d else None

    def healthy_recall(self) -> Optional[float]:
        d = self.tn + self.fp
        return self.tn / d if d else None

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.tn + other.tn, self.fp + other.fp,
                               self.fn + other.fn, self.tp + other.tp)


def confusion(predictions: Sequence[int], labels: Sequence[int]) -> ConfusionMatrix:
    p = np.asarray(predictions).astype(np.int64).ravel()
    t = np.asarray(labels).astype(np.int64).ravel()
    if p.size != t.size:
        raise LengthMismatch(f"{p.size} predictions for {t.size} labels")
    if p.size == 0:
        raise LengthMismatch("confusion needs at least one prediction")
    return ConfusionMatrix(
        tn=int(np.sum((p == 0) & (t == 0))),
        fp=int(np.sum((p == 1) & (t == 0))),
        fn=int(np.sum((p == 0) & (t == 1))),
        tp=int(np.sum((p == 1) & (t == 1))),
    )


# --------------------------------------------------------------------------
# splitting


def _train_quota(sizes: Dict, ratio: float, n_train: int) -> Dict:
    """Per-class train counts summing to n_train, each within 1 of ratio * size.

    Inside that band, classes with two or more members keep one item on each
    side when the total allows it.
    """
    exact = {l: round(ratio * n, 9) for l, n in sizes.items()}
    band_lo = {l: max(0, math.ceil(exact[l] - 1)) for l in sizes}
    band_hi = {l: min(n, math.floor(exact[l] + 1)) for l, n in sizes.items()}
    lo = {l: max(band_lo[l], 1) if n >= 2 else band_lo[l] for l, n in sizes.items()}
    hi = {l: min(band_hi[l], n - 1) if n >= 2 else band_hi[l] for l, n in sizes.items()}
    quota = {l: min(max(math.floor(exact[l]), lo[l]), hi[l]) for l in sizes}
    order = list(sizes)
    diff = n_train - sum(quota.values())
    while diff:
        step = 1 if diff > 0 else -1
        # move the class whose quota is furthest from exact in the needed direction
        ranked = sorted(order, key=lambda l: (step * (quota[l] - exact[l]), order.index(l)))
        for label in ranked:
            if lo[label] <= quota[label] + step <= hi[label]:
                quota[label] += step
                diff -= step
                break
        else:
            # the both-sides preference cannot absorb the remainder
            lo, hi = band_lo, band_hi
    return quota


def split(labels, ratio: float = 0.8, seed: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    """Stratified random split; returns sorted (train, test) index arrays.

    The train side gets floor(ratio * n) items, allotted to classes in
    proportion to their size (each within one item of exact).
    """
    if isinstance(labels, LabeledDataset):
        labels = labels.labels
    labels = list(labels)
    n = len(labels)
    if not 0.0 < ratio < 1.0:
        raise ValueError("ratio must lie strictly between 0 and 1")
    if n < 2:
        raise DatasetTooSmall(f"cannot split {n} item(s)")
    rng = np.random.default_rng([int(seed) & (2**64 - 1), 7])
    perm = rng.permutation(n)
    members: Dict = {}
    for i in perm:
        members.setdefault(labels[i], []).append(int(i))
    members = {k: members[k] for k in sorted(members, key=_label_key)}
    quota = _train_quota({k: len(v) for k, v in members.items()}, ratio,
                         math.floor(round(ratio * n, 9)))
    train, test = [], []
    for label, idx in members.items():
        train.extend(idx[:quota[label]])
        test.extend(idx[quota[label]:])
    return np.array(sorted(train), dtype=np.int64), np.array(sorted(test), dtype=np.int64)


def _label_key(label) -> str:
    return label.value if isinstance(label, ClassLabel) else str(label)


# --------------------------------------------------------------------------
# features and models


@dataclass(frozen=True)
class FeatureTable:
    x: np.ndarray
    labels: tuple
    scale_reference: float = 1.0

    @property
    def y(self) -> np.ndarray:
        return np.array([l.binary() for l in self.labels], dtype=np.int64)

    def __len__(self):
        return len(self.labels)


def feature_table(dataset: LabeledDataset, n_features: int,
                  band=spectral.AUDIBLE_BAND) -> FeatureTable:
    feats = spectral.featurize(dataset.clips, n_features, band)
    return FeatureTable(spectral.stack(feats), tuple(dataset.labels), feats[0].scale_reference)


@dataclass(frozen=True)
class EvalConfig:
    ratio: float = 0.8
    dnn_features: int = spectral.DEFAULT_FEATURES
    bnn_features: int = 5
    band: Tuple[float, float] = spectral.AUDIBLE_BAND
    dnn: dnn.DnnTrainConfig = field(default_factory=dnn.DnnTrainConfig)
    bnn_spec: bnn.BnnSpec = field(default_factory=bnn.BnnSpec)
    sampler: str = "hmc"
    hmc: bnn.HmcConfig = field(default_factory=bnn.HmcConfig)
    mh: bnn.MhConfig = field(default_factory=bnn.MhConfig)

    def features_for(self, kind: ModelKind) -> int:
        return self.dnn_features if kind is ModelKind.DNN else self.bnn_features

    def to_dict(self) -> dict:
        return {
            "ratio": self.ratio,
            "dnn_features": self.dnn_features,
            "bnn_features": self.bnn_features,
            "band": list(self.band),
            "dnn": self.dnn.to_dict(),
            "bnn_spec": self.bnn_spec.to_dict(),
            "sampler": self.sampler,
            "hmc": vars_of(self.hmc),
            "mh": vars_of(self.mh),
        }


def vars_of(obj) -> dict:
    return {k: getattr(obj, k) for k in obj.__dataclass_fields__}


def fit_dnn(x, y, cfg: EvalConfig, seed: int):
    params, history = dnn.train_dnn(x, y, replace(cfg.dnn, seed=seed))
    return params, history


def fit_bnn(x, y, cfg: EvalConfig, seed: int) -> bnn.PosteriorEnsemble:
    spec = replace(cfg.bnn_spec, input_dim=x.shape[1])
    if cfg.sampler == "mh":
        return bnn.sample_posterior_mh(spec, x, y, replace(cfg.mh, seed=seed))
    if cfg.sampler == "hmc":
        return bnn.sample_posterior_hmc(spec, x, y, replace(cfg.hmc, seed=seed))
    raise ValueError(f"unknown sampler {cfg.sampler!r}")


# --------------------------------------------------------------------------
# trials


@dataclass(frozen=True)
class TrialResult:
    trial: int
    seed: int
    matrix: ConfusionMatrix

    @property
    def accuracy(self) -> float:
        return self.matrix.accuracy()

    def to_dict(self) -> dict:
        m = self.matrix
        return {
            "trial": self.trial, "seed": self.seed,
            "tn": m.tn, "fp": m.fp, "fn": m.fn, "tp": m.tp,
            "accuracy": self.accuracy,
            "healthy_recall": m.healthy_recall(),
            "fault_recall": m.fault_recall(),
        }


def _median(values) -> Optional[float]:
    vals = [v for v in values if v is not None]
    return float(np.median(vals)) if vals else None


@dataclass
class ExperimentReport:
    model_kind: ModelKind
    trials: List[TrialResult]
    config: dict
    histograms: Optional[list] = None

    @property
    def accuracies(self) -> np.ndarray:
        return np.array([t.accuracy for t in self.trials])

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def std_accuracy(self) -> float:
        return float(np.std(self.accuracies))

    @property
    def healthy_recalls(self) -> list:
        return [t.matrix.healthy_recall() for t in self.trials]

    @property
    def fault_recalls(self) -> list:
        return [t.matrix.fault_recall() for t in self.trials]

    def summary(self) -> dict:
        return {
            "model_kind": self.model_kind.value,
            "n_trials": len(self.trials),
            "mean_accuracy": self.mean_accuracy,
            "std_accuracy": self.std_accuracy,
            "min_accuracy": float(self.accuracies.min()),
            "max_accuracy": float(self.accuracies.max()),
            "median_healthy_recall": _median(self.healthy_recalls),
            "median_fault_recall": _median(self.fault_recalls),
        }

    def to_dict(self) -> dict:
        d = {"version": REPORT_VERSION, "kind": "trials"}
        d.update(self.summary())
        d["config"] = self.config
        d["trials"] = [t.to_dict() for t in self.trials]
        return d


def _as_table(data, kind: ModelKind, cfg: EvalConfig) -> FeatureTable:
    if isinstance(data, FeatureTable):
        return data
    return feature_table(data, cfg.features_for(kind), cfg.band)


def run_trials(model_kind: Union[ModelKind, str], data, n_trials: int = 100,
               base_seed: int = 0, cfg: Optional[EvalConfig] = None,
               provenance: str = "") -> ExperimentReport:
    """Train and score `model_kind` on `n_trials` stratified splits."""
    kind = ModelKind(model_kind)
    cfg = cfg or EvalConfig()
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    if isinstance(data, LabeledDataset) and not provenance:
        provenance = data.provenance
    table = _as_table(data, kind, cfg)
    hist_counts: Dict = {}
    results = []
    for t in range(n_trials):
        seed = base_seed + t
        train, test = split(table.labels, cfg.ratio, seed)
        xtr, ytr = table.x[train], table.y[train]
        xte, yte = table.x[test], table.y[test]
        if kind is ModelKind.DNN:
            params, _ = fit_dnn(xtr, ytr, cfg, seed)
            probs = dnn.predict_dnn(params, xte)
        else:
            ensemble = fit_bnn(xtr, ytr, cfg, seed)
            probs = bnn.predict_proba(ensemble, xte)
            test_labels = [table.labels[i] for i in test]
            for h in bnn.output_distribution_by_class(ensemble, xte, test_labels):
                hist_counts[h.label] = hist_counts.get(h.label, 0) + h.counts
        m = confusion(dnn.classify(probs), yte)
        results.append(TrialResult(t, seed, m))
        log.info("%s trial %d seed %d accuracy %.3f", kind.value, t, seed, m.accuracy())
    config = {
        "model_kind": kind.value,
        "n_trials": n_trials,
        "base_seed": base_seed,
        "dataset": {"provenance": provenance, "size": len(table),
                    "counts": _count_labels(table.labels)},
        "eval": cfg.to_dict(),
    }
    hists = None
    if hist_counts:
        edges = np.linspace(0.0, 1.0, bnn.HIST_BINS + 1)
        hists = [bnn.ClassHistogram(l, edges, hist_counts[l], _hist_center(edges, hist_counts[l]))
                 for l in ClassLabel if l in hist_counts]
    return ExperimentReport(kind, results, config, hists)


def _hist_center(edges, counts) -> float:
    mids = 0.5 * (edges[:-1] + edges[1:])
    total = counts.sum()
    return float(mids @ counts / total) if total else float("nan")


def _count_labels(labels) -> dict:
    out = {}
    for l in labels:
        out[_label_key(l)] = out.get(_label_key(l), 0) + 1
    return dict(sorted(out.items()))


# --------------------------------------------------------------------------
# imbalance study


def skewed_counts(spec: SynthSpec, skew: float) -> dict:
    """Class counts whose healthy share is `skew`; fault classes keep their size."""
    if not 0.0 < skew < 1.0:
        raise ValueError("skew must lie strictly between 0 and 1")
    n_fault = spec.clips_per_class * (len(ClassLabel) - 1)
    healthy = int(round(skew / (1.0 - skew) * n_fault))
    counts = {label: spec.clips_per_class for label in ClassLabel}
    counts[ClassLabel.HEALTHY] = healthy
    return counts


@dataclass
class ImbalanceRow:
    skew: float
    counts: dict
    reports: Dict[ModelKind, ExperimentReport]

    def to_dict(self) -> dict:
        return {
            "skew": self.skew,
            "counts": {l.token: n for l, n in self.counts.items()},
            "models": {k.value: r.to_dict() for k, r in self.reports.items()},
        }


@dataclass
class ImbalanceReport:
    rows: List[ImbalanceRow]
    config: dict

    def row(self, skew: float) -> ImbalanceRow:
        return min(self.rows, key=lambda r: abs(r.skew - skew))

    def to_dict(self) -> dict:
        return {
            "version": REPORT_VERSION,
            "kind": "imbalance",
            "config": self.config,
            "rows": [r.to_dict() for r in self.rows],
        }


def imbalance_experiment(dataset_spec: SynthSpec, skew: float, n_trials: int = 20,
                         base_seed: int = 0, cfg: Optional[EvalConfig] = None,
                         control: bool = True) -> ImbalanceReport:
    """Both model kinds on identical splits of a dataset with healthy share `skew`.

    With `control`, a balanced row (skew 0.5) is run as well.
    """
    cfg = cfg or EvalConfig()
    skews = [skew] + ([0.5] if control and abs(skew - 0.5) > 1e-12 else [])
    rows = []
    for s in skews:
        counts = skewed_counts(dataset_spec, s)
        data = gen_dataset(dataset_spec, counts)
        reports = {
            kind: run_trials(kind, data, n_trials, base_seed, cfg)
            for kind in (ModelKind.DNN, ModelKind.BNN)
        }
        rows.append(ImbalanceRow(s, counts, reports))
    config = {"synth": dataset_spec.to_dict(), "skew": skew, "control": control,
              "n_trials": n_trials, "base_seed": base_seed, "eval": cfg.to_dict()}
    return ImbalanceReport(rows, config)


# --------------------------------------------------------------------------
# emission


def _dump_json(path: Path, doc: dict):
    text = json.dumps(doc, indent=1, sort_keys=True, allow_nan=False) + "\n"
    path.write_text(text, encoding="utf-8")


def _write_trials_csv(path: Path, report: ExperimentReport):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["trial", "seed", "tn", "fp", "fn", "tp", "accuracy"])
        for t in report.trials:
            m = t.matrix
            w.writerow([t.trial, t.seed, m.tn, m.fp, m.fn, m.tp, repr(t.accuracy)])


def _emit_experiment(report: ExperimentReport, out: Path, stem: str) -> dict:
    doc = report.to_dict()
    trials_csv = out / f"{stem}_trials.csv"
    _write_trials_csv(trials_csv, report)
    artifacts = {"trials_csv": trials_csv.name}
    if report.histograms:
        hist_csv = out / f"{stem}_histogram.csv"
        bnn.write_histogram_csv(hist_csv, report.histograms)
        artifacts["histogram_csv"] = hist_csv.name
    doc["artifacts"] = artifacts
    return doc


def emit_report(report: Union[ExperimentReport, ImbalanceReport], out_dir,
                stem: str = "report") -> Path:
    """Write `<stem>.json` plus per-trial CSVs into `out_dir`; return the JSON path."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        if isinstance(report, ExperimentReport):
            doc = _emit_experiment(report, out, stem)
        else:
            doc = report.to_dict()
            for row, row_doc in zip(report.rows, doc["rows"]):
                for kind, sub in row.reports.items():
                    sub_stem = f"{stem}_skew{row.skew:.3f}_{kind.value}"
                    row_doc["models"][kind.value] = _emit_experiment(sub, out, sub_stem)
        path = out / f"{stem}.json"
        _dump_json(path, doc)
    except OSError as exc:
        raise IoFailure(f"cannot write report to {out}: {exc}") from exc
    return path


def load_report(path) -> dict:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("version") != REPORT_VERSION:
        raise ValueError(f"{path} is not a {REPORT_VERSION} document")
    return doc
