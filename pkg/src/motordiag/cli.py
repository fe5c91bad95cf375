"""
Command-line entry point.

    motor-diag synth      --out DIR               synthetic dataset + manifest
    motor-diag featurize  --input DIR --out CSV   FFT feature table
    motor-diag train      --model dnn|bnn ...     mlp-v1 / bnn-v1 model file
    motor-diag evaluate   --model dnn|bnn ...     repeated-split report
    motor-diag predict    --model-file F a.wav    per-clip verdicts
    motor-diag report     --report R.json         summarise / emit histograms

Exit codes: 0 success, 1 usage error, 2 runtime or data error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import audio, bnn, config, dnn, evaluation, nn, spectral, synth
from .errors import EmptyDataset, ModelFeatureMismatch, MotorDiagError

log = logging.getLogger("motordiag")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2
_DEFAULTS = config.RunConfig()


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _opt(p, flag, default_text, help_text, **kw):
    p.add_argument(flag, help=f"{help_text} (default: {default_text})", **kw)


def _common(p):
    _opt(p, "--config", "none", "JSON run configuration file", metavar="FILE")
    _opt(p, "--seed", f"{_DEFAULTS.seed}, or ${config.SEED_ENV}", "master seed", type=int)
    _opt(p, "--verbose", "off", "log progress to stderr", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="motor-diag", description="Acoustic motor fault detection.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True
    s, f, d, b, e = (_DEFAULTS.synth, _DEFAULTS.features, _DEFAULTS.dnn,
                     _DEFAULTS.bnn, _DEFAULTS.evaluate)

    p = sub.add_parser("synth", help="write a synthetic dataset")
    _common(p)
    _opt(p, "--out", "required", "output directory", required=True, metavar="DIR")
    _opt(p, "--healthy", "--clips-per-class", "number of healthy clips", type=int)
    _opt(p, "--clips-per-class", s.clips_per_class, "clips per class", type=int)
    _opt(p, "--noise-std", s.noise_std, "additive noise level", type=float)
    _opt(p, "--base-hz", s.base_hz, "rotation fundamental in Hz", type=float)
    _opt(p, "--sample-rate", s.sample_rate_hz, "sample rate in Hz", type=int)
    _opt(p, "--duration", s.duration_s, "clip length in seconds", type=float)

    p = sub.add_parser("featurize", help="WAV dataset to feature CSV")
    _common(p)
    _opt(p, "--input", "required", "dataset directory", required=True, metavar="DIR")
    _opt(p, "--manifest", "DIR/manifest.csv if present", "label manifest", metavar="FILE")
    _opt(p, "--out", "required", "feature CSV to write", required=True, metavar="CSV")
    _opt(p, "--features", f.count, "feature vector length", type=int)
    _opt(p, "--window", f.window_seconds, "segment length in seconds", type=float)
    _opt(p, "--lo-hz", f.lo_hz, "lower band edge", type=float)
    _opt(p, "--hi-hz", f.hi_hz, "upper band edge", type=float)

    p = sub.add_parser("train", help="train one model on a feature CSV")
    _common(p)
    _opt(p, "--model", "required", "model kind", required=True, choices=["dnn", "bnn"])
    _opt(p, "--features-csv", "required", "feature CSV from featurize", required=True, metavar="CSV")
    _opt(p, "--out", "required", "model file to write", required=True, metavar="FILE")
    _opt(p, "--curve", "OUT with _curve.csv suffix", "DNN learning-curve CSV", metavar="CSV")
    _opt(p, "--epochs", d.epochs, "DNN epochs", type=int)
    _opt(p, "--learning-rate", d.learning_rate, "DNN learning rate", type=float)
    _opt(p, "--lam", d.lam, "DNN L2 strength", type=float)
    _opt(p, "--batch-size", d.batch_size, "DNN mini-batch size", type=int)
    _opt(p, "--momentum", d.momentum, "DNN momentum", type=float)
    _opt(p, "--sampler", b.sampler, "BNN sampler", choices=["hmc", "mh"])
    _opt(p, "--chains", b.chains, "BNN chains", type=int)
    _opt(p, "--draws", b.draws, "BNN HMC post-warmup draws per chain", type=int)
    _opt(p, "--warmup", b.warmup, "BNN HMC warmup iterations", type=int)
    _opt(p, "--leapfrog-steps", b.leapfrog_steps, "BNN HMC leapfrog steps", type=int)
    _opt(p, "--step-size", b.step_size, "BNN initial step size", type=float)
    _opt(p, "--prior-std", b.prior_std, "BNN prior standard deviation", type=float)

    p = sub.add_parser("evaluate", help="repeated random-split evaluation")
    _common(p)
    _opt(p, "--model", "bnn", "model kind (ignored with --imbalance)", choices=["dnn", "bnn"],
         default="bnn")
    _opt(p, "--input", "none", "WAV dataset directory", metavar="DIR")
    _opt(p, "--features-csv", "none", "feature CSV instead of a WAV directory", metavar="CSV")
    _opt(p, "--out", "report", "report directory", metavar="DIR", default="report")
    _opt(p, "--stem", "report", "report file stem", default="report")
    _opt(p, "--trials", e.trials, "number of random splits", type=int)
    _opt(p, "--ratio", e.ratio, "training share of each split", type=float)
    _opt(p, "--imbalance", "off", "healthy share for a synthetic imbalance study", type=float,
         metavar="SKEW")
    _opt(p, "--no-control", "off", "skip the balanced control row", action="store_true")

    p = sub.add_parser("predict", help="classify WAV files with a trained model")
    _common(p)
    _opt(p, "--model-file", "required", "mlp-v1 or bnn-v1 file", required=True, metavar="FILE")
    _opt(p, "--features", "the model's input width", "feature vector length", type=int)
    p.add_argument("wavs", nargs="+", metavar="WAV", help="recordings to classify (default: none)")

    p = sub.add_parser("report", help="summarise a report or emit BNN histograms")
    _common(p)
    _opt(p, "--report", "none", "report-v1 JSON to summarise", metavar="FILE")
    _opt(p, "--model-file", "none", "bnn-v1 file for histogram output", metavar="FILE")
    _opt(p, "--features-csv", "none", "labelled features for histogram output", metavar="CSV")
    _opt(p, "--out", "none", "histogram CSV to write", metavar="CSV")
    return parser


# --------------------------------------------------------------------------
# helpers


def _run_config(args) -> config.RunConfig:
    cfg = config.load(args.config)
    return config.override(cfg, None, seed=args.seed)


def _write_json(path, doc):
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _read_json(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _load_features(path):
    meta_path = spectral.features_meta_path(path)
    meta = _read_json(meta_path) if meta_path.is_file() else {}
    feats = spectral.read_features_csv(path, meta.get("scale_reference", 1.0))
    if not feats:
        raise EmptyDataset(f"{path} holds no feature rows")
    if any(f.label is None for f in feats):
        raise ValueError(f"{path}: every row needs a label")
    return feats, meta


# --------------------------------------------------------------------------
# subcommands


def cmd_synth(args) -> int:
    cfg = _run_config(args)
    cfg = config.override(cfg, "synth", clips_per_class=args.clips_per_class,
                          noise_std=args.noise_std, base_hz=args.base_hz,
                          sample_rate_hz=args.sample_rate, duration_s=args.duration)
    spec = cfg.synth_spec()
    counts = {audio.ClassLabel.HEALTHY: args.healthy} if args.healthy is not None else None
    dataset = synth.gen_dataset(spec, counts)
    manifest = synth.write_dataset(dataset, args.out)
    print(manifest)
    return EXIT_OK


def cmd_featurize(args) -> int:
    cfg = _run_config(args)
    cfg = config.override(cfg, "features", count=args.features, window_seconds=args.window,
                          lo_hz=args.lo_hz, hi_hz=args.hi_hz)
    fs = cfg.features
    dataset = audio.load_dataset(args.input, args.manifest, fs.window_seconds)
    feats = spectral.featurize(dataset.clips, fs.count, fs.band)
    spectral.write_features_csv(args.out, feats)
    _write_json(spectral.features_meta_path(args.out), {
        "feature_count": fs.count,
        "scale_reference": feats[0].scale_reference,
        "band": list(fs.band),
        "window_seconds": fs.window_seconds,
        "provenance": dataset.provenance,
        "rows": len(feats),
    })
    log.info("wrote %d feature vectors of length %d", len(feats), fs.count)
    print(args.out)
    return EXIT_OK


def _pipeline_meta(meta: dict, width: int, cfg: config.RunConfig) -> dict:
    return {
        "feature_count": width,
        "scale_reference": meta.get("scale_reference", 1.0),
        "band": meta.get("band", list(cfg.features.band)),
        "window_seconds": meta.get("window_seconds", cfg.features.window_seconds),
    }


def cmd_train(args) -> int:
    cfg = _run_config(args)
    cfg = config.override(cfg, "dnn", epochs=args.epochs, learning_rate=args.learning_rate,
                          lam=args.lam, batch_size=args.batch_size, momentum=args.momentum)
    cfg = config.override(cfg, "bnn", sampler=args.sampler, chains=args.chains, draws=args.draws,
                          warmup=args.warmup, leapfrog_steps=args.leapfrog_steps,
                          step_size=args.step_size, prior_std=args.prior_std)
    feats, meta = _load_features(args.features_csv)
    x = spectral.stack(feats)
    y = np.array([f.label.binary() for f in feats])
    pipeline = _pipeline_meta(meta, x.shape[1], cfg)

    if args.model == "dnn":
        train_cfg = cfg.dnn_config()
        params, history = dnn.train_dnn(x, y, train_cfg)
        doc = nn.to_document(params, pipeline=pipeline, train_config=train_cfg.to_dict())
        _write_json(args.out, doc)
        curve = args.curve or str(Path(args.out).with_suffix("")) + "_curve.csv"
        with open(curve, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "loss"])
            for epoch, value in enumerate(history):
                w.writerow([epoch, repr(float(value))])
        log.info("final training loss %.6g", history[-1])
    else:
        spec = cfg.bnn_spec(x.shape[1])
        if cfg.bnn.sampler == "mh":
            ensemble = bnn.sample_posterior_mh(spec, x, y, cfg.mh_config())
        else:
            ensemble = bnn.sample_posterior_hmc(spec, x, y, cfg.hmc_config())
        doc = bnn.to_document(ensemble, pipeline=pipeline,
                              chain_discrepancy=ensemble.chain_discrepancy())
        _write_json(args.out, doc)
        log.info("kept %d draws from %d chains, acceptance %.3f",
                 len(ensemble), ensemble.chains, ensemble.acceptance_rate)
    print(args.out)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _run_config(args)
    cfg = config.override(cfg, "evaluate", trials=args.trials, ratio=args.ratio)
    ecfg = cfg.eval_config()
    n_trials = cfg.evaluate.trials
    if args.imbalance is not None:
        if not 0.0 < args.imbalance < 1.0:
            raise UsageError("--imbalance must lie strictly between 0 and 1")
        report = evaluation.imbalance_experiment(cfg.synth_spec(), args.imbalance, n_trials,
                                                 cfg.seed, ecfg, control=not args.no_control)
        for row in report.rows:
            for kind, r in row.reports.items():
                s = r.summary()
                print(f"skew={row.skew:.3f} {kind.value}: mean_accuracy={s['mean_accuracy']:.4f} "
                      f"median_healthy_recall={s['median_healthy_recall']} "
                      f"median_fault_recall={s['median_fault_recall']}")
    else:
        if (args.input is None) == (args.features_csv is None):
            raise UsageError("give exactly one of --input or --features-csv (or --imbalance)")
        kind = evaluation.ModelKind(args.model)
        if args.input is not None:
            data = audio.load_dataset(args.input, None, cfg.features.window_seconds)
            provenance = data.provenance
        else:
            feats, meta = _load_features(args.features_csv)
            data = evaluation.FeatureTable(spectral.stack(feats), tuple(f.label for f in feats),
                                           meta.get("scale_reference", 1.0))
            provenance = f"csv:{Path(args.features_csv).name}"
        report = evaluation.run_trials(kind, data, n_trials, cfg.seed, ecfg, provenance)
        s = report.summary()
        print(f"{kind.value}: trials={s['n_trials']} mean_accuracy={s['mean_accuracy']:.4f} "
              f"std={s['std_accuracy']:.4f} median_healthy_recall={s['median_healthy_recall']} "
              f"median_fault_recall={s['median_fault_recall']}")
    path = evaluation.emit_report(report, args.out, args.stem)
    print(path)
    return EXIT_OK


def _load_model(path):
    doc = _read_json(path)
    version = doc.get("version")
    if version == nn.MODEL_VERSION:
        return "dnn", nn.from_document(doc), doc
    if version == bnn.ENSEMBLE_VERSION:
        return "bnn", bnn.from_document(doc), doc
    raise ValueError(f"{path}: unknown model version {version!r}")


def cmd_predict(args) -> int:
    cfg = _run_config(args)
    kind, model, doc = _load_model(args.model_file)
    pipe = doc.get("pipeline", {})
    width = model.input_dim if kind == "dnn" else model.spec.input_dim
    wanted = args.features if args.features is not None else width
    if wanted != width:
        raise ModelFeatureMismatch(f"model takes {width} features, pipeline produces {wanted}")
    band = tuple(pipe.get("band", cfg.features.band))
    window = pipe.get("window_seconds", cfg.features.window_seconds)
    scale = pipe.get("scale_reference", 1.0) or 1.0

    for path in args.wavs:
        clip = audio.load_wav(path)
        windows = audio.segment(clip, window) or [clip]
        x = np.vstack([spectral.clip_features(w, wanted, band).values for w in windows]) / scale
        if kind == "dnn":
            prob = float(np.mean(dnn.predict_dnn(model, x)))
            print(f"{path},{prob:.6f},{int(prob >= 0.5)}")
        else:
            pred = bnn.PredictiveDistribution(bnn.predictive_draws(model, x).ravel())
            label, _ = bnn.predict_class_bnn(pred)
            lo, hi = pred.credible_interval(0.9)
            print(f"{path},{pred.mean:.6f},{label},{lo:.6f},{hi:.6f}")
    return EXIT_OK


def cmd_report(args) -> int:
    if args.report is None and args.model_file is None:
        raise UsageError("give --report, or --model-file with --features-csv and --out")
    if args.report is not None:
        doc = evaluation.load_report(args.report)
        docs = [doc] if doc["kind"] == "trials" else [
            m for row in doc["rows"] for m in row["models"].values()]
        for d in docs:
            print(f"{d['model_kind']}: trials={d['n_trials']} mean_accuracy={d['mean_accuracy']:.4f} "
                  f"std={d['std_accuracy']:.4f}")
            for t in d["trials"]:
                print(f"  trial {t['trial']} seed {t['seed']}: tn={t['tn']} fp={t['fp']} "
                      f"fn={t['fn']} tp={t['tp']} accuracy={t['accuracy']:.4f}")
    if args.model_file is not None:
        if args.features_csv is None or args.out is None:
            raise UsageError("histogram output needs --features-csv and --out")
        kind, model, _ = _load_model(args.model_file)
        if kind != "bnn":
            raise UsageError("output histograms need a bnn-v1 model")
        feats, _ = _load_features(args.features_csv)
        hists = bnn.output_distribution_by_class(model, spectral.stack(feats),
                                                 [f.label for f in feats])
        bnn.write_histogram_csv(args.out, hists)
        print(args.out)
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "featurize": cmd_featurize,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "predict": cmd_predict,
    "report": cmd_report,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, config.ConfigError) as exc:
        print(f"motor-diag {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (MotorDiagError, OSError, ValueError, ArithmeticError) as exc:
        print(f"motor-diag {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
