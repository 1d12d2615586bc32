"""Command-line front end: generate, train, fit, anonymize, experiment, export.

Every command reads one RunConfig JSON file and works inside an artifact
directory keyed by the config hash, so reruns with the same config skip
completed stages and different configs never collide. Progress goes to
stderr; the last line on stdout is always one machine-readable JSON object.

Exit codes: 0 success, 2 usage/config/missing-artifact, 3 training gate
failure, 4 tuner failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import fileio
from .anonymizer import AnonymizationConfig, DirectNoiseSpec
from .config import (
    EXPERIMENT_IDS,
    RunConfig,
    anon_from_dict,
    config_hash,
    load_run_config,
    run_config_to_dict,
    save_run_config,
)
from .errors import ConfigurationError, PantomimeError, UsageError
from .evaluation import (
    EvalContext,
    ProtectionTarget,
    VARIANTS,
    component_analysis,
    dependency_analysis,
    noise_mode_sweep,
    privacy_utility_report,
    run_baselines,
    tune_protection_target,
    tuner_report,
)
from .fitting import FitWeights, fit_corpus, identity_mapping
from .kinematics import default_skeleton
from .priors import POSE_VAE, TRANSITION_CVAE, train_prior
from .recognition import anonymize_sequences
from .synthdata import generate_corpus

ENV_OUT = "PANTOMIME_OUT"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_GATE = 3
EXIT_TUNER = 4

# training gates: pose reconstruction, transition step reconstruction, and
# open-loop rollout drift
GATE_POSE_MAE = 0.08
GATE_TRANS_MAE = 0.05
GATE_TRANS_DRIFT = 0.3

PROTECTION_TARGETS = (0.10, 0.20)


def _log(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)


def _emit(payload: dict) -> None:
    print(json.dumps(payload, sort_keys=True), flush=True)


def _load(args):
    """Resolve (config, raw dict) and apply flag overrides."""
    rc = load_run_config(args.config)
    with open(args.config, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    import dataclasses

    if args.seed is not None:
        rc = dataclasses.replace(rc, master_seed=int(args.seed))
    if getattr(args, "preset", None):
        rc = dataclasses.replace(rc, corpus_preset=args.preset, corpus=None)
    return rc, raw


def _out_root(args, rc: RunConfig, raw: dict) -> str:
    """--out beats an explicit config key beats the environment default."""
    if args.out:
        return args.out
    if "out_dir" in raw:
        return rc.out_dir
    return os.environ.get(ENV_OUT, rc.out_dir)


def _run_dir(args, rc: RunConfig, raw: dict) -> str:
    d = os.path.join(_out_root(args, rc, raw), config_hash(rc))
    os.makedirs(d, exist_ok=True)
    save_run_config(os.path.join(d, "run_config.json"), rc)
    return d


def _require(path: str, what: str) -> None:
    if not os.path.exists(path):
        raise ConfigurationError(f"missing {what}: {path} (run the earlier stage first)")


# === generate ===

def cmd_generate(args) -> int:
    rc, raw = _load(args)
    run_dir = _run_dir(args, rc, raw)
    corpus_dir = os.path.join(run_dir, "corpus")
    manifest = os.path.join(corpus_dir, fileio.MANIFEST_NAME)
    if os.path.exists(manifest):
        _log(f"generate: {corpus_dir} already complete, skipping")
        with open(manifest, "r", encoding="utf-8") as fh:
            content_hash = json.load(fh)["content_hash"]
        _emit({"command": "generate", "status": "skipped", "corpus_dir": corpus_dir,
               "content_hash": content_hash})
        return EXIT_OK
    skel = default_skeleton()
    cfg = rc.corpus_config()
    _log(f"generate: corpus '{cfg.name}' seed {cfg.master_seed}")
    corpus = generate_corpus(cfg, skel)
    names = fileio.write_corpus_dir(corpus_dir, corpus)
    _emit({"command": "generate", "status": "ok", "corpus_dir": corpus_dir,
           "files": len(names), "content_hash": corpus.content_hash()})
    return EXIT_OK


def _load_corpus(run_dir: str):
    corpus_dir = os.path.join(run_dir, "corpus")
    _require(os.path.join(corpus_dir, fileio.MANIFEST_NAME), "corpus")
    return fileio.load_corpus_dir(corpus_dir, default_skeleton())


# === train ===

def cmd_train(args) -> int:
    rc, raw = _load(args)
    run_dir = _run_dir(args, rc, raw)
    prior_dir = os.path.join(run_dir, "priors")
    gates_path = os.path.join(prior_dir, "gates.json")
    if os.path.exists(gates_path):
        with open(gates_path, "r", encoding="utf-8") as fh:
            gates = json.load(fh)
        _log("train: artifacts already present, skipping")
        _emit({"command": "train", "status": "skipped", "gates": gates})
        return EXIT_OK if gates["passed"] else EXIT_GATE
    corpus = _load_corpus(run_dir)
    os.makedirs(prior_dir, exist_ok=True)
    tracks = corpus.pose_tracks()
    chash = corpus.content_hash()

    gates = {"passed": True, "checks": []}
    artifacts = {}
    for settings, name in ((rc.pose_prior, "pose"), (rc.transition_prior, "transition")):
        _log(f"train: {settings.kind} epochs={settings.epochs} "
             f"kl={settings.kl_weight} lr={settings.lr}")
        model, summary = train_prior(
            settings.kind, tracks, epochs=settings.epochs,
            batch_size=settings.batch_size, kl_weight=settings.kl_weight,
            seed=settings.seed, lr=settings.lr,
        )
        path = os.path.join(prior_dir, f"{name}.ppr")
        fileio.save_prior_model(path, model, corpus_hash=chash)
        artifacts[name] = path
        if settings.kind == POSE_VAE:
            checks = [("pose_recon_mae", summary.holdout_recon_mae, GATE_POSE_MAE)]
        else:
            checks = [("transition_step_mae", summary.holdout_recon_mae, GATE_TRANS_MAE),
                      ("transition_rollout_drift", summary.rollout_drift, GATE_TRANS_DRIFT)]
        for label, value, limit in checks:
            ok = bool(value <= limit)
            gates["checks"].append({"gate": label, "value": float(value),
                                    "limit": limit, "passed": ok})
            gates["passed"] = gates["passed"] and ok
            _log(f"train: gate {label} = {value:.4f} (limit {limit}) "
                 f"{'pass' if ok else 'FAIL'}")
    with open(gates_path, "w", encoding="utf-8") as fh:
        json.dump(gates, fh, sort_keys=True, indent=2)
        fh.write("\n")
    _emit({"command": "train", "status": "ok" if gates["passed"] else "gate-failure",
           "artifacts": artifacts, "gates": gates})
    return EXIT_OK if gates["passed"] else EXIT_GATE


def _load_priors(run_dir: str):
    prior_dir = os.path.join(run_dir, "priors")
    models = {}
    for name in ("pose", "transition"):
        path = os.path.join(prior_dir, f"{name}.ppr")
        _require(path, f"{name} prior artifact")
        models[name], _ = fileio.load_prior_model(path)
    return models


# === fit ===

def cmd_fit(args) -> int:
    rc, raw = _load(args)
    run_dir = _run_dir(args, rc, raw)
    fit_dir = os.path.join(run_dir, "fits")
    summary_path = os.path.join(fit_dir, "summary.json")
    if os.path.exists(summary_path):
        with open(summary_path, "r", encoding="utf-8") as fh:
            summary = json.load(fh)
        _log("fit: artifacts already present, skipping")
        _emit({"command": "fit", "status": "skipped", "summary": summary})
        return EXIT_OK
    corpus = _load_corpus(run_dir)
    models = _load_priors(run_dir)
    os.makedirs(fit_dir, exist_ok=True)
    chash = corpus.content_hash()
    mapping = identity_mapping()
    summary = {}
    for name, model in models.items():
        _log(f"fit: {len(corpus.sequences)} sequences against the {name} prior")

        def progress(i, n, res):
            if (i + 1) % 50 == 0 or res.failed:
                flag = " FAILED" if res.failed else ""
                _log(f"fit[{name}]: {i + 1}/{n} rmse {res.rmse * 100:.2f} cm{flag}")

        fits = fit_corpus(corpus.sequences, mapping, rc.fit_weights, model,
                          default_skeleton(), rc.fit_options,
                          base_seed=rc.fit_base_seed, progress=progress)
        path = os.path.join(fit_dir, f"{name}.pfit")
        fileio.save_fit_collection(path, fits, corpus_hash=chash)
        rms = np.array([r.rmse for r in fits.results])
        kept = fits.kept_indices
        summary[name] = {
            "path": path,
            "num_sequences": len(fits.results),
            "num_failed": fits.num_failed,
            "max_rmse_m": float(np.max(rms[kept])) if kept else None,
            "frac_below_2cm": float(np.mean(rms[kept] <= 0.02)) if kept else 0.0,
        }
        _log(f"fit[{name}]: failed {fits.num_failed}, "
             f"<=2cm {summary[name]['frac_below_2cm'] * 100:.1f}%")
    with open(summary_path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, sort_keys=True, indent=2)
        fh.write("\n")
    _emit({"command": "fit", "status": "ok", "summary": summary})
    return EXIT_OK


def _load_fits(run_dir: str):
    fit_dir = os.path.join(run_dir, "fits")
    fits = {}
    for name in ("pose", "transition"):
        path = os.path.join(fit_dir, f"{name}.pfit")
        _require(path, f"{name} fit collection")
        fits[name], _ = fileio.load_fit_collection(path)
    return fits


# === anonymize ===

def _anon_requirements(anon, models, fits):
    """(fits, model) a given anonymizer needs, mirroring EvalContext.arm."""
    if isinstance(anon, AnonymizationConfig):
        key = "pose" if anon.prior == POSE_VAE else "transition"
        return fits[key], models[key]
    if anon.target == "joint-angles":
        return fits["pose"], None
    return None, None


def cmd_anonymize(args) -> int:
    rc, raw = _load(args)
    run_dir = _run_dir(args, rc, raw)
    corpus = _load_corpus(run_dir)
    needs_artifacts = any(
        isinstance(a, AnonymizationConfig) or a.target == "joint-angles"
        for a in rc.anonymizers
    )
    models = _load_priors(run_dir) if needs_artifacts else {}
    fits = _load_fits(run_dir) if needs_artifacts else {}
    skel = default_skeleton()
    outputs = []
    for k, anon in enumerate(rc.anonymizers):
        from .config import _anon_to_dict

        spec = _anon_to_dict(anon)
        tag = f"{k:02d}_" + "_".join(
            str(spec[key]) for key in ("kind", "mode", "gamma")
        ).replace(".", "p")
        outdir = os.path.join(run_dir, "anon", tag)
        summary_path = os.path.join(outdir, "summary.json")
        if os.path.exists(summary_path):
            _log(f"anonymize: {tag} already complete, skipping")
            outputs.append({"dir": outdir, "status": "skipped"})
            continue
        use_fits, use_model = _anon_requirements(anon, models, fits)
        _log(f"anonymize: {tag}")
        seqs, kept = anonymize_sequences(corpus, anon, use_fits, use_model, skel)
        os.makedirs(outdir, exist_ok=True)
        provenance = {"anonymizer": spec, "source_corpus_hash": corpus.content_hash()}
        names = []
        for j, seq in zip(kept, seqs):
            name = fileio.corpus_file_name(j, corpus.seq_ids[j])
            fileio.write_motion_file(
                os.path.join(outdir, name),
                fileio.MotionFile(sequence=seq,
                                  point_names=tuple(skel.joint_names),
                                  provenance=provenance),
            )
            names.append(name)
        dropped = len(corpus.sequences) - len(kept)
        _log(f"anonymize: {tag} wrote {len(names)} files, {dropped} dropped")
        with open(summary_path, "w", encoding="utf-8") as fh:
            json.dump({"anonymizer": spec, "files": names,
                       "kept_indices": [int(i) for i in kept],
                       "dropped": dropped}, fh, sort_keys=True, indent=2)
            fh.write("\n")
        outputs.append({"dir": outdir, "status": "ok", "files": len(names),
                        "dropped": dropped})
    _emit({"command": "anonymize", "status": "ok", "outputs": outputs})
    return EXIT_OK


# === experiment ===

def _e5_plots(outdir: str, report) -> None:
    table = report.tables["sweep"]
    rows = table["rows"]
    by_curve = {}
    for variant, mode, gamma, acc_id, acc_act in rows:
        by_curve.setdefault((variant, mode), []).append(
            (float(gamma), float(acc_id),
             float(acc_act) if acc_act != "" else None)
        )
    id_series, tradeoff_series = [], []
    for (variant, mode), pts in sorted(by_curve.items()):
        if mode == "zero":
            continue
        pts.sort()
        label = f"{variant}/{mode}"
        id_series.append({"label": label, "x": [p[0] for p in pts],
                          "y": [p[1] for p in pts]})
        if all(p[2] is not None for p in pts):
            ordered = sorted(pts, key=lambda p: p[1])
            tradeoff_series.append({"label": label,
                                    "x": [p[1] for p in ordered],
                                    "y": [p[2] for p in ordered]})
    fileio.write_line_plot(os.path.join(outdir, "identity_vs_gamma.svg"),
                           id_series, x_label="gamma",
                           y_label="identity balanced accuracy")
    if tradeoff_series:
        fileio.write_line_plot(os.path.join(outdir, "action_vs_identity.svg"),
                               tradeoff_series,
                               x_label="identity balanced accuracy",
                               y_label="action balanced accuracy")


def _e6_plots(outdir: str, report) -> None:
    trace = report.tables["trace"]
    series = {}
    for variant, mode, target, step, gamma, acc in trace["rows"]:
        series.setdefault(f"{variant}@{target}", []).append(
            (int(step), float(acc))
        )
    plot = [{"label": label, "x": [p[0] for p in pts], "y": [p[1] for p in pts]}
            for label, pts in sorted(series.items())]
    fileio.write_line_plot(os.path.join(outdir, "tuner_traces.svg"), plot,
                           x_label="probe", y_label="identity balanced accuracy")


def cmd_experiment(args) -> int:
    rc, raw = _load(args)
    run_dir = _run_dir(args, rc, raw)
    requested = rc.experiments
    if args.experiments:
        requested = tuple(e.strip() for e in args.experiments.split(",") if e.strip())
    bad = [e for e in requested if e not in EXPERIMENT_IDS]
    if bad:
        raise ConfigurationError(f"experiments: unknown ids {bad}")

    corpus = _load_corpus(run_dir)
    models = _load_priors(run_dir)
    fits = _load_fits(run_dir)
    ctx = EvalContext(
        corpus=corpus, skel=default_skeleton(),
        pose_model=models["pose"], trans_model=models["transition"],
        pose_fits=fits["pose"], trans_fits=fits["transition"],
        split_seed=rc.split_seed, anon_seed=rc.anon_seed,
    )
    reports_root = os.path.join(run_dir, "reports")
    os.makedirs(reports_root, exist_ok=True)

    written = []
    tuner_failed = False
    done = set()

    def emit_report(report, plots=None):
        outdir = os.path.join(reports_root, report.experiment_id)
        if os.path.exists(os.path.join(outdir, "config.json")):
            _log(f"experiment {report.experiment_id}: already present, skipping")
            return
        path = fileio.write_experiment_report(reports_root, report)
        if plots is not None:
            plots(path, report)
        written.append(report.experiment_id)
        _log(f"experiment {report.experiment_id}: wrote {path}")

    def already_done(experiment_id: str) -> bool:
        return os.path.exists(os.path.join(reports_root, experiment_id, "config.json"))

    for eid in requested:
        if eid in ("E1", "E2"):
            if "E1-E2" in done or already_done("E1-E2"):
                done.add("E1-E2")
                continue
            _log("experiment E1-E2: baselines")
            emit_report(run_baselines(ctx))
            done.add("E1-E2")
        elif eid == "E3" and not already_done("E3"):
            _log("experiment E3: component analysis")
            emit_report(component_analysis(ctx))
        elif eid == "E4" and not already_done("E4"):
            _log("experiment E4: dependency analysis")
            emit_report(dependency_analysis(ctx))
        elif eid == "E5" and not already_done("E5"):
            _log("experiment E5: noise mode sweep")

            def sweep_progress(variant, mode, gamma, acc_id, acc_act):
                _log(f"E5: {variant} {mode} gamma={gamma} id={acc_id:.3f}")

            emit_report(noise_mode_sweep(ctx, progress=sweep_progress),
                        plots=_e5_plots)
        elif eid == "E6" and not already_done("E6"):
            _log("experiment E6: protection tuner")
            results = []
            for variant in VARIANTS:
                for target in PROTECTION_TARGETS:
                    _log(f"E6: tuning {variant} to {target}")
                    res = tune_protection_target(
                        ctx, variant, ProtectionTarget(accuracy=target))
                    results.append(res)
                    if not res.converged:
                        tuner_failed = True
                        _log(f"E6: {variant}@{target} FAILED: {res.failure}")
            report = tuner_report(ctx, results)
            util = privacy_utility_report(ctx, [r for r in results if r.converged])
            report.tables.update(util.tables)
            emit_report(report, plots=_e6_plots)

    _emit({"command": "experiment", "status": "tuner-failure" if tuner_failed else "ok",
           "reports_root": reports_root, "written": written})
    return EXIT_TUNER if tuner_failed else EXIT_OK


# === export-pointlight ===

def cmd_export_pointlight(args) -> int:
    try:
        mf = fileio.read_motion_file(args.sequence)
    except FileNotFoundError:
        raise ConfigurationError(f"sequence file not found: {args.sequence}")
    outdir = args.out or (os.path.splitext(args.sequence)[0] + "_pointlight")
    written = fileio.export_pointlight(outdir, mf, stride=args.stride)
    _emit({"command": "export-pointlight", "status": "ok", "out_dir": outdir,
           "frames": written, "csv": "points.csv"})
    return EXIT_OK


# === argument wiring ===

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pantomime",
        description="Motion anonymization pipeline: synthetic corpora, motion "
                    "priors, sequence fitting, latent-noise anonymization, and "
                    "the privacy/utility experiment suite.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_config=True):
        if needs_config:
            p.add_argument("--config", required=True, help="RunConfig JSON path")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config master seed")
        p.add_argument("--jobs", type=int, default=1,
                       help="worker count (sequences are independent; 1 = serial)")
        p.add_argument("--out", default=None, help="output root directory")

    p = sub.add_parser("generate", help="write the corpus and manifest")
    common(p)
    p.add_argument("--preset", default=None, help="corpus preset override")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train both priors and check gates")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("fit", help="fit the corpus against both priors")
    common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("anonymize", help="apply the configured anonymizers")
    common(p)
    p.set_defaults(func=cmd_anonymize)

    p = sub.add_parser("experiment", help="run the experiment suite")
    common(p)
    p.add_argument("--experiments", default=None,
                   help="comma-separated subset, e.g. E1,E2,E5")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("export-pointlight",
                       help="render a motion file as point-light frames")
    p.add_argument("sequence", help="motion file path")
    p.add_argument("--stride", type=int, default=10)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_export_pointlight)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "jobs", 1) is not None and getattr(args, "jobs", 1) > 1:
        _log("note: --jobs > 1 requested; this build runs serially")
    try:
        return args.func(args)
    except PantomimeError as e:
        _log(f"error: {e}")
        _emit({"command": args.command, "status": "error", "message": str(e)})
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
