"""Command-line entry points for end-to-end experiments.

Subcommands: cohort, pipeline, enroll, verify, roc, report. Every command
takes --config (a JSON path or builtin:<name>), writes into --out, and is
fully deterministic for a fixed config: identical reruns produce byte
identical artifacts.

Exit codes: 0 success, 2 configuration error, 3 insufficient data,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys


from . import metrics, pipeline
from .auth import (VerifyPolicy, append_audit, calibrate_drift_offset, enroll,
                   load_templates, save_templates, score_step, verify_series)
from .config import load_experiment
from .errors import ConfigurationError, InsufficientDataError, IntegrationError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def _load(args):
    return load_experiment(args.config, seed_override=args.seed_override)


def cmd_cohort(args) -> int:
    cfg = _load(args)
    paths = pipeline.write_cohort_artifacts(cfg, args.out)
    for p in paths:
        print(f"wrote {p}")
    return EXIT_OK


def cmd_pipeline(args) -> int:
    cfg = _load(args)
    result = pipeline.run_pipeline(cfg, jobs=args.jobs)
    out_csv = os.path.join(args.out, "outputs.csv")
    feat_csv = os.path.join(args.out, "features.csv")
    pipeline.write_outputs_csv(out_csv, result)
    pipeline.write_features_csv(feat_csv, result)
    manifest = {
        "config_hash": cfg.config_hash,
        "params_hash": cfg.params_hash,
        "n_individuals": len(result.profiles),
        "steps": result.schedule.steps,
        "channels": result.channel_names,
        "n_outputs": result.n_outputs,
    }
    mpath = os.path.join(args.out, "pipeline_manifest.json")
    with open(mpath, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for p in (out_csv, feat_csv, mpath):
        print(f"wrote {p}")
    return EXIT_OK


def cmd_enroll(args) -> int:
    cfg = _load(args)
    result = pipeline.run_pipeline(cfg, jobs=args.jobs)
    auth_cfg = cfg.section("auth")
    k_reg = int(auth_cfg["k_reg"])
    lam = float(auth_cfg.get("lambda", 1e-3))
    created = float(result.schedule.t0 + k_reg * result.schedule.tau)
    templates = [
        enroll(result.outputs[i][:k_reg], k_reg=k_reg, lam=lam,
               user_id=result.profiles[i].id, created_at=created)
        for i in range(len(result.profiles))
    ]
    path = os.path.join(args.out, "templates.json")
    save_templates(path, templates, config_hash=cfg.config_hash,
                   params_hash=cfg.params_hash)
    print(f"wrote {path} ({len(templates)} templates)")
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = _load(args)
    result = pipeline.run_pipeline(cfg, jobs=args.jobs)
    auth_cfg = cfg.section("auth")
    k_reg = int(auth_cfg["k_reg"])
    lam = float(auth_cfg.get("lambda", 1e-3))
    if args.templates:
        templates = {t.user_id: t for t in load_templates(args.templates)}
    else:
        created = float(result.schedule.t0 + k_reg * result.schedule.tau)
        templates = {
            result.profiles[i].id: enroll(result.outputs[i][:k_reg], k_reg=k_reg,
                                          lam=lam, user_id=result.profiles[i].id,
                                          created_at=created)
            for i in range(len(result.profiles))
        }
    margin = float(auth_cfg.get("drift_margin", 0.5))
    audit_rows = []
    for i, profile in enumerate(result.profiles):
        tpl = templates.get(profile.id)
        if tpl is None:
            raise ConfigurationError(f"no template for {profile.id}")
        reg_scores = [score_step(tpl, ov) for ov in result.outputs[i][:k_reg]]
        policy = VerifyPolicy(
            accept_thr=float(auth_cfg.get("accept_thr", 3.0)),
            reject_thr=float(auth_cfg.get("reject_thr", -9.0)),
            drift_offset=calibrate_drift_offset(reg_scores, margin))
        stream = result.outputs[i][k_reg:]
        decision, series = verify_series(tpl, stream, policy)
        last_t = stream[len(series.scores) - 1].timestamp if series.scores else 0.0
        audit_rows.append((last_t, profile.id, decision.statistic, decision.verdict))
        print(f"{profile.id}: {decision.verdict} (statistic {decision.statistic:.3f})")
    path = os.path.join(args.out, "audit.csv")
    append_audit(path, audit_rows)
    print(f"wrote {path}")
    return EXIT_OK


def cmd_roc(args) -> int:
    cfg = _load(args)
    summary, curves, _ = pipeline.run_auth_eval(cfg, jobs=args.jobs)
    for label, curve in curves.items():
        path = os.path.join(args.out, f"roc_{label}.csv")
        metrics.write_roc_csv(path, curve, config_hash=cfg.config_hash)
        print(f"wrote {path}")
    spath = os.path.join(args.out, "summary.json")
    metrics.write_summary_json(spath, summary)
    print(f"wrote {spath}")
    print(f"k1 AUC={summary['k1']['auc']:.4f} EER={summary['k1']['eer']:.4f} | "
          f"accumulated AUC={summary['accumulated']['auc']:.4f} "
          f"EER={summary['accumulated']['eer']:.4f}")
    return EXIT_OK


def cmd_report(args) -> int:
    """Aggregate summary.json files under --out into a single report."""
    found = []
    for root, _, files in os.walk(args.out):
        for name in sorted(files):
            if name == "summary.json":
                with open(os.path.join(root, name)) as fh:
                    found.append({"path": os.path.join(root, name),
                                  "summary": json.load(fh)})
    if not found:
        raise InsufficientDataError(f"no summary.json files under {args.out}")
    report = {"n_experiments": len(found), "experiments": found}
    path = os.path.join(args.out, "report.json")
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for item in found:
        s = item["summary"]
        print(f"{s.get('experiment', '?')}: mode={s.get('mode')} "
              f"k1 AUC={s['k1']['auc']:.4f} EER={s['k1']['eer']:.4f}")
    print(f"wrote {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sweatauth",
                                 description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    commands = {
        "cohort": (cmd_cohort, "generate cohort CSVs and a manifest"),
        "pipeline": (cmd_pipeline, "run the full pipeline to output streams"),
        "enroll": (cmd_enroll, "enroll per-individual templates"),
        "verify": (cmd_verify, "verify continuation streams against templates"),
        "roc": (cmd_roc, "run the authentication evaluation (ROC/AUC/EER)"),
        "report": (cmd_report, "aggregate summaries under --out"),
    }
    for name, (fn, help_text) in commands.items():
        p = sub.add_parser(name, help=help_text)
        if name != "report":
            p.add_argument("--config", required=True,
                           help="experiment JSON path or builtin:<name>")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed-override", type=int, default=None,
                       help="rewrite all cohort seeds from this master seed")
        p.add_argument("--jobs", type=int, default=1,
                       help="worker threads for the simulation batch")
        if name == "verify":
            p.add_argument("--templates", default=None,
                           help="reuse templates.json from a previous enroll run")
        p.set_defaults(fn=fn)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "out", None):
        os.makedirs(args.out, exist_ok=True)
    try:
        return args.fn(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InsufficientDataError as exc:
        print(f"insufficient data: {exc}", file=sys.stderr)
        return EXIT_DATA
    except IntegrationError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
