"""Operator entry point.

Subcommands: generate, validate, train, eval, plan. All flags are
long-form; --set namespace.key=value overrides config fields (valid
namespaces: gen, policy, train, nlls, reward, cem, plan, eval). Exit
codes: 0 success, 2 usage error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import metrics as metrics_mod
from . import plots
from .diffcore import NumericError, ParamStoreError
from .planner import (CemConfig, DegenerateObjective, RewardConfig, ibr_mpc,
                      ilf_mpc, plan_to_scenario)
from .policy import CheckpointError, PolicyConfig, init_params, load_checkpoint
from .scene import (PRESETS, GeneratorConfig, InfeasibleConfigError,
                    ScenarioFormatError, ValidationError, generate_corpus,
                    load_corpus, load_scenario, save_corpus, save_scenario,
                    scenario_to_lines)
from .trainer import NllsConfig, TrainConfig, TrainingDiverged, train

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


def _parse_value(text: str, current):
    if isinstance(current, bool):
        low = text.lower()
        if low in ("true", "1", "yes", "on"):
            return True
        if low in ("false", "0", "no", "off"):
            return False
        raise UsageError(f"expected a boolean, got {text!r}")
    if isinstance(current, int) and not isinstance(current, bool):
        return int(text)
    if isinstance(current, float):
        return float(text)
    if isinstance(current, tuple):
        items = [s.strip() for s in text.split(",") if s.strip()]
        if current and isinstance(current[0], float):
            return tuple(float(s) for s in items)
        return tuple(items)
    if current is None:
        try:
            return int(text)
        except ValueError:
            return text
    return text


def apply_overrides(sets, configs: dict):
    """Apply namespace.key=value strings onto dataclass instances."""
    for item in sets or ():
        if "=" not in item:
            raise UsageError(f"--set expects namespace.key=value, got {item!r}")
        key, value = item.split("=", 1)
        if "." not in key:
            raise UsageError(f"--set key must be namespaced, got {key!r}")
        ns, field = key.split(".", 1)
        if ns not in configs:
            raise UsageError(
                f"unknown config namespace {ns!r}; valid: {', '.join(sorted(configs))}")
        cfg = configs[ns]
        if isinstance(cfg, dict):
            if field not in cfg:
                raise UsageError(
                    f"unknown key {field!r} in {ns!r}; valid: {', '.join(sorted(cfg))}")
            cfg[field] = _parse_value(value, cfg[field])
            continue
        names = [f.name for f in dataclasses.fields(cfg)]
        if field not in names:
            raise UsageError(
                f"unknown key {field!r} in {ns!r}; valid: {', '.join(names)}")
        try:
            setattr(cfg, field, _parse_value(value, getattr(cfg, field)))
        except ValueError as e:
            raise UsageError(f"bad value for {key}: {e}") from e


def _require_dir(path, what) -> Path:
    p = Path(path)
    if not p.is_dir():
        raise DataError(f"{what} directory not found: {p}")
    return p


def _require_file(path, what) -> Path:
    p = Path(path)
    if not p.is_file():
        raise DataError(f"{what} not found: {p}")
    return p


# -- subcommands -------------------------------------------------------------

def cmd_generate(args) -> int:
    if args.preset:
        if args.preset not in PRESETS:
            raise UsageError(
                f"unknown preset {args.preset!r}; valid: {', '.join(sorted(PRESETS))}")
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        result = PRESETS[args.preset](seed=args.seed)
        if isinstance(result, tuple):
            sc, reference_lane, target_agent = result
            meta = {"reference_lane": reference_lane, "target_agent": target_agent}
        else:
            sc, meta = result, {}
        save_scenario(sc, out)
        Path(str(out) + ".meta.json").write_text(
            json.dumps(meta, indent=2) + "\n", encoding="utf-8")
        print(f"wrote preset scenario {sc.scenario_id} to {out}")
        return EXIT_OK
    gen = GeneratorConfig()
    apply_overrides(args.set, {"gen": gen})
    if args.count is not None:
        gen.num_scenarios = args.count
    try:
        gen.validate()
        corpus = generate_corpus(gen, seed=args.seed)
    except InfeasibleConfigError as e:
        raise UsageError(str(e)) from e
    manifest = save_corpus(corpus, args.out, seed=args.seed)
    print(f"wrote {manifest['count']} scenarios to {args.out} "
          f"(sha256 {manifest['corpus_sha256'][:16]})")
    return EXIT_OK


def cmd_validate(args) -> int:
    directory = _require_dir(args.corpus, "corpus")
    corpus = load_corpus(directory)
    for sc in corpus:
        sc.validate()
    print(f"{len(corpus)} scenarios valid")
    return EXIT_OK


def cmd_train(args) -> int:
    corpus_dir = _require_dir(args.corpus, "corpus")
    tcfg = TrainConfig(seed=args.seed)
    pcfg = PolicyConfig()
    ncfg = NllsConfig()
    apply_overrides(args.set, {"train": tcfg, "policy": pcfg, "nlls": ncfg})
    corpus = load_corpus(corpus_dir)
    start_epoch = 0
    if args.resume:
        store, pcfg, meta = load_checkpoint(args.resume)
        start_epoch = int(meta.get("epoch", -1)) + 1
    else:
        store = init_params(pcfg, seed=args.seed)
    result = train(corpus, store, pcfg, tcfg, out_dir=args.out, nlls_cfg=ncfg,
                   start_epoch=start_epoch,
                   log=lambda row: print(
                       f"epoch {row['epoch']:3d}  train {row['train_loss']:9.4f}  "
                       f"val {row['val_loss']:9.4f}  ade_e {row['ade_ego']:.3f}  "
                       f"fde_noe {row['fde_other']:.3f}"))
    print(f"trained {tcfg.epochs} epochs; checkpoints in {args.out}")
    if tcfg.nlls:
        print(f"nlls perturbations applied {result.nlls_applied}, "
              f"skipped {result.nlls_skipped}")
    return EXIT_OK


def cmd_eval(args) -> int:
    corpus = load_corpus(_require_dir(args.corpus, "corpus"))
    store, pcfg, _ = load_checkpoint(args.checkpoint)
    eval_cfg = {"horizon": corpus[0].horizon}
    apply_overrides(args.set, {"eval": eval_cfg})
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report = metrics_mod.evaluate_corpus(corpus, store, pcfg,
                                         horizon=eval_cfg["horizon"],
                                         threads=args.threads)
    report.save(out / "report.csv")
    print(f"model   ADE_e {report.ade_e:.3f}  FDE_e {report.fde_e:.3f}  "
          f"ADE_noe {report.ade_noe:.3f}  FDE_noe {report.fde_noe:.3f}  "
          f"collisions {report.collisions}")
    if args.baseline:
        base = metrics_mod.evaluate_corpus(corpus, horizon=eval_cfg["horizon"],
                                           baseline=True, threads=args.threads)
        base.save(out / "baseline.csv")
        print(f"baseline ADE_e {base.ade_e:.3f}  FDE_e {base.fde_e:.3f}  "
              f"ADE_noe {base.ade_noe:.3f}  FDE_noe {base.fde_noe:.3f}")
    return EXIT_OK


def cmd_plan(args) -> int:
    scenario_path = _require_file(args.scenario, "scenario")
    scenario = load_scenario(scenario_path)
    store, pcfg, _ = load_checkpoint(args.checkpoint)
    rcfg = RewardConfig()
    ccfg = CemConfig(seed=args.seed)
    plan_cfg = {"horizon": 50, "adversarial": False}
    meta_path = Path(str(scenario_path) + ".meta.json")
    if meta_path.exists():
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        if "reference_lane" in meta:
            rcfg.reference_lane = meta["reference_lane"]
        if "target_agent" in meta:
            rcfg.target_agent = meta["target_agent"]
    apply_overrides(args.set, {"reward": rcfg, "cem": ccfg, "plan": plan_cfg})
    if plan_cfg["adversarial"] and rcfg.adversarial_weight == 0.0:
        rcfg.adversarial_weight = 5.0
    horizon = min(plan_cfg["horizon"], scenario.horizon)
    planner = ilf_mpc if args.planner == "ilf" else ibr_mpc
    result = planner(scenario, store, pcfg, rcfg, ccfg, horizon=horizon)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    plan_sc = plan_to_scenario(scenario, result)
    save_scenario(plan_sc, out / "plan_scenario.jsonl")
    (out / "trace.csv").write_text(result.trace_csv(), encoding="utf-8")
    summary = {
        "planner": result.planner, "reward": result.reward,
        "wall_time": result.wall_time, "converged": result.converged,
        "horizon": result.horizon,
        "ego_terminal_speed": float(result.ego_states[-1, 4]),
    }
    if result.agent_indices and rcfg.target_agent is not None:
        tid = [j for j, i in enumerate(result.agent_indices)
               if plan_sc.tracks[i].agent_id == rcfg.target_agent]
        if tid:
            speeds = result.agent_states[tid[0], :, 4]
            summary["target_speed_trace"] = [round(float(v), 4) for v in speeds]
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n",
                                      encoding="utf-8")
    plots.save_svg(plots.scenario_svg(plan_sc, plan=result,
                                      title=f"{result.planner} plan, "
                                            f"reward {result.reward:.2f}"),
                   out / "plan.svg")
    print(f"{result.planner} reward {result.reward:.3f} "
          f"converged {result.converged} wall {result.wall_time:.1f}s -> {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="driveplan", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic corpus or preset scene")
    g.add_argument("--out", required=True)
    g.add_argument("--count", type=int, default=None)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--preset", default=None)
    g.add_argument("--threads", type=int, default=1)
    g.add_argument("--set", action="append", default=[])
    g.set_defaults(func=cmd_generate)

    v = sub.add_parser("validate", help="schema-check a corpus directory")
    v.add_argument("--corpus", required=True)
    v.set_defaults(func=cmd_validate)

    t = sub.add_parser("train", help="imitation-train a policy on a corpus")
    t.add_argument("--corpus", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--resume", default=None)
    t.add_argument("--threads", type=int, default=1)
    t.add_argument("--set", action="append", default=[])
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="closed-loop metrics over a corpus")
    e.add_argument("--corpus", required=True)
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--baseline", action="store_true")
    e.add_argument("--threads", type=int, default=1)
    e.add_argument("--set", action="append", default=[])
    e.set_defaults(func=cmd_eval)

    p = sub.add_parser("plan", help="run a game-theoretic planner on a scenario")
    p.add_argument("--scenario", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--planner", choices=("ilf", "ibr"), default="ilf")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--set", action="append", default=[])
    p.set_defaults(func=cmd_plan)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ScenarioFormatError, ValidationError, CheckpointError,
            ParamStoreError, FileNotFoundError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except (NumericError, TrainingDiverged, DegenerateObjective) as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
