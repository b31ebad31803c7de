"""Command-line entry points: run, bench, sweep, serve, export-heatmap."""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, ExperimentConfig, load_config_file
from .engine import STRATEGIES, archive_from_dict
from .experiments import (
    SWEEP_STRATEGIES,
    ServeSession,
    bench,
    run_experiment,
    sweep_budget,
    write_sweep_csv,
)
from .feedback import BudgetExhausted

_SCALAR_FLAGS = (
    "task",
    "strategy",
    "seed",
    "total_iterations",
    "batch_size",
    "mutation_sigma",
    "budget",
    "margin",
    "learning_rate",
    "epochs",
    "finetune_epochs",
    "minibatch",
    "latent_dim",
    "maze_file",
    "out",
)


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="FILE", help="JSON config file with flat dotted keys")
    p.add_argument("--task", choices=("arm", "maze"))
    p.add_argument("--strategy", help=f"one of: {', '.join(STRATEGIES)}")
    p.add_argument("--seed", type=int)
    p.add_argument("--total-iterations", dest="total_iterations", type=int)
    p.add_argument(
        "--update-iterations",
        dest="update_iterations",
        metavar="I0,I1,...",
        help="metric update iterations, e.g. 0,100,250,500",
    )
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--mutation-sigma", dest="mutation_sigma", type=float)
    p.add_argument("--budget", type=int, help="total judgment budget")
    p.add_argument("--margin", type=float)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--finetune-epochs", dest="finetune_epochs", type=int)
    p.add_argument("--minibatch", type=int)
    p.add_argument("--latent-dim", dest="latent_dim", type=int)
    p.add_argument("--archive-shape", dest="archive_shape", metavar="R,C", help="e.g. 50,50")
    p.add_argument("--maze-file", dest="maze_file", metavar="FILE")
    p.add_argument("--out", metavar="DIR")
    p.add_argument("--force", action="store_true", help="overwrite existing outputs")


def _parse_int_list(text: str, flag: str):
    try:
        return tuple(int(part) for part in text.split(",") if part.strip() != "")
    except ValueError as exc:
        raise ConfigError(f"{flag} expects comma-separated integers, got {text!r}") from exc


def build_config(args) -> ExperimentConfig:
    """File config, overridden by flags, overridden by QDHF_SEED."""
    cfg = load_config_file(args.config) if args.config else ExperimentConfig()
    updates = {}
    for name in _SCALAR_FLAGS:
        value = getattr(args, name, None)
        if value is not None:
            updates[name] = value
    if getattr(args, "update_iterations", None) is not None:
        updates["update_iterations"] = _parse_int_list(args.update_iterations, "--update-iterations")
    if getattr(args, "archive_shape", None) is not None:
        updates["archive_shape"] = _parse_int_list(args.archive_shape, "--archive-shape")
    env_seed = os.environ.get("QDHF_SEED")
    if env_seed is not None and env_seed != "":
        try:
            updates["seed"] = int(env_seed)
        except ValueError as exc:
            raise ConfigError(f"QDHF_SEED must be an integer, got {env_seed!r}") from exc
    return replace(cfg, **updates)


def _require_out(cfg: ExperimentConfig) -> Path:
    if not cfg.out:
        raise ConfigError("an output directory is required (--out)")
    return Path(cfg.out)


def _check_targets(force: bool, *paths: Path) -> None:
    if force:
        return
    clashes = [str(p) for p in paths if p.exists()]
    if clashes:
        raise ConfigError(f"refusing to overwrite {', '.join(clashes)} (use --force)")


def cmd_run(args) -> int:
    cfg = build_config(args)
    out = _require_out(cfg)
    result = run_experiment(cfg)
    result.save(out, force=args.force)
    final = result.final
    print(
        f"{cfg.task}/{result.strategy} seed={result.seed}: "
        f"qd_score_archive={final.qd_score_archive:.2f} "
        f"coverage_archive={final.coverage_archive:.2f} "
        f"qd_score_all={final.qd_score_all:.2f} -> {out}"
    )
    return 0


def cmd_bench(args) -> int:
    from .plots import save_bench_figure

    cfg = build_config(args)
    out = _require_out(cfg)
    if args.trials < 1:
        raise ConfigError("--trials must be at least 1")
    strategies = None
    if args.strategies:
        strategies = tuple(s.strip() for s in args.strategies.split(",") if s.strip())
        unknown = [s for s in strategies if s not in STRATEGIES]
        if unknown:
            raise ConfigError(f"unknown strategies: {', '.join(unknown)}")
    out.mkdir(parents=True, exist_ok=True)
    _check_targets(args.force, out / "summary.json", out / "summary.svg")
    summary, _ = bench(cfg, args.trials, strategies)
    (out / "summary.json").write_text(json.dumps(summary, indent=2))
    save_bench_figure(summary, out / "summary.svg")
    for entry in summary:
        m = entry["metrics"]
        print(
            f"{entry['strategy']:>24s}  "
            f"qd_archive={m['qd_score_archive']['mean']:6.2f}±{m['qd_score_archive']['std']:.2f}  "
            f"qd_all={m['qd_score_all']['mean']:6.2f}±{m['qd_score_all']['std']:.2f}"
        )
    print(f"wrote {out / 'summary.json'} and {out / 'summary.svg'}")
    return 0


def cmd_sweep(args) -> int:
    from .plots import save_sweep_figure

    cfg = build_config(args)
    out = _require_out(cfg)
    budgets = _parse_int_list(args.budgets, "--budgets")
    if not budgets:
        raise ConfigError("--budgets needs at least one value")
    if args.trials < 1:
        raise ConfigError("--trials must be at least 1")
    strategies = SWEEP_STRATEGIES
    if args.strategies:
        strategies = tuple(s.strip() for s in args.strategies.split(",") if s.strip())
        unknown = [s for s in strategies if s not in STRATEGIES]
        if unknown:
            raise ConfigError(f"unknown strategies: {', '.join(unknown)}")
    out.mkdir(parents=True, exist_ok=True)
    _check_targets(args.force, out / "sweep.csv", out / "sweep.svg")
    rows = sweep_budget(budgets, cfg, args.trials, strategies)
    write_sweep_csv(rows, out / "sweep.csv")
    save_sweep_figure(rows, out / "sweep.svg")
    print(f"wrote {len(rows)} rows to {out / 'sweep.csv'} (figure: {out / 'sweep.svg'})")
    return 0


def _default_ui_dir():
    bundled = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    return bundled if (bundled / "index.html").is_file() else None


def cmd_serve(args) -> int:
    cfg = build_config(args)
    _require_out(cfg)
    ui_dir = Path(args.ui_dir) if args.ui_dir else _default_ui_dir()
    try:
        session = ServeSession(cfg, ui_dir=ui_dir, host=args.host, port=args.port, force=args.force)
    except OSError as exc:
        print(f"cannot bind service: {exc}", file=sys.stderr)
        return 2
    session.start()
    print(f"serving on {session.service.base_url} (UI: {'yes' if ui_dir else 'api only'})")
    print("waiting for judgments; Ctrl-C to stop")
    try:
        while not session.wait(timeout=0.5):
            pass
        if session.error is None:
            final = session.result.final
            print(
                f"run complete: judgments_used={final.judgments_used} "
                f"coverage_archive={final.coverage_archive:.2f} -> {cfg.out}"
            )
            print("serving final status; Ctrl-C to exit")
            while True:
                time.sleep(3600)
        raise session.error
    except KeyboardInterrupt:
        print("\nstopping; checkpointing partial run state")
        session.interrupt()
        return 0
    finally:
        session.shutdown()
    return 0


def cmd_export_heatmap(args) -> int:
    from .plots import export_heatmap

    run_dir = Path(args.run_dir)
    archive_path = run_dir / "archive.json"
    if not archive_path.is_file():
        raise ConfigError(f"{archive_path} not found; point at a run directory")
    out = Path(args.out) if args.out else run_dir
    _check_targets(args.force, out / f"{args.basename}.csv", out / f"{args.basename}.svg")
    data = json.loads(archive_path.read_text())
    archive = archive_from_dict(data)
    title = " / ".join(str(data[k]) for k in ("task", "strategy") if k in data) or None
    csv_path, svg_path = export_heatmap(archive, out, basename=args.basename, title=title)
    print(f"wrote {csv_path} and {svg_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qdhf",
        description="Quality-diversity optimization with learned diversity metrics",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one optimization run")
    _add_config_flags(p_run)
    p_run.set_defaults(func=cmd_run)

    p_bench = sub.add_parser("bench", help="compare strategies over repeated trials")
    _add_config_flags(p_bench)
    p_bench.add_argument("--trials", type=int, default=20)
    p_bench.add_argument("--strategies", metavar="S1,S2,...", help="subset to bench (default all)")
    p_bench.set_defaults(func=cmd_bench)

    p_sweep = sub.add_parser("sweep", help="sweep the judgment budget")
    _add_config_flags(p_sweep)
    p_sweep.add_argument("--budgets", required=True, metavar="B1,B2,...")
    p_sweep.add_argument("--trials", type=int, default=5)
    p_sweep.add_argument(
        "--strategies", metavar="S1,S2,...", help=f"default {','.join(SWEEP_STRATEGIES)}"
    )
    p_sweep.set_defaults(func=cmd_sweep)

    p_serve = sub.add_parser("serve", help="host the human labeling loop")
    _add_config_flags(p_serve)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=None)
    p_serve.add_argument("--ui-dir", dest="ui_dir", help="static UI directory (default: bundled)")
    p_serve.set_defaults(func=cmd_serve)

    p_heat = sub.add_parser("export-heatmap", help="render a run's archive as CSV + SVG")
    p_heat.add_argument("run_dir", metavar="RUN_DIR")
    p_heat.add_argument("--out", metavar="DIR", help="default: the run directory")
    p_heat.add_argument("--basename", default="heatmap")
    p_heat.add_argument("--force", action="store_true")
    p_heat.set_defaults(func=cmd_export_heatmap)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BudgetExhausted as exc:
        print(f"budget exhausted: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, FileExistsError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
