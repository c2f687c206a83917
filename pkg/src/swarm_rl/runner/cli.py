"""Command line: ``train``, ``ablate`` and ``baseline``."""

from __future__ import annotations

import argparse
import logging
import sys

from ..errors import ConfigError, SwarmRLError
from .ablation import ablation
from .config import RunConfig, apply_overrides, load_config
from .run import baseline, run

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2

# flag dest -> RunConfig field
_FLAG_FIELDS = {
    "algo": "algo",
    "env": "env",
    "steps": "steps",
    "seed": "seed",
    "b": "b",
    "schedule_divisor": "schedule_divisor",
    "candidate_rule": "candidate_rule",
    "target_update": "target_update",
    "out": "out_dir",
    "candidate_episodes": "candidate_episodes",
}


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value file; command-line flags win over it")
    p.add_argument("--algo", choices=("dqn", "ddpg"))
    p.add_argument("--env", choices=("cartpole", "acrobot", "pendulum"))
    p.add_argument("--steps", type=int, help="environment steps per explorer")
    p.add_argument("--seed", type=int)
    p.add_argument("--b", type=int, help="successes needed before a commit is b + 1")
    p.add_argument("--schedule-divisor", type=float)
    p.add_argument("--candidate-rule", choices=("episode", "td_target"))
    p.add_argument("--target-update", choices=("own", "global_best"))
    p.add_argument("--candidate-episodes", type=int, help="supervisor episodes per candidate")
    p.add_argument("--deterministic", action="store_true", default=None, help="single-worker round-robin schedule")
    p.add_argument("--out", help="output directory for CSV and SVG files")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="any config field, repeatable")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="swarm-rl", description="Distributed DQN/DDPG with a supervised global best.")
    sub = parser.add_subparsers(dest="command", required=True)
    train = sub.add_parser("train", help="one distributed run")
    _common(train)
    train.add_argument("--explorers", type=int)
    ablate = sub.add_parser("ablate", help="compare explorer counts over matched seeds")
    _common(ablate)
    ablate.add_argument("--explorers", default="1,2,4,8", help="comma-separated explorer counts")
    ablate.add_argument("--seeds", help="comma-separated seeds (default: --seed)")
    ablate.add_argument("--jobs", type=int, default=1, help="runs executed in parallel processes")
    base = sub.add_parser("baseline", help="vanilla single-agent run")
    _common(base)
    return parser


def _int_list(raw: str, name: str) -> list:
    try:
        return [int(v) for v in raw.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"{name}: expected comma-separated integers, got {raw!r}") from None


def config_from_args(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    items = {}
    for dest, name in _FLAG_FIELDS.items():
        value = getattr(args, dest, None)
        if value is not None:
            items[name] = value
    if args.deterministic:
        items["deterministic"] = True
    if args.command == "train" and args.explorers is not None:
        items["n_explorers"] = args.explorers
    problems = []
    for pair in args.set:
        key, eq, value = pair.partition("=")
        if not eq:
            problems.append(f"--set {pair!r}: expected KEY=VALUE")
        else:
            items[key] = value
    if problems:
        raise ConfigError(problems)
    cfg = apply_overrides(cfg, items)
    if args.command == "baseline":
        cfg.vanilla, cfg.n_explorers, cfg.supervisor = True, 1, False
    cfg.validate()
    return cfg


def _print_report(rep) -> None:
    steps = rep.steps_to_threshold
    print(f"final greedy mean: {rep.final_eval_mean:.2f} over {len(rep.final_eval_returns)} episodes")
    print(f"steps to threshold: {'not reached' if steps is None else steps}")
    print(f"wall clock: {rep.wall_clock:.1f}s")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = config_from_args(args)
        if args.command == "ablate":
            counts = _int_list(args.explorers, "--explorers")
            seeds = _int_list(args.seeds, "--seeds") if args.seeds else None
            result = ablation(cfg, counts, seeds, jobs=args.jobs)
            print("n_explorers,seed,final_eval_mean,steps_to_threshold")
            for (c, s), rep in result.runs.items():
                st = result.steps_to_threshold(c, s)
                print(f"{c},{s},{rep.final_eval_mean:.2f},{'' if st is None else st}")
        elif args.command == "baseline":
            _print_report(baseline(cfg))
        else:
            _print_report(run(cfg))
    except ConfigError as exc:
        print("config error:", file=sys.stderr)
        for p in exc.problems:
            print(f"  {p}", file=sys.stderr)
        return EXIT_CONFIG
    except (SwarmRLError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
