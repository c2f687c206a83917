"""CSV tables for run reports."""

from __future__ import annotations

import csv
import math
from pathlib import Path

AGENT_COLUMNS = ("episode", "steps", "return", "epsilon", "loss_mean", "c_seen", "best_version_seen", "truncated_by_budget")
DDPG_EXTRA = ("actor_loss_proxy", "critic_loss")
SERVER_COLUMNS = ("version", "step", "score", "c", "x", "source_agent")
SUPERVISOR_COLUMNS = (
    "candidate_id", "source_agent", "claimed_score", "best_score_then", "step", "episodes", "eval_mean", "committed", "version",
)
TRACE_COLUMNS = ("index", "step", "kind", "candidate_id", "return")
EVAL_COLUMNS = ("step", "greedy_mean", "version")
SUMMARY_COLUMNS = ("seed", "algo", "env", "n_explorers", "final_eval_mean", "steps_to_threshold")


def fmt(v) -> str:
    """Stable text for a cell: repr for floats, empty for None."""
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else str(v)
    return str(v)


def _write(path: Path, header, rows) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def summary_row(report, threshold=None):
    cfg = report.config
    steps = report.steps_to_threshold if threshold is None else report.steps_to(threshold)
    n = 1 if cfg.vanilla else cfg.n_explorers
    return (cfg.seed, cfg.algo if not cfg.vanilla else f"vanilla-{cfg.algo}", cfg.env, n, report.final_eval_mean, steps)


def write_summary(path, rows) -> Path:
    return _write(Path(path), SUMMARY_COLUMNS, rows)


def emit_csv(report, out_dir) -> list:
    """Write every table of ``report`` into ``out_dir``; returns the paths written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ddpg = report.config is not None and report.config.algo == "ddpg"
    cols = AGENT_COLUMNS + (DDPG_EXTRA if ddpg else ())
    paths = []
    for agent_id in sorted(report.episodes):
        rows = []
        for r in report.episodes[agent_id]:
            row = [r.episode, r.steps, r.ret, r.epsilon, r.loss_mean, r.c_seen, r.best_version_seen, r.truncated_by_budget]
            if ddpg:
                row += [r.actor_loss_proxy, r.critic_loss]
            rows.append(row)
        paths.append(_write(out / f"agent_{agent_id}.csv", cols, rows))
    paths.append(_write(out / "server_log.csv", SERVER_COLUMNS, (rec.row() for rec in report.commit_log)))
    paths.append(_write(out / "supervisor.csv", SUPERVISOR_COLUMNS, (
        (e.candidate_id, e.source_agent, e.claimed_score, e.best_score_then, e.step, len(e.returns), e.eval_mean,
         e.committed, e.version)
        for e in report.candidate_evals
    )))
    paths.append(_write(out / "supervisor_trace.csv", TRACE_COLUMNS, (
        (i, t.step, t.kind, t.candidate_id, t.ret) for i, t in enumerate(report.supervisor_trace)
    )))
    paths.append(_write(out / "eval.csv", EVAL_COLUMNS, ((p.step, p.score, p.version) for p in report.probes)))
    ran = report.config is not None and (report.total_env_steps > 0 or any(report.episodes.values()))
    paths.append(write_summary(out / "summary.csv", [summary_row(report)] if ran else []))
    return paths
