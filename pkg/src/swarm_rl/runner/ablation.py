"""Explorer-count ablation over matched seeds."""

from __future__ import annotations

import dataclasses
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import ConfigError
from .config import RunConfig
from .plot import emit_plot
from .report import summary_row, write_summary
from .run import RunReport, run


def run_many(configs, jobs: int = 1) -> list:
    """Run independent configs, in worker processes when ``jobs > 1``."""
    configs = list(configs)
    if jobs <= 1 or len(configs) <= 1:
        return [run(c) for c in configs]
    with ProcessPoolExecutor(max_workers=min(jobs, len(configs))) as pool:
        return list(pool.map(run, configs))


@dataclass
class AblationReport:
    counts: list
    seeds: list
    threshold: float | None
    runs: dict = field(default_factory=dict)  # (count, seed) -> RunReport
    baselines: dict = field(default_factory=dict)  # seed -> vanilla RunReport, when used for the threshold

    def steps_to_threshold(self, count: int, seed: int) -> int | None:
        return self.runs[(count, seed)].steps_to(self.threshold)

    def final_score(self, count: int, seed: int) -> float:
        return self.runs[(count, seed)].final_eval_mean

    def rows(self) -> list:
        return [summary_row(self.runs[(c, s)], self.threshold) for c in self.counts for s in self.seeds]

    def reports(self) -> list[RunReport]:
        return [self.runs[(c, s)] for c in self.counts for s in self.seeds]


def ablation(config: RunConfig, explorer_counts, seeds=None, jobs: int = 1) -> AblationReport:
    """Run every explorer count on every seed with the same per-agent budget.

    Tasks without a fixed score threshold use the median final score of the
    vanilla baseline over the same seeds.
    """
    counts = [int(c) for c in explorer_counts]
    if not counts:
        raise ConfigError("explorer_counts: must be nonempty")
    seeds = [config.seed] if seeds is None else [int(s) for s in seeds]
    root = None if config.out_dir is None else Path(config.out_dir)

    def sub(tag, **changes):
        out = None if root is None else str(root / tag)
        return dataclasses.replace(config, out_dir=out, **changes)

    grid = [sub(f"n{c}_seed{s}", n_explorers=c, seed=s) for c in counts for s in seeds]
    for cfg in grid:
        cfg.validate()
    threshold = config.score_threshold
    baselines = {}
    if threshold is None:
        base_cfgs = [sub(f"vanilla_seed{s}", seed=s, vanilla=True, n_explorers=1, supervisor=False) for s in seeds]
        for s, rep in zip(seeds, run_many(base_cfgs, jobs)):
            baselines[s] = rep
        threshold = statistics.median(r.final_eval_mean for r in baselines.values())
        grid = [dataclasses.replace(c, threshold=threshold) for c in grid]
    result = AblationReport(counts, seeds, threshold, baselines=baselines)
    for cfg, rep in zip(grid, run_many(grid, jobs)):
        result.runs[(cfg.n_explorers, cfg.seed)] = rep
    if root is not None:
        write_summary(root / "summary.csv", result.rows())
        emit_plot(result.reports(), root)
    return result
