"""Seeded Monte-Carlo paths as an empirical cross-check of analytic verdicts.

Path ``k`` draws its uniforms from its own PCG64 stream seeded by
``SeedSequence(master_seed, spawn_key=(k,))``, so results never depend on
how paths are batched. Paths advance in lockstep; each step inverts the CDF
of the current state's law with jumps in ascending order.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import asdict, dataclass
from enum import Enum

import numpy as np

from .chain_model import ChainSpec, sorted_table
from .verdict import Label, Verdict

__all__ = ["SimConfig", "SimReport", "Consistency", "simulate", "consistency_check", "near_critical_note", "path_streams"]

log = logging.getLogger(__name__)

BLOCK = 4096


@dataclass(frozen=True)
class SimConfig:
    n_paths: int = 1000
    n_steps: int = 100_000
    x0: int = 50
    r: int = 10
    master_seed: int = 42

    def __post_init__(self):
        if self.n_paths < 1 or self.n_steps < 1:
            raise ValueError("n_paths and n_steps must be positive")
        if self.r < 0 or self.x0 < 0:
            raise ValueError("x0 and r must be nonnegative")


@dataclass(frozen=True)
class SimReport:
    return_fraction: float
    median_final: float
    min_over_tail: tuple
    escape_indicator: float
    n_paths: int
    n_steps: int

    def to_dict(self) -> dict:
        d = asdict(self)
        d["min_over_tail"] = dict(zip(("q1", "median", "q3"), self.min_over_tail))
        return d


class Consistency(str, Enum):
    CONSISTENT = "Consistent"
    TENSION = "Tension"
    NOT_APPLICABLE = "NotApplicable"


def path_streams(master_seed: int, n_paths: int) -> list:
    return [
        np.random.Generator(np.random.PCG64(np.random.SeedSequence(master_seed, spawn_key=(k,))))
        for k in range(n_paths)
    ]


def simulate(spec: ChainSpec, config: SimConfig, trace=None) -> SimReport:
    """Run ``n_paths`` independent trajectories of ``n_steps`` steps from ``x0``.

    ``trace`` may be an open text file; every step of every path is then
    written to it as CSV rows ``path_id,step,state``.
    """
    n, T = config.n_paths, config.n_steps
    top = config.x0 + T * spec.max_jump
    J, P = sorted_table(spec, np.arange(top + 1))
    cum = np.cumsum(P, axis=1)
    last_live = (P.shape[1] - 1) - np.argmax((P > 0)[:, ::-1], axis=1)

    streams = path_streams(config.master_seed, n)
    x = np.full(n, config.x0, dtype=np.int64)
    above = x > 2 * config.r
    returned = np.zeros(n, dtype=bool)
    half, quarter = T - T // 2, T - T // 4
    tail_min = np.full(n, np.iinfo(np.int64).max)
    final_min = np.full(n, np.iinfo(np.int64).max)
    rows = np.arange(n)

    writer = csv.writer(trace) if trace is not None else None
    if writer is not None:
        writer.writerow(["path_id", "step", "state"])
        writer.writerows((k, 0, int(x[k])) for k in range(n))

    t = 0
    while t < T:
        b = min(BLOCK, T - t)
        U = np.stack([g.random(b) for g in streams])
        for s in range(b):
            u = U[:, s]
            c = cum[x]
            k = (u[:, None] >= c).sum(axis=1)
            k = np.minimum(k, last_live[x])
            x = x + J[x, k]
            step = t + s + 1
            returned |= above & (x <= config.r)
            above |= x > 2 * config.r
            if step > half:
                np.minimum(tail_min, x, out=tail_min)
            if step > quarter:
                np.minimum(final_min, x, out=final_min)
            if writer is not None:
                writer.writerows((k_, step, int(x[k_])) for k_ in rows)
        t += b

    q = np.percentile(tail_min, [25, 50, 75])
    report = SimReport(
        return_fraction=float(returned.mean()),
        median_final=float(np.median(x)),
        min_over_tail=tuple(float(v) for v in q),
        escape_indicator=float((final_min > config.x0).mean()),
        n_paths=n,
        n_steps=T,
    )
    log.info("simulated %d paths x %d steps: %s", n, T, report)
    return report


def consistency_check(spec: ChainSpec, verdict, config: SimConfig, report: SimReport | None = None) -> Consistency:
    """Compare an analytic label with simulation evidence; never overrides it.

    ``report`` may carry an already computed simulation of ``spec`` under
    ``config``.
    """
    label = verdict.label if isinstance(verdict, Verdict) else Label(verdict)
    if label is Label.INCONCLUSIVE:
        return Consistency.NOT_APPLICABLE
    if report is None:
        report = simulate(spec, config)
    if label is Label.RECURRENT and report.return_fraction < 0.5:
        return Consistency.TENSION
    if label is Label.TRANSIENT and report.return_fraction > 0.5:
        return Consistency.TENSION
    return Consistency.CONSISTENT


def near_critical_note(theta: float | None) -> str | None:
    if theta is not None and abs(theta - 1.0) < 0.25:
        return (
            f"near-critical chain (theta={theta:.3f}); a finite simulation cannot "
            "separate recurrence from transience here"
        )
    return None
