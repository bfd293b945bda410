"""Split a chain into closed value sets and recombine per-set verdicts.

Value sets are found structurally: build the transition graph on the states
reachable from 0 up to a truncation level, drop the boundary states and take
weakly connected components of what remains. Each component must then be an
arithmetic progression whose modulus equals the gcd of its internal jumps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import breadth_first_order, connected_components

from .chain_model import BirthDeath, ChainSpec, NonLatticeJump, SubChain
from .verdict import Label, Verdict

__all__ = [
    "SplitError",
    "NotEventuallyPeriodic",
    "TruncationTooSmall",
    "NonLatticeJump",
    "Component",
    "Decomposition",
    "decompose",
    "extract_subchain",
    "aggregate",
]

DEFAULT_TRUNCATION = 4096
SPOT_CHECKS = 32


class SplitError(ValueError):
    pass


class NotEventuallyPeriodic(SplitError):
    def __init__(self, message, partition=None):
        super().__init__(message)
        self.partition = partition


class TruncationTooSmall(SplitError):
    pass


@dataclass(frozen=True)
class Component:
    index: int
    modulus: int
    residue: int
    min_state: int
    step: int
    entry_states: tuple
    entry_weights: tuple

    def contains(self, x: int) -> bool:
        return x >= self.min_state and (x - self.min_state) % self.modulus == 0

    def snap(self, x: int) -> int:
        """Nearest member of the progression (never below ``min_state``); ties go down."""
        k, rem = divmod(max(0, x - self.min_state), self.modulus)
        if 2 * rem > self.modulus:
            k += 1
        return self.min_state + self.modulus * k

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "modulus": self.modulus,
            "residue": self.residue,
            "min_state": self.min_state,
            "step": self.step,
            "entry_states": list(self.entry_states),
            "entry_weights": list(self.entry_weights),
        }


@dataclass(frozen=True)
class Decomposition:
    components: tuple
    boundary_level: int
    boundary_states: tuple
    truncation: int

    @property
    def l(self) -> int:
        return len(self.components)

    def to_dict(self) -> dict:
        return {
            "l": self.l,
            "boundary_level": self.boundary_level,
            "boundary_states": list(self.boundary_states),
            "truncation": self.truncation,
            "components": [c.to_dict() for c in self.components],
        }


def _edges(spec: ChainSpec, N: int):
    states = np.arange(N + 1)
    J, P = spec.table(states)
    src = np.repeat(states, J.shape[1])
    dst = (states[:, None] + J).ravel()
    keep = (P.ravel() > 0) & (dst <= N) & (dst != src)
    return src[keep], dst[keep]


def _partition(spec: ChainSpec, N: int):
    """Interior components among states reachable from 0, as sorted arrays."""
    src, dst = _edges(spec, N)
    n = N + 1
    graph = coo_matrix((np.ones(src.size), (src, dst)), shape=(n, n)).tocsr()
    reachable = np.zeros(n, dtype=bool)
    reachable[breadth_first_order(graph, 0, directed=True, return_predecessors=False)] = True
    boundary = np.zeros(n, dtype=bool)
    boundary[[s for s in spec.boundary_states() if s <= N]] = True
    interior = reachable & ~boundary

    keep = interior[src] & interior[dst]
    sub = coo_matrix(
        (np.ones(int(keep.sum())), (src[keep], dst[keep])), shape=(n, n)
    ).tocsr()
    _, labels = connected_components(sub, directed=True, connection="weak")
    groups: dict[int, list] = {}
    for s in np.flatnonzero(interior):
        groups.setdefault(int(labels[s]), []).append(int(s))
    parts = sorted((np.array(g) for g in groups.values()), key=lambda a: int(a[0]))
    return parts, (src, dst)


def decompose(spec: ChainSpec, truncation: int = DEFAULT_TRUNCATION) -> Decomposition:
    """Partition the reachable interior states into closed arithmetic progressions."""
    N = int(truncation)
    if N < 64:
        raise TruncationTooSmall("truncation must be at least 64")
    parts, (src, dst) = _partition(spec, N)
    half, _ = _partition(spec, N // 2)
    if len(half) != len(parts):
        raise TruncationTooSmall(
            f"{len(half)} components at N={N // 2} but {len(parts)} at N={N}"
        )

    boundary = sorted(s for s in spec.boundary_states())
    raw = [p.tolist() for p in parts]
    components = []
    J_all, P_all = spec.table(np.arange(N + 1))
    for idx, states in enumerate(parts):
        s0 = int(states[0])
        if states.size < 2:
            raise NotEventuallyPeriodic(f"component at {s0} is a single state", raw)
        modulus = int(np.gcd.reduce(states - s0))
        member = np.zeros(N + 1, dtype=bool)
        member[states] = True
        internal = member[src] & member[dst]
        step = int(np.gcd.reduce(np.abs(dst[internal] - src[internal])))
        if step != modulus:
            raise NotEventuallyPeriodic(
                f"component at {s0}: jump gcd {step} differs from state spacing {modulus}", raw
            )
        expected = np.arange(s0, N + 1 - spec.max_jump, modulus)
        expected = expected[~np.isin(expected, boundary)]
        if not np.isin(expected, states).all() or np.any((states - s0) % modulus):
            raise NotEventuallyPeriodic(
                f"component at {s0} is not the progression {s0} + {modulus}k", raw
            )
        _spot_check(spec, s0, modulus, N)

        weights: dict[int, float] = {}
        for b in boundary:
            if b > N:
                continue
            for j, p in zip(J_all[b].tolist(), P_all[b].tolist()):
                t = b + j
                if p > 0 and t <= N and member[t]:
                    weights[t] = weights.get(t, 0.0) + p
        total = math.fsum(weights.values())
        entries = tuple(sorted(weights))
        components.append(
            Component(
                index=idx,
                modulus=modulus,
                residue=s0 % modulus,
                min_state=s0,
                step=step,
                entry_states=entries,
                entry_weights=tuple(weights[e] / total for e in entries),
            )
        )
    level = max(boundary) + 1 if boundary else 0
    return Decomposition(tuple(components), level, tuple(boundary), N)


def _spot_check(spec: ChainSpec, s0: int, modulus: int, N: int) -> None:
    lo = (N + 1 - s0 + modulus - 1) // modulus
    hi = (4 * N - s0) // modulus
    ks = np.unique(np.linspace(lo, hi, SPOT_CHECKS).astype(np.int64))
    xs = s0 + modulus * ks
    J, P = spec.table(xs)
    bad = (P > 0) & (J % modulus != 0)
    if bad.any():
        x = int(xs[np.nonzero(bad)[0][0]])
        raise NotEventuallyPeriodic(
            f"state {x} beyond the truncation leaves the progression {s0} + {modulus}k"
        )


def extract_subchain(spec: ChainSpec, comp: Component) -> ChainSpec:
    """Unit-lattice chain for one component; the boundary collapses onto state 0."""
    if isinstance(spec, BirthDeath) and comp.modulus == 1 and comp.min_state == 1:
        return spec
    entry = tuple(
        ((e - comp.min_state) // comp.modulus + 1, w)
        for e, w in zip(comp.entry_states, comp.entry_weights)
    )
    return SubChain(
        parent=spec,
        modulus=comp.modulus,
        residue=comp.residue,
        min_state=comp.min_state,
        step=comp.step,
        entry=entry,
    )


def aggregate(verdicts: list, limit_points: list | None = None) -> Verdict:
    """Whole-chain verdict: transient if any value set is, recurrent if all are."""
    if not verdicts:
        raise ValueError("aggregate needs at least one component verdict")
    labels = [v.label for v in verdicts]
    if Label.TRANSIENT in labels:
        label = Label.TRANSIENT
    elif all(lab is Label.RECURRENT for lab in labels):
        label = Label.RECURRENT
    else:
        label = Label.INCONCLUSIVE
    margins = [v.margin for v in verdicts if v.margin is not None and math.isfinite(v.margin)]
    evidence = {"component_labels": [lab.value for lab in labels]}
    if limit_points:
        evidence["R_limit_points"] = list(limit_points)
        evidence["R_max"] = max(limit_points)
    notes = []
    if label is Label.INCONCLUSIVE:
        pending = [i for i, lab in enumerate(labels) if lab is Label.INCONCLUSIVE]
        notes.append(f"components {pending} unresolved and none transient")
    return Verdict(label, "aggregate", max(margins) if margins else math.nan, evidence, notes)
