"""Nonnegative integer-lattice Markov chains with bounded jumps.

Every chain kind implements ``table(xs)``: a vectorised one-step law that
returns two ``(len(xs), K)`` arrays, jumps and probabilities, with
zero-probability padding where a row has fewer than ``K`` support points.
The scalar helpers (:func:`kernel`, :func:`drift`) are thin views of the same
table so scalar and vector paths agree bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .spec_lang import Expr, evaluate_array, parse, to_source

__all__ = [
    "ChainError",
    "InvalidSpec",
    "InvalidProbability",
    "NonLatticeJump",
    "JumpDistribution",
    "DriftQuantities",
    "BirthDeath",
    "JumpKernel",
    "SplittableExample",
    "Rescaled",
    "SubChain",
    "ChainSpec",
    "kernel",
    "rescale",
    "drift",
    "drift_table",
    "sorted_table",
    "check_moment_condition",
]

PROB_TOL = 1e-12


class ChainError(ValueError):
    pass


class InvalidSpec(ChainError):
    pass


class InvalidProbability(ChainError):
    pass


class NonLatticeJump(ChainError):
    pass


def _as_expr(e) -> Expr:
    return parse(e) if isinstance(e, str) else e


def _as_states(xs) -> np.ndarray:
    xs = np.atleast_1d(np.asarray(xs))
    if xs.dtype.kind not in "iu":
        if not np.all(xs == np.floor(xs)):
            raise ValueError("states must be integers")
        xs = xs.astype(np.int64)
    xs = xs.astype(np.int64, copy=False)
    if xs.size and xs.min() < 0:
        raise ValueError("states must be nonnegative")
    return xs


def _probability(expr: Expr, at: np.ndarray, strict: bool) -> np.ndarray:
    p = evaluate_array(expr, at)
    if strict:
        bad = (p < 0.0) | (p > 1.0)
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise InvalidProbability(
                f"'{to_source(expr)}' = {p[i]!r} at x={int(at[i])} is outside [0, 1]"
            )
        return p
    return np.minimum(np.maximum(p, 0.0), 1.0)


@dataclass(frozen=True)
class JumpDistribution:
    """Finite one-step law at a state, sorted by ascending jump."""

    support: tuple

    def __post_init__(self):
        probs = [p for _, p in self.support]
        if any(p < 0.0 for p in probs):
            raise InvalidProbability(f"negative probability in {self.support}")
        if abs(math.fsum(probs) - 1.0) > PROB_TOL:
            raise InvalidProbability(f"probabilities sum to {math.fsum(probs)!r}")

    @property
    def jumps(self) -> tuple:
        return tuple(j for j, _ in self.support)

    @property
    def probs(self) -> tuple:
        return tuple(p for _, p in self.support)

    def as_dict(self) -> dict:
        return dict(self.support)


class _Chain:
    """Shared behaviour of the chain kinds."""

    kind: str

    def table(self, xs) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def boundary_states(self) -> frozenset:
        raise NotImplementedError

    @property
    def max_jump(self) -> int:
        raise NotImplementedError


@dataclass(frozen=True)
class BirthDeath(_Chain):
    """Nearest-neighbour walk: ``P(0,1) = 1``, ``P(x,x+1) = p(x)`` for x >= 1."""

    p: Expr
    strict: bool = False
    kind = "birth_death"

    def __post_init__(self):
        object.__setattr__(self, "p", _as_expr(self.p))

    def table(self, xs):
        xs = _as_states(xs)
        J = np.tile(np.array([1, -1], dtype=np.int64), (xs.size, 1))
        P = np.zeros((xs.size, 2))
        inner = xs >= 1
        p = _probability(self.p, xs[inner], self.strict)
        P[inner, 0] = p
        P[inner, 1] = 1.0 - p
        P[~inner, 0] = 1.0
        return J, P

    def boundary_states(self):
        return frozenset({0})

    @property
    def max_jump(self):
        return 1


@dataclass(frozen=True)
class JumpKernel(_Chain):
    """Bounded-jump kernel with weights normalised per state.

    States below ``boundary_level`` use the explicit ``boundary`` table, a
    mapping ``state -> JumpDistribution``.
    """

    jumps: tuple
    boundary: dict
    boundary_level: int
    declared_max_jump: int | None = None
    strict: bool = False
    kind = "jump_kernel"

    def __post_init__(self):
        jumps = tuple((int(j), _as_expr(w)) for j, w in self.jumps)
        object.__setattr__(self, "jumps", jumps)
        if not jumps:
            raise InvalidSpec("jump_kernel needs at least one jump")
        if len({j for j, _ in jumps}) != len(jumps):
            raise InvalidSpec("duplicate jump values")
        b = int(self.boundary_level)
        if b < 1:
            raise InvalidSpec("boundary_level must be at least 1")
        lowest = min(j for j, _ in jumps)
        if b + lowest < 0:
            raise InvalidSpec(
                f"jump {lowest} from interior state {b} goes below 0; raise boundary_level"
            )
        missing = sorted(set(range(b)) - set(self.boundary))
        if missing:
            raise InvalidSpec(f"boundary table lacks states {missing}")
        extra = sorted(s for s in self.boundary if not 0 <= s < b)
        if extra:
            raise InvalidSpec(f"boundary table has states {extra} outside [0, {b})")
        for s, dist in self.boundary.items():
            for j, _ in dist.support:
                if s + j < 0:
                    raise InvalidSpec(f"boundary jump {j} from state {s} goes below 0")
        if self.declared_max_jump is not None and self.declared_max_jump < self._derived_max_jump():
            raise InvalidSpec(
                f"max_jump {self.declared_max_jump} is below the largest jump "
                f"{self._derived_max_jump()}"
            )

    def _derived_max_jump(self) -> int:
        m = max(abs(j) for j, _ in self.jumps)
        for dist in self.boundary.values():
            m = max([m] + [abs(j) for j, _ in dist.support])
        return m

    @property
    def max_jump(self):
        if self.declared_max_jump is not None:
            return int(self.declared_max_jump)
        return self._derived_max_jump()

    def boundary_states(self):
        return frozenset(range(self.boundary_level))

    def __hash__(self):
        return hash((self.jumps, self.boundary_level))

    def table(self, xs):
        xs = _as_states(xs)
        width = max([len(self.jumps)] + [len(d.support) for d in self.boundary.values()])
        J = np.zeros((xs.size, width), dtype=np.int64)
        P = np.zeros((xs.size, width))
        inner = xs >= self.boundary_level
        at = xs[inner]
        if at.size:
            W = np.empty((at.size, len(self.jumps)))
            for c, (j, w) in enumerate(self.jumps):
                wv = evaluate_array(w, at)
                if (wv < 0).any():
                    if self.strict:
                        i = int(np.flatnonzero(wv < 0)[0])
                        raise InvalidProbability(
                            f"weight '{to_source(w)}' = {wv[i]!r} < 0 at x={int(at[i])}"
                        )
                    wv = np.maximum(wv, 0.0)
                W[:, c] = wv
            total = W.sum(axis=1)
            if (total <= 0).any():
                i = int(np.flatnonzero(total <= 0)[0])
                raise InvalidProbability(f"all jump weights vanish at x={int(at[i])}")
            J[inner, : len(self.jumps)] = [j for j, _ in self.jumps]
            P[inner, : len(self.jumps)] = W / total[:, None]
        for row in np.flatnonzero(~inner):
            dist = self.boundary[int(xs[row])]
            for c, (j, p) in enumerate(dist.support):
                J[row, c] = j
                P[row, c] = p
        return J, P


@dataclass(frozen=True)
class SplittableExample(_Chain):
    """Three interleaved walks: evens with step 2, classes 1 and 3 mod 4 with step 4.

    Boundary: 0 jumps to 2, 5 or 7 with probability 1/3 each; 1 and 3 fall
    to 0. The three probability expressions are evaluated in sub-chain
    coordinates, i.e. at ``i`` for states ``2i``, ``4i+1`` and ``4i+3``.
    """

    p_even: Expr
    p_mod1: Expr
    p_mod3: Expr
    strict: bool = False
    kind = "splittable_example"

    def __post_init__(self):
        for name in ("p_even", "p_mod1", "p_mod3"):
            object.__setattr__(self, name, _as_expr(getattr(self, name)))

    @property
    def max_jump(self):
        return 7

    def boundary_states(self):
        return frozenset({0, 1, 3})

    def table(self, xs):
        xs = _as_states(xs)
        J = np.zeros((xs.size, 3), dtype=np.int64)
        P = np.zeros((xs.size, 3))
        zero = xs == 0
        J[zero] = [2, 5, 7]
        P[zero] = 1.0 / 3.0
        drop = (xs == 1) | (xs == 3)
        J[drop, 0] = -xs[drop]
        P[drop, 0] = 1.0
        classes = (
            ((xs % 2 == 0) & (xs >= 2), 2, xs // 2, self.p_even),
            ((xs % 4 == 1) & (xs >= 5), 4, (xs - 1) // 4, self.p_mod1),
            ((xs % 4 == 3) & (xs >= 7), 4, (xs - 3) // 4, self.p_mod3),
        )
        for mask, step, index, expr in classes:
            if mask.any():
                p = _probability(expr, index[mask], self.strict)
                J[mask, 0] = step
                J[mask, 1] = -step
                P[mask, 0] = p
                P[mask, 1] = 1.0 - p
        return J, P


@dataclass(frozen=True)
class Rescaled(_Chain):
    """The chain ``k * X``; states not divisible by ``k`` are absorbing self-loops."""

    inner: "ChainSpec"
    k: int
    kind = "rescaled"

    def __post_init__(self):
        if int(self.k) < 1:
            raise InvalidSpec("scale k must be a positive integer")

    @property
    def max_jump(self):
        return self.k * self.inner.max_jump

    @property
    def strict(self):
        return self.inner.strict

    def boundary_states(self):
        return frozenset(self.k * s for s in self.inner.boundary_states())

    def table(self, ys):
        ys = _as_states(ys)
        on = ys % self.k == 0
        Ji, Pi = self.inner.table(ys[on] // self.k)
        J = np.zeros((ys.size, Ji.shape[1]), dtype=np.int64)
        P = np.zeros((ys.size, Ji.shape[1]))
        J[on] = Ji * self.k
        P[on] = Pi
        P[~on, 0] = 1.0
        return J, P


@dataclass(frozen=True)
class SubChain(_Chain):
    """Unit-lattice view of one value set of ``parent``.

    State ``u >= 1`` is the parent state ``min_state + modulus*(u-1)`` with
    jumps divided by ``step``; landings below ``min_state`` collapse onto the
    reset state 0, whose law is ``entry`` (pairs of ``(u, prob)``).
    """

    parent: "ChainSpec"
    modulus: int
    residue: int
    min_state: int
    step: int
    entry: tuple
    kind = "subchain"

    @property
    def strict(self):
        return self.parent.strict

    @property
    def max_jump(self):
        entry_max = max(u for u, _ in self.entry)
        return max(self.parent.max_jump // self.step + 1, entry_max)

    def boundary_states(self):
        return frozenset({0})

    def to_parent(self, us) -> np.ndarray:
        us = np.asarray(us, dtype=np.int64)
        return self.min_state + self.modulus * (us - 1)

    def table(self, us):
        us = _as_states(us)
        inner = us >= 1
        Jp, Pp = self.parent.table(self.to_parent(us[inner]))
        width = max(Jp.shape[1], len(self.entry))
        J = np.zeros((us.size, width), dtype=np.int64)
        P = np.zeros((us.size, width))
        land = self.to_parent(us[inner])[:, None] + Jp
        live = Pp > 0
        off = live & (land >= self.min_state) & ((land - self.min_state) % self.modulus != 0)
        if off.any():
            raise NonLatticeJump(
                f"parent jump off the lattice (modulus {self.modulus}) from state "
                f"{int(self.to_parent(us[inner])[np.nonzero(off)[0][0]])}"
            )
        target = np.where(land >= self.min_state, (land - self.min_state) // self.modulus + 1, 0)
        Ju = np.where(live, target - us[inner][:, None], 0)
        J[inner, : Jp.shape[1]] = Ju
        P[inner, : Jp.shape[1]] = Pp
        for c, (u, p) in enumerate(self.entry):
            J[~inner, c] = u
            P[~inner, c] = p
        return J, P


ChainSpec = Union[BirthDeath, JumpKernel, SplittableExample, Rescaled, SubChain]


def sorted_table(spec: ChainSpec, xs) -> tuple[np.ndarray, np.ndarray]:
    """``spec.table`` with every row ordered by ascending jump (stable)."""
    J, P = spec.table(xs)
    order = np.argsort(J, axis=1, kind="stable")
    return np.take_along_axis(J, order, 1), np.take_along_axis(P, order, 1)


def kernel(spec: ChainSpec, x: int) -> JumpDistribution:
    """Exact one-step jump law at state ``x``."""
    if x < 0:
        raise ValueError("state must be nonnegative")
    J, P = sorted_table(spec, [x])
    merged: dict[int, float] = {}
    for j, p in zip(J[0].tolist(), P[0].tolist()):
        if p > 0.0:
            merged[j] = merged.get(j, 0.0) + p
    for j in merged:
        if x + j < 0:
            raise InvalidSpec(f"jump {j} from state {x} goes below 0")
    return JumpDistribution(tuple(sorted(merged.items())))


def rescale(spec: ChainSpec, k: int) -> Rescaled:
    if int(k) != k or k < 1:
        raise InvalidSpec("scale k must be a positive integer")
    return Rescaled(spec, int(k))


@dataclass(frozen=True)
class DriftQuantities:
    x: int
    mu: float
    v: float
    nu: float
    up_part: float
    down_part: float
    p_up: float
    p_down: float
    p_stay: float
    snapped_from: int | None = field(default=None, compare=False)

    @property
    def rho(self) -> float:
        return self.up_part / self.down_part if self.down_part > 0 else math.inf

    @property
    def conditional_ratio(self) -> float:
        """E[jump | jump > 0] / E[-jump | jump < 0], the direction-conditioned reading."""
        if self.p_up == 0 or self.p_down == 0:
            return math.nan
        return (self.up_part / self.p_up) / (self.down_part / self.p_down)


def drift_table(spec: ChainSpec, xs) -> dict[str, np.ndarray]:
    """Vectorised conditional increment moments at each state in ``xs``."""
    J, P = spec.table(xs)
    Jf = J.astype(np.float64)
    n = J.shape[0]
    out = {k: np.zeros(n) for k in ("mu", "v", "nu", "up_part", "down_part", "p_up", "p_down", "p_stay")}
    # fixed left-to-right column accumulation keeps scalar and vector calls identical
    for c in range(J.shape[1]):
        j, p = Jf[:, c], P[:, c]
        out["mu"] += j * p
        out["v"] += j * j * p
        out["nu"] += np.abs(j) * p
        pos, neg = j > 0, j < 0
        out["up_part"] += np.where(pos, j * p, 0.0)
        out["down_part"] += np.where(neg, -j * p, 0.0)
        out["p_up"] += np.where(pos, p, 0.0)
        out["p_down"] += np.where(neg, p, 0.0)
        out["p_stay"] += np.where(j == 0, p, 0.0)
    return out


def drift(spec: ChainSpec, x: int) -> DriftQuantities:
    if x < 1:
        raise ValueError("drift is defined at interior states x >= 1")
    t = drift_table(spec, [x])
    return DriftQuantities(int(x), **{k: float(v[0]) for k, v in t.items()})


def check_moment_condition(spec: ChainSpec, epsilon: float, x_max: int) -> float:
    """Largest ``E|jump|^(2+epsilon)`` over states ``0..x_max``.

    Bounded jumps make this at most ``max_jump^(2+epsilon)``; that bound is
    asserted.
    """
    if not 0 < epsilon <= 1:
        raise ValueError("epsilon must lie in (0, 1]")
    J, P = spec.table(np.arange(x_max + 1))
    B = float((np.abs(J.astype(np.float64)) ** (2 + epsilon) * P).sum(axis=1).max())
    bound = float(spec.max_jump) ** (2 + epsilon)
    assert B <= bound * (1 + 1e-12), f"moment {B} exceeds max_jump bound {bound}"
    return B
