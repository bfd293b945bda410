"""Asymptotic drift limits fitted from exact kernel moments on a geometric grid.

Each tracked sequence ``y(x)`` is modelled as ``L + C * x**(-eps)`` on the
upper half of the grid. For fixed ``eps`` the model is linear in ``(L, C)``,
so ``eps`` is found by a bounded one-dimensional search over the least
squares residual (variable projection) and ``L`` is the extrapolated limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .chain_model import ChainSpec, DriftQuantities, drift_table

__all__ = [
    "FitConfig",
    "AsymptoticFit",
    "SeriesFit",
    "DriftStatsError",
    "EmptyGrid",
    "InsufficientGrid",
    "FitDiverged",
    "NonPositiveDownPart",
    "geometric_grid",
    "profile",
    "fit_asymptotics",
    "fit_component",
    "detect_limit_points",
]

EPS_BOUNDS = (0.01, 4.0)
# relative tail spread below which a sequence counts as already at its limit
FLAT_SPREAD = 1e-7
DIVERGENCE_SLOPE = 0.25


class DriftStatsError(ValueError):
    component: int | None = None


class EmptyGrid(DriftStatsError):
    pass


class InsufficientGrid(DriftStatsError):
    pass


class FitDiverged(DriftStatsError):
    pass


class NonPositiveDownPart(DriftStatsError):
    pass


@dataclass(frozen=True)
class FitConfig:
    x0: int = 16
    growth: float = 2.0
    n_points: int = 12
    fit_tol: float = 1e-3
    eps_min: float = 0.05
    dither: bool = True

    def grid(self) -> list:
        return geometric_grid(self.x0, self.growth, self.n_points, self.dither)


def geometric_grid(x0: int, growth: float, n: int, dither: bool = True) -> list:
    """``x0 * growth**k`` for k < n, plus ``k`` when dithering.

    The ``+k`` offset walks the grid through every residue class of small
    moduli, so chains whose moments depend on ``x mod m`` cannot hide behind
    a grid of multiples of ``x0``.
    """
    pts = [int(round(x0 * growth**k)) + (k if dither else 0) for k in range(n)]
    if any(b <= a for a, b in zip(pts, pts[1:])):
        raise InsufficientGrid(f"grid {pts} is not strictly increasing")
    return pts


@dataclass(frozen=True)
class SeriesFit:
    limit: float
    coeff: float
    eps: float | None
    residual: float

    @property
    def flat(self) -> bool:
        return self.eps is None


@dataclass
class AsymptoticFit:
    xi_hat: float
    r2_hat: float
    R_hat: float
    rho_coeff_hat: float
    eps_hat: float | None
    grid: tuple
    residual_norm: float
    converged: bool
    series: dict = field(default_factory=dict)
    cond_coeff_hat: float | None = None
    component: int | None = None
    snapped: bool = False

    def series_ok(self, name: str, config: FitConfig) -> bool:
        s = self.series[name]
        return s.residual < config.fit_tol and (s.eps is None or s.eps > config.eps_min)

    def to_dict(self) -> dict:
        return {
            "xi_hat": self.xi_hat,
            "r2_hat": self.r2_hat,
            "R_hat": self.R_hat,
            "rho_coeff_hat": self.rho_coeff_hat,
            "eps_hat": self.eps_hat,
            "cond_coeff_hat": self.cond_coeff_hat,
            "grid": list(self.grid),
            "residual_norm": self.residual_norm,
            "converged": self.converged,
            "component": self.component,
            "snapped": self.snapped,
            "series": {
                k: {"limit": s.limit, "coeff": s.coeff, "eps": s.eps, "residual": s.residual}
                for k, s in self.series.items()
            },
        }


def profile(spec: ChainSpec, grid, component=None) -> list:
    """Exact drift quantities at each grid state.

    With ``component`` given, every grid point is snapped to that value
    set's progression; the original point is kept in ``snapped_from`` and
    snaps that collide with an earlier point are dropped.
    """
    grid = [int(x) for x in grid]
    if not grid:
        raise EmptyGrid("grid is empty")
    if grid[0] < 1 or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("grid states must be >= 1 and strictly increasing")
    origin = [None] * len(grid)
    if component is not None:
        snapped, origin = [], []
        for x in grid:
            s = component.snap(x)
            if snapped and s <= snapped[-1]:
                continue
            snapped.append(s)
            origin.append(x if s != x else None)
        grid = snapped
    t = drift_table(spec, grid)
    return [
        DriftQuantities(x, snapped_from=o, **{k: float(v[i]) for k, v in t.items()})
        for i, (x, o) in enumerate(zip(grid, origin))
    ]


def _vp_residual(eps: float, t: np.ndarray, y: np.ndarray):
    A = np.column_stack([np.ones_like(t), t**-eps])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    r = y - A @ coef
    return float(r @ r), coef


def _extrapolate(x: np.ndarray, y: np.ndarray) -> SeriesFit:
    scale = float(np.max(np.abs(y)))
    if scale == 0.0:
        return SeriesFit(0.0, 0.0, None, 0.0)
    if float(np.ptp(y)) <= FLAT_SPREAD * scale:
        return SeriesFit(float(np.median(y)), 0.0, None, 0.0)
    # scaled abscissa keeps the design matrix well conditioned
    t = x / x[0]
    res = minimize_scalar(
        lambda e: _vp_residual(e, t, y)[0],
        bounds=EPS_BOUNDS,
        method="bounded",
        options={"xatol": 1e-10},
    )
    eps = float(res.x)
    ssr, (L, C) = _vp_residual(eps, t, y)
    rms = math.sqrt(ssr / y.size)
    denom = max(abs(float(L)), scale)
    return SeriesFit(float(L), float(C) * float(x[0]) ** eps, eps, rms / denom)


def fit_asymptotics(profiles: list, config: FitConfig = FitConfig()) -> AsymptoticFit:
    if len(profiles) < 8:
        raise InsufficientGrid(f"need at least 8 profile points, got {len(profiles)}")
    x = np.array([p.x for p in profiles], dtype=np.float64)
    if x[-1] < 100.0 * x[0]:
        raise InsufficientGrid("profile states must span at least two decades")
    # only the upper half feeds the extrapolation; D = 0 near the boundary is harmless
    tail = slice(len(profiles) // 2, None)
    xt = x[tail]
    down = np.array([p.down_part for p in profiles])
    if np.any(down[tail] <= 0):
        bad = int(xt[np.flatnonzero(down[tail] <= 0)[0]])
        raise NonPositiveDownPart(f"D(x) = 0 at x={bad}; the ratio U/D is undefined")
    up = np.array([p.up_part for p in profiles])
    mu = np.array([p.mu for p in profiles])
    with np.errstate(divide="ignore", invalid="ignore"):
        rho = up / down
    seqs = {
        "two_x_mu": 2.0 * x * mu,
        "v": np.array([p.v for p in profiles]),
        "nu": np.array([p.nu for p in profiles]),
        "x_rho_minus_1": x * (rho - 1.0),
    }

    drift_tail = np.abs(seqs["two_x_mu"][tail])
    if np.all(drift_tail > 0) and np.all(np.diff(drift_tail) > 0):
        slope = np.polyfit(np.log(xt), np.log(drift_tail), 1)[0]
        if slope > DIVERGENCE_SLOPE:
            raise FitDiverged(
                f"2x*mu(x) grows like x^{slope:.2f}; drift is not of order 1/x"
            )

    series = {k: _extrapolate(xt, v[tail]) for k, v in seqs.items()}
    eps_vals = [s.eps for s in series.values() if s.eps is not None]
    eps_hat = min(eps_vals) if eps_vals else None
    residual_norm = max(s.residual for s in series.values())
    converged = residual_norm < config.fit_tol and (eps_hat is None or eps_hat > config.eps_min)

    cond = np.array([p.conditional_ratio for p in profiles[tail]])
    cond_coeff = None
    if np.all(np.isfinite(cond)):
        cond_coeff = _extrapolate(xt, xt * (cond - 1.0)).limit

    return AsymptoticFit(
        xi_hat=series["two_x_mu"].limit,
        r2_hat=series["v"].limit,
        R_hat=series["nu"].limit,
        rho_coeff_hat=series["x_rho_minus_1"].limit,
        eps_hat=eps_hat,
        grid=tuple(int(v) for v in x),
        residual_norm=residual_norm,
        converged=bool(converged),
        series=series,
        cond_coeff_hat=cond_coeff,
        snapped=any(p.snapped_from is not None for p in profiles),
    )


def fit_component(spec: ChainSpec, component, config: FitConfig = FitConfig()) -> AsymptoticFit:
    """Fit restricted to one value set's progression, in whole-chain coordinates."""
    try:
        fit = fit_asymptotics(profile(spec, config.grid(), component), config)
    except DriftStatsError as exc:
        exc.component = component.index
        raise
    fit.component = component.index
    return fit


def detect_limit_points(spec: ChainSpec, decomposition, config: FitConfig = FitConfig()) -> list:
    """One fit per value set; their ``R_hat`` values are the limit points of nu(x)."""
    return [fit_component(spec, c, config) for c in decomposition.components]
