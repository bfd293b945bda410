"""Recurrence/transience verdicts from fitted drift limits and from the product series.

Four criteria look at an :class:`~lamperti.drift_stats.AsymptoticFit`
(``lamperti_test``, ``corollary_test``, ``ratio_test``) or walk the series
``sum_i prod_{x<=i} D(x)/U(x)`` directly (``series_test``).
``bd_oracle`` is a separately coded birth-death series used as ground truth
in tests; :func:`classify` runs everything per value set and combines.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .chain_model import BirthDeath, ChainError, ChainSpec, drift_table, sorted_table
from .drift_stats import AsymptoticFit, DriftStatsError, FitConfig, fit_component
from .spec_lang import ExprError, evaluate_array
from .splitter import SplitError, aggregate, decompose, extract_subchain
from .verdict import Label, Verdict

__all__ = [
    "CriteriaConfig",
    "CriterionError",
    "NotConverged",
    "NotInClass",
    "ZeroDownDrift",
    "NotBirthDeath",
    "SeriesDiagnostics",
    "lamperti_test",
    "corollary_test",
    "ratio_test",
    "series_test",
    "series_log_terms",
    "bd_oracle",
    "bd_oracle_log_terms",
    "ComponentReport",
    "CombinedReport",
    "classify",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CriteriaConfig:
    decision_tol: float = 0.02
    transience_gap: float = 0.05
    i_max: int = 10**6
    exponent_gap: float = 0.1
    div_floor_frac: float = 0.1
    div_floor_abs: float = 1e-6
    tail_frac: float = 0.01
    truncation: int = 4096
    fit: FitConfig = FitConfig()


class CriterionError(ValueError):
    pass


class NotConverged(CriterionError):
    pass


class NotInClass(CriterionError):
    pass


class ZeroDownDrift(CriterionError):
    pass


class NotBirthDeath(CriterionError):
    pass


def _decide(theta: float, name: str, config: CriteriaConfig, evidence: dict, boundary: str) -> Verdict:
    evidence = dict(evidence, theta=theta)
    margin = theta - 1.0
    if theta <= 1.0 + config.decision_tol:
        return Verdict(Label.RECURRENT, name, margin, evidence)
    if theta >= 1.0 + config.transience_gap:
        return Verdict(Label.TRANSIENT, name, margin, evidence)
    return Verdict(
        Label.INCONCLUSIVE,
        name,
        margin,
        evidence,
        [
            f"{boundary}: theta={theta:.4f} lies between the recurrence bound "
            f"1+{config.decision_tol} and the transience bound 1+{config.transience_gap}"
        ],
    )


def _require_converged(fit: AsymptoticFit) -> None:
    if not fit.converged:
        raise NotConverged(
            f"fit did not converge (residual {fit.residual_norm:.3g}, eps {fit.eps_hat})"
        )


def lamperti_test(fit: AsymptoticFit, config: CriteriaConfig = CriteriaConfig()) -> Verdict:
    """Compare lim 2x*mu(x) against lim v(x).

    For a Markov kernel the upper and lower conditional moments coincide, so
    the two-sided condition collapses to the ratio ``theta = xi / r2``.
    """
    _require_converged(fit)
    if fit.r2_hat <= 0:
        raise NotConverged("second moment limit is zero; the chain does not move")
    theta = fit.xi_hat / fit.r2_hat
    return _decide(theta, "lamperti", config, {"xi_hat": fit.xi_hat, "r2_hat": fit.r2_hat}, "2x*mu vs v")


def corollary_test(fit: AsymptoticFit, config: CriteriaConfig = CriteriaConfig()) -> Verdict:
    """Same rule as :func:`lamperti_test`, restricted to chains whose drift and
    second-moment limits both exist (class parameters ``xi`` and ``r2``)."""
    for name, what in (("v", "v(x)"), ("two_x_mu", "2x*mu(x)")):
        if not fit.series_ok(name, config.fit):
            s = fit.series[name]
            raise NotInClass(
                f"{what} has no limit over the grid (relative residual {s.residual:.3g}, "
                f"exponent {s.eps})"
            )
    _require_converged(fit)
    v = lamperti_test(fit, config)
    v.criterion = "corollary"
    v.evidence["class"] = {"xi": fit.xi_hat, "r2": fit.r2_hat}
    v.evidence["v_decay_exponent"] = fit.series["v"].eps
    return v


def ratio_test(fit: AsymptoticFit, config: CriteriaConfig = CriteriaConfig()) -> Verdict:
    """Compare lim x*(U/D - 1) against the normaliser R = lim E|jump|."""
    _require_converged(fit)
    if not math.isfinite(fit.rho_coeff_hat):
        raise ZeroDownDrift("expected downward increment vanishes")
    if not (math.isfinite(fit.R_hat) and fit.R_hat > 0):
        raise NotConverged(f"normaliser R_hat={fit.R_hat} is not positive")
    theta = fit.rho_coeff_hat / fit.R_hat
    evidence = {"rho_coeff_hat": fit.rho_coeff_hat, "R_hat": fit.R_hat}
    if fit.cond_coeff_hat is not None:
        evidence["cond_coeff_hat"] = fit.cond_coeff_hat
    return _decide(theta, "ratio", config, evidence, "x(U/D-1) vs R")


# --------------------------------------------------------------------------
# product series


@dataclass
class SeriesDiagnostics:
    terms_computed: int
    x_start: int
    log_partial_sums: list
    local_exponent: float
    last_decade_increment: float
    div_floor: float
    tail_bound: float | None
    classification: str
    log_terms: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "terms_computed": self.terms_computed,
            "x_start": self.x_start,
            "log_partial_sums": [[int(i), s] for i, s in self.log_partial_sums],
            "local_exponent": self.local_exponent,
            "last_decade_increment": self.last_decade_increment,
            "div_floor": self.div_floor,
            "tail_bound": self.tail_bound,
            "classification": self.classification,
        }


def _sample_points(n: int, k: int = 40) -> np.ndarray:
    return np.unique(np.geomspace(1, n, k).astype(np.int64)) - 1


def _blocked(up: np.ndarray, down: np.ndarray) -> str | None:
    if np.any(up == 0):
        return "up"
    if np.all(down == 0):
        return "down"
    return None


_BLOCKED_NOTES = {
    "up": "U(x) = 0 persists: the chain cannot escape upward, so it cannot be transient",
    "down": "D(x) = 0 persists: the chain only moves up from some state on, so the series terms vanish",
}


def series_log_terms(spec: ChainSpec, i_max: int):
    """``log t_i`` for ``t_i = prod_{x=x_start}^{i} D(x)/U(x)``.

    Returns ``(x_start, log_terms, blocked)``; ``x_start`` is one past
    the last state where U or D vanishes and ``blocked`` is ``"up"`` or
    ``"down"`` when U or D stays zero through the second half of the range.
    """
    xs = np.arange(1, i_max + 1)
    t = drift_table(spec, xs)
    up, down = t["up_part"], t["down_part"]
    zero = (up == 0) | (down == 0)
    blocked = _blocked(up[i_max // 2 :], down[i_max // 2 :])
    x_start = int(xs[np.flatnonzero(zero)[-1]]) + 1 if zero.any() else 1
    sel = xs >= x_start
    with np.errstate(divide="ignore"):
        log_ratio = np.log(down[sel]) - np.log(up[sel])
    return x_start, np.cumsum(log_ratio), blocked


def series_test(spec: ChainSpec, config: CriteriaConfig = CriteriaConfig()):
    """Classify the product series as divergent (recurrent) or convergent (transient)."""
    n = int(config.i_max)
    x_start, log_t, blocked = series_log_terms(spec, n)
    if blocked:
        cls, label = ("Divergent", Label.RECURRENT) if blocked == "up" else ("Convergent", Label.TRANSIENT)
        diag = SeriesDiagnostics(0, x_start, [], math.nan, math.nan, math.nan, None, cls)
        return Verdict(label, "series", math.nan, {"x_start": x_start}, [_BLOCKED_NOTES[blocked]]), diag
    if log_t.size < 1000:
        diag = SeriesDiagnostics(int(log_t.size), x_start, [], math.nan, math.nan, math.nan, None, "Undecided")
        return (
            Verdict(Label.INCONCLUSIVE, "series", math.nan, {"x_start": x_start},
                    ["fewer than 1000 usable terms before i_max"]),
            diag,
        )
    i = np.arange(x_start, x_start + log_t.size, dtype=np.float64)
    log_S = np.logaddexp.accumulate(log_t)
    m = log_t.size

    decade = slice(m // 10, m)
    pick = np.unique(np.geomspace(1, decade.stop - decade.start, 200).astype(np.int64)) - 1 + decade.start
    slope = np.polyfit(np.log(i[pick]), log_t[pick], 1)[0]
    c = float(-slope)

    end = float(log_S[-1])
    start_dec = float(log_S[decade.start])
    incr = math.exp(end) * -math.expm1(start_dec - end) if end < 700 else math.inf
    half = float(log_S[m // 2])
    div_floor = max(config.div_floor_frac * math.exp(half) if half < 700 else math.inf, config.div_floor_abs)

    lo, hi = 1.0 - config.exponent_gap, 1.0 + config.exponent_gap
    tail = None
    if c > 1.0:
        log_tail = float(log_t[-1]) + math.log(i[-1]) - math.log(c - 1.0)
        tail = math.exp(log_tail) if log_tail < 700 else math.inf
    if c < lo or (c <= hi and incr > div_floor):
        cls = "Divergent"
    elif c > hi and log_tail < math.log(config.tail_frac) + end:
        cls = "Convergent"
    else:
        cls = "Undecided"

    sample = _sample_points(m)
    diag = SeriesDiagnostics(
        terms_computed=m,
        x_start=x_start,
        log_partial_sums=[(int(i[k]), float(log_S[k])) for k in sample],
        local_exponent=c,
        last_decade_increment=incr,
        div_floor=div_floor,
        tail_bound=tail,
        classification=cls,
        log_terms=log_t,
    )
    label = {"Divergent": Label.RECURRENT, "Convergent": Label.TRANSIENT}.get(cls, Label.INCONCLUSIVE)
    J, P = spec.table(np.arange(1, 1025))
    notes = [] if np.all(np.abs(J[P > 0]) <= 1) else [
        "series criterion assumes extra regularity for kernels that are not "
        "birth-death; read it as supporting evidence there"
    ]
    if label is Label.INCONCLUSIVE:
        notes.append(f"local exponent {c:.4f} near 1 and last-decade increment {incr:.3g} <= floor {div_floor:.3g}")
    evidence = {"local_exponent": c, "log_S_end": end, "x_start": x_start, "exponent_window": lo <= c <= hi}
    return Verdict(label, "series", c - 1.0, evidence, notes), diag


# --------------------------------------------------------------------------
# birth-death oracle: deliberately separate arithmetic from series_test


def _birth_death_rates(spec: ChainSpec, xs: np.ndarray):
    if isinstance(spec, BirthDeath):
        p = np.clip(evaluate_array(spec.p, xs), 0.0, 1.0)
        return p, 1.0 - p
    J, P = sorted_table(spec, np.concatenate([[0], xs]))
    live = P > 0
    if not (np.all(J[0][live[0]] == 1)):
        raise NotBirthDeath("state 0 must move to 1")
    Ji, Pi, Li = J[1:], P[1:], live[1:]
    if np.any(Li & (np.abs(Ji) != 1)):
        raise NotBirthDeath("interior jumps other than +-1")
    p = np.where(Ji == 1, Pi, 0.0).sum(axis=1)
    q = np.where(Ji == -1, Pi, 0.0).sum(axis=1)
    if np.any(np.abs(p + q - 1.0) > 1e-12):
        raise NotBirthDeath("holding probability present")
    return p, q


def bd_oracle_log_terms(spec: ChainSpec, n_terms: int):
    """``(x_start, log prod q/p)`` for a nearest-neighbour chain."""
    xs = np.arange(1, n_terms + 1)
    p, q = _birth_death_rates(spec, xs)
    stuck = np.flatnonzero((p == 0) | (q == 0))
    first = int(stuck[-1]) + 1 if stuck.size else 0
    with np.errstate(divide="ignore"):
        logs = np.log(q[first:]) - np.log(p[first:])
    return first + 1, np.cumsum(logs), p


def bd_oracle(spec: ChainSpec, config: CriteriaConfig = CriteriaConfig()) -> Verdict:
    """Classical birth-death test: recurrent iff sum_i prod_{x<=i} q(x)/p(x) diverges."""
    n = int(config.i_max)
    x_start, lt, p = bd_oracle_log_terms(spec, n)
    if np.any(p[n // 2 :] == 0):
        return Verdict(Label.RECURRENT, "bd_oracle", math.nan, {"x_start": x_start},
                       ["p(x) = 0 persists: no upward escape"])
    if np.all(p[n // 2 :] == 1):
        return Verdict(Label.TRANSIENT, "bd_oracle", math.nan, {"x_start": x_start},
                       ["q(x) = 0 persists: the walk climbs deterministically"])
    if lt.size < 1000:
        return Verdict(Label.INCONCLUSIVE, "bd_oracle", math.nan, {"x_start": x_start},
                       ["fewer than 1000 usable terms"])
    idx = np.arange(x_start, x_start + lt.size, dtype=np.float64)
    m = lt.size
    a = m // 10
    # partial sums scaled by the largest term; early sums may underflow to -inf
    top = float(lt.max())
    with np.errstate(divide="ignore"):
        log_S = top + np.log(np.cumsum(np.exp(lt - top)))
    w = np.unique(np.geomspace(1, m - a, 200).astype(np.int64)) - 1 + a
    X = np.log(idx[w])
    c = -float(((X - X.mean()) * (lt[w] - lt[w].mean())).sum() / ((X - X.mean()) ** 2).sum())
    S_end, S_dec, S_half = float(log_S[-1]), float(log_S[a]), float(log_S[m // 2])
    lo, hi = 1.0 - config.exponent_gap, 1.0 + config.exponent_gap
    evidence = {"local_exponent": c, "log_S_end": S_end, "x_start": x_start, "exponent_window": lo <= c <= hi}
    if c < lo:
        label = Label.RECURRENT
    elif c <= hi:
        gain = S_end + math.log(-math.expm1(S_dec - S_end))
        floor = max(math.log(config.div_floor_frac) + S_half, math.log(config.div_floor_abs))
        label = Label.RECURRENT if gain > floor else Label.INCONCLUSIVE
    else:
        tail = float(lt[-1]) + math.log(idx[-1]) - math.log(c - 1.0)
        label = Label.TRANSIENT if tail < math.log(config.tail_frac) + S_end else Label.INCONCLUSIVE
    notes = [] if label.definite else [f"local exponent {c:.4f} does not separate from 1"]
    return Verdict(label, "bd_oracle", c - 1.0, evidence, notes)


# --------------------------------------------------------------------------
# orchestration


@dataclass
class ComponentReport:
    index: int
    fit: AsymptoticFit | None
    verdicts: list
    errors: list
    series: SeriesDiagnostics | None
    headline: Verdict

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "fit": self.fit.to_dict() if self.fit is not None else None,
            "verdicts": [v.to_dict() for v in self.verdicts],
            "errors": list(self.errors),
            "series": self.series.to_dict() if self.series is not None else None,
            "headline": self.headline.to_dict(),
        }


@dataclass
class CombinedReport:
    headline: Label
    decomposition: object | None
    components: list
    aggregate: Verdict
    notes: list = field(default_factory=list)
    errors: list = field(default_factory=list)

    def theta(self) -> float | None:
        """Largest per-component theta, preferring xi/r2 over the ratio-test reading."""
        for criterion in ("lamperti", "ratio"):
            thetas = [
                v.evidence["theta"]
                for c in self.components
                for v in c.verdicts
                if v.criterion == criterion
            ]
            if thetas:
                return max(thetas)
        return None

    def to_dict(self) -> dict:
        return {
            "headline": self.headline.value,
            "theta": self.theta(),
            "decomposition": self.decomposition.to_dict() if self.decomposition else None,
            "components": [c.to_dict() for c in self.components],
            "aggregate": self.aggregate.to_dict(),
            "notes": list(self.notes),
            "errors": list(self.errors),
        }


_EXPECTED = (CriterionError, DriftStatsError, SplitError, ChainError, ExprError)


def _error(criterion: str, exc: Exception) -> dict:
    return {"criterion": criterion, "error": type(exc).__name__, "message": str(exc)}


def combine(verdicts: list, name: str = "combined") -> Verdict:
    """Definite label when all definite criteria agree, Inconclusive on conflict.

    A series verdict whose fitted exponent sits inside the window around 1
    cannot separate a slowly converging sum from a diverging one, so on its
    own it does not settle the headline.
    """
    definite = {v.label for v in verdicts if v.label.definite}
    firm = {v.label for v in verdicts if v.label.definite and not v.evidence.get("exponent_window")}
    margins = [v.margin for v in verdicts if v.margin is not None and math.isfinite(v.margin)]
    margin = max(margins) if margins else math.nan
    evidence = {v.criterion: v.label.value for v in verdicts}
    if len(definite) > 1:
        return Verdict(Label.INCONCLUSIVE, name, margin, evidence,
                       ["criteria conflict: " + ", ".join(f"{k}={val}" for k, val in evidence.items())])
    if firm:
        return Verdict(firm.pop(), name, margin, evidence)
    if definite:
        return Verdict(Label.INCONCLUSIVE, name, margin, evidence,
                       ["only series criteria decided, with exponent inside the window around 1"])
    return Verdict(Label.INCONCLUSIVE, name, margin, evidence, ["no criterion reached a definite label"])


def classify_component(spec: ChainSpec, comp, config: CriteriaConfig) -> ComponentReport:
    verdicts, errors = [], []
    fit = None
    try:
        fit = fit_component(spec, comp, config.fit)
    except _EXPECTED as exc:
        errors.append(_error("fit", exc))
    if fit is not None:
        for name, test in (("lamperti", lamperti_test), ("corollary", corollary_test), ("ratio", ratio_test)):
            try:
                verdicts.append(test(fit, config))
            except _EXPECTED as exc:
                errors.append(_error(name, exc))
    sub = extract_subchain(spec, comp)
    diag = None
    try:
        v, diag = series_test(sub, config)
        verdicts.append(v)
    except _EXPECTED as exc:
        errors.append(_error("series", exc))
    try:
        verdicts.append(bd_oracle(sub, config))
    except NotBirthDeath as exc:
        log.debug("component %d: bd_oracle skipped (%s)", comp.index, exc)
    except _EXPECTED as exc:
        errors.append(_error("bd_oracle", exc))
    headline = combine(verdicts, f"component_{comp.index}")
    return ComponentReport(comp.index, fit, verdicts, errors, diag, headline)


def _undecomposed(spec: ChainSpec, config: CriteriaConfig, exc: Exception) -> CombinedReport:
    """Fallback when no value-set structure is found.

    A chain whose upward (or downward) motion dies out is still decidable
    from the series alone; anything else stays Inconclusive.
    """
    errors = [_error("decompose", exc)]
    notes = [f"decomposition failed: {exc}"]
    try:
        verdict, diag = series_test(spec, config)
    except _EXPECTED as inner:
        errors.append(_error("series", inner))
    else:
        if verdict.label.definite and diag.terms_computed == 0:
            agg = Verdict(verdict.label, "aggregate", math.nan, {"component_labels": []}, list(verdict.notes))
            return CombinedReport(verdict.label, None, [], agg, notes, errors)
    agg = Verdict(Label.INCONCLUSIVE, "aggregate", math.nan, {}, notes)
    return CombinedReport(Label.INCONCLUSIVE, None, [], agg, notes, errors)


def classify(spec: ChainSpec, config: CriteriaConfig = CriteriaConfig()) -> CombinedReport:
    """Split, fit and test every value set, then combine into one headline."""
    try:
        dec = decompose(spec, config.truncation)
    except _EXPECTED as exc:
        return _undecomposed(spec, config, exc)
    reports = [classify_component(spec, c, config) for c in dec.components]
    limit_points = [r.fit.R_hat for r in reports if r.fit is not None]
    agg = aggregate([r.headline for r in reports], limit_points or None)
    notes = []
    if dec.l > 1:
        notes.append(f"chain splits into {dec.l} value sets; transient if any set is")
    return CombinedReport(agg.label, dec, reports, agg, notes)
