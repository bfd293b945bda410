"""Reference values computed independently of the package.

Everything here uses plain Python loops or closed forms so that a bug in the
vectorised library code cannot leak into the expected values.
"""

from __future__ import annotations

import math
from fractions import Fraction

from scipy.stats import binom

# Lamperti family p(x) = 1/2 + c/(4x): 2x*mu(x) = c exactly, v = nu = 1,
# and x*(p/q - 1) = c / (1 - c/(2x)) -> c.
FAMILY_C = (0.5, 1.0, 1.5, 2.0, 4.0)
FAMILY_LABEL = {0.5: "Recurrent", 1.0: "Recurrent", 1.5: "Transient", 2.0: "Transient", 4.0: "Transient"}


def family_p(c: float, x: int) -> float:
    return 0.5 + c / (4 * x)


def family_x_rho_minus_1(c: float, x: int) -> float:
    return c / (1 - c / (2 * x))


def bd_log_terms(p, n: int, start: int = 1) -> list:
    """log prod_{x=start}^{i} q(x)/p(x) for i = start..n with a scalar loop."""
    out, acc = [], 0.0
    for x in range(start, n + 1):
        px = min(max(p(x), 0.0), 1.0)
        acc += math.log(1.0 - px) - math.log(px)
        out.append(acc)
    return out


def bd_partial_sum_exact(p, n: int) -> Fraction:
    """Exact rational partial sum of prod q/p for rational-valued p."""
    total, prod = Fraction(0), Fraction(1)
    for x in range(1, n + 1):
        px = Fraction(p(x)).limit_denominator(10**9)
        prod *= (1 - px) / px
        total += prod
    return total


def symmetric_walk_hit_probability(distance: int, n_steps: int) -> float:
    """P(min_{k<=n} S_k <= -distance) for the simple symmetric walk (reflection principle).

    P(M_n >= a) = P(S_n >= a) + P(S_n > a), with S_n = 2B - n, B ~ Bin(n, 1/2).
    """
    a = distance

    def tail_ge(level):
        # S_n >= level  <=>  B >= ceil((n + level) / 2)
        k = math.ceil((n_steps + level) / 2)
        return float(binom.sf(k - 1, n_steps, 0.5))

    return tail_ge(a) + tail_ge(a + 1)


# splittable chain: value sets and their jump magnitudes
SPLIT_STEPS = [2, 4, 4]
SPLIT_RESIDUES = [(2, 0), (4, 1), (4, 3)]
SPLIT_BOUNDARY = {0: {2: 1 / 3, 5: 1 / 3, 7: 1 / 3}, 1: {-1: 1.0}, 3: {-3: 1.0}}
