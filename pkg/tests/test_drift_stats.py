import numpy as np
import pytest

from lamperti.chain_model import BirthDeath, SplittableExample, rescale
from lamperti.drift_stats import (
    EmptyGrid,
    FitConfig,
    FitDiverged,
    InsufficientGrid,
    detect_limit_points,
    fit_asymptotics,
    fit_component,
    geometric_grid,
    profile,
)
from lamperti.splitter import decompose

from .oracles import FAMILY_C, family_x_rho_minus_1

GRID = FitConfig().grid()


def family(c):
    return BirthDeath(f"0.5 + {c}/(4*x)")


def test_default_grid_is_dithered_geometric():
    assert GRID == [16 * 2**k + k for k in range(12)]
    assert geometric_grid(16, 2, 4, dither=False) == [16, 32, 64, 128]
    # the dither visits every residue mod 4
    assert {x % 4 for x in GRID} == {0, 1, 2, 3}


def test_grid_must_increase():
    with pytest.raises(InsufficientGrid):
        geometric_grid(4, 1.0, 5, dither=False)


def test_profile_examples():
    rows = profile(BirthDeath("0.5"), [10, 100, 1000])
    assert [r.mu for r in rows] == [0.0, 0.0, 0.0]
    (row,) = profile(family(2), [100])
    assert row.mu == pytest.approx(0.01, abs=1e-16)
    assert 2 * row.x * row.mu == pytest.approx(2.0, abs=1e-13)


def test_profile_snaps_to_component():
    spec = SplittableExample("0.5", "0.5", "0.5")
    evens = decompose(spec).components[0]
    rows = profile(spec, [99, 100, 101], evens)
    assert [r.x for r in rows] == [98, 100]
    assert rows[0].snapped_from == 99
    assert all(r.nu == 2.0 for r in rows)


def test_profile_rejects_empty_grid():
    with pytest.raises(EmptyGrid):
        profile(family(1), [])


def test_exact_family_fit():
    fit = fit_asymptotics(profile(family(2), [10 * 2**k for k in range(11)]))
    assert fit.xi_hat == pytest.approx(2.0, abs=1e-12)
    assert fit.series["two_x_mu"].eps is None
    assert fit.converged


def test_perturbed_family_recovers_limit_and_exponent():
    fit = fit_asymptotics(profile(BirthDeath("0.5 + 1/(4*x) + 1/(x^2)"), GRID))
    assert fit.xi_hat == pytest.approx(1.0, abs=FitConfig().fit_tol)
    assert fit.eps_hat == pytest.approx(1.0, abs=0.05)
    assert fit.converged


def test_symmetric_walk_fit():
    fit = fit_asymptotics(profile(BirthDeath("0.5"), GRID))
    assert (fit.xi_hat, fit.R_hat, fit.rho_coeff_hat, fit.r2_hat) == (0.0, 1.0, 0.0, 1.0)
    assert fit.eps_hat is None and fit.converged


@pytest.mark.parametrize("c", FAMILY_C)
def test_ratio_coefficient_matches_closed_form(c):
    fit = fit_asymptotics(profile(family(c), GRID))
    assert fit.rho_coeff_hat == pytest.approx(c, rel=1e-4)
    # the grid values themselves match the closed form to rounding
    for row in profile(family(c), GRID):
        assert row.x * (row.rho - 1) == pytest.approx(family_x_rho_minus_1(c, row.x), rel=1e-10)


def test_limit_points_of_splittable_chain():
    spec = SplittableExample("0.5", "0.5", "0.5")
    fits = detect_limit_points(spec, decompose(spec))
    assert [f.R_hat for f in fits] == [2.0, 4.0, 4.0]
    assert [f.r2_hat for f in fits] == [4.0, 16.0, 16.0]
    assert [f.component for f in fits] == [0, 1, 2]


def test_even_component_drift_scales_with_step():
    spec = SplittableExample("0.5 + 2/(4*x)", "0.5", "0.5")
    even = fit_component(spec, decompose(spec).components[0])
    # a unit-step c=2 walk seen on the lattice 2Z: xi -> 4*2, r2 -> 4
    assert even.xi_hat == pytest.approx(8.0, rel=1e-9)
    assert even.r2_hat == pytest.approx(4.0, rel=1e-12)


def test_single_class_component_fit_equals_plain_fit():
    spec = family(1.5)
    (comp,) = decompose(spec).components
    a = fit_component(spec, comp)
    b = fit_asymptotics(profile(spec, GRID))
    assert (a.xi_hat, a.r2_hat, a.R_hat, a.rho_coeff_hat) == (b.xi_hat, b.r2_hat, b.R_hat, b.rho_coeff_hat)


def test_unsplit_splittable_chain_does_not_converge():
    fit = fit_asymptotics(profile(SplittableExample("0.5", "0.5", "0.5"), GRID))
    assert not fit.series_ok("v", FitConfig())
    assert not fit.converged


def test_constant_drift_is_flagged_divergent():
    with pytest.raises(FitDiverged):
        fit_asymptotics(profile(BirthDeath("0.6"), GRID))


def test_grid_must_span_two_decades():
    with pytest.raises(InsufficientGrid):
        fit_asymptotics(profile(family(1), list(range(100, 1000, 100))))


def test_rescaled_fit_scales():
    base = fit_asymptotics(profile(family(2), GRID))
    for k in (2, 3, 5):
        scaled = fit_component(rescale(family(2), k), decompose(rescale(family(2), k)).components[0])
        assert scaled.xi_hat == pytest.approx(k * k * base.xi_hat, rel=1e-3)
        assert scaled.R_hat == pytest.approx(k * base.R_hat, rel=1e-12)
        assert scaled.rho_coeff_hat == pytest.approx(k * base.rho_coeff_hat, rel=1e-3)


def test_report_dict_is_serialisable():
    import json

    d = fit_asymptotics(profile(family(1), GRID)).to_dict()
    assert set(d["series"]) == {"two_x_mu", "v", "nu", "x_rho_minus_1"}
    json.dumps(d, allow_nan=False)
    assert np.isfinite(d["residual_norm"])
