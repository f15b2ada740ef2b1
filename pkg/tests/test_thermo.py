import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate
from scipy.special import digamma

from betheforge.chain import make_chain_spec
from betheforge.errors import DomainError, NumericError
from betheforge.thermo import (DensityGrid, correction_integral, delta_energy_dispersion,
                               delta_energy_numeric, excited_corrections, hole_energy,
                               hole_momentum, make_context, removed_strings, solve_vacuum_integral,
                               speed_of_sound, unused_numbers, vacuum_density, vacuum_energy,
                               vacuum_momentum)

HALF = make_chain_spec(["1/2"], 1)
ALT = make_chain_spec(["1/2", "1"], 1)
MOTIFS = [["1/2"], ["1"], ["3/2"], ["1/2", "1"], ["1/2", "3/2"]]


def sup_error(spec, grid):
    return max(float(np.max(np.abs(grid.values[s] - vacuum_density(spec, s, grid.lam))))
               for s in spec.distinct)


# ---------------------------------------------------------------- vacuum


def test_density_at_origin():
    assert vacuum_density(ALT, "1", 0.0) == pytest.approx(0.25)


def test_density_integral():
    val, _ = integrate.quad(lambda x: vacuum_density(ALT, "1/2", x), -np.inf, np.inf,
                            epsabs=1e-13)
    assert abs(val - 0.25) < 1e-10


def test_density_even():
    assert vacuum_density(HALF, "1/2", 3.0) == vacuum_density(HALF, "1/2", -3.0)


@pytest.mark.parametrize("method", ["transform", "nystrom"])
@pytest.mark.parametrize("motif", MOTIFS)
def test_integral_equation_solution(motif, method):
    spec = make_chain_spec(motif, 1)
    grid = solve_vacuum_integral(spec, DensityGrid.symmetric(24, 4096), method)
    assert sup_error(spec, grid) < 1e-6


def test_alternating_densities_factorise():
    grid = solve_vacuum_integral(ALT)
    base = 1 / (2 * np.cosh(np.pi * grid.lam))
    for s in ALT.distinct:
        assert np.max(np.abs(grid.values[s] - 0.5 * base)) < 1e-6


def test_grid_refinement_reduces_error():
    coarse = solve_vacuum_integral(HALF, DensityGrid.symmetric(24, 256), "nystrom")
    fine = solve_vacuum_integral(HALF, DensityGrid.symmetric(24, 512), "nystrom")
    assert sup_error(HALF, fine) <= sup_error(HALF, coarse) / 2


def test_window_too_small():
    with pytest.raises(NumericError):
        solve_vacuum_integral(HALF, DensityGrid.symmetric(3, 1024))


def test_grid_validation():
    with pytest.raises(DomainError):
        DensityGrid(-1, 1, 1000)
    with pytest.raises(DomainError):
        solve_vacuum_integral(HALF, method="spectral")


def test_vacuum_energy_spin_half():
    v = vacuum_energy(HALF, "1/2")
    assert abs(v["closed_form"] + 2 * math.log(2)) < 1e-12
    assert abs(v["numeric"] - v["closed_form"]) < 1e-8


def test_vacuum_energy_alternating_instantiation():
    expect = -0.5 * (digamma(1) - digamma(0.5)) - 0.5 * (digamma(1.25) - digamma(0.75))
    assert vacuum_energy(ALT, "1/2")["closed_form"] == pytest.approx(expect, abs=1e-14)


def test_vacuum_energy_same_spin_term():
    spec = make_chain_spec(["3/2"], 1)
    expect = -(digamma(2) - digamma(0.5))
    assert vacuum_energy(spec, "3/2")["closed_form"] == pytest.approx(expect, abs=1e-14)


@pytest.mark.parametrize("motif", MOTIFS)
def test_vacuum_energy_two_routes(motif):
    spec = make_chain_spec(motif, 1)
    for s in spec.distinct:
        v = vacuum_energy(spec, s)
        assert abs(v["closed_form"] - v["numeric"]) < 1e-8


def test_vacuum_energy_rejects_absent_spin():
    with pytest.raises(DomainError):
        vacuum_energy(HALF, "1")


@pytest.mark.parametrize("L,expect", [(4, 0), (8, 0), (2, 1), (6, 1)])
def test_vacuum_momentum_spin_half(L, expect):
    out = vacuum_momentum(make_chain_spec(["1/2"], L))
    assert out["in_pi_units"] == expect
    assert out["coefficient"] == Fraction(1, 2)


@pytest.mark.parametrize("L", [1, 2, 3])
def test_vacuum_momentum_spin_one(L):
    out = vacuum_momentum(make_chain_spec(["1"], L))
    assert out["value"] == pytest.approx(math.fmod(math.pi * L, 2 * math.pi))


def test_vacuum_momentum_window():
    assert 0 <= vacuum_momentum(make_chain_spec(["3/2"], 3))["value"] < 2 * math.pi


# ---------------------------------------------------------------- excitations


def test_context_validation():
    with pytest.raises(DomainError, match="odd"):
        make_context(HALF, {1: [0.1]})
    with pytest.raises(DomainError):
        make_context(HALF, {2: [0.1, 0.2]})
    with pytest.raises(DomainError):
        make_context(HALF, {1: [0.1, 0.2]}, {Fraction(1, 2): [0.0]})
    with pytest.raises(DomainError, match="mu"):
        make_context(make_chain_spec(["1"], 1), {1: [0.1, 0.2]})


def test_feasibility_accounting():
    ctx = make_context(HALF, {1: [0.2, 1.1]}, {1: [0.6]})
    assert removed_strings(HALF, ctx) == {1: 2}
    assert unused_numbers(HALF, ctx)[1] == 0


def test_empty_context_has_no_corrections():
    ctx = make_context(HALF)
    out = excited_corrections(HALF, ctx, np.linspace(-2, 2, 5), 1)
    assert np.all(out["r"] == 0) and np.all(out["c"] == 0) and not out["point_masses"]


def test_pure_holes_have_no_polarisation():
    ctx = make_context(HALF, {1: [0.3, -0.7]})
    assert np.all(excited_corrections(HALF, ctx, np.linspace(-3, 3, 7), 1)["c"] == 0)


CONTEXTS = [
    (["1/2"], {1: [0.3, -0.7]}, {}),
    (["1/2"], {1: [0.2, 1.1]}, {1: [0.6]}),
    (["1"], {1: [0.2, 1.1]}, {Fraction(1, 2): [0.4]}),
    (["1/2", "1"], {1: [0.1, 0.9], 2: [-0.4, 0.5]}, {}),
]


def line_integral(x, f):
    """Integral over the line of a function with ``1/x^2`` tails.

    Trapezoid sums on ``[-X, X]`` for ``X = 20, 40, 80`` carry tail errors
    ``a/X + b/X^3``; two Richardson steps remove both.
    """
    I = {X: integrate.trapezoid(f[np.abs(x) <= X + 1e-9], x[np.abs(x) <= X + 1e-9])
         for X in (20, 40, 80)}
    r1 = {X: 2 * I[2 * X] - I[X] for X in (20, 40)}
    return (8 * r1[40] - r1[20]) / 7


@pytest.mark.parametrize("motif,holes,strs", CONTEXTS)
def test_root_count_from_quadrature(motif, holes, strs):
    spec = make_chain_spec(motif, 1)
    ctx = make_context(spec, holes, strs)
    mu = removed_strings(spec, ctx)
    x = np.linspace(-80, 80, 3201)
    for j in range(1, spec.n_seas + 1):
        out = excited_corrections(spec, ctx, x, j)
        sampled = line_integral(x, out["r"] + out["c"])
        sampled += sum(w for _, w in out["point_masses"])
        exact = correction_integral(spec, ctx, j)
        assert abs(sampled - (exact["r"] + exact["c"])) < 1e-6
        assert abs(exact["r"] + exact["c"] + float(mu[j])) < 1e-12


@pytest.mark.parametrize("motif,holes,strs", CONTEXTS)
def test_energy_theorem_matches_numeric(motif, holes, strs):
    spec = make_chain_spec(motif, 1)
    ctx = make_context(spec, holes, strs)
    for s in spec.distinct:
        d = delta_energy_dispersion(spec, ctx, s)
        assert abs(delta_energy_numeric(spec, ctx, s) - d["dE"]) < 1e-8


def test_two_holes_at_origin():
    ctx = make_context(ALT, {1: [0.0, 0.0], 2: [0.4, 0.9]})
    d = delta_energy_dispersion(ALT, ctx, "1/2")
    assert d["dE"] == pytest.approx(2 * math.pi)
    assert d["momenta"] == pytest.approx([math.pi / 4] * 2)


def test_holes_in_other_sea_do_not_contribute():
    # the density route knows nothing of the theorem; moving the sea-2 holes must not matter
    a = make_context(ALT, {1: [0.1, 0.9], 2: [-0.4, 0.5]})
    b = make_context(ALT, {1: [0.1, 0.9], 2: [1.3, -2.2]})
    assert abs(delta_energy_numeric(ALT, a, "1/2") - delta_energy_numeric(ALT, b, "1/2")) < 1e-8


def test_far_hole_limits():
    assert hole_energy(40.0) < 1e-50
    assert hole_momentum(0.5, 40.0) == pytest.approx(0.5 * math.pi)


@given(st.floats(-8, 8), st.sampled_from([Fraction(1), Fraction(1, 2), Fraction(1, 3)]))
def test_momentum_range(lam, rho):
    p = float(hole_momentum(float(rho), lam))
    assert 0 < p < float(rho) * math.pi


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=4).map(lambda v: v + [-x for x in v]))
def test_excitation_energy_positive_and_dispersion_exact(holes):
    ctx = make_context(HALF, {1: holes})
    d = delta_energy_dispersion(HALF, ctx, "1/2")
    assert d["dE"] >= 0
    assert d["dispersion_residual"] < 1e-12


@pytest.mark.parametrize("motif", MOTIFS)
def test_speed_of_sound(motif):
    spec = make_chain_spec(motif, 1)
    for s in spec.distinct:
        assert abs(speed_of_sound(spec, s) - math.pi / float(spec.rho(s))) < 1e-6
