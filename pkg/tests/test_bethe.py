import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from betheforge.bethe import (BetheRoots, bethe_residual, bethe_states, energy_momentum,
                              match_state, solve_bethe, solve_real, tau_eigenvalue, total_spin)
from betheforge.chain import diagonalize, hamiltonian, make_chain_spec, transfer_matrix
from betheforge.errors import ConvergenceError, DomainError, PoleError


@pytest.fixture(scope="module")
def two():
    return make_chain_spec(["1/2"], 2)


@pytest.fixture(scope="module")
def four():
    return make_chain_spec(["1/2"], 4)


def test_residual_two_sites(two):
    assert bethe_residual(two, [0.0]) == [0]
    assert bethe_residual(two, []) == []
    assert abs(bethe_residual(two, [0.37])[0]) > 1e-3


def test_residual_rejects_pole(two):
    with pytest.raises(PoleError):
        bethe_residual(two, [0.5j])


def test_solve_single_root(two):
    r = solve_bethe(two, 1, [0.1])
    assert abs(r.roots[0]) < 1e-10


def test_solve_four_site_ground_state(four):
    r = solve_bethe(four, 2, [-0.3, 0.3])
    a, b = r.roots
    assert abs(a + b) < 1e-10 and abs(a.imag) < 1e-12
    E = energy_momentum(four, r)["E"][four.distinct[0]]
    assert E == pytest.approx(min(diagonalize(hamiltonian(four, "1/2")).eigenvalues), abs=1e-7)
    # analytic: roots +-1/(2 sqrt 3)
    assert abs(b - 1 / (2 * math.sqrt(3))) < 1e-10


def test_solver_validation(two):
    with pytest.raises(DomainError):
        solve_bethe(two, 2, [0.1])
    with pytest.raises(PoleError):
        solve_bethe(two, 1, [0.5j])


def test_solver_idempotent(four):
    r = solve_bethe(four, 2, [-0.3, 0.3])
    again = solve_bethe(four, 2, r.roots)
    assert np.max(np.abs(np.array(r.roots) - np.array(again.roots))) < 1e-12


def test_solve_real_matches_newton(four):
    r = solve_real(four, [-0.5, 0.5])
    assert np.allclose(r.roots, solve_bethe(four, 2, [-0.3, 0.3]).roots, atol=1e-10)


def test_roots_reject_collisions():
    with pytest.raises(DomainError):
        BetheRoots((0.1, 0.1 + 1e-12))


def test_roots_json_round_trip():
    r = BetheRoots((0.3 + 0.5j, 0.3 - 0.5j, -1.0))
    assert BetheRoots.from_json(r.to_json()) == r
    assert r.to_json().startswith("[[-1.0, 0.0]")


def test_tau_pseudo_vacuum_is_transfer_eigenvalue():
    spec = make_chain_spec(["1/2", "1"], 1)
    u = 0.4 + 0.3j
    for s in spec.distinct:
        w = np.linalg.eigvals(transfer_matrix(spec, s, u))
        assert np.min(np.abs(w - tau_eigenvalue(spec, s, u, []))) < 1e-10


def test_tau_two_site_eigenvalue(two):
    u = 0.7 - 0.2j
    w = np.linalg.eigvals(transfer_matrix(two, "1/2", u))
    assert np.min(np.abs(w - tau_eigenvalue(two, "1/2", u, [0.0]))) < 1e-8


def test_tau_pole_cancellation():
    spec = make_chain_spec(["1"], 2)
    roots = [0.0]
    # alpha = 1 term has a pole at u = lam + i (alpha - s) with s = 1; the sum is regular
    eps = 1e-7
    lo = tau_eigenvalue(spec, "1", -eps + 0j, roots)
    hi = tau_eigenvalue(spec, "1", eps + 0j, roots)
    assert abs(lo - hi) < 1e-6


def test_energy_two_sites(two):
    em = energy_momentum(two, [0.0])
    assert em["E"][two.distinct[0]] == pytest.approx(-4)
    assert em["p"] == pytest.approx(math.pi)


def test_energy_vacuum(two):
    em = energy_momentum(two, [])
    assert all(v == 0 for v in em["E"].values()) and em["p"] == 0


def test_energy_is_log_derivative_of_tau(four):
    r = solve_bethe(four, 2, [-0.3, 0.3])
    h = 1e-5
    s = four.distinct[0]
    dlog = (np.log(tau_eigenvalue(four, s, h, r)) - np.log(tau_eigenvalue(four, s, -h, r))) / (2 * h)
    assert abs(1j * dlog - energy_momentum(four, r)["E"][s]) < 1e-7


def test_energy_rejects_unphysical(four):
    with pytest.raises(DomainError):
        energy_momentum(four, [0.3 + 0.2j])


@settings(max_examples=25)
@given(st.floats(-50, 50), st.sampled_from([0.5, 1.0, 1.5]))
def test_each_real_root_lowers_energy(lam, s):
    spec = make_chain_spec([str(int(2 * s)) + "/2"], 1)
    assert energy_momentum(spec, [lam])["E"][spec.distinct[0]] < 0


def test_total_spin():
    assert total_spin(make_chain_spec(["1/2"], 2), 1) == 0
    mixed = make_chain_spec(["1/2", "1"], 2)
    assert total_spin(mixed, 0) == 3
    assert total_spin(mixed, 3) == 0


def test_states_include_pseudo_vacuum(two):
    assert bethe_states(two, 0) == [BetheRoots(())]


@pytest.mark.parametrize("motif,repeats", [(["1/2"], 4), (["1"], 2), (["1/2", "1"], 2)])
def test_states_match_diagonalisation(motif, repeats):
    spec = make_chain_spec(motif, repeats)
    us = [0.31, 0.77 + 0.1j, -0.4]
    ops = {}
    n = 0
    for M in range(int(spec.S0) + 1):
        for r in bethe_states(spec, M):
            m = match_state(spec, r, us, ops=ops)
            assert m.multiplicity > 0
            assert m.tau_error < 1e-7 and m.energy_error < 1e-6
            n += 1
    assert n >= 2  # the solver is not required to find every state


def test_convergence_error_is_numeric():
    assert issubclass(ConvergenceError, ArithmeticError)
