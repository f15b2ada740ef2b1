"""Acceptance suite: one check per criterion at its stated tolerance and time budget.

Each test prints a single ``criterion N: PASS|FAIL`` line. Run this file
directly to print the summary without pytest.
"""

import cmath
import math
import sys
import time
from fractions import Fraction

import numpy as np
import pytest
from scipy.special import gamma

from betheforge.bethe import bethe_states, energy_momentum, match_state
from betheforge.chain import make_chain_spec
from betheforge.errors import DomainError
from betheforge.repkit import spin_triples, ybe_residual
from betheforge.rsos import (RSOSSpace, RSOSTransferContext, boltzmann_weight, count_paths,
                             count_table, rsos_transfer_matrix)
from betheforge.scattering import (central_charge, closed_factors, phase_integral, phase_shift,
                                   solve_aux_constraints)
from betheforge.special_functions import K_cached, KernelParams
from betheforge.strings import completeness_check
from betheforge.thermo import (DensityGrid, ExcitationContext, delta_energy_dispersion,
                               make_context, solve_vacuum_integral, speed_of_sound,
                               vacuum_density, vacuum_energy)

VACUUM_MOTIFS = [["1/2"], ["1"], ["3/2"], ["1/2", "1"], ["1/2", "3/2"]]


def criterion_1():
    rng = np.random.default_rng(1)
    worst = 0.0
    for triple in spin_triples(3):
        for _ in range(10):
            worst = max(worst, ybe_residual(*triple, *rng.uniform(-3, 3, 3)))
    return worst < 1e-10, f"max YBE residual {worst:.2e}", 10


def criterion_2():
    rng = np.random.default_rng(2)
    n, bad, e_two = 0, 0, None
    for motif, repeats in [(["1/2"], 2), (["1/2"], 4), (["1/2"], 6), (["1"], 2), (["1"], 3),
                           (["1/2", "1"], 2)]:
        spec = make_chain_spec(motif, repeats)
        us = [complex(*rng.uniform(-1, 1, 2)) for _ in range(5)]
        ops = {}
        for M in range(int(spec.S0) + 1):
            for roots in bethe_states(spec, M):
                m = match_state(spec, roots, us, ops=ops)
                n += 1
                bad += not (m.multiplicity > 0 and m.tau_error < 1e-7 and m.energy_error < 1e-6)
                if motif == ["1/2"] and repeats == 2 and M == 1:
                    e_two = energy_momentum(spec, roots)["E"][spec.distinct[0]]
    ok = bad == 0 and e_two is not None and abs(e_two + 4) < 1e-6
    return ok, f"{n - bad}/{n} Bethe states matched, E(1/2 x 2, M=1) = {e_two:.9g}", 60


def criterion_3():
    checked, ok = 0, True
    for motif in (["1/2"], ["1"], ["3/2"], ["1/2", "1"], ["1/2", "3/2"], ["1/2", "1", "1"]):
        for repeats in range(1, 8 // len(motif) + 1):
            chk = completeness_check(make_chain_spec(motif, repeats, cap=10 ** 9))
            ok &= chk["equal"] and chk["sum"] == chk["hilbert_dim"]
            checked += 1
    return ok, f"{checked} chains with L <= 8 complete", 30


def criterion_4():
    worst = 0.0
    for motif in VACUUM_MOTIFS:
        spec = make_chain_spec(motif, 1)
        for s in spec.distinct:
            v = vacuum_energy(spec, s)
            worst = max(worst, abs(v["closed_form"] - v["numeric"]))
    half = vacuum_energy(make_chain_spec(["1/2"], 1), "1/2")["closed_form"]
    dev = abs(half + 2 * math.log(2))
    return worst < 1e-8 and dev < 1e-10, f"routes differ by {worst:.2e}, -2 ln 2 off by {dev:.2e}", 10


def criterion_5():
    worst = 0.0
    for motif in VACUUM_MOTIFS:
        spec = make_chain_spec(motif, 1)
        for method in ("transform", "nystrom"):
            grid = solve_vacuum_integral(spec, DensityGrid.symmetric(24, 4096), method)
            inside = np.abs(grid.lam) <= 10
            for s in spec.distinct:
                exact = vacuum_density(spec, s, grid.lam[inside])
                worst = max(worst, float(np.max(np.abs(grid.values[s][inside] - exact))))
    return worst < 1e-6, f"sup error on [-10, 10] {worst:.2e}", 10


def criterion_6():
    rng = np.random.default_rng(6)
    specs = [make_chain_spec(m, 1) for m in VACUUM_MOTIFS]
    worst, sets = 0.0, 0
    while sets < 100:
        spec = specs[rng.integers(len(specs))]
        holes = {j: list(rng.uniform(-5, 5, 2 * rng.integers(0, 4)))
                 for j in range(1, spec.n_seas + 1)}
        try:
            ctx = make_context(spec, holes)
        except DomainError:
            continue
        for s in spec.distinct:
            worst = max(worst, delta_energy_dispersion(spec, ctx, s)["dispersion_residual"])
        sets += 1
    sound = 0.0
    for spec in specs:
        for s in spec.distinct:
            sound = max(sound, abs(speed_of_sound(spec, s) - math.pi / float(spec.rho(s))))
    ok = worst < 1e-12 and sound < 1e-6
    return ok, f"dispersion residual {worst:.2e} over {sets} sets, sound speed off by {sound:.2e}", None


def criterion_7():
    rows = count_table([Fraction(k, 2) for k in range(1, 8)], max_sum=12)
    matched = all(r[5] for r in rows)
    sums = all(n == count_paths(RSOSSpace(D + Dp, 0, sb)) for D, Dp, sb, n, _, _ in rows)
    forty_one = count_paths(RSOSSpace(10, 0, 2)) == 41
    ok = matched and sums and forty_one
    return ok, f"{sum(r[5] for r in rows)}/{len(rows)} counts match, sum dependence {sums}", 30


def criterion_8():
    initial = True
    for n in (3, 4, 5, 6):
        h = math.pi / n
        top = n - 2
        for a in range(top + 1):
            for b in range(top + 1):
                for c in range(a % 2, top + 1, 2):
                    for d in range(top + 1):
                        initial &= boltzmann_weight(h, a, b, c, d, 0.0) == (1 if a == c else 0)
    p = KernelParams.with_period(3, 1)
    props = 0.0
    for x in np.linspace(-4, 4, 10):
        k = K_cached(p, -x)
        props = max(props, abs(k * boltzmann_weight(math.pi / 3, 1, 0, 1, 0, x) - 1),
                    abs(k * boltzmann_weight(math.pi / 3, 0, 1, 0, 1, x) - 1))
    scalar = 0.0
    rng = np.random.default_rng(8)
    for D, Dp in [(2, 2), (4, 2), (2, 4)]:
        left, right = rng.uniform(-2, 2, D), rng.uniform(-2, 2, Dp)
        for d in range(1, Dp + 1):
            T, _ = rsos_transfer_matrix("plain_aux", RSOSTransferContext(Fraction(1, 2), left,
                                                                         right, d), right[d - 1])
            expect = np.prod([1j / np.tanh(np.pi / 2 * (right[d - 1] - x + 0.5j)) for x in left])
            scalar = max(scalar, abs(T[0, 0] - expect))
    ok = initial and props < 1e-12 and scalar < 1e-9
    return ok, f"W(0) exact {initial}, identities {props:.2e}, scalar reduction {scalar:.2e}", None


# (motif, holes per sea, new strings with quantum numbers)
TEMPLATES = [
    (["1/2"], (2,), {}),
    (["1/2"], (4,), {}),
    (["1/2"], (2,), {Fraction(1): [0]}),
    (["1"], (4,), {}),
    (["1"], (2,), {Fraction(1, 2): [0]}),
    (["1/2", "1"], (2, 2), {}),
    (["1/2", "1"], (2, 4), {}),
    (["1/2", "3/2"], (2, 0), {Fraction(1): [0]}),
    (["1/2", "3/2"], (2, 2), {Fraction(2): [0]}),
    (["1/2", "3/2"], (0, 2), {Fraction(1): [0]}),
]


def feasible_contexts(n, seed=9):
    rng = np.random.default_rng(seed)
    out = []
    k = 0
    while len(out) < n:
        motif, counts, Q = TEMPLATES[k % len(TEMPLATES)]
        k += 1
        spec = make_chain_spec(motif, 1)
        holes = {j: list(rng.uniform(-2, 2, c)) for j, c in enumerate(counts, start=1) if c}
        centres = {r: [float(np.mean([x for v in holes.values() for x in v]))] for r in Q}
        ctx = make_context(spec, holes, centres)
        if Q:
            ctx = solve_aux_constraints(spec, ctx, Q)
        out.append((spec, ctx))
    return out


def two_spinon(lam):
    z = 0.5j * lam
    return gamma(1 - z) * gamma(0.5 + z) / (gamma(1 + z) * gamma(0.5 - z))


def criterion_9():
    worst = 0.0
    contexts = feasible_contexts(20)
    for spec, ctx in contexts:
        for j, s in enumerate(spec.distinct, start=1):
            for d in range(1, ctx.D(j) + 1):
                worst = max(worst, phase_shift(spec, ctx, s, d).residual)
    three = 0.0
    rng = np.random.default_rng(10)
    for motif in VACUUM_MOTIFS:
        spec = make_chain_spec(motif, 1)
        for j in range(1, spec.n_seas + 1):
            y, a, b = rng.uniform(-2, 2, 3)

            def phi(others):
                return phase_integral(spec, ExcitationContext({j: (y,) + tuple(others)}), j, 1)

            base = phi(())
            lhs = phi((a, b)) - base
            rhs = (phi((a,)) - base) + (phi((b,)) - base)
            three = max(three, abs(cmath.exp(1j * lhs) - cmath.exp(1j * rhs)))
    half = make_chain_spec(["1/2"], 1)
    ratio = 0.0
    for a, b in rng.uniform(-3, 3, (10, 2)):
        f = closed_factors(half, make_context(half, {1: [a, b]}), 1, 1)
        ratio = max(ratio, abs(f["S_tilde"] - two_spinon(b - a)))
    ok = worst < 1e-7 and three < 1e-7 and ratio < 1e-8
    return ok, (f"{len(contexts)} contexts, phase residual {worst:.2e}, three-body {three:.2e}, "
                f"Gamma ratio {ratio:.2e}"), None


def criterion_10():
    got = [central_charge(make_chain_spec(m, 1)) for m in (["1/2"], ["1"], ["1/2", "1"])]
    want = [Fraction(1), Fraction(3, 2), Fraction(2)]
    return got == want, "c = " + ", ".join(str(c) for c in got), None


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
            criterion_7, criterion_8, criterion_9, criterion_10]


def evaluate(k):
    start = time.perf_counter()
    ok, detail, budget = CRITERIA[k - 1]()
    elapsed = time.perf_counter() - start
    in_time = budget is None or elapsed < budget
    limit = f" (limit {budget} s)" if budget else ""
    line = (f"criterion {k}: {'PASS' if ok and in_time else 'FAIL'} {detail}; "
            f"{elapsed:.2f} s{limit}")
    return ok, in_time, line


@pytest.mark.parametrize("k", range(1, 11))
def test_criterion(k, capsys):
    ok, in_time, line = evaluate(k)
    with capsys.disabled():
        print("\n" + line)
    assert ok, line
    assert in_time, line


if __name__ == "__main__":
    results = [evaluate(k) for k in range(1, 11)]
    for _, _, line in results:
        print(line)
    sys.exit(0 if all(ok and t for ok, t, _ in results) else 1)
