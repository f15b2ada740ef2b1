"""Phase shifts, S-matrix factors, auxiliary string equations and the central charge.

The phase ``Phi`` of a hole is obtained two ways. The integral route
integrates the sampled order-``1/L`` density corrections up to the hole
rapidity. The closed route multiplies ``G`` and ``K`` factors and a sign
``C = exp(-i pi mu)``. The two must agree modulo ``2 pi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import optimize

from .chain import ChainSpec, monodromy_trace
from .errors import ConvergenceError, DomainError
from .repkit import fused_R, spin_rep
from .rsos import RSOSTransferContext, rsos_transfer_matrix
from .special_functions import (Gamma_fn, K_cached, KernelParams, gamma_fn, gamma_hat,
                                kappa_hat)
from .thermo import (ExcitationContext, _corr_terms, kappa_values, kernel_params,
                     removed_strings, unused_numbers)

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)


@dataclass(frozen=True)
class PhaseResult:
    """Total phase of one hole and its closed-form factors.

    ``closed = C * S_check * S_tilde``; ``residual = |exp(i phi) - closed|``.
    """

    phi: float
    S_check: complex
    S_tilde: complex
    C: int
    closed: complex
    residual: float


def _half_line(sampler, z: float, half_mass: float) -> float:
    """``int_{-inf}^z f`` for an even ``f`` with total mass ``2 half_mass``."""
    if z == 0:
        return half_mass
    n_sub = max(1, int(math.ceil(abs(z) / 0.5)))
    edges = np.linspace(0.0, z, n_sub + 1)
    mids = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    nodes = (mids[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    weights = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    return half_mass + float(np.dot(weights, sampler(nodes)))


def _kappa_primitive(p: KernelParams, z: float) -> float:
    if p.is_top:
        return 0.0
    mass = math.pi * float(kappa_hat(p, np.array([0.0]))[0])
    return _half_line(lambda x: kappa_values(p, x), z, mass)


def _gamma_primitive(p: KernelParams, z: float) -> float:
    if p.is_top:
        return 0.0
    mass = math.pi * float(gamma_hat(p, np.array([0.0]))[0])
    return _half_line(lambda x: gamma_fn(p, x), z, mass)


def phase_integral(spec: ChainSpec, ctx: ExcitationContext, j: int, d: int) -> float:
    """``Phi_{j,d} = 2 pi int_{-inf}^{lam_d} (r_j + c_j + hole masses)``.

    The Dirac masses of ``r_j`` cancel against the hole counting term,
    leaving the smooth ``kappa`` and ``gamma`` parts, which are sampled
    and integrated numerically. The context is not re-validated so odd
    hole counts may be used for factorisation checks.
    """
    holes = ctx.holes.get(j, ())
    if not 1 <= d <= len(holes):
        raise DomainError(f"hole index {d} out of range for sea {j}")
    y = holes[d - 1]
    kap, gam, _ = _corr_terms(spec, ctx, j)
    total = 0.0
    for p, x, w in kap:
        total += w * _kappa_primitive(p, y - x)
    for p, x, w in gam:
        total -= w * _gamma_primitive(p, y - x)
    return total


def _G(p: KernelParams, lam: float) -> complex:
    """``G_r(lam) = exp(-i Gamma_r(lam))``; ``-1`` at ``r = 0``."""
    if p.is_zero_r:
        return -1.0 + 0j
    return complex(np.exp(-1j * float(Gamma_fn(p, lam))))


def closed_factors(spec: ChainSpec, ctx: ExcitationContext, j: int, d: int) -> dict:
    """``S_check``, ``S_tilde`` and ``C`` for hole ``d`` of sea ``j``."""
    L = spec.n_seas
    sb = spec.sbar
    y = ctx.holes[j][d - 1]
    S_check = 1.0 + 0j
    for m, centres in ctx.new_strings.items():
        k = spec.sea_of(m)
        if k == j - 1:
            p = kernel_params(spec, j - 1, 2 * (sb(j) - m))
        elif k == j:
            p = kernel_params(spec, j, 2 * (m - sb(j)))
        else:
            continue
        for x in centres:
            S_check *= _G(p, y - x)
    S_tilde = 1.0 + 0j
    if j >= 2:
        p = kernel_params(spec, j - 1, 2 * (sb(j) - sb(j - 1)) - 1)
        for x in ctx.holes.get(j - 1, ()):
            S_tilde *= K_cached(p, x - y)
    p_lo, p_hi = kernel_params(spec, j - 1, 1), kernel_params(spec, j, 1)
    for x in ctx.holes.get(j, ()):
        S_tilde *= K_cached(p_lo, x - y) * K_cached(p_hi, x - y)
    if j < L:
        p = kernel_params(spec, j, 2 * (sb(j + 1) - sb(j)) - 1)
        for x in ctx.holes.get(j + 1, ()):
            S_tilde *= K_cached(p, x - y)
    mu = removed_strings(spec, ctx)[j]
    if mu.denominator != 1:
        raise DomainError(f"mu_{j} = {mu} is not an integer; the sign C is undefined")
    C = -1 if int(mu) % 2 else 1
    return {"S_check": S_check, "S_tilde": S_tilde, "C": C}


def phase_shift(spec: ChainSpec, ctx: ExcitationContext, s, d: int) -> PhaseResult:
    """Phase of hole ``d`` in the sea of spin ``s`` by both routes."""
    from .repkit import Spin

    s = Spin.parse(s)
    if s not in spec.distinct:
        raise DomainError(f"spin {s} is not present in the chain")
    j = spec.distinct.index(s) + 1
    phi_val = phase_integral(spec, ctx, j, d)
    f = closed_factors(spec, ctx, j, d)
    closed = f["C"] * f["S_check"] * f["S_tilde"]
    res = abs(np.exp(1j * phi_val) - closed)
    return PhaseResult(phi_val, f["S_check"], f["S_tilde"], f["C"], closed, float(res))


def constant_limit(spec: ChainSpec, ctx: ExcitationContext, j: int) -> complex:
    """``lim_{lam -> -inf} (S_check S_tilde)^-1`` from the asymptotics of ``G`` and ``K``.

    ``G_r(-inf) = exp(i(pi - hbar r))`` and ``K_r(+inf) = exp(-i(pi - hbar r)/2)``.
    """
    sb = spec.sbar
    L = spec.n_seas
    phase = 0.0

    def k_inf(p):
        return 0.0 if p.is_top else -(math.pi - p.hbar * p.r) / 2

    def g_minf(p):
        if p.is_zero_r:
            return math.pi
        return 0.0 if p.is_top else math.pi - p.hbar * p.r

    for m, centres in ctx.new_strings.items():
        k = spec.sea_of(m)
        if k == j - 1:
            phase += len(centres) * g_minf(kernel_params(spec, j - 1, 2 * (sb(j) - m)))
        elif k == j:
            phase += len(centres) * g_minf(kernel_params(spec, j, 2 * (m - sb(j))))
    if j >= 2:
        phase += ctx.D(j - 1) * k_inf(kernel_params(spec, j - 1, 2 * (sb(j) - sb(j - 1)) - 1))
    phase += ctx.D(j) * (k_inf(kernel_params(spec, j - 1, 1)) + k_inf(kernel_params(spec, j, 1)))
    if j < L:
        phase += ctx.D(j + 1) * k_inf(kernel_params(spec, j, 2 * (sb(j + 1) - sb(j)) - 1))
    return complex(np.exp(-1j * phase))


# ------------------------------------------------------- auxiliary equations


def _gamma_term(spec: ChainSpec, j: int, r, lam):
    """``Gamma_r^(hbar_j)(lam)`` with ``r`` allowed beyond the period."""
    per = spec.period(j)
    r = Fraction(r)
    if per is None:
        return float(Gamma_fn(KernelParams.with_period(None, r), lam)) if r > 0 else 0.0
    r_red = r % (2 * per)
    if r_red == 0 or r_red == per:
        return 0.0
    h = math.pi / float(per)
    return 2.0 * math.atan(math.tanh(h * lam) / math.tan(h * float(r_red) / 2))


def F2(spec: ChainSpec, j: int, r, m, lam: float) -> float:
    """String-string kernel between new strings ``r`` and ``m`` of the gap ``R_j``."""
    r, m = Fraction(r), Fraction(m)
    sj = spec.sbar(j)
    if m == r:
        total = _gamma_term(spec, j, 4 * m - 4 * sj, lam)
        top = int(2 * m - 2 * sj - 1)
        total += 2 * sum(_gamma_term(spec, j, 2 * q, lam) for q in range(1, top + 1))
        return total
    lo = int(abs(r - m))
    top = int(r + m - 2 * sj - 1)
    total = _gamma_term(spec, j, 2 * r + 2 * m - 4 * sj, lam)
    total += _gamma_term(spec, j, 2 * abs(r - m), lam)
    total += 2 * sum(_gamma_term(spec, j, 2 * q, lam) for q in range(lo + 1, top + 1))
    return total


def _slots(ctx: ExcitationContext, spec: ChainSpec, j: int):
    out = []
    for m in sorted(ctx.new_strings):
        if spec.sea_of(m) == j:
            out.extend((m, k) for k in range(len(ctx.new_strings[m])))
    return out


def _aux_residual(spec: ChainSpec, ctx: ExcitationContext, j: int, Q: dict, centres: dict):
    sj = spec.sbar(j)
    sk = spec.sbar(j + 1)
    out = []
    for m, k in _slots(ctx, spec, j):
        x = centres[m][k]
        val = -2 * math.pi * float(Q[m][k])
        if j >= 1:
            for h in ctx.holes.get(j, ()):
                val += _gamma_term(spec, j, 2 * (m - sj), x - h)
        if j < spec.n_seas:
            for h in ctx.holes.get(j + 1, ()):
                val += _gamma_term(spec, j, 2 * (sk - m), x - h)
        for r, cs in centres.items():
            if spec.sea_of(r) == j:
                for c in cs:
                    val -= F2(spec, j, r, m, x - c)
        out.append(val)
    return out


def check_quantum_numbers(spec: ChainSpec, ctx: ExcitationContext, j: int, Q: dict):
    """Reject quantum numbers outside ``{(1-P)/2 .. (P-1)/2}`` with ``P = A + nu``."""
    A = unused_numbers(spec, ctx)
    for m in {m for m, _ in _slots(ctx, spec, j)}:
        qs = [Fraction(q) for q in Q.get(m, ())]
        n = ctx.nu(m)
        if len(qs) != n:
            raise DomainError(f"need {n} quantum numbers for r={m}, got {len(qs)}")
        P = A[m] + n
        for q in qs:
            if (2 * q).denominator != 1 or (q - Fraction(P - 1, 2)).denominator != 1:
                raise DomainError(f"Q={q} has the wrong parity for P={P}")
            if abs(q) > Fraction(P - 1, 2):
                raise DomainError(f"Q={q} outside the admissible range for P={P}")
        if len(set(qs)) != len(qs):
            raise DomainError(f"repeated quantum numbers for r={m}")


def aux_constraint_residual(spec: ChainSpec, ctx: ExcitationContext, j: int, Q: dict) -> list:
    """Residuals of the hole/new-string equations for the gap ``R_j``.

    ``-2 pi Q + sum Gamma(lam - holes) - sum F2(lam - lam')`` per string centre.
    """
    return _aux_residual(spec, ctx, j, Q, ctx.new_strings)


def solve_aux_constraints(spec: ChainSpec, ctx: ExcitationContext, Q: dict,
                          tol: float = 1e-10) -> ExcitationContext:
    """Solve for all new-string centres given the hole rapidities.

    The current centres of ``ctx`` are the starting point.
    """
    for j in range(spec.n_seas + 1):
        check_quantum_numbers(spec, ctx, j, Q)
    slots = [(j, m, k) for j in range(spec.n_seas + 1) for m, k in _slots(ctx, spec, j)]
    if not slots:
        return ctx
    x0 = np.array([ctx.new_strings[m][k] for _, m, k in slots])

    def unpack(x):
        cs = {m: list(v) for m, v in ctx.new_strings.items()}
        for (_, m, k), val in zip(slots, x):
            cs[m][k] = float(val)
        return cs

    def fun(x):
        cs = unpack(x)
        return np.concatenate([_aux_residual(spec, ctx, j, Q, cs)
                               for j in range(spec.n_seas + 1)])

    sol = optimize.root(fun, x0, method="hybr", options={"xtol": 1e-14})
    res = float(np.max(np.abs(fun(sol.x))))
    if res > tol:
        raise ConvergenceError(f"auxiliary equations not solved (residual {res:.3g})")
    cs = unpack(sol.x)
    return ExcitationContext(ctx.holes, {m: tuple(v) for m, v in cs.items()})


def _sh(h: float, z: complex) -> complex:
    return complex(np.sinh(h * z)) if h else complex(z)


def _string_members(length: int, centre: float):
    return [centre + 1j * ((length + 1) / 2 - k) for k in range(1, length + 1)]


def product_form_ratio(spec: ChainSpec, ctx: ExcitationContext, j: int) -> list:
    """Root-level product equations multiplied over each string.

    Strings of the gap ``R_j`` are built as vertical arrays around their
    centres (length ``2(s̄_{j+1} - m)`` below the top sea and
    ``2(m - s̄_L)`` above it). For each string the product of the
    left-hand sides over its members divided by the right-hand sides
    (pairs inside one string excluded) is returned; it equals ``+-1``
    exactly when the logarithmic equations hold.
    """
    L = spec.n_seas
    h = 0.0 if j == L else spec.hbar(j)
    if j < L:
        a_left = (2 * spec.gap(j) - 1) / 2
        a_right = Fraction(1, 2)
    else:
        a_left, a_right = Fraction(1, 2), None
    strings = []
    for m, k in _slots(ctx, spec, j):
        length = int(2 * (spec.sbar(j + 1) - m)) if j < L else int(2 * (m - spec.sbar(L)))
        strings.append(_string_members(length, ctx.new_strings[m][k]))
    out = []
    for idx, members in enumerate(strings):
        val = 1.0 + 0j
        for x in members:
            if j >= 1 and a_left:
                for t in ctx.holes.get(j, ()):
                    val *= _sh(h, x - t + 1j * float(a_left)) / _sh(h, x - t - 1j * float(a_left))
            if a_right is not None:
                for t in ctx.holes.get(j + 1, ()):
                    val *= _sh(h, x - t + 0.5j) / _sh(h, x - t - 0.5j)
            for jdx, other in enumerate(strings):
                if jdx == idx:
                    continue
                for y in other:
                    val /= _sh(h, x - y + 1j) / _sh(h, x - y - 1j)
        out.append(val)
    return out


# ---------------------------------------------------------- spin S-matrix


def spin_S(lam: float) -> np.ndarray:
    """Two-spinon matrix ``K_1^(0)(lam) R(-lam)`` on ``C^2 (x) C^2``."""
    k = K_cached(KernelParams.with_period(None, 1), lam)
    return k * fused_R(Fraction(1, 2), Fraction(1, 2), -lam)


def spin_transfer(holes, lam: float) -> np.ndarray:
    """``tr_0 S_01(lam - t_1) .. S_0D(lam - t_D)`` on ``(C^2)^D``."""
    holes = [float(t) for t in holes]
    if not holes:
        raise DomainError("the spin sector needs at least one hole")
    return monodromy_trace(2, [2] * len(holes), [spin_S(lam - t) for t in holes])


def total_e3(n: int) -> np.ndarray:
    """``sum_k e3_k`` on ``(C^2)^n``."""
    e3 = spin_rep(Fraction(1, 2))["e3"]
    out = np.zeros((2 ** n, 2 ** n), dtype=complex)
    for k in range(n):
        out += np.kron(np.kron(np.eye(2 ** k), e3), np.eye(2 ** (n - k - 1)))
    return out


# ----------------------------------------------------------- conjectures


def _rsos_part(spec: ChainSpec, ctx: ExcitationContext, gap_index: int, kind: str, d: int,
               lam: float):
    j = gap_index
    left = ctx.holes.get(j, ()) if j >= 1 else ()
    right = ctx.holes.get(j + 1, ())
    tctx = RSOSTransferContext(spec.gap(j), left, right, d)
    T, basis = rsos_transfer_matrix(kind, tctx, lam)
    return {"gap": spec.gap(j), "kind": kind, "matrix": T, "basis": basis}


def conjectured_S(spec: ChainSpec, ctx: ExcitationContext, j: int, d: int) -> dict:
    """Spectrum of the conjectured S-matrix of hole ``d`` in sea ``j``.

    The conjecture fixes the operator only up to conjugation, so only the
    spectrum (all products of factor eigenvalues) is meaningful.
    """
    L = spec.n_seas
    if not 1 <= j <= L:
        raise DomainError(f"sea index {j} out of range")
    holes = ctx.holes.get(j, ())
    if not 1 <= d <= len(holes):
        raise DomainError(f"hole index {d} out of range for sea {j}")
    lam = holes[d - 1]
    parts = [_rsos_part(spec, ctx, j - 1, "plain_aux", d, lam)]
    spin = None
    if j == L:
        spin = spin_transfer(holes, lam)
    else:
        parts.append(_rsos_part(spec, ctx, j, "fused_aux", d, lam))
    spectrum = np.ones(1, dtype=complex)
    factors = [p["matrix"] for p in parts] + ([spin] if spin is not None else [])
    for M in factors:
        spectrum = np.multiply.outer(spectrum, np.linalg.eigvals(M)).ravel()
    return {"spin_part": spin, "rsos_parts": parts,
            "spectrum": sorted(spectrum.tolist(), key=lambda z: (round(z.real, 9), round(z.imag, 9)))}


def central_charge(spec: ChainSpec) -> Fraction:
    """``c = L + sum_j (2 - 3/(s̄_j - s̄_{j-1} + 1))`` over the seas."""
    c = Fraction(spec.n_seas)
    for j in range(spec.n_seas):
        c += 2 - Fraction(3) / (spec.gap(j) + 1)
    return c
