"""Finite-size Bethe equations, transfer-matrix eigenvalues and energies."""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import optimize

from .chain import ChainSpec, _check_spin, hamiltonian, transfer_matrix
from .errors import ConvergenceError, DomainError, PoleError
from .repkit import Spin

MAX_ITER = 200
TOL = 1e-10
COLLISION = 1e-9


@dataclass(frozen=True)
class BetheRoots:
    """Simple Bethe roots sorted by real then imaginary part."""

    roots: tuple

    def __post_init__(self):
        roots = tuple(sorted((complex(z) for z in self.roots), key=lambda z: (z.real, z.imag)))
        for a, b in itertools.combinations(roots, 2):
            if abs(a - b) < COLLISION:
                raise DomainError(f"coincident roots {a} and {b}")
        object.__setattr__(self, "roots", roots)

    @property
    def M(self) -> int:
        return len(self.roots)

    def to_json(self) -> str:
        return json.dumps([[z.real, z.imag] for z in self.roots])

    @classmethod
    def from_json(cls, text: str) -> "BetheRoots":
        return cls(tuple(complex(a, b) for a, b in json.loads(text)))


def _site_weights(spec: ChainSpec):
    """Pairs ``(s, L_s)`` with ``s`` as a float."""
    return [(float(s), spec.count(s)) for s in spec.distinct]


def _check_poles(spec: ChainSpec, roots, tol=1e-10):
    for z in roots:
        for s, _ in _site_weights(spec):
            if abs(z - 1j * s) < tol or abs(z + 1j * s) < tol:
                raise PoleError(f"root {z} sits on the pole +-{s}i")


def bethe_residual(spec: ChainSpec, roots) -> list:
    """``LHS/RHS - 1`` of the Bethe equations for each root."""
    roots = [complex(z) for z in roots]
    _check_poles(spec, roots)
    out = []
    for n, x in enumerate(roots):
        lhs = 1.0 + 0j
        for s, Ls in _site_weights(spec):
            lhs *= ((x + 1j * s) / (x - 1j * s)) ** Ls
        rhs = 1.0 + 0j
        for p, y in enumerate(roots):
            if p != n:
                rhs *= (x - y + 1j) / (x - y - 1j)
        out.append(lhs / rhs - 1.0)
    return out


def _ell(x, a):
    """``log((x + ia)/(x - ia))``, analytic in the strip ``|Im x| < a``."""
    return np.log(x + 1j * a) - np.log(x - 1j * a)


def _ell_prime(x, a):
    return -2j * a / (x * x + a * a)


def _log_system(spec, roots):
    """Branch-free part of the logarithmic Bethe equations and its Jacobian."""
    M = len(roots)
    F = np.zeros(M, dtype=complex)
    J = np.zeros((M, M), dtype=complex)
    for s, Ls in _site_weights(spec):
        F += Ls * _ell(roots, s)
        J[np.diag_indices(M)] += Ls * _ell_prime(roots, s)
    diff = roots[:, None] - roots[None, :]
    np.fill_diagonal(diff, 1.0)
    pair = _ell(diff, 1.0)
    pair_p = _ell_prime(diff, 1.0)
    np.fill_diagonal(pair, 0.0)
    np.fill_diagonal(pair_p, 0.0)
    F -= pair.sum(axis=1)
    J[np.diag_indices(M)] -= pair_p.sum(axis=1)
    J += pair_p
    return F, J


def _principal_system(spec, roots):
    """``Log(LHS/RHS)`` on the principal branch, with its Jacobian."""
    F, J = _log_system(spec, roots)
    F = np.log(np.exp(F))
    return F, J


def _newton(system, x0, branch=None, max_iter=MAX_ITER, tol=TOL):
    x = np.array(x0, dtype=complex)
    shift = 0 if branch is None else 2j * math.pi * branch

    def resid(z):
        F, J = system(z)
        return F - shift, J

    F, J = resid(x)
    norm = np.max(np.abs(F)) if F.size else 0.0
    for it in range(max_iter):
        if norm < tol:
            return x, it
        try:
            step = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError(f"singular Jacobian at iteration {it}") from exc
        t = 1.0
        while t > 1e-6:
            trial = x + t * step
            try:
                Ft, Jt = resid(trial)
            except (FloatingPointError, ZeroDivisionError):
                Ft = None
            if Ft is not None and np.all(np.isfinite(Ft)) and np.max(np.abs(Ft)) < norm * (1 - 1e-4 * t) + 1e-300:
                break
            t /= 2
        else:
            raise ConvergenceError(f"line search stalled at |F|={norm:.3g}")
        x, F, J = trial, Ft, Jt
        norm = np.max(np.abs(F))
    if norm < tol:
        return x, max_iter
    raise ConvergenceError(f"no convergence after {max_iter} iterations (|F|={norm:.3g})")


def solve_bethe(spec: ChainSpec, M: int, seeds) -> BetheRoots:
    """Damped Newton on the logarithmic Bethe equations.

    Branch integers are read off at the seeds and kept fixed. If the log
    branch is crossed during the iteration, the solver falls back to the
    principal logarithm of the product form.
    """
    seeds = np.array([complex(z) for z in seeds])
    if M < 1 or len(seeds) != M:
        raise DomainError(f"need M >= 1 seeds, got M={M} and {len(seeds)} seeds")
    _check_poles(spec, seeds)
    with np.errstate(divide="raise", invalid="raise"):
        try:
            F0, _ = _log_system(spec, seeds)
        except FloatingPointError as exc:
            raise PoleError(f"seeds on a singular point: {exc}") from exc
    branch = np.round(F0.imag / (2 * math.pi))
    with np.errstate(divide="ignore", invalid="ignore"):
        try:
            x, _ = _newton(lambda z: _log_system(spec, z), seeds, branch)
        except ConvergenceError:
            x, _ = _newton(lambda z: _principal_system(spec, z), seeds)
    res = bethe_residual(spec, x)
    if res and max(abs(r) for r in res) > 1e-8:
        raise ConvergenceError(f"product residual {max(abs(r) for r in res):.3g} after solve")
    return BetheRoots(tuple(x))


def solve_real(spec: ChainSpec, J_numbers) -> BetheRoots:
    """Real roots labelled by distinct quantum numbers ``J_n``.

    Solves ``sum_s L_s phi_2s(lam_n) - sum_p phi_2(lam_n - lam_p) = 2 pi J_n``.
    """
    J_numbers = np.array(sorted(float(j) for j in J_numbers))
    weights = _site_weights(spec)

    def phase(lam):
        return sum(Ls * 2 * np.arctan(lam / s) for s, Ls in weights)

    def fun(lam):
        diff = lam[:, None] - lam[None, :]
        return phase(lam) - (2 * np.arctan(diff)).sum(axis=1) - 2 * math.pi * J_numbers

    def jac(lam):
        diff = lam[:, None] - lam[None, :]
        k = 2.0 / (1 + diff ** 2)
        np.fill_diagonal(k, 0.0)
        d = sum(Ls * 2 * s / (lam ** 2 + s ** 2) for s, Ls in weights) - k.sum(axis=1)
        return np.diag(d) + k

    total = sum(Ls for _, Ls in weights) * math.pi
    guess = []
    for Jn in J_numbers:
        target = 2 * math.pi * Jn
        if abs(target) >= total:
            raise DomainError(f"quantum number {Jn} outside the allowed range")
        guess.append(optimize.brentq(lambda x: phase(np.array([x]))[0] - target, -1e8, 1e8))
    sol = optimize.root(fun, np.array(guess), jac=jac, method="hybr", tol=1e-14)
    # hybr may report xtol stagnation at an exact root; the residual decides
    if not np.all(np.isfinite(sol.x)) or np.max(np.abs(fun(sol.x))) > 1e-10:
        raise ConvergenceError(f"real Bethe roots for J={list(J_numbers)} not found")
    return solve_bethe(spec, len(sol.x), sol.x)


def _C_alpha(spec, s: float, alpha: int, u: complex) -> complex:
    out = 1.0 + 0j
    for k in range(alpha, int(round(2 * s))):
        for sp, Ls in _site_weights(spec):
            out *= ((u + 1j * (k - s - sp + 1)) / (u + 1j * (k - s + sp + 1))) ** Ls
    return out


def tau_eigenvalue(spec: ChainSpec, s, u: complex, roots) -> complex:
    """Eigenvalue of ``t^(s)(u)`` on the Bethe state with the given roots."""
    sp = _check_spin(spec, s)
    s = float(sp)
    roots = [complex(z) for z in (roots.roots if isinstance(roots, BetheRoots) else roots)]
    u = complex(u)
    total = 0.0 + 0j
    two_s = sp.doubled
    for alpha in range(two_s + 1):
        term = _C_alpha(spec, s, alpha, u)
        for lam in roots:
            x = u - lam
            if alpha == 0:
                num, den = x + 1j * (s + 1), x + 1j * (1 - s)
            elif alpha == two_s:
                num, den = x - 1j * s, x + 1j * s
            else:
                num = (x + 1j * (s + 1)) * (x - 1j * s)
                den = (x + 1j * (alpha - s + 1)) * (x + 1j * (alpha - s))
            if abs(den) < 1e-9:
                raise PoleError(f"u={u} at a pole of tau relative to root {lam}")
            term *= num / den
        total += term
    return total


def energy_momentum(spec: ChainSpec, roots) -> dict:
    """Energies ``E^(s)`` for every ``s`` in ``S`` and the momentum in ``[0, 2pi/L0)``."""
    roots = np.array([complex(z) for z in (roots.roots if isinstance(roots, BetheRoots) else roots)])
    E = {}
    for sp in spec.distinct:
        s = float(sp)
        val = -np.sum(2 * s / (roots ** 2 + s ** 2)) if roots.size else 0j
        if abs(val.imag) > 1e-9:
            raise DomainError(f"energy has imaginary part {val.imag:.3g}; unphysical roots")
        E[sp] = float(val.real)
    p = 0j
    for sp in spec.distinct:
        s = float(sp)
        p += 1j * float(spec.rho(sp)) * np.sum(_ell(roots, s)) if roots.size else 0j
    window = 2 * math.pi / spec.L0
    pm = math.fmod(p.real, window)
    if pm < 0:
        pm += window
    if window - pm < 1e-12:
        pm = 0.0
    return {"E": E, "p": pm}


def total_spin(spec: ChainSpec, M: int) -> Fraction:
    """``S = S0 - M``."""
    return spec.S0 - M


# ---------------------------------------------------------------- states


def real_quantum_number_sets(spec: ChainSpec, M: int):
    """Candidate sets ``J`` for all-real root states with ``M`` roots.

    ``J_n = (L - M + 1)/2 mod 1`` and ``|J_n| <= (L - M - 1)/2``, since the
    left side of the real equations is bounded by ``pi (L - M + 1)``.
    """
    Ltot = spec.L
    parity = Fraction(Ltot - M + 1, 2) - ((Ltot - M + 1) // 2)
    jmax = Fraction(Ltot - M - 1, 2)
    values = []
    j = -jmax
    while j <= jmax:
        if (j - parity).denominator == 1:
            values.append(j)
        j += 1
    return [tuple(c) for c in itertools.combinations(values, M)]


def bethe_states(spec: ChainSpec, M: int, string_seeds: bool = True) -> list:
    """Converged Bethe root sets with ``M`` roots found from systematic seeds.

    Real-root states come from quantum-number enumeration; complex pairs are
    seeded from 2-strings. Duplicates and singular solutions are dropped.
    """
    if M == 0:
        return [BetheRoots(())]
    found = []

    def add(r: BetheRoots):
        if any(len(r.roots) == len(q.roots) and
               np.max(np.abs(np.array(r.roots) - np.array(q.roots))) < 1e-7 for q in found):
            return
        if any(abs(abs(z.imag) - float(s)) < 1e-6 and abs(z.real) < 1e-6
               for z in r.roots for s in spec.distinct):
            return
        found.append(r)

    for J in real_quantum_number_sets(spec, M):
        try:
            add(solve_real(spec, J))
        except (ConvergenceError, DomainError, PoleError):
            continue
    if string_seeds and M >= 2:
        rng = np.random.default_rng(1234 + M)
        for _ in range(6 * M):
            centers = rng.normal(scale=0.6, size=M)
            seeds = list(centers[: M - 2]) + [centers[-1] + 0.5j + 0.05, centers[-1] - 0.5j + 0.05]
            try:
                r = solve_bethe(spec, M, seeds)
            except (ConvergenceError, DomainError, PoleError):
                continue
            try:
                energy_momentum(spec, r)
            except DomainError:
                continue
            add(r)
    return found


@dataclass
class StateMatch:
    roots: BetheRoots
    tau_error: float
    energy_error: float
    multiplicity: int


def match_state(spec: ChainSpec, roots: BetheRoots, us, rng=None, ops=None) -> StateMatch:
    """Compare a Bethe state with exact diagonalisation.

    The eigenspace of ``t^(s)(u_1)`` at the eigenvalue closest to ``tau`` is
    extracted; on that space ``t^(s)(u)`` must act as ``tau(u)`` for all
    ``u`` in ``us`` and ``H^(s)`` as ``E^(s)``, for every ``s`` in ``S``.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    if ops is None:
        ops = {}
    s0 = spec.distinct[0]
    u1 = complex(rng.uniform(0.3, 1.2), rng.uniform(0.2, 0.9))
    A = transfer_matrix(spec, s0, u1)
    w, V = np.linalg.eig(A)
    target = tau_eigenvalue(spec, s0, u1, roots)
    sel = np.abs(w - target) < 1e-6 * max(1.0, abs(target))
    if not np.any(sel):
        return StateMatch(roots, float(np.min(np.abs(w - target))), math.inf, 0)
    Q, _ = np.linalg.qr(V[:, sel])
    tau_err = 0.0
    for s in spec.distinct:
        for u in us:
            key = ("t", s, complex(u))
            if key not in ops:
                ops[key] = transfer_matrix(spec, s, u)
            tau = tau_eigenvalue(spec, s, u, roots)
            resid = ops[key] @ Q - tau * Q
            tau_err = max(tau_err, float(np.max(np.abs(resid))))
    E = energy_momentum(spec, roots)["E"]
    e_err = 0.0
    for s in spec.distinct:
        key = ("H", s)
        if key not in ops:
            ops[key] = hamiltonian(spec, s)
        resid = ops[key] @ Q - E[s] * Q
        e_err = max(e_err, float(np.max(np.abs(resid))))
    return StateMatch(roots, tau_err, e_err, int(sel.sum()))
