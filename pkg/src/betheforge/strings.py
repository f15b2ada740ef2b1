"""String configurations, string kernels, valences and state counting.

String lengths are stored as integers ``n = 2m``; the half-length ``m`` is
a positive half-integer. Kernels are finite sums ``sum_i c_i phi_{r_i}``
kept as term lists so values, derivatives and Fourier transforms share one
definition. The convention ``phi_0 = 0`` is used throughout.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb

import numpy as np
from scipy import optimize

from .chain import ChainSpec
from .errors import ConvergenceError, DomainError
from .special_functions import phi, phi_prime

HALF = Fraction(1, 2)


def _half(x) -> Fraction:
    x = Fraction(x)
    if (2 * x).denominator != 1 or x <= 0:
        raise DomainError(f"{x} is not a positive half-integer")
    return x


@dataclass(frozen=True)
class Kernel:
    """``sum_i c_i phi_{r_i}`` with ``r_i > 0``; ``phi_0`` terms are dropped."""

    terms: tuple  # ((coef, r), ...), r a Fraction

    def value(self, lam):
        lam = np.asarray(lam, dtype=float)
        return sum((c * phi(float(r), lam) for c, r in self.terms), np.zeros_like(lam))

    def derivative(self, lam):
        lam = np.asarray(lam, dtype=float)
        return sum((c * phi_prime(float(r), lam) for c, r in self.terms), np.zeros_like(lam))

    def transform(self, q):
        """Fourier transform of the derivative, ``sum_i c_i exp(-r_i |q|/2)``."""
        q = np.abs(np.asarray(q, dtype=float))
        return sum((c * np.exp(-float(r) * q / 2) for c, r in self.terms), np.zeros_like(q))

    def limit(self) -> float:
        """Value at ``lam -> +inf``."""
        return math.pi * sum(c for c, _ in self.terms)


def _kernel(pairs) -> Kernel:
    acc = Counter()
    for c, r in pairs:
        r = Fraction(r)
        if r < 0:
            c, r = -c, -r
        if r != 0:
            acc[r] += c
    return Kernel(tuple((c, r) for r, c in sorted(acc.items()) if c != 0))


def site_kernel(p: int, m) -> Kernel:
    """``Phi_p^(m)``: a string of half-length ``m`` against a site with ``2s = p``.

    ``sum_{alpha=|p/2-m+1/2|+1}^{p/2+m-1/2} phi_{2 alpha}
    + [p > 2m-1] phi_{p-2m+1}``.
    """
    m = _half(m)
    if p < 1 or int(p) != p:
        raise DomainError(f"p must be a positive integer, got {p}")
    lo = abs(Fraction(p, 2) - m + HALF) + 1
    hi = Fraction(p, 2) + m - HALF
    terms = []
    a = lo
    while a <= hi:
        terms.append((1, 2 * a))
        a += 1
    if p > 2 * m - 1:
        terms.append((1, p - 2 * m + 1))
    return _kernel(terms)


def site_kernel_bruteforce(p: int, m) -> Kernel:
    """``sum_{alpha=-m+1/2}^{m-1/2} phi_{2 alpha + p}`` term by term."""
    m = _half(m)
    terms = []
    a = -m + HALF
    while a <= m - HALF:
        terms.append((1, 2 * a + p))
        a += 1
    return _kernel(terms)


def pair_kernel(p, m) -> Kernel:
    """``Phi_2^(p,m) = phi_{2p+2m} + phi_{2|p-m|} + 2 sum_{|p-m|+1}^{p+m-1} phi_{2 alpha}``."""
    p, m = _half(p), _half(m)
    terms = [(1, 2 * p + 2 * m), (1, 2 * abs(p - m))]
    a = abs(p - m) + 1
    while a <= p + m - 1:
        terms.append((2, 2 * a))
        a += 1
    return _kernel(terms)


def pair_kernel_bruteforce(p, m) -> Kernel:
    """Double sum over string members of ``(phi_{2(c+1)} - phi_{2(c-1)})/2``."""
    p, m = _half(p), _half(m)
    terms = []
    a = -p + HALF
    while a <= p - HALF:
        b = -m + HALF
        while b <= m - HALF:
            c = a - b
            terms.append((Fraction(1, 2), 2 * (c + 1)))
            terms.append((Fraction(-1, 2), 2 * (c - 1)))
            b += 1
        a += 1
    return _kernel(terms)


def phi_kernels(p, m, lam) -> dict:
    """Kernel values at ``lam`` for half-integers ``p`` and ``m``.

    ``Phi_p_m`` is the site kernel ``Phi_{2p}^(m)`` (a string against a spin
    ``p`` site) and ``Phi2_p_m`` the string-string kernel ``Phi_2^(p,m)``;
    the ``Psi`` entries are their derivatives.
    """
    p = _half(p)
    ks, kp = site_kernel(int(2 * p), m), pair_kernel(p, m)
    return {
        "Phi_p_m": float(ks.value(lam)),
        "Phi2_p_m": float(kp.value(lam)),
        "Psi_p_m": float(ks.derivative(lam)),
        "Psi2_p_m": float(kp.derivative(lam)),
    }


# ----------------------------------------------------------- configurations


@dataclass(frozen=True)
class StringConfig:
    """Counts ``nu`` keyed by string length ``n = 2m``."""

    nu: tuple  # sorted ((n, count), ...) with count > 0

    def __init__(self, nu):
        items = dict(nu) if not isinstance(nu, dict) else nu
        clean = []
        for n, c in sorted(items.items()):
            if int(n) != n or n < 1:
                raise DomainError(f"string length must be a positive integer, got {n}")
            if int(c) != c or c < 0:
                raise DomainError(f"string count must be a non-negative integer, got {c}")
            if c:
                clean.append((int(n), int(c)))
        object.__setattr__(self, "nu", tuple(clean))

    def count(self, n: int) -> int:
        return dict(self.nu).get(n, 0)

    @property
    def M(self) -> int:
        return sum(n * c for n, c in self.nu)

    def slots(self):
        """``(n, k)`` labels, ``k = 1..nu_n``."""
        return [(n, k) for n, c in self.nu for k in range(1, c + 1)]


def vacuum_config(spec: ChainSpec) -> StringConfig:
    """``nu_{2s} = L rho_s / 2`` for each ``s`` in ``S``."""
    nu = {}
    for s in spec.distinct:
        Ls = spec.count(s)
        if Ls % 2:
            raise DomainError(f"L rho_s = {Ls} must be even for spin {s}")
        nu[s.doubled] = Ls // 2
    return StringConfig(nu)


def valence_n(spec: ChainSpec, config: StringConfig, n: int) -> int:
    """``P_m`` for string length ``n = 2m`` (integer arithmetic in doubled units)."""
    # 2 min(m, s) = min(n, 2s), 4 min(m, k) = 2 min(n, 2k)
    site = sum(spec.count(s) * min(n, s.doubled) for s in spec.distinct)
    strings = sum(2 * min(n, k) * c for k, c in config.nu)
    return site - strings + config.count(n)


def valence(spec: ChainSpec, config: StringConfig, m) -> dict:
    """Valence ``P_m`` and the bound ``Q_max = (P_m - 1)/2``."""
    n = int(2 * _half(m))
    P = valence_n(spec, config, n)
    return {"P_m": P, "Q_max": Fraction(P - 1, 2)}


def partitions(M: int, max_part: int | None = None):
    """Partitions of ``M`` as ``{part: multiplicity}``, largest parts first."""
    if max_part is None:
        max_part = M
    if M == 0:
        yield {}
        return
    for n in range(min(M, max_part), 0, -1):
        for rest in partitions(M - n, n):
            out = dict(rest)
            out[n] = out.get(n, 0) + 1
            yield out


def _config_weight(spec: ChainSpec, nu: dict) -> int:
    config = StringConfig(nu)
    top = max(list(nu) + [s.doubled for s in spec.distinct]) + 1
    prod = 1
    for n in range(1, top + 1):
        P = valence_n(spec, config, n)
        k = config.count(n)
        if P < k:
            return 0
        prod *= comb(P, k)
    return prod


def count_states(spec: ChainSpec, M: int) -> int:
    """Number of states with ``M`` roots, including ``gl(2)`` multiplets.

    ``Z_M = (2 S0 - 2M + 1) sum_nu prod_m binom(P_m, nu_m)``; configurations
    with ``P_m < nu_m`` for any ``m`` contribute zero.
    """
    twoS0 = int(2 * spec.S0)
    if M < 0 or 2 * M > twoS0:
        return 0
    total = sum(_config_weight(spec, nu) for nu in partitions(M))
    return (twoS0 - 2 * M + 1) * total


def count_table(spec: ChainSpec) -> list:
    """``[(M, Z_M)]`` for ``M = 0 .. S0``."""
    return [(M, count_states(spec, M)) for M in range(int(spec.S0) + 1)]


def completeness_check(spec: ChainSpec) -> dict:
    """Compare ``sum_M Z_M`` with the Hilbert-space dimension."""
    total = sum(z for _, z in count_table(spec))
    dim = 1
    for s in spec.distinct:
        dim *= (s.doubled + 1) ** spec.count(s)
    return {"sum": total, "hilbert_dim": dim, "equal": total == dim}


def gen_binom(a: int, k: int) -> int:
    """``a (a-1) ... (a-k+1)/k!`` for any integer ``a``."""
    if k < 0:
        return 0
    num = 1
    for i in range(k):
        num *= a - i
    return num // math.factorial(k)


def series_coefficients(b: dict, order: int) -> list:
    """Coefficients of ``(1 - x) prod_n (1 - x^n)^{b_n}`` up to ``x^order``."""
    coeffs = [0] * (order + 1)
    coeffs[0] = 1
    if order >= 1:
        coeffs[1] = -1
    for n, bn in b.items():
        if bn == 0 or n > order:
            continue
        factor = [0] * (order + 1)
        for k in range(order // n + 1):
            factor[n * k] = gen_binom(bn, k) * (-1) ** k
        coeffs = [sum(coeffs[i] * factor[j - i] for i in range(j + 1)) for j in range(order + 1)]
    return coeffs


def identity_Z(b: dict, M: int) -> int:
    """Right side coefficient ``Z({b}, M)`` with generalised binomials."""
    total = 0
    for nu in partitions(M):
        prod = 1
        for n, k in nu.items():
            # A_m with 2m = n
            A = -sum((n - j + 1) * b.get(j, 0) for j in range(1, n + 1)) - 2 * M
            A += 2 * sum((q - n) * c for q, c in nu.items() if q > n) + k
            prod *= gen_binom(A, k)
            if prod == 0:
                break
        total += prod
    return total


def series_identity_check(b: dict, M_max: int) -> bool:
    """Check ``sum_M Z({b}, M) x^M = (1 - x) prod_n (1 - x^n)^{b_n}`` to ``x^{M_max}``."""
    if M_max > 20:
        raise DomainError("M_max must not exceed 20")
    b = {int(n): int(v) for n, v in b.items() if v != 0}
    if not b:
        raise DomainError("the all-zero b is not admissible")
    if b.get(1, 0) >= 0 or any(v < 0 for n, v in b.items() if n > 1):
        raise DomainError("admissible b has b_1 < 0 and b_n >= 0 for n > 1")
    series = series_coefficients(b, M_max)
    return all(series[M] == identity_Z(b, M) for M in range(M_max + 1))


def chain_b(spec: ChainSpec) -> dict:
    """``b_1 = -L`` and ``b_{2s+1} = L rho_s``."""
    b = {1: -spec.L}
    for s in spec.distinct:
        b[s.doubled + 1] = b.get(s.doubled + 1, 0) + spec.count(s)
    return b


# ----------------------------------------------------- logarithmic equations


def log_bethe_residual(spec: ChainSpec, config: StringConfig, centers, Q) -> list:
    """Residuals of the string-centre equations, one per ``(n, k)`` slot.

    ``centers`` and ``Q`` are mappings keyed by ``(n, k)`` (or sequences in
    :meth:`StringConfig.slots` order).
    """
    slots = config.slots()
    centers = _as_map(slots, centers)
    Q = _as_map(slots, Q)
    out = []
    for (n, k) in slots:
        m = Fraction(n, 2)
        lam = centers[(n, k)]
        val = -2 * math.pi * float(Q[(n, k)])
        for s in spec.distinct:
            val += spec.count(s) * float(site_kernel(s.doubled, m).value(lam))
        for (q, l) in slots:
            val -= float(pair_kernel(Fraction(q, 2), m).value(lam - centers[(q, l)]))
        out.append(val)
    return out


def _as_map(slots, values):
    if isinstance(values, dict):
        return values
    values = list(values)
    if len(values) != len(slots):
        raise DomainError(f"expected {len(slots)} values, got {len(values)}")
    return dict(zip(slots, values))


def solve_string_centers(spec: ChainSpec, config: StringConfig, Q, seeds=None) -> dict:
    """Newton solve of the string-centre equations for given quantum numbers."""
    slots = config.slots()
    Q = _as_map(slots, Q)
    x0 = np.zeros(len(slots)) if seeds is None else np.array(list(_as_map(slots, seeds).values()),
                                                             dtype=float)

    def fun(x):
        return np.array(log_bethe_residual(spec, config, dict(zip(slots, x)), Q))

    def jac(x):
        cm = dict(zip(slots, x))
        J = np.zeros((len(slots), len(slots)))
        for i, (n, k) in enumerate(slots):
            m = Fraction(n, 2)
            lam = cm[(n, k)]
            J[i, i] += sum(spec.count(s) * float(site_kernel(s.doubled, m).derivative(lam))
                           for s in spec.distinct)
            for j, (q, l) in enumerate(slots):
                d = float(pair_kernel(Fraction(q, 2), m).derivative(lam - cm[(q, l)]))
                J[i, i] -= d
                J[i, j] += d
        return J

    sol = optimize.root(fun, x0, jac=jac, method="hybr", tol=1e-14)
    res = fun(sol.x)
    if res.size and np.max(np.abs(res)) > 1e-10:
        raise ConvergenceError(f"string centres did not converge (|F|={np.max(np.abs(res)):.3g})")
    return dict(zip(slots, sol.x))
