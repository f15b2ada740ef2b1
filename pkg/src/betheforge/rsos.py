"""Generalised RSOS path spaces, state counting and Boltzmann weights.

A path in ``H(D; D'; s̄)`` is a pair of height sequences
``a = (a_0..a_D)`` and ``b = (b_0..b_D')`` with heights in ``0..2s̄``.
The ``a`` part moves by jumps of ``2s̄ - 1`` (odd or even steps up to
that size, with a bound on the sum of neighbouring heights), the ``b``
part by unit jumps. Boundary values are ``a_0 = 0``, ``a_D = b_0`` and
``b_D' = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from math import comb

import mpmath
import numpy as np

from .chain import ChainSpec
from .errors import DomainError, NumericError
from .special_functions import K_cached, KernelParams
from .thermo import removed_strings_counts

MAX_ENUM = 14
INTEGRALITY_TOL = 1e-9


def _half(x) -> Fraction:
    f = Fraction(x)
    if (2 * f).denominator != 1 or f <= 0:
        raise DomainError(f"{x} is not a positive half-integer")
    return f


@dataclass(frozen=True)
class RSOSSpace:
    """``H(D; Dp; sbar)`` with restriction parameter ``2 sbar + 2``."""

    D: int
    Dp: int
    sbar: Fraction

    def __post_init__(self):
        for name in ("D", "Dp"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 0 or v % 2:
                raise DomainError(f"{name} must be an even non-negative integer, got {v}")
        object.__setattr__(self, "sbar", _half(self.sbar))

    @property
    def restriction(self) -> int:
        return int(2 * self.sbar + 2)

    @property
    def top(self) -> int:
        """Largest height ``2 sbar``."""
        return int(2 * self.sbar)


@dataclass(frozen=True)
class RSOSPath:
    a: tuple
    b: tuple


def _a_moves(top: int):
    """Allowed ``a_{i+1} - a_i``: ``-(2s̄-1), -(2s̄-3), .., 2s̄-1``."""
    return range(-(top - 1), top, 2)


def _a_ok(x: int, y: int, top: int) -> bool:
    return 0 <= y <= top and top - 2 <= x + y <= top + 2


def enumerate_paths(space: RSOSSpace) -> list:
    """All paths of ``space`` in lexicographic order of ``(a, b)``."""
    if space.D + space.Dp > MAX_ENUM:
        raise DomainError(f"D + Dp = {space.D + space.Dp} exceeds the enumeration guard {MAX_ENUM}")
    top = space.top
    out = []

    def grow_b(a, b):
        if len(b) == space.Dp + 1:
            if b[-1] == 0:
                out.append(RSOSPath(tuple(a), tuple(b)))
            return
        for step in (-1, 1):
            y = b[-1] + step
            if 0 <= y <= top:
                grow_b(a, b + [y])

    def grow_a(a):
        if len(a) == space.D + 1:
            grow_b(a, [a[-1]])
            return
        for step in _a_moves(top):
            y = a[-1] + step
            if _a_ok(a[-1], y, top):
                grow_a(a + [y])

    grow_a([0])
    return out


def count_paths(space: RSOSSpace) -> int:
    """Exact number of paths by dynamic programming over ``(position, height)``."""
    top = space.top
    layer = [0] * (top + 1)
    layer[0] = 1
    for _ in range(space.D):
        nxt = [0] * (top + 1)
        for x, n in enumerate(layer):
            if n:
                for step in _a_moves(top):
                    y = x + step
                    if _a_ok(x, y, top):
                        nxt[y] += n
        layer = nxt
    for _ in range(space.Dp):
        nxt = [0] * (top + 1)
        for x, n in enumerate(layer):
            if n:
                if x > 0:
                    nxt[x - 1] += n
                if x < top:
                    nxt[x + 1] += n
        layer = nxt
    return layer[0]


def zj_formula(Dsum: int, sbar) -> int:
    """Trigonometric closed form for the number of RSOS states.

    ``2^Dsum/(s̄+1) sum_{q=1}^{2s̄+1} sin^2(q pi/(2s̄+2)) cos^Dsum(q pi/(2s̄+2))``,
    evaluated in extended precision and rounded after an integrality check.
    """
    if Dsum < 0 or Dsum % 2:
        raise DomainError(f"Dsum must be even and non-negative, got {Dsum}")
    sbar = _half(sbar)
    n = int(2 * sbar + 2)
    with mpmath.workdps(30 + Dsum):
        total = mpmath.mpf(0)
        for q in range(1, n):
            ang = mpmath.pi * q / n
            total += mpmath.sin(ang) ** 2 * mpmath.cos(ang) ** Dsum
        val = mpmath.mpf(2) ** Dsum * total / (mpmath.mpf(sbar.numerator) / sbar.denominator + 1)
        k = int(mpmath.nint(val))
        if abs(val - k) > INTEGRALITY_TOL:
            raise NumericError(f"closed form gives non-integer {val} for Dsum={Dsum}, sbar={sbar}")
    return k


def zL(D_L: int) -> int:
    """Degeneracy ``2^D_L`` of the top sea."""
    if D_L < 0:
        raise DomainError("D_L must be non-negative")
    return 2 ** D_L


def zj_binomial(D: int, Dp: int, sbar) -> int:
    """Binomial sum over even unused-number counts between two seas.

    ``sum prod_r C((A_{r-1/2} + A_{r+1/2})/2, A_r)`` with the ``2 s̄ - 1``
    interior ``A_r`` running over even non-negative integers and the end
    values fixed to ``D`` and ``Dp``.
    """
    sbar = _half(sbar)
    inner = int(2 * sbar) - 1
    if inner == 0:
        return 1
    bound = max(D, Dp) + 2 * inner
    total = 0
    for A in product(range(0, bound + 1, 2), repeat=inner):
        full = (D,) + A + (Dp,)
        term = 1
        for k in range(1, inner + 1):
            top = full[k - 1] + full[k + 1]
            term *= comb(top // 2, full[k]) if top % 2 == 0 else 0
            if not term:
                break
        total += term
    return total


def zL_binomial(D_L: int) -> int:
    """``sum (2S+1) prod_m C(A_m + nu_m, nu_m)`` for a spin-1/2 sea with ``D_L`` holes.

    ``A_m = D_L - 4 sum_m' min(m, m') nu_m'`` and ``S = D_L/2 - 2 sum_m m nu_m``
    for string offsets ``m = 1/2, 1, 3/2, ..``.
    """
    total = 0
    m_max = Fraction(D_L, 4) + 1

    def rec(ms, nus):
        nonlocal total
        if not ms:
            S = Fraction(D_L, 2) - 2 * sum(m * n for m, n in nus.items())
            if S < 0:
                return
            term = int(2 * S + 1)
            for m in nus:
                A = D_L - 4 * sum(min(m, mp) * n for mp, n in nus.items())
                if A < 0:
                    return
                term *= comb(int(A) + nus[m], nus[m])
            total += term
            return
        m = ms[0]
        n = 0
        while True:
            trial = {**nus, m: n}
            if Fraction(D_L, 2) - 2 * sum(k * v for k, v in trial.items()) < 0:
                break
            rec(ms[1:], trial)
            n += 1

    ms = []
    m = Fraction(1, 2)
    while m <= m_max:
        ms.append(m)
        m += Fraction(1, 2)
    rec(ms, {})
    return total


# ------------------------------------------------------------------- ledger


@dataclass(frozen=True)
class HoleLedger:
    """Unused-number bookkeeping for a hole configuration.

    ``Z`` is the number of states with these hole counts, summed over
    string contents; ``multiplet`` is ``2S + 1`` for the given ``nu_tilde``.
    """

    D: dict
    nu_tilde: dict
    A: dict
    mu: dict
    S_total: Fraction
    Z: int

    @property
    def multiplet(self) -> int:
        return int(2 * self.S_total + 1)


def unused_from_holes(spec: ChainSpec, D: dict, nu_tilde: dict, r) -> Fraction:
    """``A_r`` for ``r`` in the gap ``R_j`` from hole and string counts."""
    r = Fraction(r)
    j = spec.sea_of(r)
    lo, hi = spec.sbar(j), spec.sbar(j + 1)
    Dj = D.get(j, 0) if j > 0 else 0
    if hi == math.inf:
        A = Fraction(Dj)
        for m, n in nu_tilde.items():
            m = Fraction(m)
            if spec.sea_of(m) == j:
                A -= 4 * (min(m, r) - lo) * n
        return A
    Dk = D.get(j + 1, 0)
    width = hi - lo
    A = (r - lo) / width * Dk + (hi - r) / width * Dj
    for m, n in nu_tilde.items():
        m = Fraction(m)
        if spec.sea_of(m) == j:
            A -= 4 * (hi - max(m, r)) * (min(m, r) - lo) / width * n
    return A


def nu_from_unused(spec: ChainSpec, D: dict, A: dict, r) -> Fraction:
    """Invert the unused-number relation: ``nu_r = (A_{r-1/2} + A_{r+1/2} - 2 A_r)/2``.

    ``A`` must contain the gap values around ``r``; spins of the chain
    take ``A_s = D_s`` and ``A_0 = 0``.
    """
    half = Fraction(1, 2)

    def get(x):
        if x == 0:
            return 0
        for j, s in enumerate(spec.distinct, start=1):
            if s.value == x:
                return D.get(j, 0)
        return A[x]

    r = Fraction(r)
    return (get(r - half) + get(r + half) - 2 * get(r)) / 2


def hole_ledger(spec: ChainSpec, D: dict, nu_tilde: dict | None = None) -> HoleLedger:
    """Unused numbers, removed strings, total spin and degeneracy.

    Parameters
    ----------
    D : dict
        ``j -> D_j`` hole counts, each even.
    nu_tilde : dict
        ``r -> count`` of new strings with ``r`` not a spin of the chain.
    """
    nu_tilde = {Fraction(r): int(n) for r, n in (nu_tilde or {}).items() if n}
    D = {int(j): int(n) for j, n in D.items()}
    for j, n in D.items():
        if not 1 <= j <= spec.n_seas:
            raise DomainError(f"sea index {j} out of range")
        if n < 0 or n % 2:
            raise DomainError(f"D_{j} = {n} must be even and non-negative")
    for r, n in nu_tilde.items():
        spec.sea_of(_half(r))
        if n < 0:
            raise DomainError(f"negative string count at r={r}")
    L = spec.n_seas
    top = max([spec.sbar(L)] + list(nu_tilde)) + 1
    A = {}
    r = Fraction(1, 2)
    while r <= top:
        if all(r != s.value for s in spec.distinct):
            A[r] = unused_from_holes(spec, D, nu_tilde, r)
        r += Fraction(1, 2)
    for r, v in A.items():
        if v < 0:
            raise DomainError(f"infeasible configuration: A_{r} = {v} < 0")
        if v.denominator != 1 or v % 2:
            raise DomainError(f"A_{r} = {v} is not an even integer")
    mu = removed_strings_counts(spec, D, nu_tilde)
    sL = spec.sbar(L)
    S = Fraction(D.get(L, 0), 2) - 2 * sum((r - sL) * n for r, n in nu_tilde.items() if r > sL)
    Z = zL(D.get(L, 0))
    for j in range(L):
        left = D.get(j, 0) if j > 0 else 0
        Z *= count_paths(RSOSSpace(left, D.get(j + 1, 0), spec.gap(j)))
    return HoleLedger(D, nu_tilde, A, mu, S, Z)


# ------------------------------------------------------------------ weights


def _max_height(hbar: float) -> int:
    n = math.pi / hbar
    k = round(n)
    if abs(n - k) > 1e-9 or k < 3:
        raise DomainError(f"hbar = {hbar} is not pi over an integer restriction >= 3")
    return k - 2


def _sin_h(hbar: float, x: int) -> float:
    return math.sin(hbar * (x + 1))


def boltzmann_weight(hbar: float, a: int, b: int, c: int, d: int, lam: complex) -> complex:
    """Face weight with heights ``d c`` on top and ``a b`` below.

    ``delta_ac - (-1)^((a-c)/2) sinh(hbar lam)/sinh(hbar(lam - i))
    sqrt(sin hbar(a+1) sin hbar(c+1)/(sin hbar(b+1) sin hbar(d+1))) delta_bd``.
    """
    top = _max_height(hbar)
    for h in (a, b, c, d):
        if not 0 <= h <= top:
            raise DomainError(f"height {h} outside 0..{top}")
    if (a - c) % 2:
        raise DomainError(f"heights a={a}, c={c} have different parity")
    w = 1.0 + 0j if a == c else 0j
    if b == d:
        lam = complex(lam)
        sign = -1.0 if ((a - c) // 2) % 2 else 1.0
        root = math.sqrt(_sin_h(hbar, a) * _sin_h(hbar, c) / (_sin_h(hbar, b) * _sin_h(hbar, d)))
        w -= sign * np.sinh(hbar * lam) / np.sinh(hbar * (lam - 1j)) * root
    return w


def unit_path(start: int, end: int, steps: int, top: int):
    """Lexicographically smallest unit-step path, or ``None`` if there is none."""
    if steps < 0 or abs(end - start) > steps or (end - start - steps) % 2:
        return None
    path = [start]
    for k in range(steps):
        left = steps - k - 1
        for y in (path[-1] - 1, path[-1] + 1):
            if 0 <= y <= top and abs(end - y) <= left:
                path.append(y)
                break
        else:
            return None
    return path


def _unit_paths(start: int, end: int, steps: int, top: int):
    if steps == 0:
        if start == end:
            yield [start]
        return
    for y in (start - 1, start + 1):
        if 0 <= y <= top and abs(end - y) <= steps - 1:
            for rest in _unit_paths(y, end, steps - 1, top):
                yield [start] + rest


def fused_weight(hbar: float, edges, lam: complex, s) -> complex:
    """Fused face weight with jump ``2s - 1`` on both horizontal edges.

    ``edges = (d, c, a, b)``: top-left, top-right, bottom-left,
    bottom-right. The top edge is filled with the smallest unit path
    from ``d`` to ``c``; the bottom interior heights are summed over.
    Shifts ``lam + i(n - 2s + 1)`` for ``n = 1..2s-1``. A face whose
    edges admit no unit path of the right length has weight zero. For
    ``s = 1/2`` the weight is identically one.
    """
    s = _half(s)
    d, c, a, b = edges
    top = _max_height(hbar)
    for h in edges:
        if not 0 <= h <= top:
            raise DomainError(f"height {h} outside 0..{top}")
    n_steps = int(2 * s) - 1
    if n_steps == 0:
        return 1.0 + 0j
    upper = unit_path(d, c, n_steps, top)
    if upper is None:
        return 0j
    total = 0j
    for lower in _unit_paths(a, b, n_steps, top):
        term = 1.0 + 0j
        for n in range(1, n_steps + 1):
            shift = lam + 1j * (n - n_steps)
            term *= boltzmann_weight(hbar, lower[n - 1], lower[n], upper[n], upper[n - 1], shift)
            if term == 0:
                break
        total += term
    return total


# ------------------------------------------------------------ transfer matrix


@dataclass(frozen=True)
class RSOSTransferContext:
    """Data for the RSOS transfer matrix between seas ``j`` and ``j + 1``.

    ``left`` and ``right`` are the hole rapidities of the two seas, ``sbar``
    the gap ``s̄_{j+1} - s̄_j`` and ``d`` the (1-based) distinguished hole.
    """

    sbar: Fraction
    left: tuple
    right: tuple
    d: int

    def __post_init__(self):
        object.__setattr__(self, "sbar", _half(self.sbar))
        object.__setattr__(self, "left", tuple(float(x) for x in self.left))
        object.__setattr__(self, "right", tuple(float(x) for x in self.right))

    @property
    def space(self) -> RSOSSpace:
        return RSOSSpace(len(self.left), len(self.right), self.sbar)

    @property
    def hbar(self) -> float:
        return math.pi / float(2 * self.sbar + 2)

    def kernel(self, r) -> KernelParams:
        return KernelParams.with_period(2 * self.sbar + 2, r)


def _check_path(space: RSOSSpace, path: RSOSPath):
    top = space.top
    a, b = path.a, path.b
    ok = (len(a) == space.D + 1 and len(b) == space.Dp + 1 and a[0] == 0
          and a[-1] == b[0] and b[-1] == 0)
    ok = ok and all(y - x in _a_moves(top) and _a_ok(x, y, top) for x, y in zip(a, a[1:]))
    ok = ok and all(abs(y - x) == 1 and 0 <= y <= top for x, y in zip(b, b[1:]))
    if not ok:
        raise DomainError(f"{path} is not a path of {space}")


def _normalisation(kind: str, ctx: RSOSTransferContext, lam: float) -> complex:
    jump = 2 * ctx.sbar - 1
    r_left, r_right = (jump, 1) if kind == "plain_aux" else (1, jump)
    out = 1.0 + 0j
    for x in ctx.left:
        out *= K_cached(ctx.kernel(r_left), x - lam)
    for x in ctx.right:
        out *= K_cached(ctx.kernel(r_right), x - lam)
    return out


def _plain_aux_weights(ctx: RSOSTransferContext, bra: RSOSPath, ket: RSOSPath, lam):
    hb, s = ctx.hbar, ctx.sbar
    a, b, ap, bp = ket.a, ket.b, bra.a, bra.b
    D, Dp, d = len(ctx.left), len(ctx.right), ctx.d
    ap_ext = list(ap) + [bp[1]] if Dp else list(ap)
    w = 1.0 + 0j
    for q in range(1, D + 1):
        w *= fused_weight(hb, (a[q - 1], a[q], ap_ext[q], ap_ext[q + 1]), lam - ctx.left[q - 1], s)
        if w == 0:
            return w
    for q in range(1, Dp):
        x = ctx.right[q - 1] if q < d else ctx.right[q]
        w *= boltzmann_weight(hb, bp[q], bp[q + 1], b[q], b[q - 1], lam - x)
        if w == 0:
            return w
    return w


def _fused_aux_weights(ctx: RSOSTransferContext, bra: RSOSPath, ket: RSOSPath, lam):
    hb, s = ctx.hbar, ctx.sbar
    top = int(2 * s)
    a, b, ap, bp = ket.a, ket.b, bra.a, bra.b
    D, Dp, d = len(ctx.left), len(ctx.right), ctx.d

    def bar(x):
        return top - x

    def b_ext(k):
        return a[D - 1] if k == -1 else b[k]

    w = 1.0 + 0j
    for q in range(1, Dp + 1):
        edges = (b_ext(q - 2), bar(b[q - 1]), bar(bp[q - 1]), bp[q])
        w *= fused_weight(hb, edges, lam - ctx.right[q - 1], s)
        if w == 0:
            return w
    for q in range(1, D):
        x = ctx.left[q - 1] if q < d else ctx.left[q]
        w *= boltzmann_weight(hb, bar(ap[q]), ap[q + 1], bar(a[q]), a[q - 1], lam - x)
        if w == 0:
            return w
    return w


def rsos_transfer_entry(kind: str, ctx: RSOSTransferContext, bra: RSOSPath, ket: RSOSPath,
                        lam: float) -> complex:
    """One entry ``<bra| t(lam) |ket>`` of an RSOS transfer matrix.

    ``kind="plain_aux"`` is the unit-jump auxiliary space; the hole ``d``
    is taken from the right sea. ``kind="fused_aux"`` has the auxiliary
    jump ``2 s̄ - 1`` and takes ``d`` from the left sea.
    """
    if kind not in ("plain_aux", "fused_aux"):
        raise DomainError(f"unknown transfer kind {kind!r}")
    space = ctx.space
    _check_path(space, bra)
    _check_path(space, ket)
    if space.D == space.Dp == 0:
        return 1.0 + 0j
    n_d = space.Dp if kind == "plain_aux" else space.D
    if not 1 <= ctx.d <= n_d:
        raise DomainError(f"hole index d={ctx.d} out of range 1..{n_d}")
    weights = _plain_aux_weights if kind == "plain_aux" else _fused_aux_weights
    w = weights(ctx, bra, ket, lam)
    if w == 0:
        return w
    return _normalisation(kind, ctx, lam) * w


def rsos_transfer_matrix(kind: str, ctx: RSOSTransferContext, lam: float):
    """Dense transfer matrix over :func:`enumerate_paths` and the basis used."""
    basis = enumerate_paths(ctx.space)
    T = np.array([[rsos_transfer_entry(kind, ctx, bra, ket, lam) for ket in basis]
                  for bra in basis], dtype=complex)
    return T, basis


def count_table(sbars, max_sum: int = 12) -> list:
    """Rows ``(D, Dp, sbar, count, formula, match)`` for even ``D + Dp <= max_sum``."""
    rows = []
    for sb in sbars:
        sb = _half(sb)
        for total in range(0, max_sum + 1, 2):
            formula = zj_formula(total, sb)
            for D in range(0, total + 1, 2):
                n = count_paths(RSOSSpace(D, total - D, sb))
                rows.append((D, total - D, sb, n, formula, n == formula))
    return rows
