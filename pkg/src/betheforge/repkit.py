"""gl(2) representations, fusion projectors and fused R-matrices.

Operators are dense complex ``numpy`` arrays. Two-leg operators act on
``V_s (x) V_s'`` with the first spin as the leftmost tensor factor.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import DomainError, PoleError

MAX_DOUBLED = 8
POLE_TOL = 1e-12


@dataclass(frozen=True, order=True)
class Spin:
    """A spin ``s`` stored as ``doubled = 2s``."""

    doubled: int

    def __post_init__(self):
        if not isinstance(self.doubled, (int, np.integer)) or self.doubled < 0:
            raise DomainError(f"doubled spin must be a non-negative integer, got {self.doubled}")
        if self.doubled > MAX_DOUBLED:
            raise DomainError(f"spin {self.doubled}/2 above the cap {MAX_DOUBLED}/2")
        object.__setattr__(self, "doubled", int(self.doubled))

    @classmethod
    def parse(cls, value) -> "Spin":
        """Accept ``Spin``, ``"k/2"``, ``"1"``, ints, ``Fraction`` or floats."""
        if isinstance(value, Spin):
            return value
        if isinstance(value, str):
            try:
                frac = Fraction(value.strip())
            except ValueError as exc:
                raise DomainError(f"cannot parse spin {value!r}") from exc
        elif isinstance(value, float):
            frac = Fraction(value).limit_denominator(2)
            if float(frac) != value:
                raise DomainError(f"spin {value} is not a half-integer")
        else:
            frac = Fraction(value)
        if (2 * frac).denominator != 1:
            raise DomainError(f"spin {frac} is not a half-integer")
        return cls(int(2 * frac))

    @property
    def value(self) -> Fraction:
        return Fraction(self.doubled, 2)

    @property
    def dim(self) -> int:
        return self.doubled + 1

    def __float__(self):
        return self.doubled / 2

    def __str__(self):
        return str(self.doubled // 2) if self.doubled % 2 == 0 else f"{self.doubled}/2"


def spin_rep(s) -> dict:
    """Matrices ``e3, e_plus, e_minus, e0`` of the spin ``s`` representation.

    Basis vector ``n = 1..2s+1`` has ``e3`` eigenvalue ``s + 1 - n``.
    """
    s = Spin.parse(s)
    d = s.dim
    n = np.arange(1, d + 1)
    e3 = np.diag((s.doubled / 2 + 1 - n).astype(complex))
    ep = np.zeros((d, d), dtype=complex)
    for k in range(1, d):
        ep[k - 1, k] = np.sqrt(k * (s.doubled + 1 - k))
    return {"e3": e3, "e_plus": ep, "e_minus": ep.T.copy(), "e0": np.eye(d, dtype=complex)}


def permutation(d1: int, d2: int) -> np.ndarray:
    """Flip operator ``V_d1 (x) V_d2 -> V_d2 (x) V_d1``."""
    P = np.zeros((d1 * d2, d1 * d2), dtype=complex)
    for a in range(d1):
        for b in range(d2):
            P[b * d1 + a, a * d2 + b] = 1.0
    return P


def _casimir(s: Spin, sp: Spin) -> np.ndarray:
    r1, r2 = spin_rep(s), spin_rep(sp)
    return (np.kron(r1["e3"], r2["e3"])
            + 0.5 * (np.kron(r1["e_plus"], r2["e_minus"]) + np.kron(r1["e_minus"], r2["e_plus"])))


def _channels(s: Spin, sp: Spin) -> list[int]:
    """Doubled values of ``k`` in ``|s - s'| .. s + s'``."""
    return list(range(abs(s.doubled - sp.doubled), s.doubled + sp.doubled + 1, 2))


def _x(k2: int, s: Spin, sp: Spin) -> float:
    k, a, b = k2 / 2, s.doubled / 2, sp.doubled / 2
    return 0.5 * (k * (k + 1) - a * (a + 1) - b * (b + 1))


@lru_cache(maxsize=None)
def _projector_cached(s2: int, sp2: int, k2: int) -> np.ndarray:
    s, sp = Spin(s2), Spin(sp2)
    C = _casimir(s, sp)
    ident = np.eye(C.shape[0], dtype=complex)
    xk = _x(k2, s, sp)
    P = ident.copy()
    for l2 in _channels(s, sp):
        if l2 != k2:
            xl = _x(l2, s, sp)
            P = P @ (C - xl * ident) / (xk - xl)
    P.setflags(write=False)
    return P


def projector(s, sp, k) -> np.ndarray:
    """Projector onto the spin ``k`` component of ``V_s (x) V_s'``.

    Built by Lagrange interpolation in the two-site Casimir
    ``e3 (x) e3 + (e+ (x) e- + e- (x) e+)/2`` whose eigenvalue on spin ``k``
    is ``x_k = [k(k+1) - s(s+1) - s'(s'+1)]/2``.
    """
    s, sp, k = Spin.parse(s), Spin.parse(sp), Spin.parse(k)
    if k.doubled not in _channels(s, sp):
        raise DomainError(f"spin {k} does not occur in {s} x {sp}")
    return _projector_cached(s.doubled, sp.doubled, k.doubled).copy()


def fusion_coefficients(s, sp, u: complex) -> dict[int, complex]:
    """``f_k(u) = prod_{l=k+1}^{s+s'} (u - il)/(u + il)`` keyed by doubled ``k``."""
    s, sp = Spin.parse(s), Spin.parse(sp)
    u = complex(u)
    top2 = s.doubled + sp.doubled
    out = {}
    for k2 in _channels(s, sp):
        f = 1.0 + 0j
        for l2 in range(k2 + 2, top2 + 1, 2):
            ell = l2 / 2
            if abs(u + 1j * ell) < POLE_TOL:
                raise PoleError(f"u={u} at the pole u=-{ell}i of R^({s},{sp})")
            f *= (u - 1j * ell) / (u + 1j * ell)
        out[k2] = f
    return out


def fused_R(s, sp, u: complex) -> np.ndarray:
    """Normalised fused R-matrix ``R^(s,s')(u) = sum_k f_k(u) P_k``."""
    s, sp = Spin.parse(s), Spin.parse(sp)
    coeffs = fusion_coefficients(s, sp, u)
    R = np.zeros((s.dim * sp.dim,) * 2, dtype=complex)
    for k2, f in coeffs.items():
        R += f * _projector_cached(s.doubled, sp.doubled, k2)
    return R


def embed(op: np.ndarray, legs: tuple[int, ...], dims: tuple[int, ...]) -> np.ndarray:
    """Lift an operator on the tensor factors ``legs`` to the full space.

    ``op`` acts on ``V_{dims[legs[0]]} (x) V_{dims[legs[1]]} ...`` in the
    order given by ``legs``.
    """
    n = len(dims)
    rest = [i for i in range(n) if i not in legs]
    order = list(legs) + rest
    rest_dim = int(np.prod([dims[i] for i in rest])) if rest else 1
    big = np.kron(op, np.eye(rest_dim, dtype=complex))
    shape = [dims[i] for i in order]
    T = big.reshape(shape + shape)
    back = [order.index(i) for i in range(n)]
    T = np.transpose(T, back + [n + b for b in back])
    D = int(np.prod(dims))
    return T.reshape(D, D)


def ybe_residual(si, sj, sk, u: complex, v: complex, w: complex) -> float:
    """Max-norm of the Yang-Baxter defect on ``V_si (x) V_sj (x) V_sk``.

    Checks ``R12(u-v) R13(u-w) R23(v-w) = R23(v-w) R13(u-w) R12(u-v)``.
    """
    si, sj, sk = Spin.parse(si), Spin.parse(sj), Spin.parse(sk)
    dims = (si.dim, sj.dim, sk.dim)
    R12 = embed(fused_R(si, sj, u - v), (0, 1), dims)
    R13 = embed(fused_R(si, sk, u - w), (0, 2), dims)
    R23 = embed(fused_R(sj, sk, v - w), (1, 2), dims)
    return float(np.max(np.abs(R12 @ R13 @ R23 - R23 @ R13 @ R12)))


def spin_triples(max_doubled: int):
    """All ordered triples of spins with ``1 <= doubled <= max_doubled``."""
    rng = range(1, max_doubled + 1)
    return [tuple(Spin(x) for x in t) for t in itertools.product(rng, repeat=3)]
