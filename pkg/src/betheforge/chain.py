"""Periodic L0-regular spin chains: transfer matrices, shift and Hamiltonians."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np
from scipy import linalg

from .errors import DomainError, NumericError
from .repkit import Spin, fused_R, spin_rep

DEFAULT_CAP = 4096
DIFF_STEP = 1e-5


@dataclass(frozen=True)
class ChainSpec:
    """A motif of spins repeated ``repeats`` times around a ring.

    Parameters
    ----------
    motif : tuple of Spin
        Spins ``s_1 .. s_L0`` of one period.
    repeats : int
        Number of periods, so ``L = repeats * L0``.
    cap : int
        Largest Hilbert-space dimension accepted.
    """

    motif: tuple
    repeats: int
    cap: int = field(default=DEFAULT_CAP, compare=False)

    def __post_init__(self):
        motif = tuple(Spin.parse(s) for s in self.motif)
        if not motif:
            raise DomainError("motif must not be empty")
        if any(s.doubled == 0 for s in motif):
            raise DomainError("spin 0 sites carry no degrees of freedom")
        if not isinstance(self.repeats, (int, np.integer)) or self.repeats < 1:
            raise DomainError(f"repeats must be a positive integer, got {self.repeats}")
        object.__setattr__(self, "motif", motif)
        object.__setattr__(self, "repeats", int(self.repeats))
        if self.hilbert_dim > self.cap:
            raise DomainError(f"Hilbert dimension {self.hilbert_dim} exceeds cap {self.cap}")

    @property
    def L0(self) -> int:
        return len(self.motif)

    @property
    def L(self) -> int:
        return self.L0 * self.repeats

    @property
    def sites(self) -> tuple:
        return self.motif * self.repeats

    @property
    def dims(self) -> tuple:
        return tuple(s.dim for s in self.sites)

    @property
    def hilbert_dim(self) -> int:
        return math.prod(s.dim for s in self.motif) ** self.repeats

    @cached_property
    def distinct(self) -> tuple:
        """The ordered set ``S`` of spins present."""
        return tuple(sorted(set(self.motif)))

    @property
    def n_seas(self) -> int:
        return len(self.distinct)

    @cached_property
    def densities(self) -> dict:
        return {s: Fraction(self.motif.count(s), self.L0) for s in self.distinct}

    def rho(self, s) -> Fraction:
        return self.densities[Spin.parse(s)]

    def count(self, s) -> int:
        """Number ``L_s = L rho_s`` of sites carrying spin ``s``."""
        return self.repeats * self.motif.count(Spin.parse(s))

    def sbar(self, j: int) -> Fraction:
        """``s̄_j`` with ``s̄_0 = 0``; ``j = n_seas + 1`` gives ``inf``."""
        if j == 0:
            return Fraction(0)
        if j == self.n_seas + 1:
            return math.inf
        return self.distinct[j - 1].value

    def gap(self, j: int) -> Fraction:
        """``s̄_{j+1} - s̄_j`` for ``0 <= j < n_seas``."""
        if not 0 <= j < self.n_seas:
            raise DomainError(f"gap index {j} out of range")
        return self.sbar(j + 1) - self.sbar(j)

    def period(self, j: int):
        """Exact ``pi/hbar_j = 2 (s̄_{j+1} - s̄_j)``, ``None`` for the top sea."""
        if j == self.n_seas:
            return None
        return 2 * self.gap(j)

    def hbar(self, j: int) -> float:
        """``hbar_j = pi/(2(s̄_{j+1} - s̄_j))``; zero for ``j = n_seas``."""
        per = self.period(j)
        return 0.0 if per is None else math.pi / float(per)

    def gap_set(self, j: int, limit=None) -> list:
        """Half-integers strictly between ``s̄_j`` and ``s̄_{j+1}``.

        The top set is infinite and is truncated at ``limit`` (inclusive).
        """
        lo = self.sbar(j)
        hi = self.sbar(j + 1)
        if hi == math.inf:
            if limit is None:
                raise DomainError("the top gap set is infinite, give a limit")
            hi = Fraction(limit) + Fraction(1, 2)
        out = []
        r = lo + Fraction(1, 2)
        while r < hi:
            out.append(r)
            r += Fraction(1, 2)
        return out

    def sea_of(self, r) -> int:
        """Index ``j`` with ``r`` in ``R_j`` (``r`` not in ``S``)."""
        r = Fraction(r)
        for j in range(self.n_seas + 1):
            if self.sbar(j) < r < self.sbar(j + 1):
                return j
        raise DomainError(f"{r} is a spin of the chain, not a gap value")

    @property
    def S0(self) -> Fraction:
        """Highest total spin ``L sum_s s rho_s``."""
        return sum((s.value * self.count(s) for s in self.distinct), Fraction(0))

    def to_json(self) -> str:
        return json.dumps({"motif": [str(s) for s in self.motif], "repeats": self.repeats})

    @classmethod
    def from_json(cls, text: str, cap: int = DEFAULT_CAP) -> "ChainSpec":
        try:
            doc = json.loads(text)
            motif, repeats = doc["motif"], doc["repeats"]
        except (ValueError, KeyError, TypeError) as exc:
            raise DomainError(f"malformed chain spec: {exc}") from exc
        if not isinstance(motif, list):
            raise DomainError("motif must be a list")
        return make_chain_spec(motif, repeats, cap=cap)


def make_chain_spec(motif, repeats: int, cap: int = DEFAULT_CAP) -> ChainSpec:
    """Validate and build a :class:`ChainSpec`."""
    return ChainSpec(tuple(motif), repeats, cap)


def _check_spin(spec: ChainSpec, s) -> Spin:
    s = Spin.parse(s)
    if s not in spec.distinct:
        raise DomainError(f"spin {s} is not present in the chain")
    return s


def monodromy_trace(aux_dim: int, site_dims, r_list) -> np.ndarray:
    """``tr_0 R_{0,1} R_{0,2} ... R_{0,n}`` as a dense matrix.

    ``r_list[k]`` acts on ``aux (x) site k`` with the auxiliary leg first.
    """
    n = len(site_dims)
    D = int(np.prod(site_dims)) if n else 1
    if n == 0:
        return np.array([[aux_dim]], dtype=complex)
    tensors = [r.reshape(aux_dim, d, aux_dim, d) for r, d in zip(r_list, site_dims)]
    out = np.zeros((D, D), dtype=complex)
    for a0 in range(aux_dim):
        # Y[a, i_1..i_n, col] holds the partial product applied to |a0> (x) |col>
        Y = np.zeros((aux_dim,) + tuple(site_dims) + (D,), dtype=complex)
        Y[a0] = np.eye(D, dtype=complex).reshape(tuple(site_dims) + (D,))
        for k in range(n - 1, -1, -1):
            Y = np.tensordot(tensors[k], Y, axes=([2, 3], [0, k + 1]))
            # result axes: a', i_k', then remaining Y axes with i_k removed
            Y = np.moveaxis(Y, 1, k + 1)
        out += Y[a0].reshape(D, D)
    return out


def transfer_matrix(spec: ChainSpec, s, u: complex) -> np.ndarray:
    """``t^(s)(u) = tr_0 R_{0,1}(u) ... R_{0,L}(u)`` with auxiliary spin ``s``."""
    s = _check_spin(spec, s)
    cache = {}
    r_list = []
    for site in spec.sites:
        if site not in cache:
            cache[site] = fused_R(s, site, u)
        r_list.append(cache[site])
    return monodromy_trace(s.dim, spec.dims, r_list)


def composite_transfer(spec: ChainSpec, u_list) -> np.ndarray:
    """``t^(s_1)(u_1) ... t^(s_L0)(u_L0)``; at zero it is the L0-step shift."""
    u_list = list(u_list)
    if len(u_list) != spec.L0:
        raise DomainError(f"expected {spec.L0} spectral parameters, got {len(u_list)}")
    out = np.eye(spec.hilbert_dim, dtype=complex)
    for s, u in zip(spec.motif, u_list):
        out = out @ transfer_matrix(spec, s, u)
    return out


def _richardson(f, h=DIFF_STEP):
    d1 = (f(h) - f(-h)) / (2 * h)
    d2 = (f(h / 2) - f(-h / 2)) / h
    return (4 * d2 - d1) / 3


def _log_derivative(t0: np.ndarray, dt: np.ndarray) -> np.ndarray:
    cond = np.linalg.cond(t0)
    if cond > 1e8:
        raise NumericError(f"transfer matrix at 0 is ill-conditioned (cond={cond:.3g})")
    return np.linalg.solve(t0, dt)


def _hermitian_part(H: np.ndarray, what: str, tol: float = 1e-8) -> np.ndarray:
    defect = np.max(np.abs(H - H.conj().T)) if H.size else 0.0
    if defect > tol:
        raise NumericError(f"{what} is not Hermitian (defect {defect:.3g})")
    return 0.5 * (H + H.conj().T)


def hamiltonian(spec: ChainSpec, s, return_defect: bool = False):
    """``H^(s) = i t^(s)(0)^{-1} d/du t^(s)(0)``, symmetrised.

    With ``return_defect`` also return the Hermiticity defect measured
    before symmetrisation.
    """
    s = _check_spin(spec, s)
    t0 = transfer_matrix(spec, s, 0.0)
    dt = _richardson(lambda h: transfer_matrix(spec, s, h))
    H = 1j * _log_derivative(t0, dt)
    defect = float(np.max(np.abs(H - H.conj().T)))
    H = _hermitian_part(H, f"H^({s})")
    return (H, defect) if return_defect else H


def theta_weights(spec: ChainSpec, alpha) -> dict:
    """``theta_s = sum_j delta(s, s_j) alpha_j``."""
    alpha = list(alpha)
    if len(alpha) != spec.L0:
        raise DomainError(f"expected {spec.L0} coefficients, got {len(alpha)}")
    theta = {s: 0.0 for s in spec.distinct}
    for s, a in zip(spec.motif, alpha):
        theta[s] += float(a)
    return theta


def general_hamiltonian(spec: ChainSpec, alpha, allow_nonpositive: bool = False,
                        return_gap: bool = False):
    """``H = i alpha . grad ln t(u)`` at ``u = 0``, returned as ``sum theta_s H^(s)``.

    Both constructions are computed and must agree within ``1e-7``.
    """
    theta = theta_weights(spec, alpha)
    if not allow_nonpositive and any(v <= 0 for v in theta.values()):
        raise DomainError(f"all theta_s must be positive, got {theta}")
    alpha = [float(a) for a in alpha]
    t0 = composite_transfer(spec, [0.0] * spec.L0)
    grad = np.zeros_like(t0)
    for j, a in enumerate(alpha):
        if a == 0:
            continue

        def shifted(h, j=j):
            u = [0.0] * spec.L0
            u[j] = h
            return composite_transfer(spec, u)

        grad += a * _richardson(shifted)
    H_grad = 1j * _log_derivative(t0, grad)
    H_sum = sum(theta[s] * hamiltonian(spec, s) for s in spec.distinct if theta[s] != 0)
    if isinstance(H_sum, int):
        H_sum = np.zeros_like(t0)
    gap = float(np.max(np.abs(H_grad - H_sum)))
    if gap > 1e-7:
        raise NumericError(f"gradient and sum constructions differ by {gap:.3g}")
    return (H_sum, gap) if return_gap else H_sum


def shift_operator(spec: ChainSpec) -> np.ndarray:
    """The L0-step shift, equal to the composite transfer matrix at zero."""
    return composite_transfer(spec, [0.0] * spec.L0)


def momentum_operator(spec: ChainSpec) -> np.ndarray:
    """``p`` with ``exp(-i L0 p) = S_L0`` and eigenvalues in ``[0, 2pi/L0)``."""
    S = shift_operator(spec)
    D = S.shape[0]
    defect = np.max(np.abs(S @ S.conj().T - np.eye(D)))
    if defect > 1e-10:
        raise NumericError(f"shift operator is not unitary (defect {defect:.3g})")
    T, Z = linalg.schur(S, output="complex")
    mu = np.diag(T)
    window = 2 * math.pi / spec.L0
    p = np.mod(-np.angle(mu) / spec.L0, window)
    p[np.isclose(p, window, atol=1e-12)] = 0.0
    return (Z * p) @ Z.conj().T


def total_generators(spec: ChainSpec) -> dict:
    """Total ``e3, e_plus, e_minus`` on the chain."""
    dims = spec.dims
    out = {}
    for name in ("e3", "e_plus", "e_minus"):
        acc = np.zeros((spec.hilbert_dim,) * 2, dtype=complex)
        for i, site in enumerate(spec.sites):
            left = int(np.prod(dims[:i])) if i else 1
            right = int(np.prod(dims[i + 1:])) if i + 1 < len(dims) else 1
            acc += np.kron(np.kron(np.eye(left), spin_rep(site)[name]), np.eye(right))
        out[name] = acc
    return out


@dataclass(frozen=True)
class SpectrumResult:
    eigenvalues: tuple
    dimension: int


def diagonalize(op: np.ndarray, cap: int = DEFAULT_CAP, hermitian=None) -> SpectrumResult:
    """Full dense spectrum; Hermitian input gives real ascending eigenvalues."""
    op = np.asarray(op)
    if op.ndim != 2 or op.shape[0] != op.shape[1]:
        raise DomainError("operator must be square")
    if op.shape[0] > cap:
        raise DomainError(f"dimension {op.shape[0]} exceeds cap {cap}")
    if hermitian is None:
        hermitian = bool(np.allclose(op, op.conj().T, atol=1e-12))
    if hermitian:
        ev = np.linalg.eigvalsh(op)
        return SpectrumResult(tuple(float(x) for x in ev), op.shape[0])
    ev = np.linalg.eigvals(op)
    ev = sorted(ev, key=lambda z: (round(z.real, 10), round(z.imag, 10)))
    return SpectrumResult(tuple(complex(x) for x in ev), op.shape[0])
