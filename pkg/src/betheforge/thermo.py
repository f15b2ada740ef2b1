"""Thermodynamic limit: vacuum densities, energies and excited-state corrections.

Fourier convention: ``fhat(p) = (1/2pi) int exp(i p lam) f(lam) dlam`` and
``f(lam) = int exp(-i p lam) fhat(p) dp``. Under it a convolution
``int f(x) g(y - x) dx`` becomes ``2 pi fhat ghat``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import integrate
from scipy.sparse.linalg import LinearOperator, gmres
from scipy.signal import fftconvolve
from scipy.special import digamma

from .chain import ChainSpec
from .errors import DomainError, NumericError
from .repkit import Spin
from .special_functions import KernelParams, gamma_fn, gamma_hat, kappa_hat
from .strings import pair_kernel, site_kernel

DEFAULT_WINDOW = 24.0
DEFAULT_N = 4096


@dataclass
class DensityGrid:
    """Densities ``sigma_s`` sampled on a uniform grid."""

    lambda_min: float
    lambda_max: float
    N: int
    values: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.N < 2 or self.N & (self.N - 1):
            raise DomainError(f"N must be a power of two, got {self.N}")
        if not self.lambda_max > self.lambda_min:
            raise DomainError("empty window")

    @property
    def step(self) -> float:
        return (self.lambda_max - self.lambda_min) / self.N

    @property
    def lam(self) -> np.ndarray:
        return self.lambda_min + self.step * np.arange(self.N)

    @classmethod
    def symmetric(cls, half_width: float = DEFAULT_WINDOW, N: int = DEFAULT_N) -> "DensityGrid":
        return cls(-half_width, half_width, N)


def vacuum_density(spec: ChainSpec, s, lam):
    """``sigma_s(lam) = rho_s/(2 cosh(pi lam))``."""
    rho = float(spec.rho(s))
    x = np.pi * np.abs(np.asarray(lam, dtype=float))
    return rho * np.exp(-x) / (1.0 + np.exp(-2.0 * x))


def _vacuum_rhs_hat(spec: ChainSpec, q):
    """Right sides and kernel matrix of the vacuum equations in transform space."""
    seas = spec.distinct
    n = len(seas)
    A = np.zeros((q.size, n, n))
    b = np.zeros((q.size, n))
    for i, s in enumerate(seas):
        for k, r in enumerate(seas):
            A[:, i, k] = (i == k) + pair_kernel(r.value, s.value).transform(q)
            b[:, i] += float(spec.rho(r)) * site_kernel(r.doubled, s.value).transform(q)
    return A, b / (2 * np.pi)


def vacuum_density_hat(spec: ChainSpec, q) -> np.ndarray:
    """Transforms ``sigma_hat_s(q)`` solved pointwise; shape ``(len(q), n_seas)``."""
    q = np.atleast_1d(np.asarray(q, dtype=float))
    A, b = _vacuum_rhs_hat(spec, q)
    return np.linalg.solve(A, b[..., None])[..., 0]


def solve_vacuum_integral(spec: ChainSpec, grid: DensityGrid | None = None,
                          method: str = "transform") -> DensityGrid:
    """Solve the linear integral equations for the vacuum densities.

    ``method="transform"`` divides in Fourier space and returns to the grid
    by a discrete inverse transform. ``method="nystrom"`` discretises the
    convolutions directly with the trapezoid rule and solves by GMRES.
    """
    if grid is None:
        grid = DensityGrid.symmetric()
    lam = grid.lam
    if method == "transform":
        h = grid.step
        q = 2 * np.pi * np.fft.fftfreq(grid.N, d=h)
        sig_hat = vacuum_density_hat(spec, q)
        dq = 2 * np.pi / (grid.N * h)
        # sum_j sig_hat(q_j) exp(-i q_j lam_k) dq with lam_k = lam_min + k h
        shifted = sig_hat * np.exp(-1j * q * grid.lambda_min)[:, None]
        vals = np.fft.fft(shifted, axis=0).real * dq
        out = {s: vals[:, i] for i, s in enumerate(spec.distinct)}
    elif method == "nystrom":
        out = _solve_nystrom(spec, grid)
    else:
        raise DomainError(f"unknown method {method!r}")
    edge = max(max(abs(v[0]), abs(v[-1])) for v in out.values())
    if edge > 1e-10:
        raise NumericError(f"density does not decay inside the window (edge value {edge:.3g})")
    return DensityGrid(grid.lambda_min, grid.lambda_max, grid.N, out)


def _solve_nystrom(spec: ChainSpec, grid: DensityGrid) -> dict:
    lam = grid.lam
    h = grid.step
    n = spec.n_seas
    N = grid.N
    offsets = h * np.arange(-(N - 1), N)
    kern = {}
    for i, s in enumerate(spec.distinct):
        for k, r in enumerate(spec.distinct):
            kern[i, k] = pair_kernel(r.value, s.value).derivative(offsets) * h
    rhs = np.zeros(n * N)
    for i, s in enumerate(spec.distinct):
        acc = np.zeros(N)
        for r in spec.distinct:
            acc += float(spec.rho(r)) * site_kernel(r.doubled, s.value).derivative(lam)
        rhs[i * N:(i + 1) * N] = acc / (2 * np.pi)

    def matvec(x):
        x = np.asarray(x).reshape(n, N)
        y = x.copy()
        for i in range(n):
            for k in range(n):
                y[i] += fftconvolve(x[k], kern[i, k], mode="valid")[:N] / (2 * np.pi)
        return y.ravel()

    op = LinearOperator((n * N, n * N), matvec=matvec, dtype=float)
    sol, info = gmres(op, rhs, rtol=1e-13, atol=0.0, restart=60, maxiter=400)
    if info != 0:
        raise NumericError(f"GMRES failed with code {info}")
    sol = sol.reshape(n, N)
    return {s: sol[i] for i, s in enumerate(spec.distinct)}


def vacuum_energy(spec: ChainSpec, s) -> dict:
    """Vacuum energy per site of ``H^(s)``: digamma closed form and Plancherel integral."""
    s = Spin.parse(s)
    if s not in spec.distinct:
        raise DomainError(f"spin {s} is not present in the chain")
    sv = float(s)
    closed = 0.0
    for sp in spec.distinct:
        spv = float(sp)
        closed -= float(spec.rho(sp)) * (digamma((spv + sv + 1) / 2)
                                         - digamma((abs(spv - sv) + 1) / 2))
    numeric = 0.0
    for sp in spec.distinct:
        ker = site_kernel(s.doubled, sp.value)

        def f(q, ker=ker):
            return ker.transform(q) * np.exp(-q / 2) / (2 * np.pi * (1 + np.exp(-q)))

        val, _ = integrate.quad(f, 0, np.inf, epsabs=1e-14, epsrel=1e-13, limit=200)
        numeric -= 2 * np.pi * float(spec.rho(sp)) * 2 * val
    return {"closed_form": float(closed), "numeric": float(numeric)}


def vacuum_momentum(spec: ChainSpec, L: int | None = None) -> dict:
    """Vacuum momentum ``pi L sum_s s rho_s`` reduced into ``[0, 2pi/L0)``.

    ``coefficient`` is ``sum_s s rho_s``, the momentum per site in units of
    ``pi``; ``value`` is the reduced momentum for length ``L``.
    """
    coef = sum((s.value * spec.rho(s) for s in spec.distinct), Fraction(0))
    L = spec.L if L is None else L
    if L % spec.L0:
        raise DomainError(f"L={L} is not a multiple of L0={spec.L0}")
    units = (coef * L) % Fraction(2, spec.L0)
    return {"coefficient": coef, "in_pi_units": units, "value": math.pi * float(units)}


# ----------------------------------------------------------------- excitations


@dataclass(frozen=True)
class ExcitationContext:
    """Holes per sea and centres of new strings.

    Parameters
    ----------
    holes : dict
        ``j -> rapidities`` for seas ``j = 1..n_seas``; each count even.
    new_strings : dict
        ``r -> centres`` for half-integers ``r`` not in ``S``.
    """

    holes: dict
    new_strings: dict = field(default_factory=dict)

    def D(self, j: int) -> int:
        return len(self.holes.get(j, ()))

    def nu(self, r) -> int:
        return len(self.new_strings.get(Fraction(r), ()))


def make_context(spec: ChainSpec, holes=None, new_strings=None) -> ExcitationContext:
    """Validate and normalise an :class:`ExcitationContext`."""
    holes = {int(j): tuple(float(x) for x in v) for j, v in (holes or {}).items()}
    strs = {Fraction(r): tuple(float(x) for x in v) for r, v in (new_strings or {}).items()}
    for j, v in holes.items():
        if not 1 <= j <= spec.n_seas:
            raise DomainError(f"sea index {j} out of range 1..{spec.n_seas}")
        if len(v) % 2:
            raise DomainError(f"sea {j} has an odd number of holes ({len(v)})")
    for r in strs:
        if (2 * r).denominator != 1 or r <= 0:
            raise DomainError(f"{r} is not a positive half-integer")
        if any(r == s.value for s in spec.distinct):
            raise DomainError(f"{r} is a spin of the chain; new strings need r not in S")
    strs = {r: v for r, v in strs.items() if v}
    ctx = ExcitationContext(holes, strs)
    mu = removed_strings(spec, ctx)
    for j, m in mu.items():
        if m.denominator != 1 or m < 0:
            raise DomainError(f"configuration gives non-integer or negative mu_{j} = {m}")
    for r, A in unused_numbers(spec, ctx).items():
        if A < 0:
            raise DomainError(f"infeasible configuration: A_{r} = {A} < 0")
    return ctx


def removed_strings(spec: ChainSpec, ctx: ExcitationContext) -> dict:
    """``mu_j`` from ``D_s = 4 sum_s' min(s,s') mu_s' - 4 sum_r min(s,r) nu_r``."""
    return removed_strings_counts(spec, {j: ctx.D(j) for j in range(1, spec.n_seas + 1)},
                                  {r: len(c) for r, c in ctx.new_strings.items()})


def removed_strings_counts(spec: ChainSpec, D: dict, nu: dict) -> dict:
    """Same as :func:`removed_strings` from hole counts ``D`` and string counts ``nu``."""
    seas = spec.distinct
    M = [[4 * min(a.value, b.value) for b in seas] for a in seas]
    rhs = []
    for j, s in enumerate(seas, start=1):
        rhs.append(D.get(j, 0) + 4 * sum(min(s.value, Fraction(r)) * n for r, n in nu.items()))
    return {j + 1: x for j, x in enumerate(_solve_fraction(M, rhs))}


def _solve_fraction(A, b):
    n = len(A)
    M = [[Fraction(x) for x in row] + [Fraction(y)] for row, y in zip(A, b)]
    for c in range(n):
        piv = next(r for r in range(c, n) if M[r][c] != 0)
        M[c], M[piv] = M[piv], M[c]
        for r in range(n):
            if r != c and M[r][c] != 0:
                f = M[r][c] / M[c][c]
                M[r] = [x - f * y for x, y in zip(M[r], M[c])]
    return [M[i][n] / M[i][i] for i in range(n)]


def unused_numbers(spec: ChainSpec, ctx: ExcitationContext, extra: int = 2) -> dict:
    """``A_r = P_r - nu_r`` for gap values ``r`` up to past the largest new string."""
    mu = removed_strings(spec, ctx)
    top = max([s.value for s in spec.distinct] + list(ctx.new_strings)) + Fraction(extra, 2)
    out = {}
    r = Fraction(1, 2)
    while r <= top:
        if all(r != s.value for s in spec.distinct):
            A = 4 * sum(min(r, s.value) * mu[j] for j, s in enumerate(spec.distinct, start=1))
            A -= 4 * sum(min(r, m) * len(c) for m, c in ctx.new_strings.items())
            out[r] = A
        r += Fraction(1, 2)
    return out


def kernel_params(spec: ChainSpec, j: int, r) -> KernelParams:
    """``(hbar_j, r)`` with exact regime data."""
    return KernelParams.with_period(spec.period(j), r)


def kappa_values(p: KernelParams, x, step: float = 0.005, p_max: float = 80.0) -> np.ndarray:
    """``kappa(x) = int exp(-i p x) kappa_hat(p) dp`` by the trapezoid rule in ``p``.

    ``kappa_hat`` is analytic in a strip, so the rule converges
    geometrically; ``step`` controls aliasing at period ``2 pi/step``.
    At ``hbar = 0`` the transform has a kink at ``p = 0``, which is
    removed by the Euler-Maclaurin endpoint terms.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if p.is_top:
        return np.zeros_like(x)
    q = step * np.arange(1, int(p_max / step) + 1)
    w = kappa_hat(p, q)
    keep = w > 1e-18 * w[0] if w.size else w
    q, w = q[keep], w[keep]
    k0 = float(kappa_hat(p, np.array([0.0]))[0])
    out = np.empty_like(x)
    for start in range(0, x.size, 512):
        chunk = x[start:start + 512]
        out[start:start + 512] = step * (k0 + 2 * np.cos(np.outer(chunk, q)) @ w)
    if p.hbar == 0:
        # kappa_hat = exp(-a p)/(2 cosh(p/2)) on p > 0 with a = r/2
        a = p.r / 2
        f1 = -a / 2
        f3 = -a ** 3 / 2 + 3 * a / 8
        out += 2 * (step ** 2 / 12 * f1 - step ** 4 / 720 * (f3 - 3 * x * x * f1))
    return out


def _corr_terms(spec: ChainSpec, ctx: ExcitationContext, j: int):
    """Terms of ``r_j`` and ``c_j``.

    Returns ``(kappa_terms, gamma_terms, point_masses)`` where the first
    two are lists of ``(KernelParams, centre, weight)``.
    """
    L = spec.n_seas
    if not 1 <= j <= L:
        raise DomainError(f"sea index {j} out of range")
    sb = spec.sbar
    kap, gam = [], []
    if j >= 2:
        for x in ctx.holes.get(j - 1, ()):
            kap.append((kernel_params(spec, j - 1, 2 * (sb(j) - sb(j - 1)) - 1), x, 1.0))
    if j < L:
        for x in ctx.holes.get(j + 1, ()):
            kap.append((kernel_params(spec, j, 2 * (sb(j + 1) - sb(j)) - 1), x, 1.0))
    for x in ctx.holes.get(j, ()):
        kap.append((kernel_params(spec, j, 1), x, 1.0))
        kap.append((kernel_params(spec, j - 1, 1), x, 1.0))
    for m, centres in ctx.new_strings.items():
        k = spec.sea_of(m)
        if k == j - 1:
            for x in centres:
                gam.append((kernel_params(spec, j - 1, 2 * (sb(j) - m)), x, 1.0))
        elif k == j:
            for x in centres:
                gam.append((kernel_params(spec, j, 2 * (m - sb(j))), x, 1.0))
    points = [(x, -1.0) for x in ctx.holes.get(j, ())]
    return kap, gam, points


def excited_corrections(spec: ChainSpec, ctx: ExcitationContext, lam, j: int) -> dict:
    """Hole correction ``r_j`` and string polarisation ``c_j`` at ``lam``.

    The Dirac part of ``r_j`` is not sampled; it is returned in
    ``point_masses`` as ``(position, weight)`` pairs of the distribution
    ``weight * delta(lam - position)``.
    """
    lam_arr = np.atleast_1d(np.asarray(lam, dtype=float))
    kap, gam, points = _corr_terms(spec, ctx, j)
    r = np.zeros_like(lam_arr)
    for p, x, w in kap:
        r += w * kappa_values(p, lam_arr - x)
    r /= 2 * np.pi
    c = np.zeros_like(lam_arr)
    for p, x, w in gam:
        if p.is_zero_r:
            raise DomainError("gamma_0 is a Dirac mass and cannot enter a string correction")
        c -= w * gamma_fn(p, lam_arr - x)
    c /= 2 * np.pi
    scalar = np.ndim(lam) == 0
    return {"r": float(r[0]) if scalar else r, "c": float(c[0]) if scalar else c,
            "point_masses": points}


def correction_integral(spec: ChainSpec, ctx: ExcitationContext, j: int) -> dict:
    """Exact integrals of ``r_j`` (with point masses) and ``c_j`` over the line.

    Uses ``int kappa = 2 pi kappa_hat(0)`` and ``int gamma = 2 pi gamma_hat(0)``.
    """
    kap, gam, points = _corr_terms(spec, ctx, j)
    ir = sum(w * 2 * np.pi * float(kappa_hat(p, np.array([0.0]))[0]) for p, _, w in kap) / (2 * np.pi)
    ir += sum(w for _, w in points)
    ic = -sum(w * 2 * np.pi * float(gamma_hat(p, np.array([0.0]))[0]) for p, _, w in gam) / (2 * np.pi)
    return {"r": ir, "c": ic}


def correction_hat(spec: ChainSpec, ctx: ExcitationContext, j: int, q) -> np.ndarray:
    """Fourier transform of ``r_j + c_j`` including the point masses."""
    q = np.asarray(q, dtype=float)
    kap, gam, points = _corr_terms(spec, ctx, j)
    out = np.zeros(q.shape, dtype=complex)
    for p, x, w in kap:
        out += w * kappa_hat(p, q) * np.exp(1j * q * x)
    for x, w in points:
        out += w * np.exp(1j * q * x)
    for p, x, w in gam:
        out -= w * gamma_hat(p, q) * np.exp(1j * q * x)
    return out / (2 * np.pi)


def delta_energy_numeric(spec: ChainSpec, ctx: ExcitationContext, s) -> float:
    """Order ``1/L`` energy of ``H^(s)`` from the corrected densities.

    ``-2pi sum_s' int (r_hat + c_hat) Psi_hat_{2s}^(s') dp
    - sum_r sum_k Psi_{2s}^(r)(lam_{r,k})``.
    """
    s = Spin.parse(s)
    total = 0.0
    for j, sp in enumerate(spec.distinct, start=1):
        ker = site_kernel(s.doubled, sp.value)

        def f(q, j=j, ker=ker):
            return (correction_hat(spec, ctx, j, q) * ker.transform(q)).real

        val, _ = integrate.quad(f, -np.inf, np.inf, epsabs=1e-13, epsrel=1e-12, limit=400)
        total -= 2 * np.pi * val
    for r, centres in ctx.new_strings.items():
        ker = site_kernel(s.doubled, r)
        total -= sum(float(ker.derivative(x)) for x in centres)
    return total


def hole_momentum(rho: float, lam):
    """``p(lam) = rho arctan(sinh(pi lam)) + rho pi/2``, in ``(0, rho pi)``."""
    return rho * np.arctan(np.sinh(np.pi * np.asarray(lam, dtype=float))) + rho * np.pi / 2


def hole_energy(lam):
    """``pi/cosh(pi lam)``."""
    x = np.pi * np.abs(np.asarray(lam, dtype=float))
    return 2 * np.pi * np.exp(-x) / (1.0 + np.exp(-2.0 * x))


def delta_energy_dispersion(spec: ChainSpec, ctx: ExcitationContext, s) -> dict:
    """Hole energy of ``H^(s)``, hole momenta and the dispersion-law residual."""
    s = Spin.parse(s)
    if s not in spec.distinct:
        raise DomainError(f"spin {s} is not present in the chain")
    j = spec.distinct.index(s) + 1
    rho = float(spec.rho(s))
    lam = np.array(ctx.holes.get(j, ()), dtype=float)
    dE = float(np.sum(hole_energy(lam)))
    momenta = hole_momentum(rho, lam)
    disp = float(np.pi * np.sum(np.sin(momenta / rho)))
    return {"dE": dE, "momenta": [float(p) for p in momenta],
            "dispersion_residual": abs(dE - disp)}


def speed_of_sound(spec: ChainSpec, s, h: float = 1e-4) -> float:
    """``dE/dp`` of a single hole at the Fermi edge ``p -> 0`` by finite differences.

    The rapidity is recovered from the momentum as
    ``lam = -arcsinh(cot(p/rho))/pi`` and the energy from ``pi/cosh(pi lam)``.
    """
    rho = float(spec.rho(s))

    def energy_at(p):
        if p == 0:
            return 0.0
        lam = -np.arcsinh(1.0 / np.tan(p / rho)) / np.pi
        return float(hole_energy(lam))

    return (-3 * energy_at(0.0) + 4 * energy_at(h) - energy_at(2 * h)) / (2 * h)
