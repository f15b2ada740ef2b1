"""Elementary rapidity functions and the kernel K.

Two families appear everywhere. The rational family is built on
``e_r(lam) = (lam + ir/2)/(lam - ir/2)``. The hyperbolic family depends on a
deformation parameter ``hbar`` and reduces to the rational one as
``hbar -> 0``.

Fourier convention: ``fhat(p) = (1/2pi) int exp(i p lam) f(lam) dlam``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.integrate import IntegrationWarning
from scipy.special import loggamma

from .errors import DomainError, NumericError

# Envelope target for truncating the K integrand.
_ENVELOPE_LOG = 37.0


@dataclass(frozen=True)
class KernelParams:
    """Parameters ``(hbar, r)`` of the hyperbolic family.

    Parameters
    ----------
    hbar : float
        Deformation, ``hbar >= 0``. Zero selects the rational limit family.
    r : float
        Shift, ``0 <= r <= pi/hbar``. With ``hbar = 0`` any ``r >= 0`` is
        allowed, including ``inf``.
    period : Fraction, optional
        Exact value of ``pi/hbar`` when it is rational (it is an integer for
        every hbar built from spins). When given together with an exact
        ``r_exact``, regime selection uses exact comparisons.
    r_exact : Fraction, optional
        Exact value of ``r``.
    """

    hbar: float
    r: float
    period: Fraction | None = None
    r_exact: Fraction | None = None

    def __post_init__(self):
        if not (math.isfinite(self.hbar) and self.hbar >= 0):
            raise DomainError(f"hbar must be finite and >= 0, got {self.hbar}")
        if math.isnan(self.r) or self.r < 0:
            raise DomainError(f"r must be >= 0, got {self.r}")
        if self.hbar > 0:
            if not math.isfinite(self.r):
                raise DomainError("r must be finite when hbar > 0")
            if self.period is not None and self.r_exact is not None:
                if self.r_exact > self.period:
                    raise DomainError(f"r={self.r_exact} exceeds pi/hbar={self.period}")
            elif self.r * self.hbar > math.pi * (1 + 1e-15):
                raise DomainError(f"r={self.r} exceeds pi/hbar={math.pi / self.hbar}")

    @classmethod
    def with_period(cls, period, r) -> "KernelParams":
        """Build from exact ``pi/hbar`` and ``r``.

        ``period=None`` means ``hbar = 0``.
        """
        r_exact = Fraction(r)
        if period is None:
            return cls(0.0, float(r_exact), None, r_exact)
        period = Fraction(period)
        if period <= 0:
            raise DomainError("period must be positive")
        return cls(math.pi / float(period), float(r_exact), period, r_exact)

    @property
    def is_zero_r(self) -> bool:
        if self.r_exact is not None:
            return self.r_exact == 0
        return self.r == 0.0

    @property
    def is_top(self) -> bool:
        """True when ``r = pi/hbar`` (the trivial regime)."""
        if self.hbar == 0:
            return math.isinf(self.r)
        if self.period is not None and self.r_exact is not None:
            return self.r_exact == self.period
        return abs(self.r * self.hbar - math.pi) <= 1e-15 * math.pi

    @property
    def half_period(self) -> float:
        return math.pi / (2 * self.hbar)


@dataclass(frozen=True)
class EvaluatedFunction:
    """A complex value and the method used to obtain it."""

    value: complex
    method: str  # "closed_form", "quadrature" or "series"

    def __post_init__(self):
        if not np.isfinite(self.value):
            raise NumericError(f"non-finite value {self.value}")


def eval_e_phi(r: float, lam: float) -> dict:
    """Rational family at shift ``r``.

    Returns
    -------
    dict
        ``e_r``, ``phi_r = 2 arctan(2 lam/r)`` and its derivative
        ``phi_prime_r = 4r/(4 lam^2 + r^2)``.
    """
    if not r > 0:
        raise DomainError(f"r must be positive, got {r}")
    return {
        "e_r": (lam + 0.5j * r) / (lam - 0.5j * r),
        "phi_r": 2.0 * math.atan(2.0 * lam / r),
        "phi_prime_r": 4.0 * r / (4.0 * lam * lam + r * r),
    }


def phi(r, lam):
    """``phi_r(lam)`` vectorised, with ``phi_0 = 0`` and ``phi_{-r} = -phi_r``."""
    lam = np.asarray(lam, dtype=float)
    if r == 0:
        return np.zeros_like(lam)
    return 2.0 * np.arctan(2.0 * lam / r)


def phi_prime(r, lam):
    """Derivative of :func:`phi` in ``lam``."""
    lam = np.asarray(lam, dtype=float)
    if r == 0:
        return np.zeros_like(lam)
    return 4.0 * r / (4.0 * lam * lam + r * r)


def eval_trig_family(p: KernelParams, lam: float) -> dict:
    """Hyperbolic family ``G``, ``Gamma = i ln G`` and ``gamma = Gamma'``.

    For ``r = 0`` the derivative is a Dirac mass; ``is_dirac`` is set and
    ``gamma`` is returned as ``nan`` so it can never be sampled by accident.
    """
    if p.hbar == 0:
        raise DomainError("hbar = 0 is the rational family, use eval_e_phi")
    if p.is_zero_r:
        return {"G": -1.0 + 0j, "Gamma": 0.0, "gamma": math.nan, "is_dirac": True}
    if p.is_top:
        return {"G": 1.0 + 0j, "Gamma": 0.0, "gamma": 0.0, "is_dirac": False}
    h, r = p.hbar, p.r
    Gam = 2.0 * math.atan(math.tanh(h * lam) / math.tan(h * r / 2))
    # cosh(2hx) - cos(hr), divided by sin(hr/2) so tiny r cannot underflow
    sr = math.sin(h * r / 2)
    with np.errstate(over="ignore"):
        den = 2.0 * float(np.sinh(h * lam)) ** 2 / sr + 2.0 * sr
    gam = 4.0 * h * math.cos(h * r / 2) / den
    return {"G": complex(math.cos(Gam), -math.sin(Gam)), "Gamma": Gam, "gamma": gam,
            "is_dirac": False}


def Gamma_fn(p: KernelParams, lam):
    """Vectorised ``Gamma_r^(hbar)(lam)``; zero in both degenerate regimes."""
    lam = np.asarray(lam, dtype=float)
    if p.hbar == 0:
        return phi(p.r, lam) if math.isfinite(p.r) else np.zeros_like(lam)
    if p.is_zero_r or p.is_top:
        return np.zeros_like(lam)
    return 2.0 * np.arctan(np.tanh(p.hbar * lam) / math.tan(p.hbar * p.r / 2))


def gamma_fn(p: KernelParams, lam):
    """Vectorised ``gamma_r^(hbar)(lam)``; refuses the Dirac regime."""
    lam = np.asarray(lam, dtype=float)
    if p.is_zero_r:
        raise DomainError("gamma_0 is a Dirac distribution and cannot be sampled")
    if p.hbar == 0:
        return phi_prime(p.r, lam) if math.isfinite(p.r) else np.zeros_like(lam)
    if p.is_top:
        return np.zeros_like(lam)
    h, r = p.hbar, p.r
    sr = math.sin(h * r / 2)
    with np.errstate(over="ignore"):
        den = 2.0 * np.sinh(h * lam) ** 2 / sr + 2.0 * sr
    return 4.0 * h * math.cos(h * r / 2) / den


def _sinh_ratio(x, y):
    """``sinh(x)/sinh(y)`` for ``0 < x <= y`` without overflow."""
    return np.exp(x - y) * np.expm1(-2.0 * x) / np.expm1(-2.0 * y)


def gamma_hat(p: KernelParams, momentum):
    """Vectorised Fourier transform of ``gamma_r^(hbar)``."""
    q = np.abs(np.asarray(momentum, dtype=float))
    if p.is_zero_r:
        return np.ones_like(q)
    if p.is_top:
        return np.zeros_like(q)
    if p.hbar == 0:
        return np.exp(-p.r * q / 2)
    a = 0.5 * (math.pi / p.hbar - p.r)
    b = p.half_period
    out = np.empty_like(q)
    small = q * b < 1e-8
    out[small] = a / b
    qs = q[~small]
    out[~small] = _sinh_ratio(a * qs, b * qs)
    return out


def eval_gamma_hat(p: KernelParams, momentum: float) -> float:
    """``gamma_hat_r^(hbar)(p) = sinh(p/2 (pi/hbar - r))/sinh(p pi/(2 hbar))``.

    The removable point ``p = 0`` gives ``1 - r hbar/pi``.
    """
    return float(gamma_hat(p, np.array([momentum]))[0])


def kappa_hat(p: KernelParams, momentum):
    """Vectorised ``kappa_hat = gamma_hat/(2 cosh(p/2))``."""
    q = np.abs(np.asarray(momentum, dtype=float))
    return gamma_hat(p, q) * np.exp(-q / 2) / (1.0 + np.exp(-q))


def eval_kappa_hat(p: KernelParams, momentum: float) -> float:
    """Scalar :func:`kappa_hat`."""
    return float(kappa_hat(p, np.array([momentum]))[0])


def _quad_checked(func, a, b, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("error", IntegrationWarning)
        try:
            val, err = integrate.quad(func, a, b, limit=400, epsabs=1e-13, epsrel=1e-12, **kw)
        except IntegrationWarning as exc:
            raise NumericError(f"quadrature on [{a}, {b}] failed: {exc}") from exc
    if not math.isfinite(val):
        raise NumericError(f"quadrature on [{a}, {b}] returned {val}")
    return val, err


def _K_phase_quadrature(p: KernelParams, lam: float) -> float:
    """``int_0^inf sin(p lam)/p * gamma_hat/cosh(p/2) dp`` by split quadrature.

    The ``1/p`` singularity is removed by subtracting ``f0 exp(-p)/p`` whose
    sine transform is ``f0 arctan(lam)``.
    """
    if lam == 0:
        return 0.0
    if p.hbar == 0:
        a_coef, b_coef = None, None
        f0 = 1.0
    else:
        a_coef = 0.5 * (math.pi / p.hbar - p.r)
        b_coef = p.half_period
        f0 = a_coef / b_coef
    f2 = 0.0 if b_coef is None else f0 * ((a_coef ** 2 - b_coef ** 2) / 6 - 0.125)
    scale = 1.0 if b_coef is None else min(1.0, 1.0 / b_coef)
    p_series = 1e-3 * scale

    def h2(q):
        if q < p_series:
            return f0 + (f2 - f0 / 2) * q + (f0 / 6) * q * q
        f = float(gamma_hat(p, np.array([q]))[0]) / math.cosh(q / 2)
        return (f - f0 * math.exp(-q)) / q

    decay = min((p.r + 1) / 2, 1.0)
    p_max = _ENVELOPE_LOG / decay
    cut = 1.0 if b_coef is None else min(1.0, 20.0 / b_coef)
    total = f0 * math.atan(lam)
    for lo, hi in ((0.0, cut), (cut, p_max)):
        val, _ = _quad_checked(h2, lo, hi, weight="sin", wvar=lam)
        total += val
    return total


def _K_gamma_ratio(r: float, lam: float) -> complex:
    z1 = loggamma(complex((r + 3) / 4, -lam / 2))
    z2 = loggamma(complex((r + 1) / 4, lam / 2))
    z3 = loggamma(complex((r + 3) / 4, lam / 2))
    z4 = loggamma(complex((r + 1) / 4, -lam / 2))
    # the ratio is unimodular for real lam, so only the phase matters
    return complex(np.exp(1j * (z1 + z2 - z3 - z4).imag))


def eval_K_detailed(p: KernelParams, lam: float) -> EvaluatedFunction:
    """:func:`eval_K` together with the evaluation method."""
    if p.is_top:
        return EvaluatedFunction(1.0 + 0j, "closed_form")
    if p.hbar == 0:
        return EvaluatedFunction(_K_gamma_ratio(p.r, lam), "closed_form")
    if p.is_zero_r:
        x = 0.5 * math.pi * complex(lam, -0.5)
        return EvaluatedFunction(-1j / complex(np.tanh(x)), "closed_form")
    ph = _K_phase_quadrature(p, lam)
    return EvaluatedFunction(complex(math.cos(ph), -math.sin(ph)), "quadrature")


def eval_K(p: KernelParams, lam: float) -> complex:
    """The kernel ``K_r^(hbar)(lam) = exp int dp exp(-i p lam)/p kappa_hat(p)``.

    Closed forms are used for ``r = 0``, ``r = pi/hbar`` and ``hbar = 0``;
    the generic regime uses oscillatory quadrature.
    """
    return eval_K_detailed(p, lam).value


@lru_cache(maxsize=65536)
def _K_cached(hbar, r, period, r_exact, lam):
    return eval_K(KernelParams(hbar, r, period, r_exact), lam)


def K_cached(p: KernelParams, lam: float) -> complex:
    """Memoised :func:`eval_K`; ``K`` is expensive in the generic regime."""
    return _K_cached(p.hbar, p.r, p.period, p.r_exact, float(lam))


def K_phase(p: KernelParams, lam: float) -> float:
    """Real phase ``theta`` with ``K = exp(-i theta)``, continuous in ``lam``.

    ``theta`` is odd and tends to ``(pi - hbar r)/2`` at ``+inf``.
    """
    if p.is_top:
        return 0.0
    if p.hbar == 0:
        return _K_phase_rational(p.r, lam)
    if p.is_zero_r:
        return 2.0 * math.atan(math.tanh(math.pi * lam / 2))
    return _K_phase_quadrature(p, lam)


def _K_phase_rational(r: float, lam: float) -> float:
    # the loggamma imaginary parts are continuous in lam, unlike the principal angle
    z1 = loggamma(complex((r + 3) / 4, -lam / 2))
    z2 = loggamma(complex((r + 1) / 4, lam / 2))
    z3 = loggamma(complex((r + 3) / 4, lam / 2))
    z4 = loggamma(complex((r + 1) / 4, -lam / 2))
    return -float((z1 + z2 - z3 - z4).imag)


def eval_kappa(p: KernelParams, lam: float) -> float:
    """``kappa(lam) = int exp(-i p lam) kappa_hat(p) dp`` by cosine quadrature."""
    if p.is_top:
        return 0.0

    def f(q):
        return float(kappa_hat(p, np.array([q]))[0])

    if lam == 0:
        val, _ = _quad_checked(f, 0.0, np.inf)
    else:
        val, _ = _quad_checked(f, 0.0, np.inf, weight="cos", wvar=abs(lam))
    return 2.0 * val
