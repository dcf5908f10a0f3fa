"""Special functions behind the Wishart walk bounds.

Everything that can overflow is kept in log space: the multivariate gamma,
the Selberg integral, the exponential-moment integral, and the normalizing
constant of the Wishart eigenvalue density.  The extreme-eigenvalue table
(incomplete-gamma integrals and Pfaffians, after Krishnaiah and Chang)
gives the joint band probability of the smallest and largest eigenvalues.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import gammainc, gammaincc, gammaln

from .sampling import WishartParams

QUAD_ABS_TOL = 1e-12
QUAD_REL_TOL = 1e-10
QUAD_LIMIT = 10_000


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach the requested tolerance."""


class DomainError(ValueError):
    """Arguments outside the domain where the integral converges."""


def multivariate_gamma_ln(m: int, a: float) -> float:
    """log of the multivariate gamma, ``log Gamma_m(a)``.

    ``Gamma_m(a) = pi^{m(m-1)/4} prod_{j=1}^m Gamma(a - (j-1)/2)``,
    defined for ``a > (m-1)/2``.
    """
    if m < 1:
        raise DomainError(f"dimension must be >= 1, got {m}")
    if not a > 0.5 * (m - 1):
        raise DomainError(f"need a > (m-1)/2 = {0.5 * (m - 1)}, got a = {a}")
    j = np.arange(1, m + 1)
    return float(0.25 * m * (m - 1) * math.log(math.pi) + gammaln(a - 0.5 * (j - 1)).sum())


def reg_gamma_lower(s: float, x: float) -> float:
    """Regularized lower incomplete gamma ``P(s, x) = gamma(s, x)/Gamma(s)``."""
    if not s > 0:
        raise DomainError(f"shape must be > 0, got {s}")
    if x < 0:
        raise DomainError(f"argument must be >= 0, got {x}")
    return float(gammainc(s, x))


def log_norm_const(params: WishartParams) -> float:
    """log of the eigenvalue-density normalizing constant
    ``c_m = pi^{m^2/2} / (2^{ma} m! Gamma_m(a) Gamma_m(m/2))``."""
    m, a = params.m, params.a
    return float(
        0.5 * m * m * math.log(math.pi)
        - m * a * math.log(2.0)
        - gammaln(m + 1)
        - multivariate_gamma_ln(m, a)
        - multivariate_gamma_ln(m, 0.5 * m)
    )


# ---------------------------------------------------------------------------
# incomplete-gamma band integrals

def _exponent(params: WishartParams, j: int) -> float:
    # integrand power for index j: t^(a + j - (m+1)/2)
    return params.a + j - 0.5 * (params.m + 1)


def f_single(params: WishartParams, j: int, u: float, v: float) -> float:
    """Band integral ``int_u^v t^(a+j-(m+1)/2) exp(-t/2) dt`` in closed form.

    With ``s = a + j - (m+1)/2`` this is
    ``2^(s+1) Gamma(s+1) [P(s+1, v/2) - P(s+1, u/2)]``; ``s + 1 > 0`` holds
    for every valid index since ``a > (m-1)/2``.
    """
    if j < 0:
        raise DomainError(f"index must be >= 0, got {j}")
    if not (0.0 <= u <= v):
        raise DomainError(f"need 0 <= u <= v, got u={u}, v={v}")
    s = _exponent(params, j)
    if not s > -1.0:
        raise DomainError(f"integrand exponent {s} <= -1 diverges at 0")
    if u == v:
        return 0.0
    lg = gammaln(s + 1.0)
    return float(
        math.exp((s + 1.0) * math.log(2.0) + lg)
        * (gammainc(s + 1.0, 0.5 * v) - gammainc(s + 1.0, 0.5 * u))
    )


def f_double(params: WishartParams, i: int, j: int, u: float, v: float) -> float:
    """Nested band integral
    ``int_u^v t^(a+j-(m+1)/2) exp(-t/2) F_i(u, t) dt`` with the inner factor
    given by :func:`f_single` in closed form (keeps the outer integrand
    smooth for the adaptive rule).
    """
    if not (0.0 <= u <= v):
        raise DomainError(f"need 0 <= u <= v, got u={u}, v={v}")
    if u == v:
        return 0.0
    s_outer = _exponent(params, j)

    def outer(t):
        return t ** s_outer * math.exp(-0.5 * t) * f_single(params, i, u, t)

    # t^s exp(-t/2) underflows to exactly 0.0 well before this cap; without
    # it a huge v (band endpoints grow like exp(t)) hides the integrand's
    # mass from the adaptive rule's initial nodes
    cap = 240.0 + 40.0 * max(s_outer, 0.0)
    upper = max(min(v, cap), u)
    value, abserr, *rest = integrate.quad(
        outer, u, upper, epsabs=QUAD_ABS_TOL, epsrel=QUAD_REL_TOL,
        limit=QUAD_LIMIT, full_output=1,
    )
    if rest and len(rest) > 1:
        raise QuadratureError(
            f"outer quadrature did not converge on [{u}, {v}] "
            f"(achieved error estimate {abserr:.3e}): {rest[1]}"
        )
    return float(value)


def pfaffian_abs(r) -> float:
    """|Pfaffian| of an even-dimensional antisymmetric matrix.

    Skew-symmetric block elimination with partial pivoting; the empty matrix
    has Pfaffian 1.  Preferred over ``sqrt(det)`` because roundoff can push
    the determinant of a near-singular skew matrix negative.
    """
    a = np.array(r, dtype=float)
    if a.size == 0:
        return 1.0
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    n = a.shape[0]
    if n % 2 != 0:
        raise ValueError(f"Pfaffian needs even dimension, got {n}")
    if np.abs(a + a.T).max() > 1e-12 * max(1.0, np.abs(a).max()):
        raise ValueError("matrix is not antisymmetric")
    result = 1.0
    for k in range(0, n - 1, 2):
        col = np.abs(a[k + 1:, k])
        pivot = int(col.argmax()) + k + 1
        if a[pivot, k] == 0.0:
            return 0.0
        if pivot != k + 1:
            a[[k + 1, pivot]] = a[[pivot, k + 1]]
            a[:, [k + 1, pivot]] = a[:, [pivot, k + 1]]
        c = a[k, k + 1]
        result *= abs(c)
        if k + 2 < n:
            b1 = a[k + 2:, k].copy()
            b2 = a[k + 2:, k + 1].copy()
            # Schur complement of the leading 2x2 skew block
            a[k + 2:, k + 2:] += (np.outer(b2, b1) - np.outer(b1, b2)) / c
    return float(result)


# ---------------------------------------------------------------------------
# extreme-eigenvalue band table

@dataclass(frozen=True)
class KrishnaiahChangTable:
    """Incomplete-gamma integrals and Pfaffians giving the probability that
    all Wishart eigenvalues fall in ``[u, v]``.

    ``band_probability`` is ``m! c_m rho``; ``rho`` is the Pfaffian ``h`` of
    the antisymmetric difference matrix for even ``m`` and the alternating
    sum over single integrals times sub-Pfaffians for odd ``m``.
    """

    params: WishartParams
    u: float
    v: float
    f_single: np.ndarray    # F_{a+j}(u, v), j = 0..m-1
    f_double: np.ndarray    # F_{a+i, a+j}(u, v), i, j = 0..m-1
    r: np.ndarray           # antisymmetric: f_double - f_double.T
    h: float                # |pf(r)| for even m, else 0
    h_sub: np.ndarray       # |pf(r with row/col l deleted)| for odd m, else 0
    rho: float

    @property
    def band_probability(self) -> float:
        log_mfact_cm = float(gammaln(self.params.m + 1)) + log_norm_const(self.params)
        return math.exp(log_mfact_cm) * self.rho


def build_kc_table(params: WishartParams, u: float, v: float) -> KrishnaiahChangTable:
    """Assemble the band table on ``[u, v]``, ``0 < u <= v``."""
    if not (0.0 < u <= v):
        raise DomainError(f"need 0 < u <= v, got u={u}, v={v}")
    m = params.m
    fs = np.array([f_single(params, j, u, v) for j in range(m)])
    fd = np.array([[f_double(params, i, j, u, v) for j in range(m)] for i in range(m)])
    r = fd - fd.T
    if m % 2 == 0:
        h = pfaffian_abs(r)
        h_sub = np.zeros(m)
        rho = h
    else:
        h = 0.0  # odd-dimensional skew determinant vanishes
        keep = np.arange(m)
        h_sub = np.array([
            pfaffian_abs(r[np.ix_(keep != l, keep != l)]) for l in range(m)
        ])
        signs = (-1.0) ** np.arange(m)
        rho = float((signs * fs * h_sub).sum())
    return KrishnaiahChangTable(
        params=params, u=u, v=v, f_single=fs, f_double=fd,
        r=r, h=h, h_sub=h_sub, rho=rho,
    )


def band_probability(params: WishartParams, u: float, v: float) -> float:
    """P(all eigenvalues of a Wishart draw lie in [u, v])."""
    return build_kc_table(params, u, v).band_probability


# ---------------------------------------------------------------------------
# Selberg integral and the exponential-moment integral

def selberg_domain_ok(params: WishartParams, theta: float) -> bool:
    c = 2.0 * params.a - params.m - 1.0
    return 0.0 < theta < 1.0 and c * (1.0 - theta) + 1.0 > 0.0


def log_selberg_integral(params: WishartParams, theta: float) -> float:
    """log of the squared-Vandermonde Laplace integral, by Selberg's formula.

    ``I_m(theta) = (1-theta)^(-m[(2a-m-1)(1-theta)+m])
    prod_{j=1}^m j! Gamma((2a-m-1)(1-theta)+j)``.
    """
    if not selberg_domain_ok(params, theta):
        raise DomainError(
            f"theta={theta} outside (0,1) or (2a-m-1)(1-theta)+1 <= 0 (integral diverges)"
        )
    m = params.m
    c = 2.0 * params.a - m - 1.0
    base = c * (1.0 - theta)
    j = np.arange(1, m + 1)
    total = float(gammaln(j + 1).sum() + gammaln(base + j).sum())
    return -m * (base + m) * math.log1p(-theta) + total


def in_chernoff_domain(params: WishartParams, v: float, theta: float) -> bool:
    """Membership in D: ``0 <= v < ((2a-m-1) theta + 1)/2`` and ``0 < theta < 1``."""
    if not (0.0 < theta < 1.0) or v < 0.0:
        return False
    s = (2.0 * params.a - params.m - 1.0) * theta
    return v < 0.5 * (s + 1.0)


def log_k_integral(params: WishartParams, v: float, theta: float) -> float:
    """log of ``int_0^inf lam^((2a-m-1)theta) exp(2v|log lam| - theta lam) dlam``.

    Splitting at ``lam = 1`` (where ``|log lam|`` changes sign) gives two
    incomplete-gamma pieces; with ``s = (2a-m-1) theta``:

    ``K = theta^-(s-2v+1) Gamma(s-2v+1) P(s-2v+1, theta)
        + theta^-(s+2v+1) Gamma(s+2v+1) Q(s+2v+1, theta)``.

    Diverges outside the domain D (raises :class:`DomainError`).
    """
    if not in_chernoff_domain(params, v, theta):
        raise DomainError(
            f"(v, theta) = ({v}, {theta}) outside D: the integral diverges"
        )
    s = (2.0 * params.a - params.m - 1.0) * theta
    lo = s - 2.0 * v + 1.0   # > 0 inside D
    hi = s + 2.0 * v + 1.0
    log_theta = math.log(theta)
    term_below = -lo * log_theta + gammaln(lo) + math.log(gammainc(lo, theta))
    term_above = -hi * log_theta + gammaln(hi) + math.log(gammaincc(hi, theta))
    return float(np.logaddexp(term_below, term_above))
