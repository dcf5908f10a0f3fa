"""Independent oracles shared by the test modules.

Everything here deliberately avoids the library's own code paths: the
alternative distance formula uses a nonsymmetric eigensolver, the Pfaffian
oracle enumerates pairings, the convex-search oracle is a two-stage grid.
"""

import itertools
import math

import numpy as np
from scipy import linalg

from spdwalk import DomainError, chernoff_objective


def random_spd(generator, m, size=None, spread=1.5):
    """Well-conditioned random SPD matrices from a log-uniform spectrum."""
    n = 1 if size is None else size
    z = generator.standard_normal((n, m, m))
    q, r = np.linalg.qr(z)
    d = np.sign(np.diagonal(r, axis1=-2, axis2=-1))
    d[d == 0] = 1.0
    q = q * d[:, None, :]
    lam = np.exp(generator.uniform(-spread, spread, size=(n, m)))
    a = (q * lam[:, None, :]) @ np.swapaxes(q, -1, -2)
    a = 0.5 * (a + np.swapaxes(a, -1, -2))
    return a[0] if size is None else a


def riemannian_distance_alt(a, b):
    """Distance via the nonsymmetric pencil: sqrt(sum log^2 eig(A^-1 B))."""
    w = linalg.eig(np.linalg.solve(a, b))[0]
    assert np.abs(w.imag).max() < 1e-8
    return math.sqrt((np.log(w.real) ** 2).sum())


def pfaffian_pairing_sum(r):
    """Brute-force Pfaffian by summing over perfect matchings (n <= 8)."""
    r = np.asarray(r, dtype=float)
    n = r.shape[0]
    if n == 0:
        return 1.0
    if n % 2:
        raise ValueError("even dimension required")

    def matchings(items):
        if not items:
            yield []
            return
        first, rest = items[0], items[1:]
        for k, second in enumerate(rest):
            for tail in matchings(rest[:k] + rest[k + 1:]):
                yield [(first, second)] + tail

    total = 0.0
    for pairing in matchings(list(range(n))):
        perm = [idx for pair in pairing for idx in pair]
        sign = _permutation_sign(perm)
        prod = 1.0
        for i, j in pairing:
            prod *= r[i, j]
        total += sign * prod
    return total


def _permutation_sign(perm):
    sign = 1
    seen = [False] * len(perm)
    for start in range(len(perm)):
        if seen[start]:
            continue
        length = 0
        k = start
        while not seen[k]:
            seen[k] = True
            k = perm[k]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def grid_minimize_chernoff(params, n, t, objective=None, grid=40, rounds=4):
    """Two-stage grid-refinement search over the Chernoff domain.

    Coarse grid on the reparameterized unit square, then repeated local
    refinement around the best cell.  Returns (v, theta, value).
    """
    slope = 2.0 * params.a - params.m - 1.0
    if objective is None:
        def objective(v, theta):
            return chernoff_objective(params, n, t, v, theta)

    def value(p, q):
        vmax = 0.5 * (slope * p + 1.0)
        if vmax <= 0.0:
            return math.inf
        try:
            return objective(q * vmax, p)
        except DomainError:
            return math.inf

    lo, hi = 1e-6, 1.0 - 1e-6
    ps = np.linspace(lo, hi, grid)
    qs = np.linspace(lo, hi, grid)
    best = (0.5, 0.5, math.inf)
    for p, q in itertools.product(ps, qs):
        f = value(p, q)
        if f < best[2]:
            best = (p, q, f)
    for _ in range(rounds):
        p0, q0, _ = best
        dp = 3.0 * (ps[1] - ps[0])
        dq = 3.0 * (qs[1] - qs[0])
        ps = np.linspace(max(lo, p0 - dp), min(hi, p0 + dp), grid)
        qs = np.linspace(max(lo, q0 - dq), min(hi, q0 + dq), grid)
        for p, q in itertools.product(ps, qs):
            f = value(p, q)
            if f < best[2]:
                best = (p, q, f)
    p, q, f = best
    vmax = 0.5 * (slope * p + 1.0)
    return q * vmax, p, f


def one_sample_ks(values, cdf):
    """One-sample KS statistic and asymptotic p-value against a given CDF."""
    from spdwalk.mc import kolmogorov_sf

    xs = np.sort(np.asarray(values, dtype=float))
    n = xs.size
    grid = cdf(xs)
    upper = np.abs(np.arange(1, n + 1) / n - grid).max()
    lower = np.abs(grid - np.arange(0, n) / n).max()
    d = float(max(upper, lower))
    return d, kolmogorov_sf(math.sqrt(n) * d)
