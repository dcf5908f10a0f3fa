"""Seedable Wishart and Haar-orthogonal samplers and the composition walk.

The walk starts at the identity and evolves by ``S_{j+1} = S_j o X_{j+1}``
with ``A o B = A^{1/2} B A^{1/2}`` and i.i.d. orthogonally invariant steps
``X_j``.  Two functionals drive everything downstream: the largest step
distance ``max_j d_R(I, X_j)`` and the largest partial-product distance
``max_j d_R(I, S_j)``.

Reproducibility contract: every sampler is a deterministic function of an
:class:`RngStream`; ensemble helpers split work into fixed-size chunks where
chunk ``k`` uses ``stream_id + k``, so results are bit-identical regardless
of thread count.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .spd import (
    SpdConstructionError,
    compose,
    dist_from_identity,
    make_spd,
    matrix_sqrt,
    matrix_to_json,
)


@dataclass(frozen=True)
class WishartParams:
    """Dimension and index parameter of the identity-scale Wishart law.

    The density exists for ``a > (m - 1) / 2``; the chi-squared product
    bound on the walk additionally needs ``a > (m + 1) / 2`` (checked where
    used, not here).
    """

    m: int
    a: float

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"dimension must be >= 1, got {self.m}")
        if not self.a > 0.5 * (self.m - 1):
            raise ValueError(
                f"index parameter a={self.a} must exceed (m-1)/2 = {0.5 * (self.m - 1)}"
            )


@dataclass(frozen=True)
class RngStream:
    """A named, reproducible random stream: (seed, stream_id) -> PCG64.

    Identical ``(seed, stream_id)`` pairs yield bit-identical sample
    sequences across runs and thread counts.
    """

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.PCG64(ss))

    def shifted(self, offset: int) -> "RngStream":
        """Stream for chunk/sub-task `offset`; used by ensemble helpers."""
        return RngStream(self.seed, self.stream_id + offset)


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng)!r}")


def wishart_sample(params: WishartParams, rng, size: int | None = None) -> np.ndarray:
    """Draw from the identity-scale Wishart law via the Bartlett factorization.

    ``X = T T'`` with ``T`` lower triangular, ``T_ii^2`` chi-squared with
    ``2a - i + 1`` degrees of freedom (``i = 1..m``) and standard normal
    subdiagonals.  The mean is ``2a * I``.

    Parameters
    ----------
    params : WishartParams
    rng : RngStream or numpy Generator
    size : int, optional
        If given, return ``(size, m, m)`` stacked draws.

    Returns
    -------
    ndarray, shape (m, m) or (size, m, m)
    """
    g = as_generator(rng)
    m = params.m
    n = 1 if size is None else int(size)
    t = np.zeros((n, m, m))
    for i in range(m):
        df = 2.0 * params.a - i  # i is 0-based: 2a - (i+1) + 1
        t[:, i, i] = np.sqrt(g.gamma(0.5 * df, 2.0, size=n))
    if m > 1:
        rows, cols = np.tril_indices(m, -1)
        t[:, rows, cols] = g.standard_normal((n, rows.size))
    x = t @ np.swapaxes(t, 1, 2)
    x = 0.5 * (x + np.swapaxes(x, 1, 2))
    return x[0] if size is None else x


def haar_orthogonal(m: int, rng, size: int | None = None) -> np.ndarray:
    """Haar-distributed orthogonal matrix: Gaussian QR with sign-fixed R."""
    if m < 1:
        raise ValueError(f"dimension must be >= 1, got {m}")
    g = as_generator(rng)
    n = 1 if size is None else int(size)
    z = g.standard_normal((n, m, m))
    q, r = np.linalg.qr(z)
    d = np.sign(np.diagonal(r, axis1=-2, axis2=-1))
    d[d == 0.0] = 1.0
    q = q * d[:, None, :]
    return q[0] if size is None else q


class WalkError(RuntimeError):
    """SPD construction failed inside a composition chain."""

    def __init__(self, step: int, cause: Exception):
        super().__init__(f"walk state lost positive definiteness at step {step}: {cause}")
        self.step = step


@dataclass(frozen=True)
class WalkPath:
    """One realized walk: step matrices X_1..X_n and partials S_1..S_n."""

    params: WishartParams
    steps: np.ndarray      # (n, m, m)
    partials: np.ndarray   # (n, m, m)

    @property
    def n(self) -> int:
        return self.steps.shape[0]


@dataclass(frozen=True)
class WalkStats:
    """Distance functionals of a single walk."""

    step_dists: np.ndarray      # d_R(I, X_j), j = 1..n
    partial_dists: np.ndarray   # d_R(I, S_j)
    order_stats: np.ndarray     # ascending sort of step_dists
    max_step_dist: float        # max_j d_R(I, X_j)
    max_partial_dist: float     # max_j d_R(I, S_j)


def generate_walk(params: WishartParams, n: int, rng) -> WalkPath:
    """Simulate ``n`` Wishart steps and their running compositions.

    Deterministic given ``rng``; ``S_1`` is ``X_1`` exactly (same array).
    """
    if n < 1:
        raise ValueError(f"walk length must be >= 1, got {n}")
    g = as_generator(rng)
    # one draw per step keeps the stream's prefix stable: extending a walk
    # reuses the identical leading steps
    steps = np.stack([wishart_sample(params, g) for _ in range(n)])
    partials = np.empty_like(steps)
    partials[0] = steps[0]
    for j in range(1, n):
        try:
            partials[j] = make_spd(compose(partials[j - 1], steps[j]))
        except SpdConstructionError as exc:
            raise WalkError(j + 1, exc) from exc
    return WalkPath(params=params, steps=steps, partials=partials)


def walk_statistics(path: WalkPath) -> WalkStats:
    """Distance functionals of a path; maxima are nondecreasing in length."""
    step_dists = dist_from_identity(path.steps)
    partial_dists = dist_from_identity(path.partials)
    return WalkStats(
        step_dists=step_dists,
        partial_dists=partial_dists,
        order_stats=np.sort(step_dists),
        max_step_dist=float(step_dists.max()),
        max_partial_dist=float(partial_dists.max()),
    )


# ---------------------------------------------------------------------------
# vectorized ensembles

@dataclass(frozen=True)
class WalkBatch:
    """Stacked walks: steps and partials of shape (N, n, m, m)."""

    params: WishartParams
    steps: np.ndarray
    partials: np.ndarray


@dataclass(frozen=True)
class WalkStatsBatch:
    """Distance functionals for an ensemble, one row per walk."""

    step_dists: np.ndarray     # (N, n)
    partial_dists: np.ndarray  # (N, n)
    max_step_dist: np.ndarray  # (N,)
    max_partial_dist: np.ndarray

    @property
    def size(self) -> int:
        return self.step_dists.shape[0]

    @property
    def order_stats(self) -> np.ndarray:
        return np.sort(self.step_dists, axis=1)

    @classmethod
    def from_stats(cls, stats) -> "WalkStatsBatch":
        """Pack a sequence of per-walk :class:`WalkStats` into arrays."""
        step = np.stack([s.step_dists for s in stats])
        part = np.stack([s.partial_dists for s in stats])
        return cls(
            step_dists=step,
            partial_dists=part,
            max_step_dist=step.max(axis=1),
            max_partial_dist=part.max(axis=1),
        )


def sample_walk_batch(params: WishartParams, n: int, size: int, rng) -> WalkBatch:
    """Vectorized walk simulation; one chunk's worth of full matrices."""
    if n < 1:
        raise ValueError(f"walk length must be >= 1, got {n}")
    g = as_generator(rng)
    steps = wishart_sample(params, g, size=size * n).reshape(size, n, params.m, params.m)
    partials = np.empty_like(steps)
    partials[:, 0] = steps[:, 0]
    for j in range(1, n):
        root = matrix_sqrt(partials[:, j - 1])
        s = root @ steps[:, j] @ root
        partials[:, j] = 0.5 * (s + np.swapaxes(s, -1, -2))
    return WalkBatch(params=params, steps=steps, partials=partials)


def batch_statistics(batch: WalkBatch) -> WalkStatsBatch:
    step = dist_from_identity(batch.steps)
    part = dist_from_identity(batch.partials)
    return WalkStatsBatch(
        step_dists=step,
        partial_dists=part,
        max_step_dist=step.max(axis=1),
        max_partial_dist=part.max(axis=1),
    )


def sample_stats_batch(
    params: WishartParams,
    n: int,
    size: int,
    rng: RngStream,
    chunk_size: int = 10_000,
    threads: int = 1,
) -> WalkStatsBatch:
    """Distance functionals for ``size`` walks, chunked for memory and
    determinism (chunk ``k`` uses ``rng.shifted(k)``)."""
    edges = _chunk_edges(size, chunk_size)

    def work(k):
        lo, hi = edges[k], edges[k + 1]
        return batch_statistics(sample_walk_batch(params, n, hi - lo, rng.shifted(k)))

    parts = _run_chunks(work, len(edges) - 1, threads)
    return WalkStatsBatch(
        step_dists=np.concatenate([p.step_dists for p in parts]),
        partial_dists=np.concatenate([p.partial_dists for p in parts]),
        max_step_dist=np.concatenate([p.max_step_dist for p in parts]),
        max_partial_dist=np.concatenate([p.max_partial_dist for p in parts]),
    )


def _chunk_edges(total: int, chunk_size: int):
    if total < 1:
        raise ValueError("ensemble size must be >= 1")
    edges = list(range(0, total, chunk_size)) + [total]
    return edges


def _run_chunks(work, n_chunks: int, threads: int):
    """Evaluate ``work(k)`` for all chunks, reducing in chunk order."""
    if threads <= 1 or n_chunks == 1:
        return [work(k) for k in range(n_chunks)]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(work, range(n_chunks)))


# ---------------------------------------------------------------------------
# walk dump: JSON lines, one walk per line

def walk_to_jsonl(path: WalkPath, rng: RngStream) -> str:
    steps = "[" + ",".join(matrix_to_json(s) for s in path.steps) + "]"
    partials = "[" + ",".join(matrix_to_json(s) for s in path.partials) + "]"
    return (
        f'{{"seed":{rng.seed},"stream_id":{rng.stream_id},'
        f'"params":{{"m":{path.params.m},"a":{path.params.a:.17g}}},'
        f'"steps":{steps},"partials":{partials}}}'
    )


def walk_from_jsonl(line: str) -> tuple[WalkPath, RngStream]:
    rec = json.loads(line)
    params = WishartParams(m=int(rec["params"]["m"]), a=float(rec["params"]["a"]))
    steps = np.asarray(rec["steps"], dtype=float)
    partials = np.asarray(rec["partials"], dtype=float)
    return (
        WalkPath(params=params, steps=steps, partials=partials),
        RngStream(int(rec["seed"]), int(rec["stream_id"])),
    )
