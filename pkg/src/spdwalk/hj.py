"""Hoffmann-Jorgensen inequality for the composition walk.

The inequality bounds the tail of the running maximum ``U_n`` at a
composite threshold by a term in the maximal step ``M_n`` plus products of
``U_n`` tail and CDF factors, with each factor's shape switching on whether
the index belongs to a factorial-threshold index set.  Certified bounds are
produced by plugging in the analytic Wishart bounds conservatively: upper
bounds wherever a factor increases the right-hand side, lower bounds in
denominators, and a worst-case maximum over index-set memberships that the
bound intervals cannot decide.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .bounds import (
    BoundReport,
    step_max_tail_bound,
    walk_max_cdf_bound,
    walk_max_tail_bound,
)
from .mc import TailEstimate, from_successes
from .sampling import RngStream, WalkStatsBatch, WishartParams

MAX_AMBIGUOUS = 10  # worst-case membership search capped at 2**10 evaluations


@dataclass(frozen=True)
class HjConfig:
    """Threshold layout: block sizes ``n_list`` and levels ``t0``/``t_list``.

    ``n_circ = sum(n_list)`` must satisfy ``n_circ <= n + 1`` for a walk of
    length ``n``.
    """

    l: int
    n_list: tuple
    t0: float
    t_list: tuple
    n: int

    def __post_init__(self):
        object.__setattr__(self, "n_list", tuple(int(k) for k in self.n_list))
        object.__setattr__(self, "t_list", tuple(float(t) for t in self.t_list))
        if self.l < 1 or len(self.n_list) != self.l or len(self.t_list) != self.l:
            raise ValueError(
                f"need l >= 1 blocks with matching n_list/t_list lengths, got "
                f"l={self.l}, {len(self.n_list)}, {len(self.t_list)}"
            )
        if any(k < 1 for k in self.n_list):
            raise ValueError(f"block sizes must be >= 1: {self.n_list}")
        if self.t0 < 0 or any(t < 0 for t in self.t_list):
            raise ValueError("thresholds must be nonnegative")
        if self.n < 1:
            raise ValueError(f"walk length must be >= 1, got {self.n}")
        if self.n_circ > self.n + 1:
            raise ValueError(
                f"hypothesis violated: sum(n_list) = {self.n_circ} exceeds n + 1 = {self.n + 1}"
            )

    @property
    def n_circ(self) -> int:
        return sum(self.n_list)


def hj_threshold(config: HjConfig) -> float:
    """Composite threshold
    ``(n_circ - 1) t0 + (2 n_1 - 1) t_1 + 2 sum_{j>=2} n_j t_j``."""
    tail = 2.0 * sum(k * t for k, t in zip(config.n_list[1:], config.t_list[1:]))
    return (
        (config.n_circ - 1) * config.t0
        + (2 * config.n_list[0] - 1) * config.t_list[0]
        + tail
    )


@dataclass(frozen=True)
class ProbInputs:
    """Probability inputs, each an upper/lower bound of stated direction."""

    pm_upper: float                 # >= P(max step distance > t0)
    pu_tail_upper: tuple            # >= P(U_n > t_j)
    pu_cdf_upper: tuple             # >= P(U_n <= t_j)
    pu_cdf_lower: tuple             # <= P(U_n <= t_j)
    source: str = "analytic"        # analytic | empirical

    def __post_init__(self):
        for name in ("pu_tail_upper", "pu_cdf_upper", "pu_cdf_lower"):
            object.__setattr__(self, name, tuple(float(x) for x in getattr(self, name)))
        values = (self.pm_upper, *self.pu_tail_upper, *self.pu_cdf_upper, *self.pu_cdf_lower)
        if any(not 0.0 <= x <= 1.0 for x in values):
            raise ValueError("all probability inputs must lie in [0, 1]")
        if self.source not in ("analytic", "empirical"):
            raise ValueError(f"unknown source tag {self.source!r}")
        for lo, up in zip(self.pu_cdf_lower, self.pu_cdf_upper):
            if lo > up + 1e-12:
                raise ValueError(f"inconsistent CDF bounds: lower {lo} > upper {up}")
        for lo, tail in zip(self.pu_cdf_lower, self.pu_tail_upper):
            if lo + tail < 1.0 - 1e-12:
                raise ValueError(
                    f"cdf lower bound {lo} is looser than 1 - tail upper {tail}"
                )


def hj_index_membership(config: HjConfig, pu_cdf_upper, pu_cdf_lower) -> list:
    """Decide, per index, whether ``P(U_n <= t_i)^(n_i - [i==1]) <= 1/n_i!``.

    With only bound intervals available the decision can be one-sided:
    ``in`` when the upper bound already satisfies the inequality, ``out``
    when the lower bound already violates it, ``ambiguous`` otherwise.
    """
    upper = [float(x) for x in pu_cdf_upper]
    lower = [float(x) for x in pu_cdf_lower]
    if len(upper) != config.l or len(lower) != config.l:
        raise ValueError(
            f"expected {config.l} entries, got {len(upper)} and {len(lower)}"
        )
    for lo, up in zip(lower, upper):
        if not (0.0 <= lo <= 1.0 and 0.0 <= up <= 1.0):
            raise ValueError("probabilities must lie in [0, 1]")
        if lo > up + 1e-12:
            raise ValueError(f"inconsistent bounds: lower {lo} > upper {up}")
    out = []
    for i, (size, lo, up) in enumerate(zip(config.n_list, lower, upper), start=1):
        exponent = size - (1 if i == 1 else 0)
        threshold = 1.0 / math.factorial(size)
        if up ** exponent <= threshold:
            out.append("in")
        elif lo ** exponent > threshold:
            out.append("out")
        else:
            out.append("ambiguous")
    return out


@dataclass(frozen=True)
class HjResult:
    threshold: float
    rhs: float
    i0_membership: tuple
    form: str                      # factored | ratio
    strengthened_term: float | None = None
    probs: ProbInputs | None = None
    ambiguous_indices: tuple = ()
    note: str = ""

    def to_json(self) -> str:
        payload = {
            "threshold": self.threshold,
            "rhs": self.rhs,
            "i0_membership": list(self.i0_membership),
            "form": self.form,
            "strengthened_term": self.strengthened_term,
            "ambiguous_indices": list(self.ambiguous_indices),
            "note": self.note,
        }
        if self.probs is not None:
            payload["inputs"] = {
                "source": self.probs.source,
                "pm_upper": self.probs.pm_upper,
                "pu_tail_upper": list(self.probs.pu_tail_upper),
                "pu_cdf_upper": list(self.probs.pu_cdf_upper),
                "pu_cdf_lower": list(self.probs.pu_cdf_lower),
            }
        return json.dumps(payload, indent=2)


def hj_rhs(config: HjConfig, probs: ProbInputs, membership, form: str = "factored") -> HjResult:
    """Evaluate the inequality's right-hand side for a resolved membership.

    Conservative direction throughout: tail factors and the possible
    leading CDF factor use upper bounds, denominators use lower bounds.
    """
    membership = list(membership)
    if len(membership) != config.l:
        raise ValueError(f"membership must have {config.l} entries")
    if any(mbr == "ambiguous" for mbr in membership):
        raise ValueError("resolve ambiguous membership first (certified_hj_bound does)")
    if form not in ("factored", "ratio"):
        raise ValueError(f"unknown form {form!r}")
    note = ""
    lead = 1.0 if membership[0] == "in" else min(probs.pu_cdf_upper[0], 1.0)
    if form == "factored":
        prod = 1.0
        for size, tail_up, cdf_lo, mbr in zip(
            config.n_list, probs.pu_tail_upper, probs.pu_cdf_lower, membership
        ):
            if mbr == "in":
                prod *= tail_up ** size
            else:
                if cdf_lo == 0.0:
                    note = "degenerate: zero CDF lower bound in a denominator"
                    prod = math.inf
                    break
                prod *= (tail_up / cdf_lo) ** size / math.factorial(size)
    else:
        numer = 1.0
        denom = 1.0
        for size, tail_up, cdf_lo, mbr in zip(
            config.n_list, probs.pu_tail_upper, probs.pu_cdf_lower, membership
        ):
            numer *= tail_up ** size
            if mbr == "out":
                if cdf_lo == 0.0:
                    note = "degenerate: zero CDF lower bound in a denominator"
                    denom = 0.0
                    break
                denom *= math.factorial(size) * cdf_lo ** size
        prod = numer / denom if denom > 0.0 else math.inf
    rhs = min(probs.pm_upper + lead * prod, 1.0)
    return HjResult(
        threshold=hj_threshold(config), rhs=rhs,
        i0_membership=tuple(membership), form=form, probs=probs, note=note,
    )


def certified_hj_bound(
    params: WishartParams,
    config: HjConfig,
    j_max: int = 1,
    mc_budget: int | None = None,
    rng: RngStream | None = None,
) -> HjResult:
    """Build analytic probability inputs and evaluate the inequality.

    Membership values the bound intervals cannot decide are resolved by
    evaluating the right-hand side under every candidate assignment and
    keeping the maximum: the true index set is one of the candidates, so
    the maximum is still a valid bound.
    """
    n = config.n
    pm = step_max_tail_bound(params, n, config.t0).clamped
    tail_up = []
    cdf_lo = []
    cdf_up = []
    for t in config.t_list:
        tail = walk_max_tail_bound(params, n, t).clamped
        tail_up.append(tail)
        cdf_lo.append(max(0.0, 1.0 - tail))
        cdf_up.append(
            walk_max_cdf_bound(params, n, t, j_max=j_max, mc_budget=mc_budget, rng=rng).clamped
        )
    probs = ProbInputs(
        pm_upper=pm, pu_tail_upper=tuple(tail_up),
        pu_cdf_upper=tuple(cdf_up), pu_cdf_lower=tuple(cdf_lo),
        source="analytic",
    )
    membership = hj_index_membership(config, probs.pu_cdf_upper, probs.pu_cdf_lower)
    open_slots = [i for i, mbr in enumerate(membership) if mbr == "ambiguous"]
    if len(open_slots) > MAX_AMBIGUOUS:
        raise ValueError(
            f"{len(open_slots)} ambiguous indices exceed the 2^{MAX_AMBIGUOUS} search cap"
        )
    if not open_slots:
        return hj_rhs(config, probs, membership)
    worst = None
    for choice in product(("in", "out"), repeat=len(open_slots)):
        candidate = list(membership)
        for slot, value in zip(open_slots, choice):
            candidate[slot] = value
        result = hj_rhs(config, probs, candidate)
        if worst is None or result.rhs > worst.rhs:
            worst = result
    return HjResult(
        threshold=worst.threshold, rhs=worst.rhs,
        i0_membership=worst.i0_membership, form=worst.form, probs=probs,
        ambiguous_indices=tuple(i + 1 for i in open_slots),
        note=worst.note or "ambiguous membership resolved by worst-case maximum",
    )


def strengthened_m_term(stats, config: HjConfig) -> TailEstimate:
    """Monte Carlo estimate of the order-statistic replacement for the
    max-step term: the sum of the top ``n_circ - 1`` step distances
    exceeding ``(n_circ - 1) t0``.

    Reduces to the plain max-step tail for ``n_circ = 2`` and to zero for
    ``n_circ = 1`` (empty sum).
    """
    if not isinstance(stats, WalkStatsBatch):
        stats = WalkStatsBatch.from_stats(list(stats))
    top_count = config.n_circ - 1
    n_walks = stats.size
    if top_count == 0:
        return from_successes(0, n_walks)
    n_steps = stats.step_dists.shape[1]
    if n_steps < top_count:
        raise ValueError(
            f"walks have {n_steps} steps but the order-statistic sum needs {top_count}"
        )
    ordered = np.sort(stats.step_dists, axis=1)
    top_sum = ordered[:, n_steps - top_count:].sum(axis=1)
    hits = int((top_sum > top_count * config.t0).sum())
    return from_successes(hits, n_walks)
