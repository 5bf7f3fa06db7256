"""Behavioral-fidelity metrics and the statistics used to compare agent
populations against human traces.

Distribution distance (two-sample KS), action-variability entropy, the
auction selling-tactic rates, newsvendor order bias, and the Welch/Pearson
tests for replication and population comparisons. Everything here is pure
and deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np
from scipy import stats as scipy_stats

from gameaudit.errors import DomainError, ValidationError
from gameaudit.records import AuctionRound, SessionTranscript


def ks_distance(a: Sequence[float], b: Sequence[float]) -> float:
    """Largest gap between the two empirical CDFs, checked at every pooled
    sample point."""
    if len(a) == 0 or len(b) == 0:
        raise DomainError("ks_distance needs nonempty samples")
    xa = np.sort(np.asarray(a, dtype=np.float64))
    xb = np.sort(np.asarray(b, dtype=np.float64))
    pooled = np.concatenate([xa, xb])
    fa = np.searchsorted(xa, pooled, side="right") / xa.size
    fb = np.searchsorted(xb, pooled, side="right") / xb.size
    return float(np.max(np.abs(fa - fb)))


def behavioral_entropy(actions: Sequence[int], bin_width: int | None = None) -> float:
    """Plug-in Shannon entropy (bits) of the empirical action distribution.

    By default every distinct action value is its own outcome; bin_width
    groups values into floor(v / bin_width) buckets instead.
    """
    if len(actions) == 0:
        raise DomainError("behavioral_entropy needs a nonempty sample")
    arr = np.asarray(actions)
    if bin_width is not None:
        if bin_width < 1:
            raise DomainError("bin_width must be >= 1")
        arr = np.floor_divide(arr, bin_width)
    _, counts = np.unique(arr, return_counts=True)
    p = counts / counts.sum()
    return float(max(0.0, -(p * np.log2(p)).sum()))


def sell_through_rate(sale_flags: Sequence[bool]) -> float:
    """Fraction of rounds that ended in a sale."""
    if len(sale_flags) == 0:
        raise DomainError("sell_through_rate needs a nonempty sample")
    return float(np.mean([1.0 if s else 0.0 for s in sale_flags]))


def second_highest(valuations: Sequence[int]) -> int:
    return valuations[1] if len(valuations) > 1 else 0


def premium_capture_rate(rounds: Sequence[AuctionRound]) -> float:
    """Among sold rounds, the fraction where the reserve exceeded the
    second-highest valuation (the reserve set the price). Zero sales is a
    0/0 case, reported as 0.0; callers can test with any(sale) first."""
    if len(rounds) == 0:
        raise DomainError("premium_capture_rate needs a nonempty trace")
    sales = sum(1 for r in rounds if r.sale)
    if sales == 0:
        return 0.0
    bound = sum(1 for r in rounds if r.sale and r.reserve > second_highest(r.valuations))
    return bound / sales


def mean_order_bias(biases: Sequence[float]) -> float:
    """Signed mean of per-round (order - optimum) gaps."""
    if len(biases) == 0:
        raise DomainError("mean_order_bias needs a nonempty trace")
    return float(np.mean(biases))


def welch_t_test(a: Sequence[float], b: Sequence[float]) -> tuple[float, float]:
    """Two-sided unequal-variance t test (Welch-Satterthwaite df)."""
    if len(a) < 2 or len(b) < 2:
        raise DomainError("welch_t_test needs at least two observations per sample")
    res = scipy_stats.ttest_ind(np.asarray(a, float), np.asarray(b, float), equal_var=False)
    return float(res.statistic), float(res.pvalue)


def pearson_r(a: Sequence[float], b: Sequence[float]) -> float:
    """Product-moment correlation; zero variance on either side is an error."""
    xa = np.asarray(a, dtype=np.float64)
    xb = np.asarray(b, dtype=np.float64)
    if xa.size != xb.size:
        raise ValidationError("pearson_r needs equal-length samples")
    if xa.size < 2:
        raise DomainError("pearson_r needs at least two observations")
    da = xa - xa.mean()
    db = xb - xb.mean()
    denom = np.sqrt((da * da).sum() * (db * db).sum())
    if denom == 0.0:
        raise DomainError("pearson_r undefined: zero variance")
    return float((da * db).sum() / denom)


def ecdf_table(samples: Sequence[float]) -> list[tuple[float, float]]:
    """(value, cumulative fraction) at each distinct value; right-continuous."""
    if len(samples) == 0:
        raise DomainError("ecdf_table needs a nonempty sample")
    arr = np.sort(np.asarray(samples, dtype=np.float64))
    values, last_idx = np.unique(arr, return_index=True)
    counts = np.append(last_idx[1:], arr.size)
    return [(float(v), float(c) / arr.size) for v, c in zip(values, counts)]


def summary_stats(values: Sequence[float]) -> dict[str, float]:
    """Mean / SD / min / max / entropy row for a pooled variable."""
    if len(values) == 0:
        raise DomainError("summary_stats needs a nonempty sample")
    arr = np.asarray(values, dtype=np.float64)
    sd = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return {
        "mean": float(arr.mean()),
        "sd": sd,
        "min": float(arr.min()),
        "max": float(arr.max()),
        "entropy_bits": behavioral_entropy(values),
        "n": int(arr.size),
    }


def reserve_by_bidder_count(
    transcripts: Iterable[SessionTranscript],
    ci_method: str = "normal",
    bootstrap_resamples: int = 1000,
    seed: int = 0,
) -> dict[int, dict[str, float]]:
    """Mean reserve per bidder count with a 95% CI, pooled over all rounds
    of all transcripts. CI is the normal approximation by default; a seeded
    bootstrap over rounds is available instead."""
    groups: dict[int, list[float]] = {}
    for t in transcripts:
        for r in t.rounds:
            groups.setdefault(r.num_bidders, []).append(float(r.reserve))
    if not groups:
        raise DomainError("no rounds to group")
    out: dict[int, dict[str, float]] = {}
    rng = np.random.default_rng(seed)
    for n in sorted(groups):
        arr = np.asarray(groups[n])
        mean = float(arr.mean())
        if ci_method == "normal":
            sd = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
            half = 1.96 * sd / np.sqrt(arr.size)
            lo, hi = mean - half, mean + half
        elif ci_method == "bootstrap":
            means = [
                float(rng.choice(arr, size=arr.size, replace=True).mean())
                for _ in range(bootstrap_resamples)
            ]
            lo, hi = (float(np.percentile(means, q)) for q in (2.5, 97.5))
        else:
            raise ValidationError(f"unknown ci_method {ci_method!r}")
        out[n] = {"mean": mean, "ci_low": float(lo), "ci_high": float(hi), "n_obs": int(arr.size)}
    return out


@dataclass
class MetricReport:
    """Per-agent and population metric values for one analyzed condition."""

    task: str
    source: str
    intervention: str
    per_agent: list[dict[str, Any]] = field(default_factory=list)
    population: dict[str, Any] = field(default_factory=dict)
    tests: dict[str, Any] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)


def agent_metrics(transcript: SessionTranscript, window: tuple[int, int] | None = None) -> dict[str, Any]:
    """Single-agent metric row. window selects rounds by round_index,
    inclusive; it must always be given explicitly by the analysis config."""
    rounds = transcript.rounds
    if window is not None:
        rounds = [r for r in rounds if window[0] <= r.round_index <= window[1]]
    if not rounds:
        raise DomainError(f"transcript {transcript.agent_id}: no rounds in window {window}")
    actions = [r.action for r in rounds]
    profits = [r.profit for r in rounds]
    row: dict[str, Any] = {
        "agent_id": transcript.agent_id,
        "profile_index": transcript.profile_index,
        "rounds": len(rounds),
        "total_profit": float(np.sum(profits)),
        "mean_action": float(np.mean(actions)),
        "sd_action": float(np.std(actions, ddof=1)) if len(actions) > 1 else 0.0,
        "entropy_bits": behavioral_entropy(actions),
        "flagged_rounds": sum(1 for r in rounds if r.flags),
    }
    if transcript.task == "auction":
        sales = [r.sale for r in rounds]
        row["str"] = sell_through_rate(sales)
        row["pcr"] = premium_capture_rate(rounds)
        row["pcr_defined"] = any(sales)
    else:
        row["mean_bias"] = mean_order_bias([r.bias for r in rounds])
    return row
