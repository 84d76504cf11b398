"""Feature extraction, consolidation, sigmoidal filtering, and banding.

Gate-time features are reduced per channel, grouped per the consolidation
spec (arithmetic sums, or identity over a channel that is itself a
multi-input cascade), squeezed through Hill filters toward near-binary
rails, and classified into labelled bands.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .transduce import SignalTrace

AGGREGATORS = ("sum", "weighted-sum", "cascade-endpoint")
FEATURE_MODES = ("endpoint", "slope")


def endpoint_feature(signal: SignalTrace, t_g: float, mode: str = "endpoint") -> float:
    """Scalar feature of a signal over the gate window [0, t_g].

    endpoint: |signal(t_g) - signal(0)|, direction-free magnitude.
    slope: magnitude of the least-squares slope over the window samples.
    """
    if mode not in FEATURE_MODES:
        raise ConfigurationError(f"unknown feature mode {mode!r}")
    times = np.asarray(signal.times, dtype=float)
    if t_g < times[0] or t_g > times[-1] + 1e-12:
        raise ValueError(f"t_g={t_g} outside trace horizon [{times[0]}, {times[-1]}]")
    if mode == "endpoint":
        k = int(np.argmin(np.abs(times - t_g)))
        return float(abs(signal.values[k] - signal.values[0]))
    mask = times <= t_g + 1e-12
    t = times[mask]
    y = np.asarray(signal.values, dtype=float)[mask]
    tc = t - t.mean()
    denom = float(tc @ tc)
    if denom == 0.0:
        return 0.0
    return float(abs(tc @ (y - y.mean()) / denom))


@dataclass(frozen=True)
class FilterParams:
    """Hill transfer function parameters (or a linear passthrough)."""

    k_half: float
    hill_n: float = 8.0
    out_lo: float = 0.0
    out_hi: float = 1.0
    kind: str = "hill"   # "hill" or "passthrough"

    def __post_init__(self):
        if self.kind not in ("hill", "passthrough"):
            raise ConfigurationError(f"unknown filter kind {self.kind!r}")
        if self.kind == "hill":
            if not self.k_half > 0:
                raise ConfigurationError("k_half must be > 0")
            if self.hill_n < 1:
                raise ConfigurationError("hill_n must be >= 1")
        if not self.out_lo < self.out_hi:
            raise ConfigurationError("out_lo must be < out_hi")


def hill_filter(x: float, p: FilterParams) -> float:
    """out_lo + (out_hi - out_lo) * x^n / (k_half^n + x^n); passthrough: x."""
    if p.kind == "passthrough":
        return float(x)
    if x < 0:
        raise ValueError("hill filter input must be >= 0")
    if x == 0.0:
        return p.out_lo
    # branch on the saturation side so the ratio power never overflows
    if x <= p.k_half:
        r = (x / p.k_half) ** p.hill_n
        frac = r / (1.0 + r)
    else:
        q = (p.k_half / x) ** p.hill_n
        frac = 1.0 / (1.0 + q)
    return p.out_lo + (p.out_hi - p.out_lo) * frac


@dataclass
class GroupingSpec:
    """Consolidation of channel features into S grouped outputs.

    groups holds 0-based channel index lists; aggregators align with groups.
    "cascade-endpoint" marks a group whose single channel already performed
    the consolidation chemically (a multi-input cascade), so aggregation is
    identity and the group must contain exactly one channel.
    """

    groups: list                       # list[list[int]]
    aggregators: list                  # one of AGGREGATORS per group
    weights: list = field(default_factory=list)  # per group, for weighted-sum

    def __post_init__(self):
        if len(self.groups) < 1:
            raise ConfigurationError("need at least one group")
        if len(self.aggregators) != len(self.groups):
            raise ConfigurationError("one aggregator per group required")
        for g, agg in zip(self.groups, self.aggregators):
            if agg not in AGGREGATORS:
                raise ConfigurationError(f"unknown aggregator {agg!r}")
            if not g:
                raise ConfigurationError("empty group")
            if agg == "cascade-endpoint" and len(g) != 1:
                raise ConfigurationError("cascade-endpoint groups hold exactly one channel")
        if self.weights and len(self.weights) != len(self.groups):
            raise ConfigurationError("weights must align with groups")

    @property
    def n_outputs(self) -> int:
        return len(self.groups)


@dataclass
class BandSpec:
    boundaries: list   # strictly ascending thresholds inside the rails
    labels: list       # len(boundaries) + 1 labels
    out_lo: float = 0.0
    out_hi: float = 1.0

    def __post_init__(self):
        b = list(self.boundaries)
        if any(b[i] >= b[i + 1] for i in range(len(b) - 1)):
            raise ConfigurationError("band boundaries must be strictly ascending")
        if len(self.labels) != len(b) + 1:
            raise ConfigurationError("need exactly len(boundaries)+1 labels")
        if b and (b[0] <= self.out_lo or b[-1] >= self.out_hi):
            raise ConfigurationError("boundaries must lie strictly inside the rails")


@dataclass
class OutputVector:
    timestamp: float
    values: list
    bands: list


def consolidate(grouping: GroupingSpec, features, filters,
                timestamp: float = 0.0, bands: BandSpec = None) -> OutputVector:
    """Aggregate features per group, filter each aggregate, optionally band.

    features is the per-channel scalar list; filters supplies one
    FilterParams per group. Output length is exactly grouping.n_outputs.
    """
    features = list(features)
    if len(filters) != grouping.n_outputs:
        raise ConfigurationError("one filter per group required")
    values = []
    for gi, (idxs, agg) in enumerate(zip(grouping.groups, grouping.aggregators)):
        if max(idxs) >= len(features) or min(idxs) < 0:
            raise ConfigurationError(f"group {gi} indexes beyond the {len(features)} features")
        if agg == "sum":
            x = float(sum(features[i] for i in idxs))
        elif agg == "weighted-sum":
            w = grouping.weights[gi] if grouping.weights else [1.0] * len(idxs)
            if len(w) != len(idxs):
                raise ConfigurationError(f"group {gi}: weight count mismatch")
            x = float(sum(wi * features[i] for wi, i in zip(w, idxs)))
        else:  # cascade-endpoint: chemistry already consolidated this group
            x = float(features[idxs[0]])
        values.append(hill_filter(x, filters[gi]))
    labels = [classify_band(v, bands) for v in values] if bands is not None else []
    return OutputVector(timestamp=timestamp, values=values, bands=labels)


def classify_band(y: float, bands: BandSpec) -> str:
    """Label of the half-open interval holding y; boundaries go to the upper band."""
    if y < bands.out_lo or y > bands.out_hi:
        raise ValueError(f"value {y} outside rails [{bands.out_lo}, {bands.out_hi}]")
    b = np.asarray(bands.boundaries, dtype=float)
    return bands.labels[int(np.searchsorted(b, y, side="right"))]
