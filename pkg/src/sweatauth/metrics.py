"""ROC curves, AUC with DeLong variance, and equal error rate.

Conventions: genuine scores are the positive class and a probe is accepted
when its score is >= threshold. Ties get half credit in the AUC
(Mann-Whitney convention) and cross together in the threshold sweep, so
the trapezoid area under the ROC equals the pairwise statistic exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError


@dataclass
class ScoredPopulation:
    genuine: np.ndarray
    impostor: np.ndarray

    def __post_init__(self):
        self.genuine = np.asarray(self.genuine, dtype=float).ravel()
        self.impostor = np.asarray(self.impostor, dtype=float).ravel()

    def require(self, min_per_class: int = 1) -> None:
        if self.genuine.size < min_per_class or self.impostor.size < min_per_class:
            raise InsufficientDataError(
                f"need at least {min_per_class} scores per class "
                f"(got {self.genuine.size} genuine, {self.impostor.size} impostor)")


@dataclass
class RocCurve:
    points: np.ndarray       # [K, 2] of (FPR, TPR), sweep from strict to lax
    thresholds: np.ndarray   # threshold yielding each point (leading +inf)

    def __post_init__(self):
        p = self.points
        if np.any(p < -1e-12) or np.any(p > 1 + 1e-12):
            raise ValueError("ROC rates must lie in [0, 1]")
        if np.any(np.diff(p[:, 0]) < -1e-12) or np.any(np.diff(p[:, 1]) < -1e-12):
            raise ValueError("ROC sweep must be monotone")
        if not (np.allclose(p[0], (0.0, 0.0)) and np.allclose(p[-1], (1.0, 1.0))):
            raise ValueError("ROC must run from (0,0) to (1,1)")

    def trapezoid_area(self) -> float:
        return float(np.trapezoid(self.points[:, 1], self.points[:, 0]))


def roc_curve(pop: ScoredPopulation) -> RocCurve:
    """Threshold sweep over all distinct scores, ties crossing together."""
    pop.require(1)
    thresholds = np.unique(np.concatenate([pop.genuine, pop.impostor]))[::-1]
    n_g, n_i = pop.genuine.size, pop.impostor.size
    points = [(0.0, 0.0)]
    thr_out = [np.inf]
    for thr in thresholds:
        tpr = np.count_nonzero(pop.genuine >= thr) / n_g
        fpr = np.count_nonzero(pop.impostor >= thr) / n_i
        points.append((fpr, tpr))
        thr_out.append(thr)
    return RocCurve(points=np.asarray(points, dtype=float),
                    thresholds=np.asarray(thr_out, dtype=float))


def auc(pop: ScoredPopulation) -> float:
    """Mann-Whitney statistic: P(genuine > impostor) + 0.5 * P(tie)."""
    pop.require(1)
    g = pop.genuine[:, None]
    i = pop.impostor[None, :]
    wins = np.count_nonzero(g > i)
    ties = np.count_nonzero(g == i)
    return (wins + 0.5 * ties) / (pop.genuine.size * pop.impostor.size)


@dataclass
class DelongResult:
    auc: float
    variance: float
    ci: tuple            # 95% interval clipped to [0, 1]
    ci_unclipped: tuple

    def as_dict(self) -> dict:
        return {"auc": self.auc, "variance": self.variance,
                "ci95": list(self.ci), "ci95_unclipped": list(self.ci_unclipped)}


def delong_variance(pop: ScoredPopulation) -> DelongResult:
    """Structural-components variance of the AUC estimate.

    V10[i] averages the win/tie kernel of genuine i against all impostors,
    V01[j] symmetrically; var = var(V10)/n_genuine + var(V01)/n_impostor.
    """
    pop.require(2)
    g = pop.genuine[:, None]
    i = pop.impostor[None, :]
    psi = (g > i).astype(float) + 0.5 * (g == i)
    v10 = psi.mean(axis=1)
    v01 = psi.mean(axis=0)
    point = float(psi.mean())
    var = float(np.var(v10, ddof=1) / v10.size + np.var(v01, ddof=1) / v01.size)
    half = 1.96 * np.sqrt(var)
    lo, hi = point - half, point + half
    return DelongResult(auc=point, variance=var,
                        ci=(max(lo, 0.0), min(hi, 1.0)), ci_unclipped=(lo, hi))


def eer(pop: ScoredPopulation) -> float:
    """Rate where FAR equals FRR, linearly interpolated along the sweep."""
    curve = roc_curve(pop)
    far = curve.points[:, 0]
    frr = 1.0 - curve.points[:, 1]
    diff = frr - far
    # sweep starts at (FAR 0, FRR 1) and ends at (FAR 1, FRR 0)
    for k in range(len(diff) - 1):
        if diff[k] >= 0.0 and diff[k + 1] <= 0.0:
            span = diff[k] - diff[k + 1]
            alpha = diff[k] / span if span > 0 else 0.0
            return float(far[k] + alpha * (far[k + 1] - far[k]))
    return float(far[-1])


def write_roc_csv(path, curve: RocCurve, config_hash: str = "") -> None:
    with open(path, "w", newline="") as fh:
        if config_hash:
            fh.write(f"# config_hash={config_hash}\n")
        fh.write("threshold,fpr,tpr\n")
        for thr, (fpr, tpr) in zip(curve.thresholds, curve.points):
            fh.write(f"{thr!r},{fpr!r},{tpr!r}\n")


def write_summary_json(path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
