import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sweatauth.errors import InsufficientDataError
from sweatauth.metrics import (RocCurve, ScoredPopulation, auc, delong_variance,
                               eer, roc_curve, write_roc_csv)


def brute_force_auc(genuine, impostor):
    """Independent oracle: exhaustive ordered-pair enumeration."""
    wins = ties = 0
    for g in genuine:
        for i in impostor:
            if g > i:
                wins += 1
            elif g == i:
                ties += 1
    return (wins + 0.5 * ties) / (len(genuine) * len(impostor))


# ------------------------------------------------------------- roc

def test_perfect_separation_curve():
    pop = ScoredPopulation([2.0, 3.0, 4.0], [0.0, 0.5, 1.0])
    curve = roc_curve(pop)
    assert any(np.allclose(p, (0.0, 1.0)) for p in curve.points)
    assert auc(pop) == 1.0
    assert eer(pop) == 0.0


def test_identical_populations_on_diagonal():
    pop = ScoredPopulation([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
    curve = roc_curve(pop)
    np.testing.assert_allclose(curve.points[:, 0], curve.points[:, 1])
    assert auc(pop) == 0.5
    assert eer(pop) == pytest.approx(0.5)


def test_worked_four_score_example():
    pop = ScoredPopulation([0.8, 0.35], [0.4, 0.1])
    # oracle: pairs (0.8,0.4) (0.8,0.1) (0.35,0.1) correct, (0.35,0.4) not
    assert brute_force_auc(pop.genuine, pop.impostor) == 0.75
    assert auc(pop) == 0.75
    curve = roc_curve(pop)
    assert curve.trapezoid_area() == pytest.approx(0.75, abs=1e-12)


def test_roc_requires_both_classes():
    with pytest.raises(InsufficientDataError):
        roc_curve(ScoredPopulation([], [1.0]))
    with pytest.raises(InsufficientDataError):
        auc(ScoredPopulation([1.0], []))


def test_roc_monotone_and_anchored():
    rng = np.random.default_rng(0)
    pop = ScoredPopulation(rng.normal(1, 1, 40), rng.normal(0, 1, 37))
    curve = roc_curve(pop)
    assert np.all(np.diff(curve.points[:, 0]) >= 0)
    assert np.all(np.diff(curve.points[:, 1]) >= 0)
    np.testing.assert_allclose(curve.points[0], (0.0, 0.0))
    np.testing.assert_allclose(curve.points[-1], (1.0, 1.0))
    assert curve.thresholds[0] == np.inf
    assert np.all(np.diff(curve.thresholds[1:]) < 0)


def test_trapezoid_equals_pair_count():
    rng = np.random.default_rng(42)
    for trial in range(50):
        n_g = rng.integers(2, 50)
        n_i = rng.integers(2, 50)
        if trial % 2:
            g = rng.normal(0.5, 1, n_g)
            i = rng.normal(0.0, 1, n_i)
        else:  # integer scores force ties across and within classes
            g = rng.integers(0, 6, n_g).astype(float)
            i = rng.integers(0, 6, n_i).astype(float)
        pop = ScoredPopulation(g, i)
        want = brute_force_auc(g, i)
        assert abs(auc(pop) - want) < 1e-9
        assert abs(roc_curve(pop).trapezoid_area() - want) < 1e-9


@given(st.lists(st.integers(-200, 200), min_size=1, max_size=30),
       st.lists(st.integers(-200, 200), min_size=1, max_size=30),
       st.sampled_from(["affine", "exp", "cube"]))
def test_auc_invariant_under_increasing_transform(genuine, impostor, kind):
    # quarter-integer lattice keeps transformed scores from colliding in float
    transforms = {
        "affine": lambda x: 3.0 * x + 7.0,
        "exp": lambda x: math.exp(x / 25.0),
        "cube": lambda x: x ** 3,
    }
    f = transforms[kind]
    genuine = [x / 4.0 for x in genuine]
    impostor = [x / 4.0 for x in impostor]
    base = auc(ScoredPopulation(genuine, impostor))
    moved = auc(ScoredPopulation([f(x) for x in genuine], [f(x) for x in impostor]))
    assert moved == pytest.approx(base, abs=1e-12)


def test_auc_complement_symmetry():
    rng = np.random.default_rng(7)
    g = rng.normal(1, 2, 25)
    i = rng.normal(0, 1, 31)
    assert auc(ScoredPopulation(g, i)) + auc(ScoredPopulation(i, g)) == pytest.approx(1.0)


# ------------------------------------------------------------- delong

def test_delong_point_estimate_equals_auc():
    rng = np.random.default_rng(12)
    pop = ScoredPopulation(rng.normal(1, 1, 25), rng.normal(0, 1, 25))
    res = delong_variance(pop)
    assert res.auc == auc(pop)


def test_delong_close_to_bootstrap():
    # oracle: 2000-resample bootstrap variance of the AUC on a fixed pair
    # of 25-score populations
    rng = np.random.default_rng(2024)
    g = rng.normal(1.0, 1.0, 25)
    i = rng.normal(0.0, 1.0, 25)
    res = delong_variance(ScoredPopulation(g, i))
    boot = np.empty(2000)
    for b in range(2000):
        gb = rng.choice(g, size=g.size, replace=True)
        ib = rng.choice(i, size=i.size, replace=True)
        boot[b] = auc(ScoredPopulation(gb, ib))
    bvar = boot.var(ddof=1)
    assert abs(res.variance - bvar) / bvar < 0.2


def test_delong_needs_two_per_class():
    with pytest.raises(InsufficientDataError):
        delong_variance(ScoredPopulation([1.0], [0.0, 0.5]))


def test_delong_ci_clipping():
    pop = ScoredPopulation([3.0, 4.0, 5.0], [0.0, 1.0, 2.0])
    res = delong_variance(pop)
    assert res.ci[1] <= 1.0
    assert res.ci_unclipped[1] >= res.ci[1]
    assert res.ci[0] >= 0.0


# ------------------------------------------------------------- eer

def test_gaussian_gap_two_eer():
    # closed-form oracle: two unit normals two apart cross at Phi(-1)
    rng = np.random.default_rng(314)
    pop = ScoredPopulation(rng.normal(2.0, 1.0, 10_000), rng.normal(0.0, 1.0, 10_000))
    phi_minus_one = 0.5 * (1.0 - math.erf(1.0 / math.sqrt(2.0)))
    assert abs(eer(pop) - phi_minus_one) < 0.02


def test_eer_bounded_for_informative_scores():
    rng = np.random.default_rng(5)
    for _ in range(20):
        g = rng.normal(rng.uniform(0, 2), 1, 50)
        i = rng.normal(0, 1, 50)
        pop = ScoredPopulation(g, i)
        if auc(pop) >= 0.5:
            assert 0.0 <= eer(pop) <= 0.5


def test_roc_csv(tmp_path):
    pop = ScoredPopulation([0.8, 0.35], [0.4, 0.1])
    path = tmp_path / "roc.csv"
    write_roc_csv(path, roc_curve(pop), config_hash="beef")
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "# config_hash=beef"
    assert lines[1] == "threshold,fpr,tpr"
    assert len(lines) == 2 + 5  # (0,0) anchor plus one point per distinct score


def test_roc_curve_validation():
    with pytest.raises(ValueError):
        RocCurve(points=np.array([[0.0, 0.0], [0.5, 1.2], [1.0, 1.0]]),
                 thresholds=np.array([np.inf, 1.0, 0.0]))
    with pytest.raises(ValueError):
        RocCurve(points=np.array([[0.0, 0.0], [0.5, 0.4], [0.4, 1.0]]),
                 thresholds=np.array([np.inf, 1.0, 0.0]))
