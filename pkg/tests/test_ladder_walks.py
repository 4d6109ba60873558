import math

import numpy as np
import pytest
from scipy import stats

from uipt_peel import exact_laws as laws
from uipt_peel import ladder_walks as lw
from uipt_peel.experiments import chi_square_independence, ks_two_sample
from uipt_peel.samplers import RngStream

ALPHA = 1e-3


def test_down_leg_fields():
    for i in range(200):
        leg = lw.sample_unconditioned_leg_T(RngStream(30, i), t_cap=1e6)
        if leg.censored:
            continue
        assert leg.T > 0 and leg.H >= 1 and leg.L >= leg.H and leg.Vb >= 0


def test_height_and_jump_marginals():
    # legs unfinished at the cap are unknown; bracket the estimate with them
    n, cens, h1, l1 = 20_000, 0, 0, 0
    rng = RngStream(31, 0)
    for _ in range(n):
        leg = lw.sample_unconditioned_leg_T(rng, t_cap=1e6)
        if leg.censored:
            cens += 1
            continue
        h1 += leg.H == 1
        l1 += leg.L == 1
    assert cens < 0.02 * n
    for count, p in ((h1, 1 / 2), (l1, 3 / 8)):
        slack = 5 * math.sqrt(n * p * (1 - p))
        assert count - slack <= n * p <= count + cens + slack


def test_up_leg():
    u, v = lw.sample_leg_U_given_H(RngStream(32, 0), 3)
    assert u > 0 and v >= 1
    with pytest.raises(ValueError):
        lw.sample_leg_U_given_H(RngStream(32, 0), 0)
    u, _ = lw.sample_leg_U_given_H(RngStream(32, 1), 10 ** 6, t_cap=1.0)
    assert math.isnan(u)


def test_sample_quadruple():
    q = lw.sample_quadruple(RngStream(33, 1))
    assert q.T > 0 and q.U > 0 and q.H >= 1 and q.Vr >= 1


def test_quadruple_batch_and_equal_laws():
    q = lw.sample_quadruples(RngStream(34, 0), 20_000, t_cap=1e4)
    assert len(q) == 20_000
    assert np.all(q.T > 0) and np.all(q.U > 0) and np.all(q.H[~q.censored] >= 1)
    assert np.all(q.T[q.censored] > q.t_cap) and np.all(q.U[q.censored] > q.t_cap)
    half = len(q) // 2
    assert ks_two_sample(q.T[:half], q.U[half:]).pvalue > ALPHA
    assert ks_two_sample((q.T - q.U)[:half], (q.U - q.T)[half:]).pvalue > ALPHA
    assert np.unique(q.T - q.U).size == len(q)


def test_quadruples_do_not_drift():
    q = lw.sample_quadruples(RngStream(34, 1), 20_000, t_cap=1e4)
    batches = np.arange(len(q)) % 10
    below = (q.T < q.U).astype(int)
    table = np.array([[np.sum((batches == b) & (below == s)) for b in range(10)] for s in (0, 1)])
    assert chi_square_independence(table).pvalue > ALPHA


def test_lambda_of():
    T = np.array([[3.0, 1.0, 1.0], [1.0, 5.0, 5.0], [5.0, 5.0, 5.0]])
    U = np.array([[1.0, 1.0, 5.0], [2.0, 0.0, 0.0], [1.0, 1.0, 1.0]])
    assert lw.lambda_of(T, U).tolist() == [3, 1, 0]


def test_run_lambda():
    recs = [lw.run_lambda(RngStream(35, i), 20, t_cap=1e4) for i in range(3000)]
    done = [r for r in recs if r is not None]
    assert all(r.T_sum < r.U_sum for r in done)
    lam = np.array([r.lam if r else 0 for r in recs])
    ones = int((lam == 1).sum())
    assert abs(ones - 1500) < 5 * math.sqrt(3000 / 4)
    with pytest.raises(ValueError):
        lw.run_lambda(RngStream(35, 0), 0)


def test_stop_level():
    for H in (1, 3, 10):
        for eps in (0.5, 0.05, 1e-3):
            L = lw.stop_level(H, eps)
            assert laws.harmonic_h(H + 1) / laws.harmonic_h(L) <= eps
            assert laws.harmonic_h(H + 1) / laws.harmonic_h(L - 1) > eps or L == H + 1


def test_conditioned_walk_stays_positive_and_is_transient():
    returned = 0
    paths = 10_000
    for i in range(paths):
        p = lw.simulate_conditioned_R(RngStream(36, i), 100, t_cap=2000.0)
        assert np.all(p.levels >= 1)
        returned += bool(np.any(p.levels < 50))
    bound = laws.harmonic_h(50) / laws.harmonic_h(100)
    assert returned / paths <= bound + 3 * math.sqrt(bound * (1 - bound) / paths)
    with pytest.raises(ValueError):
        lw.simulate_conditioned_R(RngStream(36, 0), 0, 10.0)


def test_direct_last_passage_agrees_with_time_reversal():
    n, H, eps = 3000, 3, 0.05
    direct = np.array([lw.conditioned_last_passage(RngStream(37, i), H, eps)[0] for i in range(n)])
    rev = np.array([lw.sample_leg_U_given_H(RngStream(38, i), H)[0] for i in range(n)])
    assert ks_two_sample(direct, rev).pvalue > ALPHA


def test_joint_picture_inclusions():
    outs = [lw.joint_two_walk_theta(RngStream(39, i), max_events=50_000, eps=0.05) for i in range(60)]
    flagged = sum(o.flagged for o in outs)
    assert all(o.inclusions_ok for o in outs if not o.flagged)
    assert flagged <= 6
    assert sum(o.checked for o in outs) > 0


def test_unreflected_walk():
    R, B, theta = lw.unreflected_walk([1, -2, -3], [0, 0, 1], 1, 1)
    # B: 2, 0, 0 ; R: 1, 1, -2 before reflection -> theta at step 3
    assert B.tolist() == [2, 0, 0] and theta == 3
    R, B, theta = lw.unreflected_walk([1, -3], [0, 0], 2, 1)
    assert R.tolist() == [2, 1] and B.tolist() == [2, 0] and theta == 0


def test_harris_small():
    res = lw.harris_check(RngStream(40, 0), walks=100_000)
    assert res["p_ab"] >= res["p_a"] * res["p_b"] - 3 * res["se"]
    assert 0 < res["p_a"] < 1 and 0 < res["p_b"] < 1


def test_up_leg_ascending_tail_stabilizes():
    t_cap = 2e3
    rng = RngStream(41, 1)
    times = np.array([lw.sample_leg_U_given_H(rng, 1, t_cap)[0] for _ in range(100_000)])
    times = np.nan_to_num(times, nan=np.inf)
    grid = np.array([10.0, 30.0, 100.0, 300.0, 1000.0])
    scaled = np.array([(times > g).mean() * g ** (2 / 3) for g in grid])
    assert scaled.max() / scaled.min() - 1 < 0.25
    assert stats.variation(scaled) < 0.1
