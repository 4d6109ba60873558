import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from uipt_peel import _core, exact_laws as laws
from uipt_peel.experiments import chi_square_gof
from uipt_peel.samplers import (RngStream, StepSamplerTables, default_tables, sample_annealed_volumes,
                                sample_boltzmann_volume, sample_boltzmann_volumes, sample_coloring,
                                sample_colorings, sample_conditioned_step, sample_conditioned_steps,
                                sample_exponential, sample_exponentials, sample_step, sample_steps)

ALPHA = 1e-3


def within_sigmas(count, total, p, k=5.0):
    return abs(count - total * p) <= k * math.sqrt(total * p * (1 - p))


# ---------------------------------------------------------------------------
# streams


def test_streams_reproducible_and_distinct():
    a = RngStream(7, 3).uniform(1000)
    b = RngStream(7, 3).uniform(1000)
    c = RngStream(7, 4).uniform(1000)
    d = RngStream(8, 3).uniform(1000)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c) and not np.array_equal(a, d)
    assert abs(np.corrcoef(a, c)[0, 1]) < 5 / math.sqrt(1000)


def test_streams_share_no_prefix():
    firsts = {RngStream(1, i).generator.integers(0, 2 ** 63) for i in range(2000)}
    assert len(firsts) == 2000


def test_stream_rejects_negative_ids():
    with pytest.raises(ValueError):
        RngStream(-1, 0)
    with pytest.raises(ValueError):
        RngStream(0, -1)


def test_batch_consumes_stream_like_scalar_calls():
    r1, r2 = RngStream(5, 0), RngStream(5, 0)
    batch = sample_steps(r1, 500)
    scalars = [sample_step(r2) for _ in range(500)]
    assert batch.tolist() == scalars
    r1, r2 = RngStream(5, 1), RngStream(5, 1)
    assert sample_conditioned_steps(r1, 7, 300).tolist() == [sample_conditioned_step(r2, 7) for _ in range(300)]
    r1, r2 = RngStream(5, 2), RngStream(5, 2)
    assert (sample_boltzmann_volumes(r1, -4, 300).tolist()
            == [sample_boltzmann_volume(r2, -4) for _ in range(300)])


# ---------------------------------------------------------------------------
# step law


def test_step_table_matches_tail():
    cum = default_tables().cumulative
    assert cum.shape[0] == (1 << 20) + 1
    assert np.all(np.diff(cum) > 0) and cum[-1] < 1
    assert abs((1 - cum[-1]) - laws.step_tail((1 << 20) + 1)) < 1e-12
    partial = math.fsum([2 / 3] + [laws.step_pmf(-j) for j in range(1, 5001)])
    assert abs(cum[5000] - partial) < 1e-13


def test_custom_table_size():
    t = StepSamplerTables(table_size=64)
    rng = RngStream(2, 0)
    x = sample_steps(rng, 200_000, t)
    assert within_sigmas(int((x == 1).sum()), x.size, 2 / 3)
    assert within_sigmas(int((x < -64).sum()), x.size, laws.step_tail(65))


def test_step_frequencies():
    x = sample_steps(RngStream(11, 0), 10 ** 7)
    assert within_sigmas(int((x == 1).sum()), x.size, 2 / 3)
    assert within_sigmas(int((x == -1).sum()), x.size, 1 / 4)
    assert set(np.unique(x[x > -3]).tolist()) == {-2, -1, 1}


def test_step_truncated_mean():
    # E[max(X, -K)] = sum_{j >= K} j p_{-j} - K P(X <= -K) exactly; the truncated
    # variable has finite variance
    K = 1000
    x = np.maximum(sample_steps(RngStream(11, 1), 10 ** 7), -K).astype(float)
    mean = laws.step_first_moment_tail(K) - K * laws.step_tail(K)
    second = (2 / 3 + math.fsum(j * j * laws.step_pmf(-j) for j in range(1, K)) + K * K * laws.step_tail(K))
    sd = math.sqrt(second - mean ** 2)
    assert abs(x.mean() - mean) < 5 * sd / math.sqrt(x.size)


def test_step_chi_square():
    x = sample_steps(RngStream(11, 2), 10 ** 6)
    kmax = 1000
    counts = [int((x == 1).sum())] + [int((x == -k).sum()) for k in range(1, kmax + 1)] + [int((x < -kmax).sum())]
    probs = [2 / 3] + [laws.step_pmf(-k) for k in range(1, kmax + 1)] + [laws.step_tail(kmax + 1)]
    assert chi_square_gof(counts, probs).pvalue > ALPHA


def test_deep_jump_inverts_the_tail():
    # J >= k0 with P(J >= j) = tail(j) / tail(k0)
    k0 = (1 << 20) + 1
    for w in (1.0, 0.9, 0.5, 0.1, 1e-3, 1e-6):
        j = _core._sample_deep_jump(w, k0)
        v = laws.step_tail(k0) * w
        assert j >= k0
        assert laws.step_tail(j) >= v > laws.step_tail(j + 1)
    assert _core._sample_deep_jump(1e-300, k0) == _core.MAX_JUMP


def test_deep_jump_law():
    k0 = 1000
    rng = np.random.default_rng(3)
    j = np.array([_core._sample_deep_jump(1.0 - u, k0) for u in rng.random(100_000)])
    for m in (1500, 3000, 10_000, 100_000):
        p = laws.step_tail(m) / laws.step_tail(k0)
        assert within_sigmas(int((j >= m).sum()), j.size, p)


# ---------------------------------------------------------------------------
# conditioned kernel


def test_conditioned_from_two_is_forced():
    assert set(sample_conditioned_steps(RngStream(1, 0), 2, 100_000).tolist()) == {3}


def test_conditioned_rejects_small_n():
    with pytest.raises(ValueError):
        sample_conditioned_step(RngStream(1, 0), 1)


@pytest.mark.parametrize("n", [3, 5, 10, 50, 500])
def test_conditioned_chi_square(n):
    m = sample_conditioned_steps(RngStream(21, n), n, 10 ** 6)
    ms, probs = laws.kernel_row(n)
    counts = [int((m == t).sum()) for t in ms]
    assert sum(counts) == m.size
    assert chi_square_gof(counts, probs / probs.sum()).pvalue > ALPHA


def test_conditioned_three_frequencies():
    m = sample_conditioned_steps(RngStream(21, 0), 3, 10 ** 6)
    assert within_sigmas(int((m == 2).sum()), m.size, 1 / 6)


@given(st.integers(min_value=2, max_value=10 ** 9), st.integers(min_value=0, max_value=2 ** 32))
@settings(max_examples=200, deadline=None)
def test_conditioned_support(n, seed):
    m = sample_conditioned_steps(RngStream(seed, 0), n, 50)
    assert np.all((m >= 2) & (m <= n + 1))


# ---------------------------------------------------------------------------
# Boltzmann volumes


def test_volume_of_upward_step():
    rng = RngStream(4, 0)
    assert all(sample_boltzmann_volume(rng, 1) == 1 for _ in range(100))


@pytest.mark.parametrize("jump", [0, 2, 5])
def test_volume_rejects_bad_jumps(jump):
    with pytest.raises(ValueError):
        sample_boltzmann_volume(RngStream(4, 0), jump)


def test_volume_d2_zero_mass():
    v = sample_boltzmann_volumes(RngStream(4, 1), -1, 10 ** 6)
    assert within_sigmas(int((v == 0).sum()), v.size, 8 / 9)


def test_volume_d5_mean():
    v = sample_boltzmann_volumes(RngStream(4, 2), -4, 10 ** 7).astype(float)
    se = v.std() / math.sqrt(v.size)
    assert abs(v.mean() - 28 / 3) < 3 * se


@pytest.mark.parametrize("d", [2, 3, 5, 8, 9, 10, 30, 200])
def test_volume_chi_square(d):
    v = sample_boltzmann_volumes(RngStream(4, 100 + d), 1 - d, 400_000)
    top = min(int(v.max()), 200_000)
    pm = laws.BoltzmannVolumeLaw(d).pmf_array(top)
    counts = np.bincount(np.minimum(v, top + 1), minlength=top + 2)
    probs = np.concatenate([pm, [max(0.0, 1 - math.fsum(pm))]])
    assert chi_square_gof(counts, probs / probs.sum()).pvalue > ALPHA


def test_volume_large_polygon_tail():
    # d = 1000 goes through rejection; check the mass around the mode and the mean scale
    d = 1000
    v = sample_boltzmann_volumes(RngStream(4, 9), 1 - d, 20_000)
    law = laws.BoltzmannVolumeLaw(d)
    lo, hi = law.mode // 2, law.mode * 2
    p = math.fsum(law.pmf_array(hi)[lo:hi + 1])
    assert within_sigmas(int(((v >= lo) & (v <= hi)).sum()), v.size, p)


def test_volume_limit_censors():
    v = sample_boltzmann_volumes(RngStream(4, 3), -20, 10_000, limit=50)
    assert v.max() == 51
    assert np.all(v <= 51)


def test_inversion_handoff_is_exact():
    # mass beyond the inversion window for d = 8 comes from conditional rejection
    d = 8
    v = sample_boltzmann_volumes(RngStream(4, 4), 1 - d, 2 * 10 ** 6)
    p = 1 - math.fsum(laws.BoltzmannVolumeLaw(d).pmf_array(_core.INVERSION_MAX_TERMS - 1))
    assert within_sigmas(int((v >= _core.INVERSION_MAX_TERMS).sum()), v.size, p)


def test_annealed_volume_atoms():
    y = sample_annealed_volumes(RngStream(4, 5), 10 ** 6)
    # Y = 1 from every upward step plus the d-gons with exactly one inner vertex
    p1 = 2 / 3 + math.fsum(laws.step_pmf(-j) * laws.boltzmann_volume_pmf(1 + j, 1) for j in range(1, 2000))
    assert within_sigmas(int((y == 1).sum()), y.size, p1)


# ---------------------------------------------------------------------------
# colours and clocks


def test_coloring_frequency_and_independence():
    rng = RngStream(6, 0)
    c = sample_colorings(rng, 10 ** 7)
    assert within_sigmas(int(c.sum()), c.size, 0.5)
    assert sample_coloring(RngStream(6, 1)) in (0, 1)
    # interleave colour and step draws from one stream, as the chain does
    rng = RngStream(6, 2)
    steps = np.empty(200_000)
    cols = np.empty(200_000)
    for i in range(steps.size):
        steps[i] = max(sample_step(rng), -50)
        cols[i] = sample_coloring(rng)
    rho = np.corrcoef(steps, cols)[0, 1]
    assert abs(rho) < 5 / math.sqrt(steps.size)


def test_exponentials():
    e = sample_exponentials(RngStream(6, 3), 0.5, 10 ** 7)
    assert abs(e.mean() - 2) < 5 * 2 / math.sqrt(e.size)
    a = sample_exponentials(RngStream(6, 4), 0.5, 100_000)
    b = sample_exponentials(RngStream(6, 5), 0.5, 100_000)
    assert stats.kstest(np.minimum(a, b), "expon").pvalue > ALPHA
    # superposition of two rate-1/2 clocks has unit intensity
    times = np.sort(np.concatenate([np.cumsum(a), np.cumsum(b)]))
    horizon = min(a.sum(), b.sum())
    gaps = np.diff(times[times < horizon])
    assert abs(gaps.mean() - 1) < 5 / math.sqrt(gaps.size)
    assert sample_exponential(RngStream(6, 6), 3.0) > 0
    with pytest.raises(ValueError):
        sample_exponential(RngStream(6, 6), 0)
