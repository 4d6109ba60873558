import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
import sympy
from hypothesis import given, settings, strategies as st

from uipt_peel import exact_laws as laws
from uipt_peel.exact_laws import BoltzmannVolumeLaw, HarmonicH, StepLaw

from oracles import (boltzmann_exact, catalan, h_mp, h_over_sqrt_pi, kernel_exact, lambda_taylor,
                     step_pmf_exact, step_tail_exact)


def rel(a, b):
    return abs(a - b) / abs(b)


# ---------------------------------------------------------------------------
# step law


@pytest.mark.parametrize("k, expected", [(1, Fraction(2, 3)), (0, 0), (2, 0), (7, 0),
                                          (-1, Fraction(1, 4)), (-2, Fraction(1, 24)), (-3, Fraction(1, 64))])
def test_step_pmf_small_values(k, expected):
    assert laws.step_pmf(k) == pytest.approx(float(expected), rel=1e-15, abs=0)


@given(st.integers(min_value=1, max_value=400))
def test_step_pmf_matches_factorial_formula(j):
    assert rel(laws.step_pmf(-j), float(step_pmf_exact(-j))) < 1e-13


@given(st.integers(min_value=1, max_value=3000))
def test_step_ratio_recurrence(k):
    # p_{-(k+1)} / p_{-k} = (2k - 1) / (2(k + 2))
    assert rel(laws.step_pmf(-(k + 1)) / laws.step_pmf(-k), (2 * k - 1) / (2 * (k + 2))) < 1e-12


def test_step_ratio_recurrence_exact():
    for k in range(1, 60):
        assert step_pmf_exact(-(k + 1)) / step_pmf_exact(-k) == Fraction(2 * k - 1, 2 * (k + 2))


def test_step_masses_strictly_decrease():
    p = [laws.step_pmf(-k) for k in range(1, 5000)]
    assert all(a > b for a, b in zip(p, p[1:]))


@pytest.mark.parametrize("k, expected", [(1, Fraction(1, 3)), (2, Fraction(1, 12))])
def test_step_tail_small(k, expected):
    assert laws.step_tail(k) == pytest.approx(float(expected), rel=1e-15)


def test_step_tail_equals_finite_complement():
    for k in range(1, 120):
        assert rel(laws.step_tail(k), float(step_tail_exact(k))) < 1e-13


def test_step_tail_asymptotics():
    k = 10 ** 4
    assert abs(laws.step_tail(k) * 3 * math.sqrt(math.pi) * k ** 1.5 - 1) < 0.01


def test_step_tail_rejects_nonpositive():
    with pytest.raises(ValueError):
        laws.step_tail(0)


def test_step_first_moment_tail_against_partial_sums():
    # sum_{j>=K} j p_{-j} = 2/3 - sum_{j<K} j p_{-j}, exactly
    for K in (1, 2, 3, 10, 50):
        exact = Fraction(2, 3) - sum((j * step_pmf_exact(-j) for j in range(1, K)), Fraction(0))
        assert rel(laws.step_first_moment_tail(K), float(exact)) < 1e-13


def test_step_law_sums_to_one_symbolically():
    j = sympy.symbols("j", integer=True, positive=True)
    term = 2 * sympy.factorial(2 * j - 2) / (4 ** j * sympy.factorial(j - 1) * sympy.factorial(j + 1))
    total = sympy.Rational(2, 3) + sympy.summation(term, (j, 1, sympy.oo))
    assert sympy.simplify(total - 1) == 0


def test_step_mean_zero_by_telescoping():
    # M(K) = C(2K-2, K-1) 4^(1-K) (3K-1)/(3K) telescopes: M(K) - M(K+1) = K p_{-K},
    # M(K) -> 0, and M(1) = 2/3 = p_1, so sum_k k p_k = 0
    def M(K):
        return Fraction(math.comb(2 * K - 2, K - 1), 4 ** (K - 1)) * Fraction(3 * K - 1, 3 * K)

    for K in range(1, 200):
        assert M(K) - M(K + 1) == K * step_pmf_exact(-K)
        assert rel(laws.step_first_moment_tail(K), float(M(K))) < 1e-13
    assert M(1) == Fraction(2, 3)


def test_step_mean_zero_numerically():
    with mpmath.workdps(30):
        total = mpmath.nsum(lambda j: j * 2 * mpmath.factorial(2 * j - 2)
                            / (4 ** j * mpmath.factorial(j - 1) * mpmath.factorial(j + 1)), [1, mpmath.inf],
                            method="euler-maclaurin")
    assert abs(float(total) - 2 / 3) < 1e-10


def test_step_law_table():
    law = StepLaw(table_size=4096)
    cum = law.cumulative
    assert cum[0] == pytest.approx(2 / 3, abs=1e-16)
    assert np.all(np.diff(cum) > 0) and cum[-1] < 1
    assert abs((1 - cum[-1]) - laws.step_tail(4097)) < 1e-12
    partial = Fraction(2, 3)
    for k in range(1, 200):
        partial += step_pmf_exact(-k)
        assert abs(cum[k] - float(partial)) < 1e-13
    assert law.beyond_table() == laws.step_tail(4097)


def test_integer_arguments_only():
    with pytest.raises(TypeError):
        laws.step_pmf(1.0)
    with pytest.raises(TypeError):
        laws.harmonic_h(True)


# ---------------------------------------------------------------------------
# harmonic function


def test_h_small_values():
    assert laws.harmonic_h(0) == 0 and laws.harmonic_h(-4) == 0
    assert laws.harmonic_h(1) == pytest.approx(math.sqrt(math.pi) / 2, rel=1e-15)
    assert laws.harmonic_h(3) == pytest.approx(15 * math.sqrt(math.pi) / 16, rel=1e-15)
    assert laws.harmonic_h(3) / laws.harmonic_h(2) == pytest.approx(1.25, rel=1e-15)


@given(st.integers(min_value=1, max_value=10 ** 12))
@settings(max_examples=300)
def test_h_matches_multiprecision_gamma(k):
    assert rel(laws.harmonic_h(k), float(h_mp(k))) < 5e-15


@given(st.integers(min_value=1, max_value=500))
def test_h_ratio_is_rational(k):
    exact = h_over_sqrt_pi(k + 1) / h_over_sqrt_pi(k)
    assert exact == Fraction(2 * k + 1, 2 * k)
    assert rel(laws.harmonic_h(k + 1) / laws.harmonic_h(k), float(exact)) < 1e-14


@given(st.integers(min_value=1, max_value=10 ** 6), st.integers(min_value=1, max_value=10 ** 6))
def test_h_subadditive_and_increasing(x, y):
    assert laws.harmonic_h(x + y) <= laws.harmonic_h(x) + laws.harmonic_h(y)
    assert laws.harmonic_h(x + 1) > laws.harmonic_h(x)


def test_harmonicity_exact_for_small_x():
    # sum_k p_k h(x + k) over the finitely many k with x + k >= 1
    for x in range(1, 40):
        total = sum((step_pmf_exact(k) * h_over_sqrt_pi(x + k) for k in range(-(x - 1), 2)), Fraction(0))
        assert total == h_over_sqrt_pi(x)


def test_harmonic_h_cache():
    h = HarmonicH()
    assert h(5) == laws.harmonic_h(5)
    assert h(5) == h(5)


# ---------------------------------------------------------------------------
# peeling kernel


def test_kernel_examples():
    assert laws.kernel_pmf(2, 3) == pytest.approx(1.0, abs=1e-12)
    assert laws.kernel_pmf(2, 2) == 0
    assert laws.kernel_pmf(3, 2) == pytest.approx(1 / 6, rel=1e-14)
    assert laws.kernel_pmf(3, 4) == pytest.approx(5 / 6, rel=1e-14)
    assert laws.kernel_pmf(5, 6) == pytest.approx(laws.harmonic_h(5) / laws.harmonic_h(4) * 2 / 3, rel=1e-15)
    assert laws.kernel_pmf(5, 7) == 0 and laws.kernel_pmf(5, 1) == 0


def test_kernel_rejects_small_n():
    with pytest.raises(ValueError):
        laws.kernel_pmf(1, 2)
    with pytest.raises(ValueError):
        laws.kernel_row(1)


@given(st.integers(min_value=2, max_value=150), st.data())
def test_kernel_matches_exact_rational(n, data):
    m = data.draw(st.integers(min_value=2, max_value=n + 1))
    exact = kernel_exact(n, m)
    if exact == 0:
        assert laws.kernel_pmf(n, m) == 0
    else:
        assert rel(laws.kernel_pmf(n, m), float(exact)) < 1e-12


def test_kernel_rows_exactly_stochastic():
    for n in range(2, 40):
        assert sum((kernel_exact(n, m) for m in range(2, n + 2)), Fraction(0)) == 1


def test_kernel_rows_sum_to_one():
    for n in range(2, 201):
        _, p = laws.kernel_row(n)
        assert abs(math.fsum(p) - 1) < 1e-10


def test_kernel_dominated_by_step_law():
    # sum_{m <= n + j} p_{n,m} <= sum_{k <= j} p_k for every j
    for n in range(2, 201):
        ms, p = laws.kernel_row(n)
        cdf_kernel = np.cumsum(p)
        jumps = ms - n
        below = laws.step_tail(n + 6)
        cdf_step = below + np.cumsum([laws.step_pmf(int(k)) for k in range(-n - 5, 2)])
        step_at = {k: cdf_step[k + n + 5] for k in range(-n - 5, 2)}
        assert all(cdf_kernel[i] <= step_at[int(jumps[i])] + 1e-15 for i in range(len(ms)))


# ---------------------------------------------------------------------------
# Boltzmann volumes


def test_boltzmann_examples():
    assert laws.boltzmann_volume_pmf(2, 0) == pytest.approx(8 / 9, rel=1e-14)
    assert laws.boltzmann_volume_pmf(2, 1) == pytest.approx(16 / 243, rel=1e-14)
    assert laws.boltzmann_volume_ratio(2, 0) == pytest.approx(2 / 27, rel=1e-15)
    assert laws.boltzmann_volume_pmf(1, 1) == 1 and laws.boltzmann_volume_pmf(0, 0) == 0


@given(st.integers(min_value=2, max_value=60), st.integers(min_value=0, max_value=400))
def test_boltzmann_matches_factorial_formula(d, n):
    assert rel(laws.boltzmann_volume_pmf(d, n), float(boltzmann_exact(d, n))) < 1e-12


@given(st.integers(min_value=2, max_value=10), st.integers(min_value=0, max_value=100))
def test_boltzmann_ratio_recurrence(d, n):
    exact = boltzmann_exact(d, n + 1) / boltzmann_exact(d, n)
    assert rel(laws.boltzmann_volume_ratio(d, n), float(exact)) < 1e-14
    direct = laws.boltzmann_volume_pmf(d, n + 1) / laws.boltzmann_volume_pmf(d, n)
    assert rel(laws.boltzmann_volume_ratio(d, n), direct) < 1e-12


@given(st.integers(min_value=2, max_value=10 ** 5), st.integers(min_value=0, max_value=10 ** 9))
@settings(max_examples=200)
def test_boltzmann_log_pmf_far_tail(d, n):
    with mpmath.workdps(40):
        exact = (mpmath.log(2 * (2 * d - 3) * d * (d - 1)) + mpmath.loggamma(2 * d + 3 * n - 3)
                 - mpmath.loggamma(n + 1) - mpmath.loggamma(2 * d + 2 * n - 1)
                 + n * mpmath.log(mpmath.mpf(4) / 27) + (d - 1) * mpmath.log(mpmath.mpf(4) / 9))
    got = laws.boltzmann_volume_log_pmf(d, n)
    assert abs(got - float(exact)) <= 1e-12 * max(1.0, abs(float(exact)))


def test_boltzmann_means():
    assert laws.boltzmann_volume_mean(2) == pytest.approx(1 / 3)
    assert laws.boltzmann_volume_mean(3) == 2
    from uipt_peel.suites import boltzmann_mean_by_summation
    for d in range(2, 11):
        assert rel(boltzmann_mean_by_summation(d), laws.boltzmann_volume_mean(d)) < 1e-6


def test_boltzmann_normalised():
    for d in (2, 3, 5, 10):
        law = BoltzmannVolumeLaw(d)
        p = law.pmf_array(200_000)
        tail_n = 200_000
        # the tail beyond N is about p(N) N / 1.5 for an n^(-5/2) pmf
        assert abs(math.fsum(p) + p[-1] * tail_n / 1.5 - 1) < 1e-6


def test_boltzmann_mode():
    for d in (2, 3, 6, 10, 25, 50):
        law = BoltzmannVolumeLaw(d)
        p = law.pmf_array(5 * d * d)
        assert law.mode == int(np.argmax(p))


# ---------------------------------------------------------------------------
# ladder laws, Lambda and the annealed constant


def test_ladder_examples():
    assert laws.ladder_height_pmf(1) == pytest.approx(1 / 2)
    assert laws.ladder_height_pmf(2) == pytest.approx(1 / 8)
    assert laws.ladder_jump_pmf(1) == pytest.approx(3 / 8)
    assert laws.ladder_jump_pmf(2) == pytest.approx(1 / 8)


def test_ladder_laws_normalised():
    K = 10 ** 5
    h = math.fsum(laws.ladder_height_pmf(k) for k in range(1, K))
    # remaining mass: sum_{k >= K} step_tail(k) / p_1, which equals first-moment
    # tail minus (K - 1) times the step tail at K
    rest = (laws.step_first_moment_tail(K) - (K - 1) * laws.step_tail(K)) / laws.P_UP
    assert abs(h + rest - 1) < 1e-10
    jump = math.fsum(laws.ladder_jump_pmf(k) for k in range(1, K))
    assert abs(jump + laws.step_first_moment_tail(K) / laws.P_UP - 1) < 1e-10


def test_lambda_first_values():
    want = [Fraction(1, 2), Fraction(1, 8), Fraction(1, 16), Fraction(5, 128)]
    for n, w in enumerate(want, 1):
        assert laws.lambda_pmf_exact(n) == w == lambda_taylor(n)
        assert laws.lambda_pmf(n) == float(w)


def test_lambda_against_series_expansion():
    s = sympy.symbols("s")
    series = sympy.series(1 - sympy.sqrt(1 - s), s, 0, 30).removeO()
    for n in range(1, 30):
        assert Fraction(str(series.coeff(s, n))) == laws.lambda_pmf_exact(n)


@given(st.integers(min_value=1, max_value=300))
def test_lambda_catalan(n):
    exact = Fraction(catalan(n - 1), 2 ** (2 * n - 1))
    assert laws.lambda_pmf_exact(n) == exact
    assert rel(laws.lambda_pmf(n), float(exact)) < 1e-12


def test_lambda_survival_and_asymptotics():
    for n in range(0, 50):
        tail = 1 - sum((laws.lambda_pmf_exact(k) for k in range(1, n + 1)), Fraction(0))
        assert rel(laws.lambda_survival(n), float(tail)) < 1e-13
    n = 10 ** 6
    assert abs(laws.lambda_pmf(n) * 2 * math.sqrt(math.pi) * n ** 1.5 - 1) < 1e-5


def test_annealed_tail_constant():
    with mpmath.workdps(30):
        exact = mpmath.mpf(2) ** 1.5 / (mpmath.mpf(3) ** 1.75 * mpmath.gamma(0.25))
    assert laws.annealed_tail_constant() == pytest.approx(float(exact), rel=1e-14)
    assert 0.113 < laws.annealed_tail_constant() < 0.115


def test_conditional_volume_growth_is_bounded():
    # a jump of -j swallows a (j+1)-gon; its mean volume over 1 + j^2 stays below 2/3
    # and approaches it, so the supremum over j <= 1000 is finite and attained at the top
    ratios = [laws.boltzmann_volume_mean(j + 1) / (1 + j * j) for j in range(1, 1001)]
    assert all(0 <= r < 2 / 3 for r in ratios)
    assert ratios[-1] == pytest.approx(2 / 3, rel=3e-3)
    assert ratios == sorted(ratios)
