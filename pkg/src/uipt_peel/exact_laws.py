"""Closed-form laws of the boundary walk, its harmonic function, Boltzmann volumes and ladder variables.

All gamma and factorial expressions are evaluated in log space (or through an
asymptotic expansion of Gamma(x + 1/2)/Gamma(x) for large x), so the functions
stay accurate far into the tails.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from . import _core

P_UP = 2.0 / 3.0


def _check_int(name, value):
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise TypeError(f"{name} must be an integer, got {value!r}")
    return int(value)


def step_pmf(k: int) -> float:
    """Probability that one step of the boundary walk equals k."""
    k = _check_int("k", k)
    return float(_core.step_pmf(k))


def step_tail(k: int) -> float:
    """P(xi <= -k) for k >= 1.

    Uses the telescoped closed form C(2k-2, k-1) / (3k 4^(k-1)), which equals
    1 - 2/3 - sum_{j<k} p_{-j} exactly.
    """
    k = _check_int("k", k)
    if k < 1:
        raise ValueError("step_tail needs k >= 1")
    return float(_core.step_tail(k))


def step_first_moment_tail(k: int) -> float:
    """sum_{j >= k} j p_{-j}, in closed form C(2k-2, k-1) 4^(1-k) (3k-1)/(3k)."""
    k = _check_int("k", k)
    if k < 1:
        raise ValueError("need k >= 1")
    return float(_core.catalan_ratio(float(k)) * (3.0 * k - 1.0) / (3.0 * k))


def harmonic_h(k: int) -> float:
    """Gamma(k + 1/2) / Gamma(k) for k >= 1, zero otherwise."""
    k = _check_int("k", k)
    return float(_core.harmonic_h(k))


def kernel_pmf(n: int, m: int) -> float:
    """Transition probability of the boundary size from n to m under the peeling law."""
    n = _check_int("n", n)
    m = _check_int("m", m)
    if n < 2:
        raise ValueError("boundary size n must be >= 2")
    if m < 2 or m > n + 1:
        return 0.0
    return float(_core.harmonic_h(m - 1) / _core.harmonic_h(n - 1) * _core.step_pmf(m - n))


def kernel_row(n: int) -> tuple[np.ndarray, np.ndarray]:
    """All reachable targets m = 2..n+1 from n and their probabilities."""
    n = _check_int("n", n)
    if n < 2:
        raise ValueError("boundary size n must be >= 2")
    ms = np.arange(2, n + 2)
    probs = np.array([kernel_pmf(n, int(m)) for m in ms])
    return ms, probs


def boltzmann_volume_log_pmf(d: int, n: int) -> float:
    d = _check_int("d", d)
    n = _check_int("n", n)
    if d < 2:
        raise ValueError("log pmf is only defined for d >= 2")
    if n < 0:
        return -math.inf
    return float(_core.log_boltzmann_pmf(d, n))


def boltzmann_volume_pmf(d: int, n: int) -> float:
    """Probability that a free Boltzmann triangulation of the d-gon has n inner vertices.

    For d < 2 (an upward boundary step) the volume is the point mass at 1.
    """
    d = _check_int("d", d)
    n = _check_int("n", n)
    if d < 2:
        return 1.0 if n == 1 else 0.0
    if n < 0:
        return 0.0
    return math.exp(_core.log_boltzmann_pmf(d, n))


def boltzmann_volume_ratio(d: int, n: int) -> float:
    """P(d, n+1) / P(d, n) from the rational recurrence."""
    return float(_core.boltzmann_ratio(float(d), float(n)))


def boltzmann_volume_mean(d: int) -> float:
    d = _check_int("d", d)
    if d < 2:
        raise ValueError("d must be >= 2")
    return (d - 1) * (2 * d - 3) / 3.0


def ladder_height_pmf(k: int) -> float:
    """Law of the overshoot below zero at the first strict descending ladder epoch."""
    k = _check_int("k", k)
    if k < 1:
        raise ValueError("k must be >= 1")
    return step_tail(k) / P_UP


def ladder_jump_pmf(k: int) -> float:
    """Law of the size of the jump that crosses below zero (size-biased step law)."""
    k = _check_int("k", k)
    if k < 1:
        raise ValueError("k must be >= 1")
    return k * step_pmf(-k) / P_UP


def lambda_pmf_exact(n: int) -> Fraction:
    """Catalan(n-1) / 2^(2n-1) as an exact rational."""
    n = _check_int("n", n)
    if n < 1:
        raise ValueError("n must be >= 1")
    catalan = math.comb(2 * n - 2, n - 1) // n
    return Fraction(catalan, 2 ** (2 * n - 1))


def lambda_pmf(n: int) -> float:
    """P(Lambda = n), the coefficients of 1 - sqrt(1 - s)."""
    n = _check_int("n", n)
    if n < 1:
        raise ValueError("n must be >= 1")
    # C(2n-2, n-1) / 4^(n-1) / (2n)
    return float(_core.catalan_ratio(float(n)) / (2.0 * n))


def lambda_survival(n: int) -> float:
    """P(Lambda > n) = C(2n, n) / 4^n."""
    n = _check_int("n", n)
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return 1.0
    return float(_core.catalan_ratio(float(n + 1)))


def annealed_tail_constant() -> float:
    """Limit of x^(3/4) P(Y > x) for the Boltzmann volume of a d-gon with d = 1 - xi."""
    return 2.0 ** 1.5 / (3.0 ** 1.75 * math.gamma(0.25))


@dataclass(frozen=True)
class StepLaw:
    """Cumulative table of the step law over +1, -1, ..., -table_size."""

    table_size: int = 1 << 20
    cum_neg: np.ndarray = field(init=False, repr=False, compare=False)
    p_up: float = P_UP

    def __post_init__(self):
        if self.table_size < 1:
            raise ValueError("table_size must be positive")
        table = _core.build_step_table(self.table_size)
        table.setflags(write=False)
        object.__setattr__(self, "cum_neg", table)

    @property
    def cumulative(self) -> np.ndarray:
        """cum[0] = p_1 and cum[j] = p_1 + p_{-1} + ... + p_{-j}."""
        return self.cum_neg

    def pmf(self, k: int) -> float:
        return step_pmf(k)

    def tail(self, k: int) -> float:
        return step_tail(k)

    def beyond_table(self) -> float:
        return step_tail(self.table_size + 1)


@lru_cache(maxsize=None)
def default_step_law() -> StepLaw:
    return StepLaw()


class HarmonicH:
    """Callable h with a per-argument cache."""

    def __init__(self):
        self._cache: dict[int, float] = {}

    def __call__(self, k: int) -> float:
        k = _check_int("k", k)
        value = self._cache.get(k)
        if value is None:
            value = harmonic_h(k)
            self._cache[k] = value
        return value


@dataclass(frozen=True)
class BoltzmannVolumeLaw:
    d: int

    def __post_init__(self):
        if _check_int("d", self.d) < 2:
            raise ValueError("d must be >= 2")

    def pmf(self, n: int) -> float:
        return boltzmann_volume_pmf(self.d, n)

    def log_pmf(self, n: int) -> float:
        return boltzmann_volume_log_pmf(self.d, n)

    @property
    def mean(self) -> float:
        return boltzmann_volume_mean(self.d)

    @property
    def mode(self) -> int:
        return int(_core.boltzmann_mode(self.d))

    def pmf_array(self, n_max: int) -> np.ndarray:
        """pmf at 0..n_max via the ratio recurrence, renormalised in log space at each step."""
        out = np.empty(n_max + 1)
        log_p = _core.log_boltzmann_pmf(self.d, 0)
        out[0] = log_p
        for n in range(n_max):
            log_p += math.log(_core.boltzmann_ratio(float(self.d), float(n)))
            out[n + 1] = log_p
        return np.exp(out)
