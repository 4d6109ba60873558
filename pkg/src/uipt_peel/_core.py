"""Compiled kernels shared by the samplers, the peeling chain and the ladder walks.

Everything here is a numba ``njit`` function operating on plain scalars, numpy
arrays and ``numpy.random.Generator`` objects.  The Python-facing modules wrap
these with argument checking.
"""

import math
from fractions import Fraction

import numpy as np
from numba import njit

SQRT_PI = math.sqrt(math.pi)
LOG_4_9 = math.log(4.0 / 9.0)
LOG_2PI = math.log(2.0 * math.pi)
LOG_2 = math.log(2.0)

# Saturation ceiling for volume counters (well inside int64).
VOLUME_CEILING = 1 << 62
# Largest jump magnitude the step sampler will return.
MAX_JUMP = 1 << 48
# Boundary sizes below this use streaming inversion for Boltzmann volumes.
INVERSION_MAX_D = 8
# Inversion gives up after this many terms and finishes by conditional rejection.
INVERSION_MAX_TERMS = 2000
# Jumps larger than this are treated as volume-saturating.
HUGE_JUMP = 1 << 30

# Outcome flags for a peeling run.
FLAG_THETA_CENSORED = 1
FLAG_VTHETA_CENSORED = 2
FLAG_VRED_CENSORED = 4
FLAG_HARD_CAP = 8


# ---------------------------------------------------------------------------
# special functions


@njit(cache=True)
def gamma_half_ratio(x):
    """Gamma(x + 1/2) / Gamma(x) for real x > 0."""
    if x >= 64.0:
        y = 1.0 / x
        s = 1.0 + y * (-1.0 / 8.0 + y * (1.0 / 128.0 + y * (5.0 / 1024.0 + y * (
            -21.0 / 32768.0 + y * (-399.0 / 262144.0 + y * (869.0 / 4194304.0))))))
        return math.sqrt(x) * s
    return math.exp(math.lgamma(x + 0.5) - math.lgamma(x))


# exact rationals rounded once: h(k) / sqrt(pi) = (2k)! / (4^k k! (k-1)!) and
# C(2j-2, j-1) / 4^(j-1); beyond the tables the asymptotic series takes over
_H_SMALL = np.array([0.0] + [SQRT_PI * float(Fraction(math.factorial(2 * k), 4 ** k * math.factorial(k)
                                                       * math.factorial(k - 1))) for k in range(1, 64)])
_CATALAN_SMALL = np.array([0.0] + [float(Fraction(math.comb(2 * j - 2, j - 1), 4 ** (j - 1)))
                                   for j in range(1, 65)])


@njit(cache=True)
def harmonic_h(k):
    if k <= 0:
        return 0.0
    if k < 64:
        return _H_SMALL[k]
    return gamma_half_ratio(float(k))


@njit(cache=True)
def catalan_ratio(j):
    # C(2j-2, j-1) / 4^(j-1) = Gamma(j - 1/2) / (sqrt(pi) Gamma(j))
    if j <= 64.0 and j == math.floor(j):
        return _CATALAN_SMALL[int(j)]
    return 1.0 / (SQRT_PI * gamma_half_ratio(j - 0.5))


@njit(cache=True)
def step_pmf(k):
    if k == 1:
        return 2.0 / 3.0
    if k >= 0:
        return 0.0
    j = -k
    return catalan_ratio(float(j)) / (2.0 * j * (j + 1.0))


@njit(cache=True)
def step_tail(k):
    """P(xi <= -k) for k >= 1."""
    return catalan_ratio(float(k)) / (3.0 * k)


@njit(cache=True)
def _stirling_remainder(x):
    # log Gamma(x + 1) - (x log x - x + log(2 pi x) / 2), x >= 1
    if x < 30.0:
        return math.lgamma(x + 1.0) - (x * math.log(x) - x + 0.5 * math.log(2.0 * math.pi * x))
    y = 1.0 / x
    y2 = y * y
    return y * (1.0 / 12.0 - y2 * (1.0 / 360.0 - y2 * (1.0 / 1260.0 - y2 / 1680.0)))


@njit(cache=True)
def log_boltzmann_pmf(d, n):
    """Log of the probability that a free Boltzmann d-gon has n inner vertices.

    The powers (4/27)^n (4/9)^(d-1) are absorbed into the Stirling expansion,
    which keeps the expression accurate for arbitrarily large d and n.
    """
    df = float(d)
    if n == 0:
        return math.log(df) + (df - 1.0) * LOG_4_9
    nf = float(n)
    a = 2.0 * df + 3.0 * nf - 4.0
    c = 2.0 * df + 2.0 * nf - 2.0
    out = LOG_2 + math.log(2.0 * df - 3.0) + math.log(df) + math.log(df - 1.0)
    out += nf * math.log1p((2.0 * df - 4.0) / (3.0 * nf))
    out += c * math.log1p(-(2.0 * df + 2.0) / (3.0 * c))
    out += 2.0 - 2.0 * math.log(a) + 0.5 * (math.log(a / (nf * c)) - LOG_2PI)
    out += _stirling_remainder(a) - _stirling_remainder(nf) - _stirling_remainder(c)
    return out


@njit(cache=True)
def boltzmann_ratio(d, n):
    """P(d, n+1) / P(d, n)."""
    a = 2.0 * d + 3.0 * n
    b = 2.0 * d + 2.0 * n
    return (4.0 / 27.0) * (a - 1.0) * (a - 2.0) * (a - 3.0) / ((n + 1.0) * b * (b - 1.0))


@njit(cache=True)
def boltzmann_mode(d):
    """Smallest n with P(d, n+1) <= P(d, n); the law is unimodal."""
    df = float(d)
    a2 = -270.0
    a1 = 36.0 * df * df - 450.0 * df + 186.0
    a0 = ((32.0 * df - 204.0) * df + 142.0) * df - 24.0
    if a0 <= 0.0:
        return 0
    root = (-a1 - math.sqrt(a1 * a1 - 4.0 * a2 * a0)) / (2.0 * a2)
    m = int(math.ceil(root))
    if m < 0:
        m = 0
    # local correction against rounding of the root
    while m > 0 and (a2 * (m - 1.0) + a1) * (m - 1.0) + a0 <= 0.0:
        m -= 1
    while (a2 * m + a1) * m + a0 > 0.0:
        m += 1
    return m


# ---------------------------------------------------------------------------
# step law sampling


@njit(cache=True)
def build_step_table(size):
    """cum[0] = p_1, cum[j] = p_1 + p_{-1} + ... + p_{-j} for 1 <= j <= size."""
    cum = np.empty(size + 1)
    cum[0] = 2.0 / 3.0
    for j in range(1, size + 1):
        cum[j] = 1.0 - step_tail(j + 1)
    return cum


@njit(cache=True)
def _sample_deep_jump(w, k0):
    # J >= k0 with P(J >= j) = tail(j) / tail(k0), inverting the closed-form tail at w in (0, 1]
    v = step_tail(k0) * w
    guess = (3.0 * SQRT_PI * v) ** (-2.0 / 3.0)
    if guess > MAX_JUMP:
        return MAX_JUMP
    j = int(guess)
    if j < k0:
        j = k0
    while j > k0 and step_tail(j) < v:
        j -= 1
    while step_tail(j + 1) >= v:
        j += 1
    return j


@njit(cache=True, inline="always")
def sample_step(gen, cum):
    """Inversion of the step law using the cumulative table ``cum``.

    Small jumps are found by a short scan; larger ones by an asymptotic guess
    refined on the table, which avoids a cache-hostile binary search.
    """
    u = gen.random()
    if u < cum[0]:
        return 1
    size = cum.shape[0] - 1
    top = 16 if size > 16 else size
    for j in range(1, top + 1):
        if u < cum[j]:
            return -j
    if u >= cum[size]:
        return -_sample_deep_jump(1.0 - gen.random(), size + 1)
    # smallest j in (top, size] with u < cum[j]; tail(j + 1) ~ 1/(3 sqrt(pi) j^1.5)
    guess = (3.0 * SQRT_PI * (1.0 - u)) ** (-2.0 / 3.0) - 1.0
    j = int(guess)
    if j <= top:
        j = top + 1
    elif j > size:
        j = size
    while j > top + 1 and u < cum[j - 1]:
        j -= 1
    while u >= cum[j]:
        j += 1
    return -j


@njit(cache=True, inline="always")
def sample_conditioned_step(gen, cum, n):
    """Next boundary size m from size n >= 2 under the h-transformed kernel."""
    hn = harmonic_h(n)
    while True:
        k = sample_step(gen, cum)
        if k == 1:
            return n + 1
        x = n - 1 + k
        if x <= 0:
            continue
        if gen.random() * hn < harmonic_h(x):
            return n + k


# ---------------------------------------------------------------------------
# Boltzmann volumes


@njit(cache=True, inline="always")
def _boltzmann_rejection(gen, d, lower):
    """Exact draw from the volume law of a d-gon conditioned on n >= lower.

    Envelope: flat at the (slightly inflated) modal mass up to m + K0 - 1, then
    2 mu / (k (k + 1)) at m + k; the latter dominates the pmf because the law is
    nonincreasing beyond the mode and has mean mu.
    """
    df = float(d)
    mu = (df - 1.0) * (2.0 * df - 3.0) / 3.0
    m = boltzmann_mode(d)
    lp = log_boltzmann_pmf(d, m)
    lp = max(lp, log_boltzmann_pmf(d, m + 1))
    if m > 0:
        lp = max(lp, log_boltzmann_pmf(d, m - 1))
    p_env = math.exp(lp) * (1.0 + 1e-9)
    k0 = int(math.ceil(0.5 * (-1.0 + math.sqrt(1.0 + 8.0 * mu / p_env))))
    if k0 < 1:
        k0 = 1
    while k0 > 1 and 2.0 * mu / ((k0 - 1.0) * k0) <= p_env:
        k0 -= 1
    while 2.0 * mu / (k0 * (k0 + 1.0)) > p_env:
        k0 += 1
    flat = (m + k0) * p_env
    total = flat + 2.0 * mu / k0
    while True:
        if gen.random() * total < flat:
            n = int(gen.random() * (m + k0))
            g = p_env
        else:
            kf = k0 / (1.0 - gen.random())
            if kf > 4.0e18:
                continue
            k = int(kf)
            n = m + k
            g = 2.0 * mu / (k * (k + 1.0))
        if n < lower:
            continue
        if gen.random() * g <= math.exp(log_boltzmann_pmf(d, n)):
            return n


@njit(cache=True, inline="always")
def sample_boltzmann(gen, d, limit):
    """Inner-vertex count of a free Boltzmann d-gon, censored at limit + 1."""
    if d <= INVERSION_MAX_D:
        u = gen.random()
        p = d * (4.0 / 9.0) ** (d - 1)
        acc = p
        n = 0
        while u >= acc:
            if n >= limit:
                return limit + 1
            p *= boltzmann_ratio(float(d), float(n))
            n += 1
            acc += p
            if n >= INVERSION_MAX_TERMS:
                n = _boltzmann_rejection(gen, d, n)
                break
    else:
        n = _boltzmann_rejection(gen, d, 0)
    if n > limit:
        return limit + 1
    return n


@njit(cache=True, inline="always")
def jump_volume(gen, jump, limit):
    if jump == 1:
        return 1
    if -jump > HUGE_JUMP:
        # volumes of order jump**2 would overflow the counters; report saturation
        return limit + 1
    return sample_boltzmann(gen, 1 - jump, limit)


@njit(cache=True)
def sat_add(a, b):
    s = a + b
    if s > VOLUME_CEILING:
        return VOLUME_CEILING
    return s


# ---------------------------------------------------------------------------
# peeling chain


@njit(cache=True)
def reflect(r, b):
    if r < 0:
        return 0, b + r
    if b < 0:
        return r + b, 0
    return r, b


@njit(cache=True, inline="always")
def peel_step(gen, cum, s, r, b, v_red, v_blue, vcap):
    """One peeling step.  Returns (s, r, b, eta, jump, volume, v_red, v_blue).

    Each colour's volume saturates at vcap + 1; once saturated no further
    volume draws are made for that colour.
    """
    m = sample_conditioned_step(gen, cum, s)
    jump = m - s
    eta = 1 if gen.random() < 0.5 else 0
    if eta == 1:
        r, b = reflect(r + jump, b)
        room = vcap - v_red
    else:
        r, b = reflect(r, b + jump)
        room = vcap - v_blue
    if room < 0:
        vol = 0
    else:
        vol = jump_volume(gen, jump, room)
    if eta == 1:
        v_red = min(v_red + vol, vcap + 1)
    else:
        v_blue = min(v_blue + vol, vcap + 1)
    return m, r, b, eta, jump, vol, v_red, v_blue


@njit(cache=True)
def run_peeling(gen, cum, r0, b0, step_cap, vcap, extend, vstop, max_steps):
    """Run the chain to theta.

    Without ``extend`` the run stops at theta or after step_cap steps.  With
    ``extend`` a run still alive at step_cap keeps going until theta, until the
    red volume exceeds vstop (both volume statistics are then known to exceed
    vstop) or until max_steps.  Volumes saturate at vcap + 1.

    Returns (steps, flags, delta, v_theta, v_red_before, r, b).
    """
    s = r0 + b0
    r = r0
    b = b0
    v_red = 0
    v_blue = 0
    delta = 1 if b0 > 0 else 0
    n = 0
    flags = 0
    red_before = 0
    while True:
        if n >= step_cap and (not extend or v_red > vstop):
            flags = FLAG_THETA_CENSORED
            break
        if n >= max_steps:
            flags = FLAG_THETA_CENSORED | FLAG_HARD_CAP
            break
        red_before = v_red
        s, r, b, eta, jump, vol, v_red, v_blue = peel_step(gen, cum, s, r, b, v_red, v_blue, vcap)
        n += 1
        if r == 0:
            break
        if b == 0:
            delta = n
    v_tot = v_red + v_blue
    if flags != 0:
        # run stopped before theta: recorded volumes are lower bounds
        flags |= FLAG_VTHETA_CENSORED | FLAG_VRED_CENSORED
        red_before = v_red
    else:
        if v_tot > vcap:
            flags |= FLAG_VTHETA_CENSORED
        if red_before > vcap:
            flags |= FLAG_VRED_CENSORED
    if v_tot > vcap + 1:
        v_tot = vcap + 1
    return n, flags, delta, v_tot, red_before, r, b


@njit(cache=True)
def peel_path(gen, cum, r0, b0, steps, vcap, out):
    """Record (S, R, B, eta, jump, volume) for up to ``steps`` steps or until theta."""
    s = r0 + b0
    r = r0
    b = b0
    v_red = 0
    v_blue = 0
    for n in range(steps):
        s, r, b, eta, jump, vol, v_red, v_blue = peel_step(gen, cum, s, r, b, v_red, v_blue, vcap)
        out[n, 0] = s
        out[n, 1] = r
        out[n, 2] = b
        out[n, 3] = eta
        out[n, 4] = jump
        out[n, 5] = vol
        if r == 0:
            return n + 1
    return steps


# ---------------------------------------------------------------------------
# unconditioned walks and ladder legs


@njit(cache=True)
def leg_down(gen, cum, t_cap):
    """Walk from 0 at rate 1/2 until it first goes below 0.

    Returns (T, H, L, Vb, censored).
    """
    x = 0
    t = 0.0
    vol = 0
    while True:
        t += 2.0 * gen.standard_exponential()
        if t > t_cap:
            return t_cap, 0, 0, vol, True
        k = sample_step(gen, cum)
        vol = sat_add(vol, jump_volume(gen, k, VOLUME_CEILING))
        x += k
        if x < 0:
            return t, -x, -k, vol, False


@njit(cache=True)
def leg_up(gen, cum, level, t_cap):
    """Walk from 0 at rate 1/2 until it first reaches ``level``.  Returns (U, Vr, censored)."""
    x = 0
    t = 0.0
    vol = 0
    while True:
        t += 2.0 * gen.standard_exponential()
        if t > t_cap:
            return t_cap, vol, True
        k = sample_step(gen, cum)
        vol = sat_add(vol, jump_volume(gen, k, VOLUME_CEILING))
        x += k
        if x == level:
            return t, vol, False


@njit(cache=True)
def quadruple_block(gen, cum, count, t_cap, out):
    """Fill ``out[i] = (T, U, H, Vb, Vr, L, censored)`` for i < count.

    When either leg exceeds t_cap both durations are replaced by t_cap plus
    independent unit exponentials; this map is symmetric in (T, U) and keeps
    the law atomless.
    """
    for i in range(count):
        t, h, ln, vb, cens = leg_down(gen, cum, t_cap)
        u = 0.0
        vr = 0
        if not cens:
            u, vr, cens = leg_up(gen, cum, h, t_cap)
        if cens:
            t = t_cap + gen.standard_exponential()
            u = t_cap + gen.standard_exponential()
        out[i, 0] = t
        out[i, 1] = u
        out[i, 2] = h
        out[i, 3] = vb
        out[i, 4] = vr
        out[i, 5] = ln
        out[i, 6] = 1.0 if cens else 0.0


@njit(cache=True)
def walk_block(gen, cum, count, steps, threshold, out):
    """For each of ``count`` walks of ``steps`` steps record (S_steps >= 0, min S >= -threshold)."""
    for i in range(count):
        x = 0
        lo = 0
        for _ in range(steps):
            x += sample_step(gen, cum)
            if x < lo:
                lo = x
        out[i, 0] = 1 if x >= 0 else 0
        out[i, 1] = 1 if lo >= -threshold else 0


@njit(cache=True)
def annealed_block(gen, cum, count, limit, out):
    """Annealed Boltzmann volume Y^(X) with X = 1 - xi; X < 2 contributes 1."""
    for i in range(count):
        k = sample_step(gen, cum)
        out[i] = jump_volume(gen, k, limit)


# ---------------------------------------------------------------------------
# conditioned R walk and the joint two-walk picture


@njit(cache=True)
def conditioned_r_path(gen, cum, r0, t_cap, max_events, times, levels, vols):
    """Continuous-time R conditioned positive, from r0.  Records (time, level, volume) after each jump."""
    x = r0
    t = 0.0
    n = 0
    vol = 0
    while n < max_events:
        t += 2.0 * gen.standard_exponential()
        if t > t_cap:
            break
        m = sample_conditioned_step(gen, cum, x + 1) - 1
        vol = sat_add(vol, jump_volume(gen, m - x, VOLUME_CEILING))
        x = m
        times[n] = t
        levels[n] = x
        vols[n] = vol
        n += 1
    return n


@njit(cache=True)
def conditioned_r_last_passage(gen, cum, level, stop_level, max_events):
    """Run R from 1 until it reaches stop_level; return the last exit time from ``level`` and its volume.

    The exit time is the instant of the last +1 jump out of ``level``; the
    volume is the accumulated volume through that jump.  Returns
    (U, Vr, reached_stop).
    """
    x = 1
    t = 0.0
    vol = 0
    last_t = -1.0
    last_v = 0
    n = 0
    while x < stop_level:
        if n >= max_events:
            return last_t, last_v, False
        t += 2.0 * gen.standard_exponential()
        m = sample_conditioned_step(gen, cum, x + 1) - 1
        vol = sat_add(vol, jump_volume(gen, m - x, VOLUME_CEILING))
        if x == level and m == level + 1:
            last_t = t
            last_v = vol
        x = m
        n += 1
    return last_t, last_v, True


@njit(cache=True)
def joint_path(gen, cum, max_events, out):
    """Superposed (R from 1 conditioned positive, B from 0), unit total rate.

    out[n] = (time, R, B, volume of this jump, eta) after event n.
    """
    r = 1
    b = 0
    t = 0.0
    for n in range(max_events):
        t += gen.standard_exponential()
        if gen.random() < 0.5:
            m = sample_conditioned_step(gen, cum, r + 1) - 1
            k = m - r
            r = m
            eta = 1
        else:
            k = sample_step(gen, cum)
            b += k
            eta = 0
        out[n, 0] = t
        out[n, 1] = r
        out[n, 2] = b
        out[n, 3] = jump_volume(gen, k, VOLUME_CEILING)
        out[n, 4] = eta
    return max_events


@njit(cache=True)
def lambda_runs(gen, cum, runs, k_cap, k_min, t_cap, out, lengths):
    """For each run draw quadruples until the cumulative T drops below the cumulative U.

    At least k_min and at most k_cap quadruples are drawn per run; out[i, j]
    holds the j-th quadruple of run i (rows past lengths[i] are untouched).
    """
    row = np.empty((1, 7))
    for i in range(runs):
        ts = 0.0
        us = 0.0
        found = False
        j = 0
        while j < k_cap:
            quadruple_block(gen, cum, 1, t_cap, row)
            for c in range(7):
                out[i, j, c] = row[0, c]
            ts += row[0, 0]
            us += row[0, 1]
            j += 1
            if ts < us:
                found = True
            if found and j >= k_min:
                break
        lengths[i] = j
