"""Closed-form rates, in bits per time bin, for BPSK readout schemes.

All functions accept scalars or numpy arrays.  Small-argument cancellations
(1 - e^-x, 1 - H(1/2 - d), H(lambda p) - lambda H(p)) are evaluated in forms
that stay accurate down to mean photon numbers of 1e-12.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LN2 = np.log(2.0)
BETA = 2.0 / LN2
#: Sequence length above which the hybrid scheme drops the +-(all-ones) words.
HYBRID_THRESHOLD = np.e * 2.0**BETA + 1.0

_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class ChannelParams:
    n_bar: float
    L: int
    lam: float = 1.0
    transmission: float = 1.0

    def __post_init__(self):
        if not self.n_bar >= 0:
            raise ValueError(f"n_bar must be nonnegative, got {self.n_bar}")
        if self.L < 1:
            raise ValueError(f"L must be positive, got {self.L}")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda must be in [0, 1], got {self.lam}")
        if not 0.0 < self.transmission <= 1.0:
            raise ValueError(f"transmission must be in (0, 1], got {self.transmission}")

    @property
    def effective_n_bar(self) -> float:
        return self.transmission * self.n_bar


def _out(x):
    return x[()] if isinstance(x, np.ndarray) and x.ndim == 0 else x


def _check_range(name, x, lo, hi, lo_open=False, hi_open=False):
    x = np.asarray(x, dtype=float)
    bad = np.isnan(x) | ((x <= lo) if lo_open else (x < lo)) | ((x >= hi) if hi_open else (x > hi))
    if np.any(bad):
        lb, rb = "(" if lo_open else "[", ")" if hi_open else "]"
        raise ValueError(f"{name} must lie in {lb}{lo}, {hi}{rb}")
    return x


def _xlog2inv(x):
    """x * log2(1/x) with 0 log 0 = 0."""
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(x > 0, -x * np.log(np.where(x > 0, x, 1.0)) / LN2, 0.0)


def _ylog2inv_complement(x):
    """(1 - x) * log2(1/(1 - x)), accurate for small x."""
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(x < 1, -(1 - x) * np.log1p(-np.where(x < 1, x, 0.0)) / LN2, 0.0)


def binary_entropy(x):
    x = _check_range("probability", x, 0.0, 1.0)
    return _out(_xlog2inv(x) + _ylog2inv_complement(x))


def bsc_capacity_from_bias(y):
    """1 - H((1 - y)/2) for a bias y in [0, 1].

    Uses (1+y) ln(1+y) + (1-y) ln(1-y) = sum_k y^(2k) / (k (2k - 1)) for small y.
    """
    y = np.asarray(y, dtype=float)
    small = y < 0.05
    ys = np.where(small, y, 0.0)
    y2 = ys * ys
    series = np.zeros_like(ys)
    term = np.ones_like(ys)
    for k in range(1, 12):
        term = term * y2
        series = series + term / (k * (2 * k - 1))
    yl = np.where(small, 0.5, y)
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = (1 + yl) * np.log1p(yl) + np.where(yl < 1, (1 - yl) * np.log1p(-np.minimum(yl, 1.0 - 1e-300)), 0.0)
    return _out(np.where(small, series, direct) / (2 * LN2))


def helstrom_error(n_eff):
    """Minimum error for telling |a> from |-a> with |a|^2 = n_eff."""
    n = _check_range("mean photon number", n_eff, 0.0, np.inf)
    return _out(0.5 * (1.0 - _helstrom_bias(n)))


def _helstrom_bias(n):
    return np.sqrt(-np.expm1(-4.0 * n))


def rate_individual(n_bar):
    """Binary symmetric channel at the Helstrom error rate."""
    n = _check_range("n_bar", n_bar, 0.0, np.inf)
    return bsc_capacity_from_bias(_helstrom_bias(n))


def rate_individual_asymptotic(n_bar):
    return BETA * np.asarray(n_bar, dtype=float)


def holevo_bpsk(n_bar):
    n = _check_range("n_bar", n_bar, 0.0, np.inf)
    return binary_entropy(-0.5 * np.expm1(-2.0 * n))


def holevo_bpsk_asymptotic(n_bar):
    n = np.asarray(n_bar, dtype=float)
    return _out(_xlog2inv(n))


def capacity_asymptote(n_bar):
    """n log2(1/n) + n / ln 2, the low-power expansion of the bosonic capacity."""
    n = _check_range("n_bar", n_bar, 0.0, 1.0, lo_open=True)
    return _out(n * np.log2(1.0 / n) + n / LN2)


def ppm_click_probability(n_bar, L):
    n = _check_range("n_bar", n_bar, 0.0, np.inf)
    L = _check_range("L", L, 1.0, np.inf)
    return _out(-np.expm1(-L * n))


def rate_ppm(n_bar, L):
    """Erasure channel over L pulse positions, per bin."""
    L = _check_range("L", L, 2.0, np.inf)
    p = ppm_click_probability(n_bar, L)
    return _out(p / L * np.log2(L))


def rate_ppm_asymptotic(n_bar, L):
    return _out(np.asarray(n_bar, dtype=float) * np.log2(L))


def ppm_second_order(n_bar):
    """n log2(1/n) - n log2 ln(1/n), the PPM rate at the optimal length for n << 1.

    Defined on (0, 1); the correction term diverges as n approaches 1.
    """
    n = _check_range("n_bar", n_bar, 0.0, 1.0, lo_open=True, hi_open=True)
    return _out(n * np.log2(1.0 / n) - n * np.log2(np.log(1.0 / n)))


def golden_section_max(f, lo, hi, tol=1e-10, max_iter=200):
    """Vectorized golden-section search for the maximizer of a unimodal ``f`` on [lo, hi].

    ``lo`` and ``hi`` may be arrays; ``f`` must act elementwise.  The
    bracket is shrunk until it is narrower than ``tol`` everywhere.
    """
    a = np.array(lo, dtype=float)
    b = np.array(hi, dtype=float)
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if np.all(b - a < tol):
            break
        left = fc >= fd
        a, b = np.where(left, a, c), np.where(left, d, b)
        c_new = np.where(left, b - _GOLDEN * (b - a), d)
        d_new = np.where(left, c, a + _GOLDEN * (b - a))
        f_new = f(np.where(left, c_new, d_new))
        fc, fd = np.where(left, f_new, fd), np.where(left, fc, f_new)
        c, d = c_new, d_new
    x = 0.5 * (a + b)
    return x, f(x)


def ppm_optimal_length(n_bar):
    """Continuous L > 2 maximizing the exact PPM rate, and the rate there."""
    n = _check_range("n_bar", n_bar, 0.0, 0.1, lo_open=True, hi_open=True)
    # search over log(L * n), the optimum sits where L * n is of order one
    lo = np.log(2.0 * n)
    hi = np.full_like(n, np.log(50.0))

    def rate(u):
        return rate_ppm(n, np.exp(u) / n)

    u, best = golden_section_max(rate, lo, hi, tol=1e-12)
    return _out(np.exp(u) / n), _out(np.asarray(best))


def z_channel_term(lam, p):
    """H(lam p) - lam H(p), arranged so no O(p log p) terms cancel."""
    lam = _check_range("lambda", lam, 0.0, 1.0)
    p = _check_range("p", p, 0.0, 1.0)
    q = lam * p
    # lam p log2(1/lam) - (1 - lam p) log2(1 - lam p) + lam (1 - p) log2(1 - p)
    lead = p * _xlog2inv(lam)
    val = lead + _ylog2inv_complement(q) - lam * _ylog2inv_complement(p)
    return _out(np.maximum(val, 0.0))


def z_channel_term_approx(lam, p):
    return _out(np.asarray(p, dtype=float) * _xlog2inv(np.asarray(lam, dtype=float)))


def rate_hybrid(n_bar, L, lam):
    """Dolinar port on the all-plus/all-minus words, photon counters elsewhere.

    Words +-(1...1) are sent with probability (1 - lam)/2 each and the other
    L - 1 Hadamard words with lam / (L - 1) each.
    """
    L = _check_range("L", L, 2.0, np.inf)
    lam = _check_range("lambda", lam, 0.0, 1.0)
    n = _check_range("n_bar", n_bar, 0.0, np.inf)
    p = -np.expm1(-L * n)
    binary = bsc_capacity_from_bias(_helstrom_bias(L * n))
    total = (1.0 - lam) * binary + lam * p * np.log2(L - 1) + z_channel_term(lam, p)
    return _out(total / L)


def lambda_star_asymptotic(L):
    """Optimal prior weight of the linearized hybrid rate, min(1, (L-1)/(e 2^beta))."""
    return _out(np.minimum(1.0, (np.asarray(L, dtype=float) - 1.0) / (np.e * 2.0**BETA)))


def optimize_lambda(n_bar, L, tol=1e-10):
    """Maximize the exact hybrid rate over lam in [0, 1].

    The rate is concave in lam (mutual information is concave in the input
    distribution), so a golden-section bracket followed by a comparison with
    both endpoints finds the global optimum.
    """
    n = _check_range("n_bar", n_bar, 0.0, np.inf, lo_open=True)
    L = _check_range("L", L, 2.0, np.inf)
    n, L = np.broadcast_arrays(n, L)

    def rate(lam):
        return rate_hybrid(n, L, lam)

    lam, best = golden_section_max(rate, np.zeros(n.shape), np.ones(n.shape), tol=tol)
    best = np.asarray(best)
    for edge in (0.0, 1.0):
        r_edge = np.asarray(rate(np.full(n.shape, edge)))
        better = r_edge >= best
        lam = np.where(better, edge, lam)
        best = np.where(better, r_edge, best)
    return _out(lam), _out(best)


def rate_hybrid_asymptotic(n_bar, L):
    """Piecewise low-power hybrid rate at the optimal prior."""
    n = np.asarray(n_bar, dtype=float)
    L = np.asarray(L, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        short = n * (BETA + (L - 1.0) / (np.e * 2.0**BETA * LN2))
        long = n * np.log2(L - 1.0)
    return _out(np.where(L < HYBRID_THRESHOLD, short, long))
