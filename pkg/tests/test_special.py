import math
import random

import pytest
from scipy import integrate

from hopbound.special import (
    ber_oqpsk,
    frame_success_prob,
    log_upper_incomplete_gamma,
    upper_incomplete_gamma,
)


def gamma_quad_oracle(a: float, x: float) -> float:
    """Independent adaptive quadrature of int_x^inf t^(a-1) e^-t dt.

    Split at x+4: the head piece absorbs the steep t^(a-1) edge for negative
    orders, the unbounded rest is smooth.  Pure relative tolerances keep the
    estimate meaningful across ~20 orders of magnitude.
    """
    f = lambda t: t ** (a - 1.0) * math.exp(-t)
    cut = x + 4.0
    head, e1 = integrate.quad(f, x, cut, limit=400, epsabs=0.0, epsrel=1e-12)
    tail_, e2 = integrate.quad(f, cut, math.inf, limit=400, epsabs=0.0, epsrel=1e-12)
    val = head + tail_
    assert e1 + e2 < 1e-10 * abs(val)
    return val


def test_gamma_closed_forms():
    # Gamma(1, y) = e^-y and Gamma(2, y) = (1 + y) e^-y
    assert upper_incomplete_gamma(1.0, 0.5) == pytest.approx(math.exp(-0.5), rel=1e-12)
    assert upper_incomplete_gamma(2.0, 0.2) == pytest.approx(1.2 * math.exp(-0.2), rel=1e-12)


def test_gamma_negative_order_vs_quadrature():
    got = upper_incomplete_gamma(-0.5, 1.0)
    assert got == pytest.approx(gamma_quad_oracle(-0.5, 1.0), rel=1e-10)


def test_gamma_random_orders_vs_quadrature():
    rng = random.Random(1234)
    for _ in range(50):
        a = rng.uniform(-3.0, 5.0)
        x = rng.uniform(1e-3, 20.0)
        assert upper_incomplete_gamma(a, x) == pytest.approx(gamma_quad_oracle(a, x), rel=1e-9)


def test_gamma_domain_errors():
    with pytest.raises(ValueError):
        upper_incomplete_gamma(-1.0, 0.0)
    with pytest.raises(ValueError):
        upper_incomplete_gamma(0.0, 0.0)
    with pytest.raises(ValueError):
        upper_incomplete_gamma(1.0, -0.5)
    with pytest.raises(ValueError):
        upper_incomplete_gamma(math.nan, 1.0)
    with pytest.raises(ValueError):
        upper_incomplete_gamma(1.0, math.inf)


def test_log_gamma_matches_linear():
    rng = random.Random(99)
    for _ in range(40):
        a = rng.uniform(-3.0, 4.0)
        x = rng.uniform(1e-2, 15.0)
        lin = upper_incomplete_gamma(a, x)
        assert log_upper_incomplete_gamma(a, x) == pytest.approx(math.log(lin), rel=1e-10, abs=1e-12)


def test_log_gamma_extreme_orders_finite():
    # regimes where the direct value overflows: the log form must stay usable
    v = log_upper_incomplete_gamma(-1441.0, 0.0316)
    assert math.isfinite(v) and v > 1000.0
    assert math.isfinite(log_upper_incomplete_gamma(-200.5, 3.0))


def test_ber_endpoints():
    assert ber_oqpsk(0.0) == pytest.approx(0.5, abs=1e-15)
    assert ber_oqpsk(1e6) < 1e-12
    with pytest.raises(ValueError):
        ber_oqpsk(-0.1)


def test_ber_monotone():
    grid = [0.0, 0.05, 0.1, 0.3, 0.5, 1.0, 2.0, 5.0, 10.0, 50.0]
    vals = [ber_oqpsk(g) for g in grid]
    assert all(a >= b for a, b in zip(vals, vals[1:]))
    assert all(0.0 <= v <= 0.5 for v in vals)


def test_ber_extended_precision_oracle():
    # alternating 16-term series summed at 50 significant digits
    mp = pytest.importorskip("mpmath")
    mp.mp.dps = 50
    for snr in (0.25, 1.0, 2.0):
        ref = (mp.mpf(8) / 15) / 16 * mp.fsum(
            (-1) ** k * mp.binomial(16, k) * mp.e ** (mp.mpf(20) * snr * (mp.mpf(1) / k - 1))
            for k in range(2, 17)
        )
        assert ber_oqpsk(snr) == pytest.approx(float(ref), rel=1e-12)


def test_frame_success_limits_and_monotonicity():
    assert frame_success_prob(1e9, 1016) == pytest.approx(1.0, abs=1e-6)
    q_lo, q_mid, q_hi = (frame_success_prob(g, 1016) for g in (1e-6, 1.0, 1e3))
    assert q_lo < q_mid < q_hi
    assert 0.0 <= q_lo and q_hi <= 1.0
    # decreasing in frame size
    assert frame_success_prob(10.0, 2000) < frame_success_prob(10.0, 1016) < frame_success_prob(10.0, 80)


def test_frame_success_monte_carlo_oracle():
    # Monte-Carlo average of (1 - BER(g))^1016 over 10^6 exponential draws at 10 dB
    import numpy as np

    mean_snr = 10.0
    rng = np.random.default_rng(20240817)
    draws = rng.exponential(mean_snr, size=1_000_000)
    coefs = np.array([(1.0 if k % 2 == 0 else -1.0) * math.comb(16, k) for k in range(2, 17)])
    expos = np.array([20.0 * (1.0 / k - 1.0) for k in range(2, 17)])
    ber = np.clip((8.0 / 240.0) * (np.exp(np.outer(draws, expos)) @ coefs), 0.0, 0.5)
    mc = float(np.mean((1.0 - ber) ** 1016))
    assert frame_success_prob(mean_snr, 1016) == pytest.approx(mc, rel=5e-3)


def test_frame_success_validates_inputs():
    with pytest.raises(ValueError):
        frame_success_prob(0.0, 1016)
    with pytest.raises(ValueError):
        frame_success_prob(1.0, 0)
