import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mobicatch.sim2real import (
    LowPassFilter, RandomizationRanges, add_noise, lpf_apply, sample_env_params,
)


def test_lpf_closed_form_after_ten_steps():
    f = LowPassFilter(1, alpha=0.9)
    for _ in range(10):
        y = lpf_apply(f, np.ones(1))
    assert abs(y[0] - (1.0 - 0.9 ** 10)) <= 1e-12


def test_lpf_alpha_zero_is_identity():
    f = LowPassFilter(3, alpha=0.0)
    x = np.array([0.3, -2.0, 5.0])
    np.testing.assert_array_equal(f(x), x)


def test_lpf_unit_dc_gain():
    f = LowPassFilter(2)
    for _ in range(500):
        y = f(np.array([1.5, -0.5]))
    np.testing.assert_allclose(y, [1.5, -0.5], atol=1e-12)


def test_lpf_rejects_bad_shapes_and_alpha():
    with pytest.raises(ValueError):
        LowPassFilter(2, alpha=1.0)
    with pytest.raises(ValueError):
        LowPassFilter(2)(np.zeros(3))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=8, max_size=8), st.lists(st.floats(-10, 10), min_size=8, max_size=8),
       st.floats(-3, 3), st.floats(-3, 3), st.floats(0.0, 0.99))
def test_lpf_is_linear(xs, zs, a, b, alpha):
    fx, fz, fm = LowPassFilter(1, alpha), LowPassFilter(1, alpha), LowPassFilter(1, alpha)
    for x, z in zip(xs, zs):
        yx, yz = fx(np.array([x])), fz(np.array([z]))
        ym = fm(np.array([a * x + b * z]))
        assert ym[0] == pytest.approx(a * yx[0] + b * yz[0], abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=2, max_size=30), st.floats(0.0, 0.99))
def test_lpf_per_step_contraction(xs, alpha):
    f = LowPassFilter(1, alpha)
    prev = 0.0
    for x in xs:
        y = f(np.array([x]))[0]
        assert abs(y - prev) <= (1 - alpha) * abs(x - prev) + 1e-12
        prev = y


def test_sampling_degenerate_ranges_exact():
    r = RandomizationRanges(gravity=(9.5, 9.5), gain_scale=(1.1, 1.1), throw_delay=(3, 3),
                            obs_noise=(0.004, 0.004), action_noise=(0.01, 0.01))
    p = sample_env_params(np.random.default_rng(0), r)
    assert p.gravity == 9.5 and p.gain_scale == (1.1, 1.1, 1.1)
    assert p.throw_delay == 3 and p.obs_noise == 0.004 and p.action_noise == 0.01


def test_sampling_disabled_uses_midpoints():
    p = sample_env_params(np.random.default_rng(0), RandomizationRanges(enabled=False))
    assert p.gravity == pytest.approx(9.81)
    assert p.gain_scale == (1.0, 1.0, 1.0)
    assert p.throw_delay == 6


def test_gravity_sample_mean():
    rng = np.random.default_rng(1)
    r = RandomizationRanges()
    g = np.array([sample_env_params(rng, r).gravity for _ in range(100_000)])
    assert abs(g.mean() - 9.81) < 0.01
    assert g.min() >= 9.31 and g.max() <= 10.31


def test_sampling_reproducible_and_in_range():
    r = RandomizationRanges()
    a = [sample_env_params(np.random.default_rng(5), r) for _ in range(3)]
    assert a[0] == a[1] == a[2]
    rng = np.random.default_rng(9)
    for _ in range(1000):
        p = sample_env_params(rng, r)
        assert 0 <= p.throw_delay <= 12
        assert all(0.8 <= s <= 1.2 for s in p.gain_scale)
        assert 0.0 <= p.obs_noise <= 0.01 and 0.0 <= p.action_noise <= 0.02


def test_ranges_validation():
    with pytest.raises(ValueError):
        RandomizationRanges(gravity=(10.0, 9.0))
    with pytest.raises(ValueError):
        RandomizationRanges(obs_noise=(-0.1, 0.1))


def test_add_noise_identity_and_statistics():
    x = np.arange(5.0)
    np.testing.assert_array_equal(add_noise(np.random.default_rng(0), x, 0.0), x)
    d = add_noise(np.random.default_rng(0), np.zeros(100_000), 0.05)
    assert abs(d.std() - 0.05) / 0.05 < 0.02
    np.testing.assert_array_equal(add_noise(np.random.default_rng(4), x, 0.1),
                                  add_noise(np.random.default_rng(4), x, 0.1))
    with pytest.raises(ValueError):
        add_noise(np.random.default_rng(0), x, -1.0)
