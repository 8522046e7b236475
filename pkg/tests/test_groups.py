import numpy as np
import pytest

from invariance_lab.config import SignalConfig
from invariance_lab.experiments import make_signal
from invariance_lab.groups import (
    GroupDescriptor,
    LayerAction,
    ProductGroup,
    act,
    act_on_layer,
    compose,
)
from invariance_lab.signal import Grid, Signal, impulse, l2_norm

from conftest import random_layer, random_signal

TRANSLATION = GroupDescriptor("translation", "u", 1.0)
DILATION = GroupDescriptor("dilation", "u")

# norm ratio of act(dilation, t=1) on the default 64-point chirp preset
DILATION_NORM_RATIO_GOLDEN = 0.9953778265196782


def chirp(n=64):
    return make_signal(SignalConfig(preset="chirp"), n, None)


def band_limited(n=64):
    u = np.arange(n)
    return Signal(Grid.line(n), np.exp(-0.5 * ((u - n / 2) / 5.0) ** 2) * np.cos(2 * np.pi * 0.03 * (u - n / 2)))


def smooth(n=64):
    u = np.arange(n)
    return Signal(Grid.line(n), np.exp(-0.5 * ((u - n / 2) / 5.0) ** 2) * np.exp(0.3j * u))


def test_translation_of_impulse():
    assert np.array_equal(act(TRANSLATION, 1, impulse(8)).values, impulse(8, 1).values)


def test_transposition_is_phase_ramp():
    g = GroupDescriptor("frequency_transposition", "u", 2 * np.pi / 4)
    out = act(g, 1, Signal(Grid.line(4), np.ones(4))).values
    np.testing.assert_allclose(out, [1, 1j, -1, -1j], atol=1e-15)


def test_unknown_kind():
    with pytest.raises(ValueError):
        GroupDescriptor("rotation")


@pytest.mark.parametrize("g", [TRANSLATION, GroupDescriptor("frequency_transposition", "u", 0.37), DILATION])
def test_identity_at_zero(rng, g):
    x = random_signal(rng, 32)
    assert l2_norm(act(g, 0.0, x) - x) <= 1e-15 * l2_norm(x)


def _dense_dilation_oracle(n, t):
    """Dilate the analytic chirp sampled on a 16x finer grid."""
    c, f0, f1 = n / 2, 0.02, 0.12

    def f(s):
        return np.exp(-0.5 * (s / (n / 8)) ** 2) * np.cos(2 * np.pi * (f0 * s + (f1 - f0) * s * np.abs(s) / (2 * n)))

    fine = np.arange(16 * n) / 16.0
    src = c + 2.0 ** (-t) * (np.arange(n) - c)
    return 2.0 ** (-t / 2) * np.interp(src, fine, f(fine - c), period=n)


def test_dilation_matches_dense_oracle_and_golden():
    x = chirp()
    y = act(DILATION, 1.0, x)
    oracle = _dense_dilation_oracle(64, 1.0)
    assert np.linalg.norm(y.values - oracle) / np.linalg.norm(oracle) <= 1e-2
    ratio = l2_norm(y) / l2_norm(x)
    assert abs(ratio - 1) <= 2e-2
    assert ratio == pytest.approx(DILATION_NORM_RATIO_GOLDEN, abs=1e-12)


def test_dilation_needs_power_of_two():
    with pytest.raises(ValueError):
        act(DILATION, 1.0, Signal(Grid.line(48), np.ones(48)))


def test_unitarity(rng):
    gs = [TRANSLATION, GroupDescriptor("frequency_transposition", "u", 0.9)]
    for _ in range(20):
        x = random_signal(rng, 64)
        for g in gs:
            t = float(rng.integers(-70, 70)) if g is TRANSLATION else float(rng.uniform(-10, 10))
            assert abs(l2_norm(act(g, t, x)) - l2_norm(x)) <= 1e-10 * l2_norm(x)
    for t in (1.0, 0.5, 0.25, -0.25, -0.5):
        x = band_limited()
        assert abs(l2_norm(act(DILATION, t, x)) - l2_norm(x)) <= 2e-2 * l2_norm(x)


def test_group_law(rng):
    x = random_signal(rng, 64)
    for t, s in [(3, 5), (-7, 11), (63, 2)]:
        lhs = act(TRANSLATION, t + s, x)
        assert l2_norm(lhs - act(TRANSLATION, t, act(TRANSLATION, s, x))) <= 1e-10 * l2_norm(x)
    g = GroupDescriptor("frequency_transposition", "u", 0.41)
    for t, s in rng.uniform(-5, 5, size=(10, 2)):
        assert l2_norm(act(g, t + s, x) - act(g, t, act(g, s, x))) <= 1e-10 * l2_norm(x)
    c = band_limited()
    for t, s in [(0.5, 0.5), (0.25, 0.5), (-0.5, 0.25), (0.5, -0.5), (0.25, -0.5), (-0.25, -0.5)]:
        assert l2_norm(act(DILATION, t + s, c) - act(DILATION, t, act(DILATION, s, c))) <= 5e-2 * l2_norm(c)


# transposition rate keeps t * w0 * u <= pi on the grid, where |e^{i theta} - 1| is monotone
@pytest.mark.parametrize("g", [TRANSLATION, GroupDescriptor("frequency_transposition", "u", np.pi / 64), DILATION])
def test_strong_continuity(g):
    x = smooth()
    dist = [l2_norm(act(g, t, x) - x) for t in (1, 1 / 2, 1 / 4, 1 / 8)]
    assert all(b < a for a, b in zip(dist, dist[1:]))
    assert dist[-1] < 0.25 * dist[0]


def _permutation_oracle(c, k):
    p = np.zeros((c, c))
    for i in range(c):
        p[(i + k) % c, i] = 1
    return p


def test_act_on_layer_identity_and_period(rng):
    z = random_layer(rng, 5, 4)
    a = LayerAction(1, "lambda1")
    assert np.array_equal(act_on_layer(a, 0, z).values, z.values)
    assert np.array_equal(act_on_layer(a, 4, z).values, z.values)


def test_act_on_layer_matches_permutation(rng):
    z = random_layer(rng, 5, 4)
    out = act_on_layer(LayerAction(1, "lambda1"), 2, z).values
    np.testing.assert_array_equal(out, z.values @ _permutation_oracle(4, 2).T)


def test_act_on_layer_rejects_fractional_shift(rng):
    with pytest.raises(ValueError):
        act_on_layer(LayerAction(1, "lambda1"), 0.5, random_layer(rng, 4, 4))


def test_act_on_layer_with_spatial_factor(rng):
    z = random_layer(rng, 6, 4)
    a = LayerAction(1, "lambda1", spatial=TRANSLATION)
    out = act_on_layer(a, 1, z).values
    np.testing.assert_array_equal(out, np.roll(np.roll(z.values, 1, axis=1), 1, axis=0))


def test_compose(rng):
    x = random_signal(rng, 8)
    assert np.array_equal(compose(ProductGroup((TRANSLATION, TRANSLATION)), [0, 0], x).values, x.values)
    assert np.array_equal(compose(ProductGroup((TRANSLATION,)), [3], x).values, act(TRANSLATION, 3, x).values)
    assert np.array_equal(compose(ProductGroup((TRANSLATION, TRANSLATION)), [3, 5], x).values, x.values)
    with pytest.raises(ValueError):
        compose(ProductGroup((TRANSLATION,)), [1, 2], x)


def test_compose_is_ordered(rng):
    x = random_signal(rng, 8)
    g = GroupDescriptor("frequency_transposition", "u", 0.5)
    ab = compose(ProductGroup((TRANSLATION, g)), [1, 1], x)
    ba = compose(ProductGroup((g, TRANSLATION)), [1, 1], x)
    assert l2_norm(ab - ba) > 0.1
