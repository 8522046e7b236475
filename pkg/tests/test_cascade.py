import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from invariance_lab.cascade import (
    CascadeSpec,
    FilterBank,
    Layer,
    PoolingSpec,
    cascade_apply,
    duplicated_bank,
    filter_bank_apply,
    frame_bounds,
    haar_pair,
    half_band_pair,
    identity_bank,
    modulus_cascade,
    nonlinearity_apply,
    oriented4,
    pool,
    pooling_attenuation,
    predict_grids,
    random_bank,
    rotated_bank,
    stage_bound_residuals,
)
from invariance_lab.groups import GroupDescriptor, LayerAction, act, act_on_layer
from invariance_lab.signal import Axis, Grid, Signal, impulse, l2_norm

from conftest import random_layer, random_signal


def _direct_convolution(x, h):
    n = len(x)
    return np.array([sum(x[(u - v) % n] * h[v] for v in range(len(h))) for u in range(n)])


def test_identity_bank_adds_singleton_axis(rng):
    x = random_signal(rng, 8)
    z = filter_bank_apply(x, identity_bank())
    assert z.grid.names == ("u", "lambda1") and z.shape == (8, 1)
    np.testing.assert_allclose(z.values[:, 0], x.values, atol=1e-15)


def test_shift_filter():
    z = filter_bank_apply(impulse(8), FilterBank((np.array([0.0, 1.0]),)))
    np.testing.assert_allclose(z.values[:, 0], impulse(8, 1).values, atol=1e-15)


def test_bank_matches_direct_sum(rng):
    x = random_signal(rng, 16)
    bank = random_bank(rng, 3, 5)
    z = filter_bank_apply(x, bank)
    for i, h in enumerate(bank.filters):
        np.testing.assert_allclose(z.values[:, i], _direct_convolution(x.values, h), rtol=0, atol=1e-10)


def test_bank_on_middle_axis(rng):
    v = rng.standard_normal((3, 10, 2))
    x = Signal.from_array(v, ["a", "u", "b"])
    bank = random_bank(rng, 2, 3)
    z = filter_bank_apply(x, bank)
    assert z.shape == (3, 10, 2, 2)
    for i, h in enumerate(bank.filters):
        np.testing.assert_allclose(z.values[1, :, 0, i], _direct_convolution(v[1, :, 0], h), atol=1e-12)


def test_bank_is_linear(rng):
    bank = random_bank(rng, 2, 3)
    x, y = random_signal(rng, 12), random_signal(rng, 12)
    lhs = filter_bank_apply(x.scaled(2.0) + y.scaled(-1j), bank)
    rhs = filter_bank_apply(x, bank).scaled(2.0) + filter_bank_apply(y, bank).scaled(-1j)
    assert l2_norm(lhs - rhs) <= 1e-12 * l2_norm(rhs)


def test_bank_axis_errors(rng):
    with pytest.raises(KeyError):
        filter_bank_apply(random_signal(rng, 8), identity_bank("v"))
    with pytest.raises(ValueError):
        filter_bank_apply(random_signal(rng, 4), FilterBank((np.ones(5),)))


@pytest.mark.parametrize("bank, expected", [
    (identity_bank(), (1.0, 1.0)),
    (duplicated_bank(), (math.sqrt(2), math.sqrt(2))),
    (half_band_pair(8), (1.0, 1.0)),
    (haar_pair(), (1.0, 1.0)),
    (oriented4(), (1.0, 1.0)),
])
def test_frame_bounds_analytic(bank, expected):
    a, big_a = frame_bounds(bank, 8)
    assert a == pytest.approx(expected[0], abs=1e-12)
    assert big_a == pytest.approx(expected[1], abs=1e-12)


def test_half_band_pair_is_complementary():
    spectra = half_band_pair(8).spectra((8,))
    direct = np.abs(spectra[0]) ** 2 + np.abs(spectra[1]) ** 2
    np.testing.assert_allclose(direct, 1.0, atol=1e-12)
    assert set(np.round(np.abs(spectra[0]), 12)) == {0.0, 1.0}


def test_non_invertible_bank_has_zero_lower_bound():
    a, big_a = frame_bounds(FilterBank((np.array([1.0, 1.0]),)), 8)
    assert a == pytest.approx(0.0, abs=1e-12) and big_a == pytest.approx(2.0)


def test_frame_sandwich_random_bank(rng):
    bank = random_bank(rng, 4, 5)
    a, big_a = frame_bounds(bank, 32)
    assert 0 < a <= big_a
    for _ in range(100):
        x = random_signal(rng, 32)
        nz = l2_norm(filter_bank_apply(x, bank))
        assert a * l2_norm(x) - 1e-9 <= nz <= big_a * l2_norm(x) + 1e-9


def test_nonlinearity_examples():
    z = Signal(Grid.line(3), [3, 4j, -5])
    np.testing.assert_allclose(nonlinearity_apply(z, "modulus").values, [3, 4, 5])
    np.testing.assert_array_equal(nonlinearity_apply(Signal(Grid.line(3), [-1, 2, 0]), "relu").values, [0, 2, 0])
    assert nonlinearity_apply(z, "none") is z
    with pytest.raises(ValueError):
        nonlinearity_apply(z, "relu")


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, (2, 2, 12), elements=st.floats(-1e3, 1e3)))
def test_nonlinearities_are_1_lipschitz(arr):
    z = Signal(Grid.line(12), arr[0, 0] + 1j * arr[0, 1])
    w = Signal(Grid.line(12), arr[1, 0] + 1j * arr[1, 1])
    m = nonlinearity_apply
    assert l2_norm(m(z, "modulus") - m(w, "modulus")) <= l2_norm(z - w) * (1 + 1e-12) + 1e-9
    zr, wr = Signal(Grid.line(12), arr[0, 0]), Signal(Grid.line(12), arr[1, 0])
    assert l2_norm(m(zr, "relu") - m(wr, "relu")) <= l2_norm(zr - wr) * (1 + 1e-12) + 1e-9
    assert l2_norm(m(z, "modulus")) <= l2_norm(z) * (1 + 1e-12)


def test_average_pool_preserves_dc():
    for j in (0, 1, 2, 3):
        z = pool(Signal(Grid.line(16), np.ones(16)), PoolingSpec((("u", j),)))
        assert z.shape == (16 // 2**j,)
        np.testing.assert_allclose(z.values, 1.0)
        assert z.grid.resolution("u") == j


def test_average_pool_impulse():
    z = pool(impulse(8), PoolingSpec((("u", 1),)))
    np.testing.assert_allclose(z.values, [0.5, 0, 0, 0])


def test_max_pool():
    z = pool(Signal(Grid.line(4), [1, 3, 2, 5]), PoolingSpec((("u", 1),), kernel="max"))
    np.testing.assert_array_equal(z.values, [3, 5])


def test_pool_with_oversampling():
    p = PoolingSpec((("u", 3),), alpha=0.5)
    assert p.stride_log2(3) == 2
    z = pool(Signal(Grid.line(16), np.arange(16.0)), p)
    assert z.shape == (4,) and z.grid.resolution("u") == 2
    direct = [np.mean([(u + k) % 16 for k in range(8)]) for u in range(0, 16, 4)]
    np.testing.assert_allclose(z.values, direct)


def test_pool_divisibility():
    with pytest.raises(ValueError):
        pool(Signal(Grid.line(6), np.ones(6)), PoolingSpec((("u", 2),)))


def test_average_pool_is_non_expansive(rng):
    for _ in range(50):
        z = random_layer(rng, 16, 8)
        w = random_layer(rng, 16, 8)
        p = PoolingSpec((("u", 2), ("lambda1", 1)))
        assert l2_norm(pool(z, p)) <= l2_norm(z)
        assert l2_norm(pool(z, p) - pool(w, p)) <= l2_norm(z - w) + 1e-12


def test_empty_and_trivial_cascades(rng):
    x = random_signal(rng, 8)
    assert cascade_apply(x, CascadeSpec()).stages == (x,)
    out = cascade_apply(x, CascadeSpec((Layer(identity_bank(), "none"),)))
    assert len(out.stages) == 1
    np.testing.assert_allclose(out.final.values[:, 0], x.values, atol=1e-15)


def test_cascade_chain_mismatch(rng):
    spec = CascadeSpec((Layer(identity_bank("v")),))
    with pytest.raises(ValueError):
        cascade_apply(random_signal(rng, 8), spec)


def test_two_layer_cascade_grids_and_bounds(rng):
    x = random_signal(rng, 64)
    spec = modulus_cascade(2, 2)
    out = cascade_apply(x, spec)
    expected = (
        Grid((Axis("u", 16), Axis("lambda1", 4, "channel")), (2, 0)),
        Grid((Axis("u", 4), Axis("lambda1", 4, "channel"), Axis("lambda2", 4, "channel")), (4, 0, 0)),
    )
    assert out.grids == expected
    assert predict_grids(spec, x.grid) == expected
    assert all(r <= 1e-12 for r in stage_bound_residuals(x, spec, out))


def test_filter_bank_commutes_with_translation(rng):
    x = random_signal(rng, 32)
    bank = random_bank(rng, 3, 4)
    g = GroupDescriptor("translation", "u", 1.0)
    a = LayerAction(0, "lambda1", spatial=g)
    for t in range(1, 32):
        lhs = filter_bank_apply(act(g, t, x), bank)
        rhs = act_on_layer(a, t, filter_bank_apply(x, bank))
        assert l2_norm(lhs - rhs) <= 1e-12 * l2_norm(x)


def test_transposition_becomes_channel_shift():
    """Modulating by pi/2 rotates the oriented4 phases by one step."""
    rng = np.random.default_rng(5)
    x = random_signal(rng, 32)
    g = GroupDescriptor("frequency_transposition", "u", np.pi / 2)
    layer = lambda s: nonlinearity_apply(filter_bank_apply(s, oriented4()), "modulus")
    lhs = layer(act(g, 1, x))
    rhs = act_on_layer(LayerAction(1, "lambda1"), 1, layer(x))
    assert l2_norm(lhs - rhs) <= 1e-12 * l2_norm(x)


def _asymmetric(n=5):
    return np.arange(n * n, dtype=float).reshape(n, n) ** 1.3


def test_rotated_bank_angle_zero_is_exact():
    h0 = _asymmetric()
    bank = rotated_bank(h0, [0.0])
    assert np.array_equal(bank.filters[0], h0.astype(complex))


def test_rotation_by_pi_is_flip():
    h0 = _asymmetric()
    assert np.array_equal(rotated_bank(h0, [np.pi]).filters[0], h0[::-1, ::-1].astype(complex))


def test_rotation_by_half_pi_is_rot90():
    h0 = _asymmetric()
    np.testing.assert_array_equal(rotated_bank(h0, [np.pi / 2]).filters[0], np.rot90(h0, 1))


def test_rotated_bank_is_renormalized():
    h0 = _asymmetric(7)
    bank = rotated_bank(h0, np.linspace(0, np.pi, 5))
    for h in bank.filters:
        assert np.linalg.norm(h) == pytest.approx(np.linalg.norm(h0), rel=1e-12)


def test_rotated_bank_needs_odd_side():
    with pytest.raises(ValueError):
        rotated_bank(np.ones((4, 4)), [0.0])


def test_rotated_bank_convolves_in_2d(rng):
    h0 = np.zeros((3, 3))
    h0[1, 2] = 1.0  # one step to the right of centre
    bank = rotated_bank(h0, [0.0, np.pi / 2], axes=("row", "col"))
    x = Signal.from_array(rng.standard_normal((8, 8)), ["row", "col"])
    z = filter_bank_apply(x, bank)
    np.testing.assert_allclose(z.values[..., 0], np.roll(x.values, 1, axis=1), atol=1e-12)
    # rot90 moves the tap to row offset -1
    np.testing.assert_allclose(z.values[..., 1], np.roll(x.values, -1, axis=0), atol=1e-12)


def test_pooling_attenuation(rng):
    z = random_layer(rng, 4, 16, complex_valued=False)
    a = LayerAction(1, "lambda1")
    assert pooling_attenuation(z, a, 0, PoolingSpec((("lambda1", 2),)))[0] == 0.0
    errs = []
    for j in (1, 2, 3, 4):
        err, ratio = pooling_attenuation(z, a, 1, PoolingSpec((("lambda1", j),)))
        assert ratio == 1 / 2**j
        errs.append(err)
    assert all(b <= a_ + 1e-12 for a_, b in zip(errs, errs[1:]))
    for k in range(1, 16):
        assert pooling_attenuation(z, a, k, PoolingSpec((("lambda1", 4),)))[0] <= 1e-10


def test_pooling_attenuation_needs_channel_pooling(rng):
    with pytest.raises(ValueError):
        pooling_attenuation(random_layer(rng, 4, 4), LayerAction(1, "lambda1"), 1, PoolingSpec((("u", 1),)))
