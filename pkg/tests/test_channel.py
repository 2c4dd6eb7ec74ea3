import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from catlink import fock
from catlink.channel import (
    ChannelSpec,
    ParamState,
    fit_param_state,
    generator,
    loss_step,
    propagate_analytic,
    propagate_discrete,
    purity_small_length,
    to_density_matrix,
    to_kron_sum,
)
from catlink.preparation import entangled_cat_state

unit = st.floats(0.05, 1.0)


def kraus_series(rho: fock.DensityMatrix, mode: int, t: float, l_max: int) -> fock.DensityMatrix:
    """Loss applied as ``sum_l (1-t^2)^l / l! t^n a^l rho a^dag^l t^n`` truncated at ``l_max``."""
    cutoffs = rho.modes.cutoffs
    ops_a, ops_t = [], []
    for m, c in enumerate(cutoffs):
        ops_a.append(fock.annihilation(c) if m == mode else np.eye(c + 1))
        ops_t.append(np.diag(t ** np.arange(c + 1)) if m == mode else np.eye(c + 1))
    a, tn = ops_a[0], ops_t[0]
    for oa, ot in zip(ops_a[1:], ops_t[1:]):
        a, tn = np.kron(a, oa), np.kron(tn, ot)
    out = np.zeros_like(rho.matrix)
    al = np.eye(a.shape[0])
    for l in range(l_max + 1):
        w = (1 - t * t) ** l / math.factorial(l)
        out += w * tn @ al @ rho.matrix @ al.conj().T @ tn
        al = a @ al
    return fock.DensityMatrix(rho.modes, out)


# --------------------------------------------------------------------------- family members


def test_pure_member_has_unit_eigenvalue():
    rho = to_density_matrix(ParamState.pure(1.0))
    assert np.linalg.eigvalsh(rho.matrix).max() == pytest.approx(1, abs=1e-9)


def test_incoherent_member_has_two_half_eigenvalues():
    # the two components overlap by exp(-4|a|^2), which splits the pair to (1 +- overlap) / 2
    ps = ParamState.symmetric(1.5, 0.0)
    ev = np.sort(np.linalg.eigvalsh(to_density_matrix(ps).matrix))[::-1]
    assert ev[:2] == pytest.approx([(1 + ps.overlap) / 2, (1 - ps.overlap) / 2], abs=1e-9)
    assert np.abs(ev[2:]).max() < 1e-9
    assert ev[:2] == pytest.approx([0.5, 0.5], abs=1e-4)


def test_vacuum_member_has_unit_trace():
    assert to_density_matrix(ParamState.symmetric(0, 0.5), 10).trace == 1


def test_rejects_purity_above_one():
    with pytest.raises(ValueError):
        ParamState(1, 1, 1.2)


def test_rejects_empty_odd_vacuum():
    with pytest.raises(ValueError):
        ParamState(0, 0, -1.0)


def test_channel_spec_validation():
    for bad in ({"T0": 0, "T1": 1}, {"T0": 1, "T1": 1.1}, {"T0": 1, "T1": 1, "L": 0}, {"T0": 1, "T1": 1, "n_steps": 0}):
        with pytest.raises(ValueError):
            ChannelSpec(**bad)


def test_kron_sum_matches_dense():
    ps = ParamState(1.1, 0.8j, 0.3)
    assert to_kron_sum(ps, 20).dense().distance(to_density_matrix(ps, 20)) < 1e-14


# --------------------------------------------------------------------------- single loss step


def test_unit_transmittance_is_identity():
    rho = to_density_matrix(ParamState.pure(1.0), 12)
    assert loss_step(rho, 0, 1.0) is rho


def test_coherent_state_shrinks():
    rho = fock.coherent_state(1.0, 30).density()
    out = loss_step(rho, 0, 0.9)
    assert out.distance(fock.coherent_state(0.9, 30).density()) < 1e-8


def test_loss_step_preserves_trace():
    rho = to_density_matrix(ParamState.pure(1.5))
    assert loss_step(rho, 1, 0.7).trace == pytest.approx(rho.trace, abs=fock.TOL.leak)


def test_one_step_refits_to_analytic_update():
    ps = ParamState.symmetric(1.2, 0.8)
    spec = ChannelSpec(0.9, 0.8, n_steps=1)
    rho = propagate_discrete(to_density_matrix(ps), spec)
    fit = fit_param_state(rho, ps.base_alpha)
    expected = propagate_analytic(ps, spec)
    assert fit.residual < 1e-6
    assert fit.state.r == pytest.approx(expected.r, abs=1e-6)
    assert fit.state.alpha0 == pytest.approx(expected.alpha0, abs=1e-6)
    assert fit.state.alpha1 == pytest.approx(expected.alpha1, abs=1e-6)


def test_dilation_agrees_with_kraus_series():
    rho = to_density_matrix(ParamState.symmetric(0.8, 0.6), 14)
    t = 0.99
    dilated = loss_step(rho, 0, t)
    assert kraus_series(rho, 0, t, l_max=4).distance(dilated) < 1e-9
    # with every term kept the series is the same map, not an approximation to it
    assert kraus_series(rho, 0, 0.6, l_max=14).distance(loss_step(rho, 0, 0.6)) < 1e-12


# --------------------------------------------------------------------------- propagation


def test_discretization_independence():
    rho = to_density_matrix(ParamState.pure(1.0), 20)
    one = propagate_discrete(rho, ChannelSpec(0.9, 0.9, n_steps=1))
    many = propagate_discrete(rho, ChannelSpec(0.9, 0.9, n_steps=16))
    assert one.distance(many) < 1e-8


def test_discrete_matches_analytic():
    ps = ParamState.pure(1.2)
    spec = ChannelSpec(0.9, 0.9, l=0.1, n_steps=4)
    rho = propagate_discrete(to_density_matrix(ps), spec)
    assert rho.distance(to_density_matrix(propagate_analytic(ps, spec))) < 1e-6


def test_lossless_line_is_identity():
    rho = to_density_matrix(ParamState.pure(1.0))
    assert propagate_discrete(rho, ChannelSpec(1, 1, n_steps=3)).distance(rho) == 0


def test_zero_length_is_identity():
    ps = ParamState(1.0, 0.5, 0.4)
    assert propagate_analytic(ps, ChannelSpec(0.5, 0.6, l=0)) == ps


def test_analytic_example_values():
    out = propagate_analytic(ParamState.pure(1.0), ChannelSpec(0.95, 0.95))
    assert out.alpha0 == pytest.approx(0.95, abs=1e-15)
    assert out.alpha1 == pytest.approx(0.95, abs=1e-15)
    assert out.r == pytest.approx(math.exp(-0.39), rel=1e-12)


def test_small_length_purity_within_one_percent():
    spec = ChannelSpec(0.9, 0.9, l=0.01)
    exact = propagate_analytic(ParamState.pure(2.0), spec).r
    assert abs(purity_small_length(2.0, spec) - exact) / exact < 0.01


def test_master_equation_by_finite_difference():
    ps0 = ParamState.pure(1.0)
    base = ChannelSpec(0.8, 0.7, L=2.0)
    h = 1e-5
    at = lambda l: to_density_matrix(propagate_analytic(ps0, base.with_length(l)), 16).matrix
    for x in (0.1, 0.5, 1.5):
        fd = (at(x + h) - at(x - h)) / (2 * h)
        rhs = generator(to_density_matrix(propagate_analytic(ps0, base.with_length(x)), 16), base).matrix
        assert np.linalg.norm(fd - rhs) < 1e-7 * np.linalg.norm(rhs)


# --------------------------------------------------------------------------- fitting


def test_fit_round_trip():
    ps = ParamState(1.3, 1.1, 0.45, 1.3)
    fit = fit_param_state(to_density_matrix(ps), ps.base_alpha)
    assert fit.residual < 1e-8
    assert fit.in_family
    assert fit.state.alpha0 == pytest.approx(ps.alpha0, abs=1e-8)
    assert fit.state.alpha1 == pytest.approx(ps.alpha1, abs=1e-8)
    assert fit.state.r == pytest.approx(ps.r, abs=1e-8)


def test_fit_of_pure_state_has_unit_purity():
    state, _ = fit_param_state(entangled_cat_state(1.5, 24).density(), 1.5)
    assert state.r == pytest.approx(1, abs=1e-6)


def test_fit_after_loss_matches_analytic():
    ps = ParamState.pure(1.5)
    spec = ChannelSpec(0.9, 0.85, l=0.5, n_steps=2)
    state, res = fit_param_state(propagate_discrete(to_density_matrix(ps), spec), 1.5)
    ref = propagate_analytic(ps, spec)
    assert res < 1e-6
    assert abs(state.r - ref.r) < 1e-6
    assert abs(state.alpha0 - ref.alpha0) < 1e-6


def test_fit_flags_states_outside_family():
    rho = fock.product(fock.coherent_state(1, 16), fock.fock_state(1, 16)).density()
    fit = fit_param_state(rho, 1.0)
    assert not fit.in_family


# --------------------------------------------------------------------------- properties


@given(unit, unit, st.floats(0, 2), st.floats(0, 2), st.floats(-1, 1))
def test_semigroup(T0, T1, l1, l2, r):
    ps = ParamState(1.3, 0.9, r)
    base = ChannelSpec(T0, T1)
    two = propagate_analytic(propagate_analytic(ps, base.with_length(l1)), base.with_length(l2))
    one = propagate_analytic(ps, base.with_length(l1 + l2))
    assert two.alpha0 == pytest.approx(one.alpha0, rel=1e-12, abs=1e-300)
    assert two.alpha1 == pytest.approx(one.alpha1, rel=1e-12, abs=1e-300)
    assert two.r == pytest.approx(one.r, rel=1e-12, abs=1e-300)


@given(st.floats(0.05, 0.999), st.floats(0.05, 0.999), st.floats(0, 3), st.floats(0, 3))
def test_purity_and_amplitudes_monotone(T0, T1, x1, dx):
    ps = ParamState.pure(1.0)
    base = ChannelSpec(T0, T1)
    a, b = propagate_analytic(ps, base.with_length(x1)), propagate_analytic(ps, base.with_length(x1 + dx))
    assert b.r <= a.r
    assert abs(b.alpha0) <= abs(a.alpha0)
    assert abs(b.alpha1) <= abs(a.alpha1)


@given(st.floats(0, 1), st.floats(0.5, 0.99), st.floats(0.5, 0.99))
def test_family_closure_under_discrete_loss(r, T0, T1):
    ps = ParamState.symmetric(1.0, r)
    rho = propagate_discrete(to_density_matrix(ps, 18), ChannelSpec(T0, T1, l=0.3, n_steps=2))
    assert fit_param_state(rho, 1.0).residual < 1e-6


@pytest.mark.parametrize("alpha", [2.0, 2.5, 3.0])
def test_purity_decays_much_faster_than_amplitude(alpha):
    spec = ChannelSpec(0.9, 0.9, l=0.01)
    out = propagate_analytic(ParamState.pure(alpha), spec)
    ratio = (1 - out.r) / (1 - abs(out.alpha0) / alpha)
    assert ratio > 10
