import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qperiodic import channels as ch
from qperiodic import models as mo
from qperiodic.errors import (
    DimensionMismatch,
    InvalidAncillaState,
    InvalidState,
    NegativeDuration,
    NotConverged,
)
from qperiodic.linalg import expm_i, frobenius, vectorize

from conftest import random_density, random_hermitian, random_unitary

SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)
GROUND = mo.ancilla_ground()


def identity_channel(d):
    return ch.KrausChannel(d, (np.eye(d, dtype=complex),))


def depolarizing():
    return ch.KrausChannel(2, tuple(p / 2 for p in (np.eye(2), mo.SIGMA_X, mo.SIGMA_Y, mo.SIGMA_Z)))


def oracle(u, rho, rho_anc):
    d_s, d_a = rho.shape[0], rho_anc.shape[0]
    return ch.partial_trace_ancilla(u @ np.kron(rho, rho_anc) @ u.conj().T, d_s, d_a)


def test_joint_unitary_examples(rng):
    hs, ha = random_hermitian(rng, 2), random_hermitian(rng, 3)
    u = ch.joint_unitary(hs, ha, np.zeros((6, 6)), 0.7)
    assert frobenius(u - np.kron(expm_i(hs, 0.7), expm_i(ha, 0.7))) < 1e-12
    assert frobenius(ch.joint_unitary(hs, ha, random_hermitian(rng, 6), 0.0) - np.eye(6)) < 1e-14
    setup = mo.xxz_setup(mo.XxzParams(), 6.0)
    u = ch.joint_unitary(setup.h_sys, setup.h_anc, setup.h_int(1.0), 1.0)
    assert frobenius(u.conj().T @ u - np.eye(32)) < 1e-10
    with pytest.raises(DimensionMismatch):
        ch.joint_unitary(hs, ha, np.zeros((4, 4)), 1.0)


def test_kraus_decoupled_is_unitary(rng):
    us, ua = random_unitary(rng, 3), random_unitary(rng, 2)
    channel = ch.kraus_from_unitary(np.kron(us, ua), GROUND, 3)
    assert len(channel.kraus) == 2
    rho = random_density(rng, 3)
    assert frobenius(channel.apply(rho) - us @ rho @ us.conj().T) < 1e-12


def test_kraus_swap_resets(rng):
    channel = ch.kraus_from_unitary(SWAP, GROUND, 2)
    for _ in range(3):
        assert frobenius(channel.apply(random_density(rng, 2)) - GROUND) < 1e-12


def test_kraus_xxz_trace_preserving(xxz_setups):
    channel = ch.collision_channel(xxz_setups[0.5], 1.0)
    assert channel.tp_residual() < 1e-12
    assert len(channel.kraus) == 2


def test_kraus_mixed_ancilla_count(rng):
    rho_a = random_density(rng, 3)
    channel = ch.kraus_from_unitary(random_unitary(rng, 6), rho_a, 2)
    assert len(channel.kraus) == 9
    assert channel.tp_residual() < 1e-12


def test_kraus_rejects_bad_ancilla(rng):
    u = random_unitary(rng, 4)
    with pytest.raises(InvalidAncillaState):
        ch.kraus_from_unitary(u, np.diag([0.5, 0.4]), 2)
    with pytest.raises(InvalidAncillaState):
        ch.kraus_from_unitary(u, np.diag([1.2, -0.2]), 2)
    with pytest.raises(DimensionMismatch):
        ch.kraus_from_unitary(u, GROUND, 3)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d_s=st.integers(1, 4), d_a=st.integers(1, 3))
def test_kraus_matches_partial_trace(seed, d_s, d_a):
    r = np.random.default_rng(seed)
    u = random_unitary(r, d_s * d_a)
    rho_a = random_density(r, d_a)
    rho = random_density(r, d_s)
    channel = ch.kraus_from_unitary(u, rho_a, d_s)
    assert frobenius(ch.apply(channel, rho) - oracle(u, rho, rho_a)) < 1e-12
    s = ch.superoperator_matrix(channel)
    assert frobenius(s.act(rho) - channel.apply(rho)) < 1e-12


def test_interaction_picture(rng, xxz_setups):
    channel = ch.collision_channel(xxz_setups[1.0], 0.5)
    same = ch.interaction_picture(channel, np.zeros((16, 16)))
    assert all(np.allclose(a, b) for a, b in zip(same.kraus, channel.kraus))
    rotated = ch.interaction_picture(channel, xxz_setups[1.0].h_sys)
    assert rotated.tp_residual() < 1e-12
    hs = random_hermitian(rng, 2)
    decoupled = ch.kraus_from_unitary(np.kron(expm_i(hs, 0.3), np.eye(2)), GROUND, 2, tau=0.3)
    ip = ch.interaction_picture(decoupled, hs)
    assert frobenius(ip.kraus[0] - np.eye(2)) < 1e-12 or frobenius(ip.kraus[1] - np.eye(2)) < 1e-12


def test_apply_examples(rng):
    rho = random_density(rng, 2)
    assert np.allclose(ch.apply(identity_channel(2), rho), rho)
    assert np.allclose(ch.apply(depolarizing(), rho), np.eye(2) / 2)
    with pytest.raises(InvalidState):
        ch.apply(identity_channel(2), np.diag([0.7, 0.7]))
    with pytest.raises(InvalidState):
        ch.apply(identity_channel(2), np.diag([1.5, -0.5]))
    with pytest.raises(InvalidState):
        ch.apply(identity_channel(2), np.array([[0.5, 0.5], [0.0, 0.5]]))


def test_superoperator_examples(rng):
    assert np.array_equal(ch.superoperator_matrix(identity_channel(3)).matrix, np.eye(9))
    u = random_unitary(rng, 3)
    s = ch.superoperator_matrix(ch.KrausChannel(3, (u,)))
    assert frobenius(s.matrix - np.kron(u.conj(), u)) < 1e-14


def test_dual_examples(rng):
    u = random_unitary(rng, 2)
    s = ch.superoperator_matrix(ch.KrausChannel(2, (u,)))
    dual = ch.dual_matrix(s)
    o = random_hermitian(rng, 2)
    assert frobenius(dual.act(o) - u.conj().T @ o @ u) < 1e-12
    assert np.array_equal(ch.dual_matrix(dual).matrix, s.matrix)
    channel = ch.kraus_from_unitary(random_unitary(rng, 8), random_density(rng, 2), 4)
    dual = ch.dual_matrix(ch.superoperator_matrix(channel))
    assert frobenius(dual.act(np.eye(4)) - np.eye(4)) < 1e-12
    rho = random_density(rng, 4)
    o = random_hermitian(rng, 4)
    lhs = np.trace(dual.act(o) @ rho)
    rhs = np.trace(o @ channel.apply(rho))
    assert abs(lhs - rhs) < 1e-12


def test_composite_examples(rng, xxz_setups):
    setup = xxz_setups[0.0]
    channel = ch.collision_channel(setup, 1.0)
    rho = random_density(rng, 16)
    assert frobenius(ch.composite(channel, setup.h_sys, 0.0).apply(rho) - channel.apply(rho)) < 1e-13
    free = ch.composite(identity_channel(16), setup.h_sys, 1.3)
    u = expm_i(setup.h_sys, 1.3)
    assert frobenius(free.apply(rho) - u @ rho @ u.conj().T) < 1e-12
    with pytest.raises(NegativeDuration):
        ch.composite(channel, setup.h_sys, -0.1)


def test_composite_order(rng, xxz_setups):
    setup = xxz_setups[1.0]
    cmap = ch.composite(ch.collision_channel(setup, 0.5), setup.h_sys, 2.0)
    rho = random_density(rng, 16)
    assert frobenius(cmap.superoperator().act(rho) - cmap.apply(rho)) < 1e-12
    u = expm_i(setup.h_sys, 2.0)
    expected = np.kron(u.conj(), u) @ ch.superoperator_matrix(cmap.channel).matrix
    assert frobenius(cmap.superoperator().matrix - expected) < 1e-12


def test_choi_examples(rng):
    channel = ch.kraus_from_unitary(random_unitary(rng, 4), random_density(rng, 2), 2)
    assert ch.choi_psd_check(channel).is_cp
    via_superop = ch.choi_matrix(ch.superoperator_matrix(channel))
    assert frobenius(via_superop - ch.choi_matrix(channel)) < 1e-12
    transpose = ch.Superoperator(2, np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], complex))
    rep = ch.choi_psd_check(transpose)
    assert not rep.is_cp and rep.min_eig == pytest.approx(-1.0)
    c = ch.choi_matrix(identity_channel(3))
    w = np.linalg.eigvalsh(c)
    assert np.allclose(w[:-1], 0) and w[-1] == pytest.approx(3.0)
    assert ch.choi_psd_check(identity_channel(3)).is_cp


def test_stationary_unitary_map(rng):
    u = random_unitary(rng, 3)
    cmap = ch.CompositeMap(ch.KrausChannel(3, (u,)), 0.0, np.eye(3, dtype=complex))
    omega = ch.stationary_state(cmap, n_burn=5, n_avg=10)
    assert frobenius(omega - np.eye(3) / 3) < 1e-12


def test_stationary_full_damping():
    cmap = ch.composite(ch.kraus_from_unitary(SWAP, GROUND, 2, tau=1.0), np.zeros((2, 2)), 0.5)
    omega = ch.stationary_state(cmap, n_burn=2, n_avg=3)
    assert frobenius(omega - GROUND) < 1e-14


def test_stationary_xxz(xxz_setups):
    setup = xxz_setups[0.5]
    cmap = ch.composite(ch.collision_channel(setup, 1.0), setup.h_sys, 0.0)
    omega = ch.stationary_state(cmap)
    assert frobenius(cmap.apply(omega) - omega) < 1e-8
    # the Cesaro limit from I/16 is a mixture of dark states
    assert np.trace(omega @ omega).real == pytest.approx(0.59375, abs=1e-10)
    w = np.linalg.eigvalsh(omega)
    assert np.allclose(w[-3:], [0.125, 0.125, 0.75], atol=1e-10)
    assert ch.fixed_point_dimension(cmap) == 5


def test_stationary_without_polish_raises(xxz_setups):
    setup = xxz_setups[0.5]
    cmap = ch.composite(ch.collision_channel(setup, 1.0), setup.h_sys, 0.0)
    with pytest.raises(NotConverged) as info:
        ch.stationary_state(cmap, n_burn=10, n_avg=20, polish=False)
    assert info.value.residual > 1e-8


def test_fixed_point_projector_commutes(xxz_setups):
    setup = xxz_setups[1.0]
    cmap = ch.composite(ch.collision_channel(setup, 1.0), setup.h_sys, 0.7)
    s = cmap.superoperator()
    p = ch.fixed_point_projector(s)
    assert frobenius(p @ p - p) < 1e-8
    assert frobenius(p @ s.matrix - s.matrix @ p) < 1e-8
    assert np.trace(p).real == pytest.approx(3.0, abs=1e-8)


def test_product_decay_norms_nonincreasing(xxz_setups):
    setup = xxz_setups[1.0]
    channel = ch.collision_channel(setup, 1.0)
    cmap = ch.composite(channel, setup.h_sys, 0.3)
    p = ch.fixed_point_projector(cmap.superoperator())
    norms = ch.product_decay_norms([cmap] * 10, p)
    assert len(norms) == 10
    assert norms[-1] <= norms[0] + 1e-12
    # trace is a left fixed vector, so Q carries no trace
    assert abs(vectorize(np.eye(16)) @ (np.eye(256) - p) @ vectorize(np.eye(16)) / 16) < 1e-8


def test_choi_check_gram_path_matches_full(rng):
    channel = ch.kraus_from_unitary(random_unitary(rng, 6), random_density(rng, 2), 3)
    fast = ch.choi_psd_check(channel)
    full = ch.choi_psd_check(ch.superoperator_matrix(channel))
    assert fast.is_cp and full.is_cp
    assert fast.min_eig == 0.0 and abs(full.min_eig) < 1e-12
