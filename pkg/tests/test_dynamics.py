import math

import numpy as np
import pytest

from qperiodic import dynamics as dy
from qperiodic import models as mo
from qperiodic import spectra as sp
from qperiodic.channels import collision_channel, composite
from qperiodic.errors import InvalidState, NonHermitianObservable, StateDriftError
from qperiodic.linalg import expm_i


class FixedUniform:
    def __init__(self, u):
        self.u = u

    def random(self):
        return self.u


def xxz_cfg(**kw):
    base = dict(model=mo.XxzParams(4, 1.0, 1.0), coupling=mo.CouplingParams(6.0, 1.0), n_collisions=20, seed=5)
    base.update(kw)
    return dy.TrajectoryConfig(**base)


def test_mix_seed_matches_splitmix64():
    # first output of the reference splitmix64 generator seeded with 0
    assert dy.mix_seed(0, 0) == 0xE220A8397B1DCDAF
    assert dy.mix_seed(0, 1) == 0x6E789E6AA1B965F4
    assert dy.mix_seed(2**64 - 1, 3) < 2**64
    assert len(set(dy.trajectory_seeds(1, 100))) == 100


def test_sample_waiting_time_examples():
    assert dy.sample_waiting_time(FixedUniform(0.0), 0.5) == 0.0
    assert dy.sample_waiting_time(FixedUniform(0.5), 0.5) == pytest.approx(2 * math.log(2), rel=1e-15)
    rng = np.random.default_rng(3)
    draws = np.array([dy.sample_waiting_time(rng, 0.5) for _ in range(100_000)])
    assert draws.min() >= 0
    assert abs(draws.mean() - 2.0) < 0.02
    with pytest.raises(ValueError):
        dy.sample_waiting_time(rng, 0.0)


def test_random_pure_state():
    rng = np.random.default_rng(11)
    rho = dy.random_pure_state(rng, 8)
    assert abs(np.trace(rho @ rho) - 1) < 1e-12
    assert abs(np.trace(rho) - 1) < 1e-12
    mean = sum(dy.random_pure_state(rng, 4) for _ in range(10_000)) / 10_000
    assert np.max(np.abs(mean - np.eye(4) / 4)) < 3 / math.sqrt(10_000)


def test_expectation_examples():
    assert dy.expectation(np.eye(2) / 2, np.eye(2)) == 1.0
    assert dy.expectation(mo.ancilla_ground(), mo.SIGMA_Z) == -1.0
    assert dy.expectation(np.eye(2) / 2, mo.SIGMA_X) == 0.0
    with pytest.raises(NonHermitianObservable):
        dy.expectation(np.eye(2) / 2, mo.SIGMA_MINUS)
    with pytest.raises(InvalidState):
        dy.expectation(np.array([[0.5, 1j], [0.0, 0.5]]), mo.SIGMA_X)


def test_config_validation():
    with pytest.raises(ValueError):
        xxz_cfg(gamma=0.0)
    with pytest.raises(ValueError):
        xxz_cfg(dt_out=0.0)
    with pytest.raises(ValueError):
        xxz_cfg(n_collisions=0)


def test_grid_and_final_time():
    cfg = xxz_cfg()
    ts = dy.run_trajectory(cfg)
    rng = np.random.default_rng(cfg.seed)
    dy.random_pure_state(rng, 16)
    thetas = [dy.sample_waiting_time(rng, cfg.gamma) for _ in range(cfg.n_collisions)]
    assert ts.final_time == pytest.approx(cfg.n_collisions * cfg.tau + sum(thetas), abs=1e-12)
    assert np.all(np.diff(ts.times) > 0)
    assert np.allclose(np.diff(ts.times), cfg.dt_out)
    assert ts.times[0] == 0.0 and ts.times[-1] <= ts.final_time + 1e-9
    assert ts.final_time - ts.times[-1] < cfg.dt_out
    assert len(ts.collision_times) == cfg.n_collisions
    assert ts.collision_times[1][0] == pytest.approx(cfg.tau + thetas[0])
    assert all(np.all(np.isfinite(v)) for v in ts.values.values())


def test_decoupled_magnetization_constant():
    # hopping moves single-site magnetization around; only the total is conserved
    cfg = xxz_cfg(coupling=mo.CouplingParams(0.0, 1.0), n_collisions=1, observables=("sz_total", "sz2"))
    ts = dy.run_trajectory(cfg)
    assert np.ptp(ts.values["sz_total"]) < 1e-12
    assert np.ptp(ts.values["sz2"]) > 1e-3
    cfg = xxz_cfg(
        coupling=mo.CouplingParams(0.0, 1.0),
        n_collisions=1,
        initial_state="all_up",
        observables=("sz1", "sz2", "sz3", "sz4"),
    )
    for v in dy.run_trajectory(cfg).values.values():
        assert np.ptp(v) < 1e-12


@pytest.mark.parametrize("tau", [1e-9, 1.0])
def test_decoupled_matches_free_evolution(tau):
    cfg = xxz_cfg(coupling=mo.CouplingParams(0.0, tau), n_collisions=3, observables=("sx1", "sx2"))
    ts = dy.run_trajectory(cfg)
    rho0 = dy.random_pure_state(np.random.default_rng(cfg.seed), 16)
    h = mo.build_xxz(cfg.model)
    for name in cfg.observables:
        o = mo.observable(name, 4)
        exact = [np.trace(o @ expm_i(h, t) @ rho0 @ expm_i(h, -t)).real for t in ts.times]
        assert np.max(np.abs(ts.values[name] - exact)) < 1e-10


def test_collision_window_matches_joint_evolution():
    cfg = xxz_cfg(n_collisions=2, observables=("sx2",))
    setup = dy.setup_for(cfg)
    ts = dy.run_trajectory(cfg)
    rho0 = dy.random_pure_state(np.random.default_rng(cfg.seed), 16)
    o = mo.observable("sx2", 4)
    h_tot = np.kron(setup.h_sys, np.eye(2)) + setup.h_int(cfg.tau)
    inside = ts.times < cfg.tau
    for t, v in zip(ts.times[inside], ts.values["sx2"][inside]):
        u = expm_i(h_tot, t)
        joint = u @ np.kron(rho0, setup.rho_anc) @ u.conj().T
        assert abs(np.trace(np.kron(o, np.eye(2)) @ joint).real - v) < 1e-12


def test_propagator_collision_paths_agree():
    cfg = xxz_cfg()
    prop = dy._Propagator(dy.setup_for(cfg), cfg.tau, cfg.observables)
    rho = dy.random_pure_state(np.random.default_rng(0), 16)
    assert np.linalg.norm(prop.collide(rho) - prop.collide_joint(rho)) < 1e-12


def test_excitations_do_not_grow_at_collisions():
    cfg = xxz_cfg()
    setup = dy.setup_for(cfg)
    channel = collision_channel(setup, cfg.tau)
    n_op = mo.excitation_number(4)
    rng = np.random.default_rng(9)
    rho = dy.random_pure_state(rng, 16)
    last = np.trace(n_op @ rho).real
    for _ in range(30):
        rho = composite(channel, setup.h_sys, dy.sample_waiting_time(rng, 0.5)).apply(rho)
        now = np.trace(n_op @ rho).real
        assert now <= last + 1e-10
        last = now


def test_drift_is_reported(monkeypatch):
    cfg = xxz_cfg(n_collisions=3)
    monkeypatch.setattr(dy._Propagator, "collide", lambda self, rho: 1.001 * self.channel.apply(rho))
    with pytest.raises(StateDriftError):
        dy.run_trajectory(cfg)


def test_given_and_all_up_initial_states():
    cfg = xxz_cfg(initial_state="all_up", n_collisions=2, observables=("excitations",))
    ts = dy.run_trajectory(cfg)
    assert ts.values["excitations"][0] == pytest.approx(4.0)
    rho = np.eye(16) / 16
    ts = dy.run_trajectory(xxz_cfg(initial_state=rho, n_collisions=2, observables=("sx1",)))
    assert abs(ts.values["sx1"][0]) < 1e-14
    with pytest.raises(ValueError):
        dy.run_trajectory(xxz_cfg(initial_state="thermal"))


def test_custom_sampler():
    cfg = xxz_cfg(n_collisions=4, sampler=lambda g: 0.5)
    ts = dy.run_trajectory(cfg)
    assert ts.final_time == pytest.approx(4 * 1.5)


def test_determinism_and_thread_independence(monkeypatch):
    cfg = xxz_cfg(n_collisions=10)
    a = dy.run_trajectory(cfg)
    b = dy.run_trajectory(cfg)
    assert all(np.array_equal(a.values[k], b.values[k]) for k in a.values)
    monkeypatch.setenv("QPERIODIC_THREADS", "1")
    e1 = dy.ensemble_average(cfg, 4)
    monkeypatch.setenv("QPERIODIC_THREADS", "4")
    e4 = dy.ensemble_average(cfg, 4)
    assert np.array_equal(e1.times, e4.times)
    assert all(np.array_equal(e1.values[k], e4.values[k]) for k in e1.values)


def test_ensemble_single_equals_trajectory():
    cfg = xxz_cfg(n_collisions=10)
    a = dy.run_trajectory(cfg)
    e = dy.ensemble_average(cfg, 1)
    assert all(np.array_equal(a.values[k], e.values[k]) for k in a.values)


def test_ensemble_truncates_to_shortest():
    cfg = xxz_cfg(n_collisions=10)
    runs = [dy.run_trajectory(xxz_cfg(n_collisions=10, seed=s)) for s in dy.trajectory_seeds(cfg.seed, 3)]
    e = dy.ensemble_average(cfg, 3)
    n = min(len(r) for r in runs)
    assert len(e) == n
    expected = sum(r.values["sx2"][:n] for r in runs) / 3
    assert np.allclose(e.values["sx2"], expected, atol=1e-15)
    with pytest.raises(ValueError):
        dy.ensemble_average(cfg, 0)


def test_thread_count(monkeypatch):
    monkeypatch.setenv("QPERIODIC_THREADS", "3")
    assert dy.thread_count() == 3
    monkeypatch.setenv("QPERIODIC_THREADS", "0")
    assert dy.thread_count() >= 1
    monkeypatch.setenv("QPERIODIC_THREADS", "-2")
    with pytest.raises(ValueError):
        dy.thread_count()


def test_peak_frequency_stable_across_seeds():
    # delta = 1: the Xi2 mode oscillates at |omega0 - 4 delta| = 3
    peaks = []
    for seed in dy.trajectory_seeds(7, 3):
        cfg = xxz_cfg(n_collisions=400, seed=seed, observables=("sx2",))
        ts = dy.run_trajectory(cfg)
        spec = sp.windowed_fourier(ts.times, ts.values["sx2"], 250.0, 4.0, 2048)
        peaks.append(sp.dominant_peak(spec).omega)
        assert abs(peaks[-1] - 3.0) <= spec.bin_width
    assert max(peaks) - min(peaks) <= spec.bin_width


def test_ensemble_keeps_xi1_oscillation():
    cfg = xxz_cfg(model=mo.XxzParams(4, 1.0, 0.5), n_collisions=400, seed=3, observables=("sx3",))
    ens = dy.ensemble_average(cfg, 8)
    spec = sp.windowed_fourier(ens.times, ens.values["sx3"], 250.0, 4.0, 2048)
    peak = sp.dominant_peak(spec)
    assert abs(peak.omega - 1.0) <= spec.bin_width
    assert peak.prominence > 10
