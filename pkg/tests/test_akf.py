import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vibroforce.akf import (AugmentedModel, FilterError, FilterState, StateSpaceModel, augment,
                            build_state_space, discretize, measurement_update, run_filter, time_update)
from vibroforce.newmark import NewmarkParams, SecondOrderSystem, State, integrate
from vibroforce.rom import RomSpec, identity_reduction, reduce_system
from vibroforce.system_model import CoupledSystem, SelectionConfig

from conftest import sinusoid_forces


def sdof_rom(m=1.0, k=4.0):
    s = CoupledSystem(Ms=[[m]], Ks=[[k]], Mf=[[1.0]], Kf=[[1.0]], C=[[0.0]], rho_f=1.0, c=1.0)
    return reduce_system(s, RomSpec(1, 1))


def random_model(seed, n=4, nz=2):
    rng = np.random.default_rng(seed)
    Aa = np.eye(n) + 0.1 * rng.standard_normal((n, n))
    X = rng.standard_normal((n, n))
    Y = rng.standard_normal((nz, nz))
    return AugmentedModel(Aa=Aa, Ga=rng.standard_normal((nz, n)), Q=0.01 * X @ X.T,
                          R=Y @ Y.T + np.eye(nz), n_state=n - 1, dt=0.1), rng


class TestStateSpace:
    def test_sdof(self):
        ssm = build_state_space(sdof_rom(), np.array([[1.0], [0.0]]))
        # state order is (d_s, d_f, v_s, v_f)
        np.testing.assert_allclose(ssm.Ac[np.ix_([0, 2], [0, 2])], [[0, 1], [-4, 0]])

    def test_undamped_lower_right_block_is_zero(self, small_toy):
        rom = reduce_system(small_toy, RomSpec(3, 3))
        ssm = build_state_space(rom, np.zeros((rom.n_dof, 1)))
        m = rom.size
        assert not ssm.Ac[m:, m:].any()
        np.testing.assert_array_equal(ssm.Ac[:m, m:], np.eye(m))
        assert not ssm.Ac[:m, :m].any() and not ssm.Bc[:m].any()

    def test_eigenvalues_are_imaginary_pairs(self, small_toy):
        rom = reduce_system(small_toy, RomSpec(4, 4))
        ssm = build_state_space(rom, np.zeros((rom.n_dof, 1)))
        ev = np.linalg.eigvals(ssm.Ac)
        lam = np.sort(np.linalg.eigvals(np.linalg.solve(rom.Ahat, rom.Bhat)).real)
        np.testing.assert_allclose(np.abs(ev.real), 0.0, atol=1e-6 * np.abs(ev).max())
        np.testing.assert_allclose(np.sort(np.abs(ev.imag))[::2], np.sqrt(lam), rtol=1e-8)


class TestDiscretize:
    def test_zero_dynamics(self):
        Bc = np.array([[1.0], [2.0]])
        Ad, Bd = discretize(StateSpaceModel(np.zeros((2, 2)), Bc), 0.3)
        np.testing.assert_array_equal(Ad, np.eye(2))
        np.testing.assert_allclose(Bd, 0.3 * Bc, rtol=1e-15)

    def test_nilpotent(self):
        Ad, Bd = discretize(StateSpaceModel(np.array([[0.0, 1.0], [0.0, 0.0]]), np.array([[0.0], [1.0]])), 1.0)
        np.testing.assert_allclose(Ad, [[1, 1], [0, 1]], atol=1e-15)
        np.testing.assert_allclose(Bd, [[0.5], [1.0]], atol=1e-15)

    @pytest.mark.parametrize("omega,dt", [(2.0, 0.01), (50.0, 1e-3), (1.0, 1.3)])
    def test_oscillator_rotation(self, omega, dt):
        Ac = np.array([[0.0, 1.0], [-omega**2, 0.0]])
        Ad, Bd = discretize(StateSpaceModel(Ac, np.array([[0.0], [1.0]])), dt)
        c, s = np.cos(omega * dt), np.sin(omega * dt)
        np.testing.assert_allclose(Ad, [[c, s / omega], [-omega * s, c]], atol=1e-10)
        np.testing.assert_allclose(Bd, [[(1 - c) / omega**2], [s / omega]], atol=1e-10)

    def test_invalid_dt(self):
        with pytest.raises(FilterError):
            discretize(StateSpaceModel(np.eye(1), np.eye(1)), 0.0)


class TestAugment:
    def _aug(self, rom, sel, dt=1e-3):
        S_f = sel.matrices(rom.n_dof)[3]
        Ad, Bd = discretize(build_state_space(rom, S_f), dt)
        n = 2 * rom.size + sel.n_forces
        return augment(Ad, Bd, rom, sel, np.zeros((n, n)), np.eye(sel.n_meas), dt)

    def test_block_pattern(self, small_toy):
        rom = reduce_system(small_toy, RomSpec(3, 3))
        sel = SelectionConfig(acc_idx=(2,), force_idx=(1, 4))
        model = self._aug(rom, sel)
        n = 2 * rom.size
        np.testing.assert_array_equal(model.Aa[n:, :n], 0.0)
        np.testing.assert_array_equal(model.Aa[n:, n:], np.eye(2))
        assert model.n_forces == 2

    def test_no_acceleration_sensors_no_feedthrough(self, small_toy):
        rom = reduce_system(small_toy, RomSpec(3, 3))
        model = self._aug(rom, SelectionConfig(disp_idx=(2,), vel_idx=(5,), force_idx=(1,)))
        assert not model.Ga[:, 2 * rom.size:].any()

    def test_identity_basis_displacement_sensing(self, small_toy):
        rom = identity_reduction(small_toy)
        object.__setattr__(rom, "Dhat", np.eye(rom.size))  # keep the state matrix well defined
        sel = SelectionConfig(disp_idx=(0, 3), force_idx=(1,))
        model = self._aug(rom, sel)
        S_d = sel.matrices(rom.n_dof)[0]
        np.testing.assert_array_equal(model.Ga, np.hstack([S_d, np.zeros_like(S_d), np.zeros((2, 1))]))

    def test_measurement_matrix_matches_newmark(self, toy_rom):
        sel = SelectionConfig(disp_idx=(5,), vel_idx=(40,), acc_idx=(11, 31, 51, 71), force_idx=(10, 30, 50, 70))
        model = self._aug(toy_rom, sel)
        p = NewmarkParams(dt=1e-3)
        t = p.dt * np.arange(301)
        F = sinusoid_forces(t)
        S_d, S_v, S_a, S_f = sel.matrices(toy_rom.n_dof)
        tr = integrate(SecondOrderSystem.from_reduced(toy_rom), State.zeros(toy_rom.size),
                       F @ toy_rom.load_operator(S_f).T, p)
        T = toy_rom.T
        for k in (1, 150, 300):
            x = np.concatenate([tr.d[k], tr.v[k], F[k]])
            z = np.concatenate([S_d @ T @ tr.d[k], S_v @ T @ tr.v[k], S_a @ T @ tr.a[k]])
            np.testing.assert_allclose(model.Ga @ x, z, rtol=1e-8, atol=1e-8 * np.abs(z).max())

    def test_rejects_indefinite_noise(self, small_toy):
        rom = reduce_system(small_toy, RomSpec(2, 2))
        sel = SelectionConfig(acc_idx=(2,), force_idx=(1,))
        Ad, Bd = discretize(build_state_space(rom, sel.matrices(rom.n_dof)[3]), 1e-3)
        n = 2 * rom.size + 1
        with pytest.raises(FilterError, match="R"):
            augment(Ad, Bd, rom, sel, np.zeros((n, n)), -np.eye(1))
        with pytest.raises(FilterError, match="Q"):
            augment(Ad, Bd, rom, sel, -np.eye(n), np.eye(1))
        with pytest.raises(FilterError, match="must be"):
            augment(Ad, Bd, rom, sel, np.zeros((2, 2)), np.eye(1))


class TestMeasurementUpdate:
    def test_huge_noise_ignores_measurement(self):
        model, rng = random_model(0)
        model = AugmentedModel(model.Aa, model.Ga, model.Q, 1e12 * np.eye(2), model.n_state, model.dt)
        x = rng.standard_normal(4)
        fs = measurement_update(model, FilterState(x, np.eye(4)), 1e3 * np.ones(2))
        np.testing.assert_allclose(fs.x, x, atol=1e-6)

    def test_perfect_scalar_measurement(self):
        model = AugmentedModel(np.eye(1), np.eye(1), np.zeros((1, 1)), np.array([[1e-14]]), 0, 1.0)
        fs = measurement_update(model, FilterState(np.zeros(1), np.eye(1)), np.array([3.0]))
        assert fs.x[0] == pytest.approx(3.0, rel=1e-12)
        assert fs.P[0, 0] == pytest.approx(0.0, abs=1e-13)

    @pytest.mark.parametrize("seed", range(5))
    def test_joseph_form(self, seed):
        model, rng = random_model(seed)
        X = rng.standard_normal((4, 4))
        P = X @ X.T + np.eye(4)
        fs = measurement_update(model, FilterState(np.zeros(4), P), np.zeros(2))
        G, R = model.Ga, model.R
        L = P @ G.T @ np.linalg.inv(G @ P @ G.T + R)
        I_LG = np.eye(4) - L @ G
        joseph = I_LG @ P @ I_LG.T + L @ R @ L.T
        np.testing.assert_allclose(fs.P, joseph, atol=1e-10 * np.abs(joseph).max())
        np.testing.assert_array_equal(fs.P, fs.P.T)


class TestTimeUpdate:
    def test_identity(self):
        fs = FilterState(np.arange(3.0), np.diag([1.0, 2.0, 3.0]))
        out = time_update(AugmentedModel(np.eye(3), np.eye(3), np.zeros((3, 3)), np.eye(3), 2, 1.0), fs)
        np.testing.assert_array_equal(out.x, fs.x)
        np.testing.assert_array_equal(out.P, fs.P)

    def test_trace_grows_by_q_dim(self):
        fs = FilterState(np.zeros(3), np.eye(3))
        out = time_update(AugmentedModel(np.eye(3), np.eye(3), 0.5 * np.eye(3), np.eye(3), 2, 1.0), fs)
        assert np.trace(out.P) == pytest.approx(3 + 1.5)

    def test_composition(self):
        model, rng = random_model(3)
        X = rng.standard_normal((4, 4))
        fs = FilterState(rng.standard_normal(4), X @ X.T)
        two = time_update(model, time_update(model, fs))
        Aa, Q = model.Aa, model.Q
        np.testing.assert_allclose(two.x, Aa @ Aa @ fs.x, rtol=1e-12)
        np.testing.assert_allclose(two.P, Aa @ Aa @ fs.P @ (Aa @ Aa).T + Aa @ Q @ Aa.T + Q, rtol=1e-10)


@pytest.fixture(scope="module")
def toy_model(toy_rom):
    sel = SelectionConfig(disp_idx=(11, 31, 51, 71, 21, 61), force_idx=(10, 30, 50, 70))
    dt = 1e-4
    S_f = sel.matrices(toy_rom.n_dof)[3]
    Ad, Bd = discretize(build_state_space(toy_rom, S_f), dt)
    n = 2 * toy_rom.size
    Q = np.diag(np.r_[np.full(n, 1e-20), np.full(4, 3e6 * dt)])
    return sel, augment(Ad, Bd, toy_rom, sel, Q, 1e-12 * np.eye(6), dt)


class TestRunFilter:
    def test_zero_in_zero_out(self, toy_model):
        _, model = toy_model
        n = model.Aa.shape[0]
        out = run_filter(model, FilterState(np.zeros(n), np.eye(n)), np.zeros((20, 6)))
        assert not out.forces.any() and not out.states.any()
        assert out.forces.shape == (20, 4) and out.wall_time >= 0

    def test_covariance_stays_psd(self):
        model, rng = random_model(11)
        Aa = model.Aa / np.abs(np.linalg.eigvals(model.Aa)).max()
        model = AugmentedModel(Aa, model.Ga, model.Q, model.R, model.n_state, model.dt)
        fs = FilterState(np.zeros(4), np.eye(4))
        out = run_filter(model, fs, rng.standard_normal((10_000, 2)))
        assert np.linalg.eigvalsh(out.final.P).min() >= -1e-12 * np.abs(out.final.P).max()

    @settings(max_examples=10, deadline=None)
    @given(st.floats(1e-3, 1e3))
    def test_scale_consistency(self, c):
        # scaling z, x0 by c and P0, Q, R by c^2 scales the estimates by c
        model, rng = random_model(4)
        Z = rng.standard_normal((30, 2))
        fs = FilterState(rng.standard_normal(4), np.eye(4))
        scaled = AugmentedModel(model.Aa, model.Ga, c * c * model.Q, c * c * model.R, model.n_state, model.dt)
        a = run_filter(model, fs, Z)
        b = run_filter(scaled, FilterState(c * fs.x, c * c * fs.P), c * Z)
        np.testing.assert_allclose(b.states, c * a.states, rtol=1e-8, atol=1e-10 * c)
        np.testing.assert_allclose(b.forces, c * a.forces, rtol=1e-8, atol=1e-10 * c)

    def test_frozen_force_without_force_noise(self, toy_model):
        _, model = toy_model
        n = model.Aa.shape[0]
        Q = model.Q.copy()
        Q[model.n_state:, model.n_state:] = 0.0
        frozen = AugmentedModel(model.Aa, model.Ga, Q, model.R, model.n_state, model.dt)
        x0 = np.zeros(n)
        x0[model.n_state:] = [1.0, -2.0, 3.0, 0.5]
        P0 = np.diag(np.r_[np.full(model.n_state, 1e-12), np.zeros(4)])
        out = run_filter(frozen, FilterState(x0, P0), np.zeros((50, 6)))
        np.testing.assert_allclose(out.forces, np.tile(x0[model.n_state:], (50, 1)), rtol=1e-12)

    def test_channel_mismatch(self, toy_model):
        _, model = toy_model
        n = model.Aa.shape[0]
        with pytest.raises(FilterError, match="channels"):
            run_filter(model, FilterState(np.zeros(n), np.eye(n)), np.zeros((3, 2)))
