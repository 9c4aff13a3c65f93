import numpy as np
import pytest

from twofluid.eigen import (CollapseReport, approx_eigenvalues, collapse_probe,
                            mixture_speeds, numeric_bounds, numeric_spectrum)
from twofluid.eos import IdealGas, LinearizedLiquid, ValidityBox
from twofluid.errors import NonHyperbolic
from twofluid.model import SourceConfig, conserved_from_primitives, jacobian

BOX = ValidityBox(1e3, 1e8, 1e3, 1e8)
EOS_V = IdealGas(gamma=1.4, box=BOX)
EOS_L = LinearizedLiquid(rho_ref=988.0, c_ref=1500.0, p_ref=1e5, h_ref=2.1e5,
                         box=BOX)
SRC = SourceConfig()

CH_EOS_V = IdealGas(gamma=1.0737573290510514, box=ValidityBox(1e5, 2e7, 1e5, 4e6))
CH_EOS_L = LinearizedLiquid(rho_ref=742.0, c_ref=800.0, p_ref=68.73e5,
                            h_ref=1.262e6, box=ValidityBox(1e5, 2e7, 1e5, 4e6))


def state(alpha=0.3, p=1.2e5, u_v=13.0, u_l=10.0, h_v=3.3e5, h_l=2.1e5):
    return conserved_from_primitives(alpha, p, u_v, u_l, h_v, h_l, EOS_V, EOS_L)


class TestApproxEigenvalues:
    def test_equal_velocities_exact(self):
        # u_r = 0: spectrum is {u - a_m, u + a_m, u, u, u, u} exactly
        s = state(u_v=10.0, u_l=10.0)
        b = approx_eigenvalues(s, EOS_V, EOS_L, SRC)
        rho_v, rho_l = s.densities(EOS_V, EOS_L)
        c_v = float(EOS_V.sound_speed(1.2e5, 3.3e5))
        c_l = float(EOS_L.sound_speed(1.2e5, 2.1e5))
        a_m, _, _ = mixture_speeds(0.3, float(rho_v), float(rho_l), c_v, c_l)
        est = np.sort(b.estimates[0])
        assert est[0] == pytest.approx(10.0 - float(a_m), rel=1e-12)
        assert est[-1] == pytest.approx(10.0 + float(a_m), rel=1e-12)
        assert np.allclose(est[1:-1], 10.0, atol=1e-12)
        lam = np.sort(np.linalg.eigvals(
            jacobian(s, SRC, EOS_V, EOS_L)[0]).real)
        assert np.allclose(lam, est, rtol=1e-6, atol=1e-6 * b.a_max[0])

    def test_marginal_delta_degenerates_void_pair(self):
        # delta = 1 zeroes the void radicand: the pair splits only by
        # evaluation roundoff of the cancelling products
        src1 = SourceConfig(delta=1.0)
        s = state()
        b = approx_eigenvalues(s, EOS_V, EOS_L, src1)
        assert b.estimates[0, 2] == pytest.approx(b.estimates[0, 3], abs=1e-5)

    def test_nonhyperbolic_below_bestion_bound(self):
        # the construction guard forbids delta < 1; poke the field to
        # emulate an interfacial pressure below the hyperbolicity bound
        src = SourceConfig(delta=1.0)
        src.delta = 0.5
        with pytest.raises(NonHyperbolic):
            approx_eigenvalues(state(), EOS_V, EOS_L, src)

    def test_hyperbolic_for_delta_above_one(self):
        for delta in (1.0, 1.05, 1.5):
            src = SourceConfig(delta=delta)
            approx_eigenvalues(state(), EOS_V, EOS_L, src)

    def test_bracketing_with_inflation(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            alpha = rng.uniform(0.05, 0.95)
            u_l = rng.uniform(-5, 15)
            s = state(alpha=alpha, u_v=u_l + rng.uniform(-1, 1), u_l=u_l)
            b = approx_eigenvalues(s, EOS_V, EOS_L, SRC)
            lam = np.linalg.eigvals(jacobian(s, SRC, EOS_V, EOS_L)[0]).real
            tol = 0.01 * b.a_max[0]
            assert lam.min() >= b.lam_min[0] - tol
            assert lam.max() <= b.lam_max[0] + tol

    def test_channel_intermediate_ratio_order(self):
        # at the boiling-channel operating state the intermediate over
        # acoustic eigenvalue ratio is of order 1e-4..1e-3
        s = conserved_from_primitives(1e-3, 68.73e5, 0.7802, 0.7802,
                                      2.784e6, 1.262e6, CH_EOS_V, CH_EOS_L)
        b = approx_eigenvalues(s, CH_EOS_V, CH_EOS_L, SRC)
        ratio = b.lam_int_max[0] / b.a_max[0]
        assert 1e-5 < ratio < 2e-3

    def test_approx_matches_numeric_within_xi2(self):
        # O(xi^2) accuracy claim, C <= 10
        rng = np.random.default_rng(3)
        for _ in range(40):
            alpha = rng.uniform(0.05, 0.95)
            u_l = rng.uniform(0.0, 12.0)
            s = state(alpha=alpha, u_v=u_l, u_l=u_l)
            b0 = approx_eigenvalues(s, EOS_V, EOS_L, SRC)
            a_m = 0.5 * (b0.lam_max[0] - b0.lam_min[0]) / 1.02
            xi = rng.uniform(1e-3, 0.01)
            s = state(alpha=alpha, u_v=u_l + xi * a_m, u_l=u_l)
            b = approx_eigenvalues(s, EOS_V, EOS_L, SRC)
            lam = np.sort(np.linalg.eigvals(
                jacobian(s, SRC, EOS_V, EOS_L)[0]).real)
            err = np.max(np.abs(lam - np.sort(b.estimates[0])))
            assert err <= 10.0 * xi**2 * a_m


class TestNumericSpectrum:
    def test_diagonal(self):
        w, r, cond = numeric_spectrum(np.diag([3.0, -2.0, 1.0]))
        assert np.allclose(sorted(w.real), [-2, 1, 3])
        assert cond == pytest.approx(1.0, rel=1e-12)

    def test_jordan_block_flagged_by_condition(self):
        a = np.array([[2.0, 1.0], [0.0, 2.0]])
        w, r, cond = numeric_spectrum(a)
        assert cond > 1e7    # numerically defective

    def test_condition_grows_toward_phase_disappearance(self):
        conds = []
        for expo in range(1, 9):
            alpha = 10.0**-expo
            u_r = 0.5 * np.sqrt(alpha / 0.1)
            s = conserved_from_primitives(alpha, 68.73e5, 0.7802 + u_r, 0.7802,
                                          2.784e6, 1.162e6, CH_EOS_V, CH_EOS_L)
            amat = jacobian(s, SRC, CH_EOS_V, CH_EOS_L)
            _, _, cond = numeric_spectrum(amat[0])
            conds.append(cond)
        assert np.all(np.diff(conds) > 0)

    def test_numeric_bounds_source_tag(self):
        b = numeric_bounds(np.diag([-3.0, 0.5, 2.0, 1.0, -1.0, 0.1]))
        assert b.source == "numeric"
        assert b.a_signal[0] == pytest.approx(3.0)


class TestCollapseProbe:
    def factory(self):
        def make(alpha):
            u_r = 0.5 * np.sqrt(alpha / 0.1)
            s = conserved_from_primitives(alpha, 68.73e5, 0.7802 + u_r, 0.7802,
                                          2.784e6, 1.162e6, CH_EOS_V, CH_EOS_L)
            amat = jacobian(s, SRC, CH_EOS_V, CH_EOS_L)
            b = approx_eigenvalues(s, CH_EOS_V, CH_EOS_L, SRC)
            return s, amat, b
        return make

    def test_angle_decreases_and_condition_grows(self):
        rep = collapse_probe(self.factory(), [10.0**-k for k in range(1, 9)])
        assert isinstance(rep, CollapseReport)
        assert np.all(np.diff(rep.angle_rad) < 0)
        assert rep.cond_r[-1] / rep.cond_r[0] >= 1e3

    def test_halfway_state_angle_bounded_away_from_zero(self):
        rep = collapse_probe(self.factory(), [0.5, 0.25])
        assert np.all(rep.angle_rad > 1e-2)

    def test_equal_velocity_states_share_eigenvector_family(self):
        # u_r = 0 exactly: the void pair merges into the material-velocity
        # eigenvector family for any alpha.  Membership is the numerical
        # statement (the basis inside the merged eigenspace is arbitrary):
        # both void-slot vectors are u-eigenvectors of A to roundoff.
        for alpha in (0.5, 0.3):
            s = conserved_from_primitives(alpha, 68.73e5, 0.7802, 0.7802,
                                          2.784e6, 1.162e6, CH_EOS_V, CH_EOS_L)
            amat = jacobian(s, SRC, CH_EOS_V, CH_EOS_L)[0]
            b = approx_eigenvalues(s, CH_EOS_V, CH_EOS_L, SRC)
            w, r, _ = numeric_spectrum(amat)
            order_est = np.argsort(b.estimates[0])
            rank = np.empty(6, dtype=int)
            rank[order_est] = np.arange(6)
            order_num = np.argsort(w.real)
            norm_a = np.linalg.norm(amat, 2)
            for slot in (2, 3):
                vec = r[:, order_num[rank[slot]]].real
                resid = np.linalg.norm(amat @ vec - 0.7802 * vec)
                assert resid / (norm_a * np.linalg.norm(vec)) < 1e-8

    def test_rejects_unsorted_sweep(self):
        with pytest.raises(ValueError):
            collapse_probe(self.factory(), [1e-3, 1e-2])
