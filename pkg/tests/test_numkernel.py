import numpy as np
import pytest
import scipy.linalg as sla

from evshield.statespace import StateSpaceModel
from evshield import numkernel as nk


def rand_stable(rng, n, margin=0.2):
    A = rng.standard_normal((n, n))
    A -= (nk.spectral_abscissa(A) + margin) * np.eye(n)
    return A


def siso(a, b_d, c, d_d=0.0):
    return StateSpaceModel(A=[[a]], B=np.zeros((1, 0)), B_d=[[b_d]],
                           C=[[c]], D=np.zeros((1, 0)), D_d=[[d_d]])


class TestLyapunov:
    def test_identity_case(self):
        P = nk.solve_lyapunov(-np.eye(2), 2 * np.eye(2))
        assert np.allclose(P, np.eye(2))

    def test_diagonal_modes(self):
        # per-mode scalar equation 2 a p + q = 0
        P = nk.solve_lyapunov(np.diag([-1.0, -2.0]), np.eye(2))
        assert np.allclose(P, np.diag([0.5, 0.25]))

    def test_random_residual(self):
        rng = np.random.default_rng(7)
        A = rand_stable(rng, 8)
        Q = rng.standard_normal((8, 8))
        Q = Q + Q.T
        P = nk.solve_lyapunov(A, Q)
        resid = np.linalg.norm(A @ P + P @ A.T + Q, "fro")
        assert resid <= 1e-9 * (1 + np.linalg.norm(Q, "fro"))
        assert np.allclose(P, P.T)

    def test_not_hurwitz(self):
        with pytest.raises(nk.NotHurwitzError):
            nk.solve_lyapunov(np.eye(2), np.eye(2))

    def test_randomized_suite(self):
        rng = np.random.default_rng(123)
        for _ in range(200):
            n = int(rng.integers(1, 13))
            A = rand_stable(rng, n)
            Q = rng.standard_normal((n, n))
            Q = Q + Q.T
            P = nk.solve_lyapunov(A, Q)
            resid = np.linalg.norm(A @ P + P @ A.T + Q, "fro")
            assert resid <= 1e-9 * (1 + np.linalg.norm(Q, "fro"))


class TestCare:
    def test_scalar_trivial(self):
        # 0 = -s^2 + 1, positive root
        S = nk.solve_care([[0.0]], [[1.0]], [[1.0]], [[1.0]])
        assert np.allclose(S, [[1.0]], atol=1e-8)

    def test_scalar_stabilizing_root(self):
        # s^2 - 2 s - 1 = 0 -> s = 1 + sqrt(2) (a - b s < 0)
        S = nk.solve_care([[1.0]], [[1.0]], [[1.0]], [[1.0]])
        assert np.allclose(S, [[1.0 + np.sqrt(2.0)]], atol=1e-8)

    def test_random_residual_and_stabilizing(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            n = int(rng.integers(2, 7))
            A = rng.standard_normal((n, n))
            B = rng.standard_normal((n, max(1, n // 2)))
            Cq = rng.standard_normal((n, n))
            Q = Cq.T @ Cq
            R = np.eye(B.shape[1])
            S = nk.solve_care(A, B, Q, R)
            resid = np.linalg.norm(S @ A + A.T @ S - S @ B @ B.T @ S + Q, "fro")
            assert resid <= 1e-8 * (1 + np.linalg.norm(S, "fro") ** 2)
            assert nk.spectral_abscissa(A - B @ B.T @ S) < 0

    def test_matches_scipy(self):
        rng = np.random.default_rng(5)
        A = rng.standard_normal((6, 6))
        B = rng.standard_normal((6, 2))
        Q = np.eye(6)
        R = np.eye(2)
        S = nk.solve_care(A, B, Q, R)
        S_ref = sla.solve_continuous_are(A, B, Q, R)
        assert np.allclose(S, S_ref, rtol=1e-6, atol=1e-8)

    def test_not_stabilizable(self):
        # unstable mode with zero input column
        A = np.diag([1.0, -1.0])
        B = np.array([[0.0], [1.0]])
        with pytest.raises(nk.NotStabilizableError):
            nk.solve_care(A, B, np.eye(2), [[1.0]])


class TestH2Norm:
    def test_first_order(self):
        # Gramian p solves -2p + 1 = 0 -> norm sqrt(1/2)
        assert nk.h2_norm(siso(-1, 1, 1)) == pytest.approx(np.sqrt(0.5), rel=1e-9)

    def test_zero_output(self):
        assert nk.h2_norm(siso(-1, 1, 0)) == 0.0

    def test_nonzero_feedthrough(self):
        with pytest.raises(nk.NonzeroFeedthroughError):
            nk.h2_norm(siso(-1, 1, 1, d_d=3.0))

    def test_unstable(self):
        with pytest.raises(nk.UnstableError):
            nk.h2_norm(siso(1, 1, 1))

    def test_quadrature_oracle(self):
        # independent oracle: trapezoid quadrature of ||T(jw)||_F^2 / (2 pi)
        rng = np.random.default_rng(3)
        A = rand_stable(rng, 5, margin=0.5)
        sys = StateSpaceModel(A=A, B=np.zeros((5, 0)), B_d=rng.standard_normal((5, 2)),
                              C=rng.standard_normal((2, 5)), D=np.zeros((2, 0)),
                              D_d=np.zeros((2, 2)))
        w = np.linspace(-2000.0, 2000.0, 4_000_001)
        # vectorized frequency sweep via eigen-decomposition of A
        lam, V = np.linalg.eig(A)
        Vi = np.linalg.inv(V)
        Bm = Vi @ sys.B_d
        Cm = sys.C @ V
        # T(jw) = Cm diag(1/(jw - lam)) Bm
        denom = 1j * w[:, None] - lam[None, :]
        G = np.einsum("qk,wk,kp->wqp", Cm, 1.0 / denom, Bm)
        vals = np.sum(np.abs(G) ** 2, axis=(1, 2))
        est = np.sqrt(np.trapezoid(vals, w) / (2 * np.pi))
        assert nk.h2_norm(sys) == pytest.approx(est.real, rel=1e-4)


class TestHinfNorm:
    def test_first_order_peak_at_dc(self):
        assert nk.hinf_norm(siso(-1, 1, 1)) == pytest.approx(1.0, rel=1e-6)

    def test_pure_feedthrough(self):
        sys = StateSpaceModel(A=np.zeros((0, 0)), B=np.zeros((0, 0)),
                              B_d=np.zeros((0, 1)), C=np.zeros((1, 0)),
                              D=np.zeros((1, 0)), D_d=[[3.0]])
        assert nk.hinf_norm(sys) == pytest.approx(3.0)

    def test_grid_oracle(self):
        rng = np.random.default_rng(17)
        for _ in range(10):
            n = int(rng.integers(2, 7))
            A = rand_stable(rng, n, margin=0.3)
            sys = StateSpaceModel(A=A, B=np.zeros((n, 0)),
                                  B_d=rng.standard_normal((n, 2)),
                                  C=rng.standard_normal((2, n)),
                                  D=np.zeros((2, 0)), D_d=rng.standard_normal((2, 2)) * 0.1)
            val = nk.hinf_norm(sys, tol=1e-6)
            grid = np.concatenate([[0.0], np.logspace(-3, 4, 20000)])
            gmax = max(np.linalg.svd(nk.freq_response(sys, w), compute_uv=False)[0]
                       for w in grid)
            assert val >= gmax - 1e-6 * max(gmax, 1.0)
            assert val <= gmax * (1 + 5e-3)
            assert val >= np.linalg.svd(sys.D_d, compute_uv=False)[0]


class TestFreqResponse:
    def test_rolloff_to_feedthrough(self):
        sys = siso(-1, 1, 1, d_d=0.25)
        assert np.allclose(nk.freq_response(sys, 1e9), [[0.25]], atol=1e-6)

    def test_hand_value(self):
        G = nk.freq_response(siso(-1, 1, 1), 1.0)
        assert G[0, 0] == pytest.approx(1 / (1 + 1j))
        assert abs(G[0, 0]) == pytest.approx(1 / np.sqrt(2))

    def test_conjugate_symmetry(self):
        rng = np.random.default_rng(2)
        A = rand_stable(rng, 4)
        sys = StateSpaceModel(A=A, B=np.zeros((4, 0)), B_d=rng.standard_normal((4, 2)),
                              C=rng.standard_normal((2, 4)), D=np.zeros((2, 0)),
                              D_d=np.zeros((2, 2)))
        assert np.allclose(nk.freq_response(sys, -2.3), np.conj(nk.freq_response(sys, 2.3)))


def balanced_diag_sys(sigmas):
    # diagonal realization with per-mode a=-1, b=c=sqrt(2 sigma): both
    # Gramians equal diag(sigma), i.e. already balanced.
    s = np.asarray(sigmas, dtype=float)
    n = len(s)
    g = np.sqrt(2 * s)
    return StateSpaceModel(A=-np.eye(n), B=np.zeros((n, 0)), B_d=np.diag(g),
                           C=np.diag(g), D=np.zeros((n, 0)), D_d=np.zeros((n, n)))


class TestBalancedTruncation:
    def test_no_truncation(self):
        sys = balanced_diag_sys([4.0, 2.0, 0.01])
        red, rep = nk.balanced_truncation(sys, kept_order=3)
        assert rep.energy_fraction == pytest.approx(1.0)
        assert rep.error_bound == 0.0
        assert red is sys

    def test_closed_form_balanced(self):
        sys = balanced_diag_sys([4.0, 2.0, 0.01])
        red, rep = nk.balanced_truncation(sys, kept_order=2)
        assert np.allclose(sorted(rep.hsv, reverse=True), [4.0, 2.0, 0.01], atol=1e-9)
        assert rep.energy_fraction == pytest.approx(6.0 / 6.01, rel=1e-9)
        assert rep.error_bound == pytest.approx(0.02, rel=1e-9)
        assert red.n == 2

    def test_energy_fraction_target(self):
        sys = balanced_diag_sys([4.0, 2.0, 0.01])
        red, rep = nk.balanced_truncation(sys, energy_fraction=0.99)
        assert rep.kept_order == 2

    def test_bound_randomized(self):
        rng = np.random.default_rng(31)
        for _ in range(50):
            n = int(rng.integers(3, 9))
            A = rand_stable(rng, n, margin=0.3)
            sys = StateSpaceModel(A=A, B=np.zeros((n, 0)),
                                  B_d=rng.standard_normal((n, 2)),
                                  C=rng.standard_normal((2, n)),
                                  D=np.zeros((2, 0)), D_d=np.zeros((2, 2)))
            r = int(rng.integers(1, n))
            red, rep = nk.balanced_truncation(sys, kept_order=r)  # verify=True re-checks bound

    def test_order_out_of_range(self):
        sys = balanced_diag_sys([1.0, 0.5])
        with pytest.raises(nk.OrderOutOfRangeError):
            nk.balanced_truncation(sys, kept_order=5)


class TestDiscretizeZoh:
    def test_integrator(self):
        sys = StateSpaceModel(A=np.zeros((2, 2)), B=np.eye(2), B_d=np.zeros((2, 1)),
                              C=np.eye(2), D=np.zeros((2, 2)), D_d=np.zeros((2, 1)))
        A_dt, B_dt, _ = nk.discretize_zoh(sys, 0.5)
        assert np.allclose(A_dt, np.eye(2))
        assert np.allclose(B_dt, 0.5 * np.eye(2))

    def test_scalar_closed_form(self):
        sys = StateSpaceModel(A=[[-1.0]], B=[[1.0]], B_d=np.zeros((1, 1)),
                              C=[[1.0]], D=[[0.0]], D_d=np.zeros((1, 1)))
        A_dt, B_dt, _ = nk.discretize_zoh(sys, 1.0)
        assert A_dt[0, 0] == pytest.approx(np.exp(-1.0))
        assert B_dt[0, 0] == pytest.approx(1 - np.exp(-1.0))

    def test_semigroup(self):
        rng = np.random.default_rng(4)
        A = rng.standard_normal((5, 5))
        sys = StateSpaceModel(A=A, B=rng.standard_normal((5, 2)), B_d=np.zeros((5, 1)),
                              C=np.eye(5), D=np.zeros((5, 2)), D_d=np.zeros((5, 1)))
        A1, _, _ = nk.discretize_zoh(sys, 0.1)
        A2, _, _ = nk.discretize_zoh(sys, 0.05)
        assert np.allclose(A2 @ A2, A1, atol=1e-10)


class TestSimilarityInvariance:
    def test_norms_invariant(self):
        rng = np.random.default_rng(12)
        for _ in range(10):
            n = 5
            A = rand_stable(rng, n, margin=0.4)
            sys = StateSpaceModel(A=A, B=np.zeros((n, 0)),
                                  B_d=rng.standard_normal((n, 2)),
                                  C=rng.standard_normal((2, n)),
                                  D=np.zeros((2, 0)), D_d=np.zeros((2, 2)))
            T = rng.standard_normal((n, n)) + 3 * np.eye(n)
            sys2 = sys.transformed(T)
            assert nk.h2_norm(sys2) == pytest.approx(nk.h2_norm(sys), rel=1e-6)
            assert nk.hinf_norm(sys2) == pytest.approx(nk.hinf_norm(sys), rel=1e-6)
