import numpy as np
import pytest

from evshield import gridmodel as gm
from evshield import numkernel as nk
from evshield import textdoc
from evshield.statespace import StateSpaceModel

MINIMAL_2BUS = """
[grid]
base_mva = 100.0
nominal_frequency_hz = 60.0

[[bus]]
id = 1
type = "generator"

[[bus]]
id = 2
type = "generator"
load_p_mw = 100.0

[[line]]
from = 1
to = 2
reactance_pu = 0.1

[[machine]]
bus = 1
h = 3.0
d = 1.0
r = 0.05
t_g = 0.5
"""


class TestLoadGrid:
    def test_minimal_document(self):
        grid = gm.load_grid(MINIMAL_2BUS)
        assert len(grid.machines) == 1
        assert grid.base_mva == 100.0
        assert grid.infinite_buses == (2,)

    def test_zero_inertia_rejected(self):
        bad = MINIMAL_2BUS.replace("h = 3.0", "h = 0.0")
        with pytest.raises(gm.ValidationError, match="inertia"):
            gm.load_grid(bad)

    def test_roundtrip(self, desk2_text):
        grid = gm.load_grid(desk2_text)
        text = textdoc.format_document(gm.grid_to_sections(grid))
        assert gm.load_grid(text) == grid

    def test_parse_error_reports_line(self):
        with pytest.raises(gm.ParseError, match="line 3"):
            gm.load_grid("[grid]\nbase_mva = 100.0\nnonsense line\n")

    def test_disconnected_rejected(self):
        text = MINIMAL_2BUS + "\n[[bus]]\nid = 9\ntype = \"load\"\n"
        with pytest.raises(gm.ValidationError, match="connected"):
            gm.load_grid(text)

    def test_ev_on_generator_bus_rejected(self):
        text = MINIMAL_2BUS + "\n[[ev_bus]]\nbus = 1\npower_mw = 50.0\n"
        with pytest.raises(gm.ValidationError, match="load buses"):
            gm.load_grid(text)


class TestPowerflow:
    def test_zero_load_flat(self):
        text = MINIMAL_2BUS.replace("load_p_mw = 100.0", "load_p_mw = 0.0")
        grid = gm.load_grid(text)
        op = gm.solve_powerflow(grid)
        assert np.allclose(op.theta, 0.0, atol=1e-10)
        assert np.allclose(op.v, 1.0)

    def test_two_bus_sine_equation(self):
        # 1 pu over x = 0.1 with both voltages held: angle gap arcsin(0.1)
        grid = gm.load_grid(MINIMAL_2BUS)
        op = gm.solve_powerflow(grid)
        assert op.theta[0] - op.theta[1] == pytest.approx(np.arcsin(0.1), abs=1e-9)
        assert np.allclose(op.v, 1.0)

    def test_mismatch_residual(self, desk2_grid):
        op = gm.solve_powerflow(desk2_grid)
        Y = gm.build_ybus(desk2_grid)
        P, Q = gm.bus_injections(Y, op.v, op.theta)
        # re-evaluated mismatch at non-slack buses
        slack, pv, pq, p_spec, q_spec = gm._dispatch(desk2_grid)
        for i in range(len(desk2_grid.buses)):
            if i == slack:
                continue
            assert abs(P[i] - p_spec[i]) <= 1e-8
        for i in pq:
            assert abs(Q[i] - q_spec[i]) <= 1e-8

    def test_diverged(self):
        # absurd loading far beyond the line's transfer capability
        text = MINIMAL_2BUS.replace("load_p_mw = 100.0", "load_p_mw = 5000.0")
        grid = gm.load_grid(text)
        with pytest.raises(gm.DivergedError):
            gm.solve_powerflow(grid)


class TestKronReduce:
    def test_identity_when_nothing_eliminated(self):
        rng = np.random.default_rng(0)
        Y = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        assert np.allclose(gm.kron_reduce(Y, [0, 1, 2, 3]), Y)

    def test_star_to_delta(self):
        y = 2.0 - 0.5j
        Y = np.zeros((4, 4), dtype=complex)
        for outer in (1, 2, 3):
            Y[0, 0] += y
            Y[outer, outer] += y
            Y[0, outer] -= y
            Y[outer, 0] -= y
        red = gm.kron_reduce(Y, [1, 2, 3])
        # delta equivalent: pairwise admittance y/3
        assert red[0, 1] == pytest.approx(-y / 3)
        assert red[1, 2] == pytest.approx(-y / 3)
        assert red[0, 0] == pytest.approx(2 * y / 3)

    def test_symmetry_preserved(self):
        rng = np.random.default_rng(1)
        Y = rng.standard_normal((5, 5))
        Y = Y + Y.T + 10 * np.eye(5)
        red = gm.kron_reduce(Y, [0, 1])
        assert np.allclose(red, red.T)

    def test_singular_block(self):
        Y = np.zeros((2, 2))
        with pytest.raises(gm.SingularEliminationBlockError):
            gm.kron_reduce(Y, [0])


class TestLinearize:
    def test_smib_synchronizing_coefficient(self, smib_grid):
        op = gm.solve_powerflow(smib_grid)
        assert op.theta[0] == pytest.approx(np.deg2rad(30.0), abs=1e-7)
        sys = gm.linearize(smib_grid, op)
        # states: [delta, omega, pm]; swing block coupling gives Ks
        H = smib_grid.machines[0].h
        Ks = -sys.A[1, 0] * 2 * H
        assert Ks == pytest.approx(np.cos(np.deg2rad(30.0)) / 0.65, rel=1e-6)
        omega_s = 2 * np.pi * 60.0
        swing = np.array([[0.0, omega_s], [sys.A[1, 0], 0.0]])
        eigs = np.linalg.eigvals(swing)
        wn = np.sqrt(omega_s * Ks / (2 * H))
        assert np.allclose(sorted(eigs.imag), [-wn, wn])
        assert np.allclose(eigs.real, 0.0, atol=1e-12)
        assert sys.n == 3  # infinite bus present: 3 * machines states

    def test_state_count_without_infinite_bus(self, desk2_plant):
        assert desk2_plant.n == 3 * 2 - 1

    def test_zero_ev_buses(self, smib_grid):
        op = gm.solve_powerflow(smib_grid)
        sys = gm.linearize(smib_grid, op)
        assert sys.m == 0

    def test_hurwitz_with_damping(self, desk2_plant, desk4_plant):
        assert nk.spectral_abscissa(desk2_plant.A) < 0
        assert nk.spectral_abscissa(desk4_plant.A) < 0

    def test_injection_conservation(self, desk2_grid, desk2_plant):
        # sum over machines of electrical-power pickup per 1 pu load step = 1
        H = np.array([m.h for m in desk2_grid.machines])
        n_ang = len(desk2_grid.machines) - 1
        for j, (bus, ch) in enumerate(desk2_plant.input_labels):
            if ch != "P":
                continue
            gamma = -desk2_plant.B[n_ang:n_ang + len(H), j] * 2 * H
            assert gamma.sum() == pytest.approx(1.0, abs=1e-6)
        for j in range(desk2_plant.p):
            gamma = -desk2_plant.B_d[n_ang:n_ang + len(H), j] * 2 * H
            assert gamma.sum() == pytest.approx(1.0, abs=1e-6)

    def test_no_machines(self):
        text = MINIMAL_2BUS.replace('type = "generator"\nload_p_mw', 'type = "load"\nload_p_mw')
        grid = gm.load_grid(text.replace("""[[machine]]
bus = 1
h = 3.0
d = 1.0
r = 0.05
t_g = 0.5
""", ""))
        with pytest.raises(gm.NoMachinesError):
            gm.linearize(grid, gm.solve_powerflow(grid))

    def test_single_machine_no_reference(self):
        # single machine feeding a plain load bus: no angle reference
        text = MINIMAL_2BUS.replace('id = 2\ntype = "generator"', 'id = 2\ntype = "load"')
        grid = gm.load_grid(text)
        op = gm.solve_powerflow(grid)
        with pytest.raises(gm.UnobservableReferenceError):
            gm.linearize(grid, op)


def _nonlinear_rhs(grid, op, x, dload_p, dload_q):
    """Nonlinear swing/governor/network right-hand side for FD checking."""
    idx = grid.bus_index()
    Y = gm.build_ybus(grid)
    M = len(grid.machines)
    has_inf = bool(grid.infinite_buses)
    n_ang = M if has_inf else M - 1

    alpha = x[:n_ang]
    omega = x[n_ang:n_ang + M]
    dpm = x[n_ang + M:]

    theta = op.theta.copy()
    v = op.v.copy()
    mach_idx = [idx[b] for b in grid.machine_buses]
    if has_inf:
        for k, mi in enumerate(mach_idx):
            theta[mi] += alpha[k]
    else:
        for k, mi in enumerate(mach_idx[1:]):
            theta[mi] += alpha[k]

    loads = [idx[b] for b in grid.load_buses]
    inf = [idx[b] for b in grid.infinite_buses]
    pv0 = [idx[b.id] for b in grid.buses
           if b.type == GENERATOR_TYPE and idx[b.id] not in mach_idx and idx[b.id] not in inf[:1]]
    ang_alg = pv0 + loads

    p_load = np.array([b.load_p_mw for b in grid.buses]) / grid.base_mva
    q_load = np.array([b.load_q_mvar for b in grid.buses]) / grid.base_mva
    for j, li in enumerate(loads):
        p_load[li] += dload_p[j]
        q_load[li] += dload_q[j]

    P0, Q0 = gm.bus_injections(Y, op.v, op.theta)
    p_spec = P0.copy()
    q_spec = Q0.copy()
    base_pl = np.array([b.load_p_mw for b in grid.buses]) / grid.base_mva
    base_ql = np.array([b.load_q_mvar for b in grid.buses]) / grid.base_mva
    p_spec[ang_alg] = P0[ang_alg] - (p_load[ang_alg] - base_pl[ang_alg])
    q_spec[loads] = Q0[loads] - (q_load[loads] - base_ql[loads])

    # Newton on the algebraic network variables
    for _ in range(30):
        P, Q = gm.bus_injections(Y, v, theta)
        rp = P[ang_alg] - p_spec[ang_alg]
        rq = Q[loads] - q_spec[loads]
        r = np.concatenate([rp, rq])
        if np.linalg.norm(r, np.inf) < 1e-12:
            break
        dP_dth, dP_dV, dQ_dth, dQ_dV = gm.powerflow_jacobian(Y, v, theta)
        J = np.block([
            [dP_dth[np.ix_(ang_alg, ang_alg)], dP_dV[np.ix_(ang_alg, loads)]],
            [dQ_dth[np.ix_(loads, ang_alg)], dQ_dV[np.ix_(loads, loads)]],
        ])
        step = np.linalg.solve(J, -r)
        theta[ang_alg] += step[: len(ang_alg)]
        v[loads] += step[len(ang_alg):]

    P, Q = gm.bus_injections(Y, v, theta)
    pe = np.array([P[mi] + base_pl[mi] for mi in mach_idx])
    pe0 = np.array([P0[mi] + base_pl[mi] for mi in mach_idx])

    H = np.array([m.h for m in grid.machines])
    D = np.array([m.d + m.pss_damping for m in grid.machines])
    R = np.array([m.r for m in grid.machines])
    Tg = np.array([m.t_g for m in grid.machines])
    omega_s = 2 * np.pi * grid.nominal_frequency_hz

    if has_inf:
        dalpha = omega_s * omega
    else:
        dalpha = omega_s * (omega[1:] - omega[0])
    domega = (dpm - (pe - pe0) - D * omega) / (2 * H)
    ddpm = (-dpm - omega / R) / Tg
    return np.concatenate([dalpha, domega, ddpm])


GENERATOR_TYPE = gm.GENERATOR


class TestLinearizationOracle:
    def test_finite_difference_match(self, desk2_grid, desk2_plant):
        op = gm.solve_powerflow(desk2_grid)
        n, m, p = desk2_plant.n, desk2_plant.m, desk2_plant.p
        h = 1e-6

        A_fd = np.zeros((n, n))
        for j in range(n):
            e = np.zeros(n)
            e[j] = h
            fp = _nonlinear_rhs(desk2_grid, op, e, np.zeros(p), np.zeros(p))
            fm = _nonlinear_rhs(desk2_grid, op, -e, np.zeros(p), np.zeros(p))
            A_fd[:, j] = (fp - fm) / (2 * h)
        assert np.allclose(A_fd, desk2_plant.A, rtol=1e-4, atol=1e-7 * np.abs(desk2_plant.A).max())

        col_of_load = {b: j for j, b in enumerate(desk2_plant.disturbance_labels)}
        B_fd = np.zeros((n, m))
        for j, (bus, ch) in enumerate(desk2_plant.input_labels):
            dp, dq = np.zeros(p), np.zeros(p)
            (dp if ch == "P" else dq)[col_of_load[bus]] = h
            fp = _nonlinear_rhs(desk2_grid, op, np.zeros(n), dp, dq)
            fm = _nonlinear_rhs(desk2_grid, op, np.zeros(n), -dp, -dq)
            B_fd[:, j] = (fp - fm) / (2 * h)
        assert np.allclose(B_fd, desk2_plant.B, rtol=1e-4, atol=1e-6)


class TestRelativeCoordinates:
    def absolute_two_machine(self):
        # handcrafted absolute-angle 2-machine swing model with a shared mode
        omega_s = 2 * np.pi * 60.0
        ks = np.array([[1.2, -1.2], [-1.2, 1.2]])  # rows sum to zero
        H = np.array([3.0, 4.0])
        D = np.array([1.0, 1.0])
        A = np.zeros((4, 4))
        A[0, 2] = omega_s
        A[1, 3] = omega_s
        A[2:, :2] = -ks / (2 * H)[:, None]
        A[2:, 2:] = np.diag(-D / (2 * H))
        B_d = np.zeros((4, 1))
        B_d[2] = -1.0 / (2 * H[0])
        C = np.zeros((2, 4))
        C[:, 2:] = 60.0 * np.eye(2)
        return StateSpaceModel(A=A, B=np.zeros((4, 0)), B_d=B_d, C=C,
                               D=np.zeros((2, 0)), D_d=np.zeros((2, 1)))

    def test_zero_mode_removed(self):
        sys = self.absolute_two_machine()
        eigs = np.linalg.eigvals(sys.A)
        assert np.min(np.abs(eigs)) < 1e-10  # translation mode present
        red = gm.relative_coordinates(sys)
        assert red.n == 3
        # inter-machine oscillation preserved
        kept = np.linalg.eigvals(red.A)
        osc0 = sorted(e.imag for e in eigs if abs(e.imag) > 1e-6)
        osc1 = sorted(e.imag for e in kept if abs(e.imag) > 1e-6)
        assert np.allclose(osc0, osc1, rtol=1e-8)

    def test_transfer_function_preserved(self):
        sys = self.absolute_two_machine()
        red = gm.relative_coordinates(sys)
        for w in (0.1, 1.0, 10.0):
            assert np.allclose(nk.freq_response(sys, w), nk.freq_response(red, w), atol=1e-8)

    def test_twice_raises(self):
        red = gm.relative_coordinates(self.absolute_two_machine())
        with pytest.raises(gm.NoZeroModeError):
            gm.relative_coordinates(red)
