"""Grid description, Newton-Raphson power flow and small-signal linearization
into the plant state space, with EV buses as control inputs and every load
bus as a potential attack/disturbance injection point.

The machine model is a 3-state surrogate per machine: rotor angle (relative
to a reference), per-unit speed deviation, and a first-order governor state.
Stabilizer action enters as extra speed damping (``pss_damping``).  Network
coupling is linearized through the power-flow Jacobian with constant-power
loads, so reactive-channel inputs act through the voltage sensitivities.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import textdoc
from .statespace import StateSpaceModel
from .textdoc import ParseError

__all__ = [
    "ParseError",
    "ValidationError",
    "DivergedError",
    "SingularEliminationBlockError",
    "NoMachinesError",
    "UnobservableReferenceError",
    "NoZeroModeError",
    "Bus",
    "Line",
    "Machine",
    "EvBus",
    "GridSpec",
    "OperatingPoint",
    "load_grid",
    "grid_from_sections",
    "grid_to_sections",
    "solve_powerflow",
    "kron_reduce",
    "linearize",
    "relative_coordinates",
    "build_ybus",
    "bus_injections",
    "powerflow_jacobian",
]

GENERATOR = "generator"
LOAD = "load"


class ValidationError(ValueError):
    pass


class DivergedError(RuntimeError):
    pass


class SingularEliminationBlockError(np.linalg.LinAlgError):
    pass


class NoMachinesError(ValidationError):
    pass


class UnobservableReferenceError(ValueError):
    pass


class NoZeroModeError(ValueError):
    pass


@dataclass(frozen=True)
class Bus:
    id: int
    type: str
    voltage_pu: float = 1.0
    load_p_mw: float = 0.0
    load_q_mvar: float = 0.0


@dataclass(frozen=True)
class Line:
    from_bus: int
    to_bus: int
    resistance_pu: float = 0.0
    reactance_pu: float = 0.1
    shunt_pu: float = 0.0  # total line charging susceptance


@dataclass(frozen=True)
class Machine:
    bus: int
    h: float            # inertia constant, s
    d: float            # damping, pu torque per pu speed
    r: float            # governor droop, pu
    t_g: float          # governor time constant, s
    pss_damping: float = 0.0  # stabilizer surrogate, extra pu damping


@dataclass(frozen=True)
class EvBus:
    bus: int
    power_mw: float
    channels: tuple = ("P",)


@dataclass(frozen=True)
class GridSpec:
    buses: tuple
    lines: tuple
    machines: tuple
    ev_buses: tuple
    base_mva: float = 100.0
    nominal_frequency_hz: float = 60.0

    def __post_init__(self):
        object.__setattr__(self, "buses", tuple(self.buses))
        object.__setattr__(self, "lines", tuple(self.lines))
        object.__setattr__(self, "machines", tuple(self.machines))
        object.__setattr__(self, "ev_buses", tuple(self.ev_buses))
        self.validate()

    def validate(self):
        if self.base_mva <= 0:
            raise ValidationError("base_mva must be positive")
        if self.nominal_frequency_hz <= 0:
            raise ValidationError("nominal_frequency_hz must be positive")
        if not self.buses:
            raise ValidationError("grid needs at least one bus")
        ids = [b.id for b in self.buses]
        if len(set(ids)) != len(ids):
            raise ValidationError("bus ids must be unique")
        by_id = {b.id: b for b in self.buses}
        for b in self.buses:
            if b.type not in (GENERATOR, LOAD):
                raise ValidationError(f"bus {b.id}: unknown type {b.type!r}")
            if b.voltage_pu <= 0:
                raise ValidationError(f"bus {b.id}: voltage_pu must be positive")
        for ln in self.lines:
            if ln.from_bus not in by_id or ln.to_bus not in by_id:
                raise ValidationError(f"line {ln.from_bus}-{ln.to_bus}: unknown endpoint")
            if abs(complex(ln.resistance_pu, ln.reactance_pu)) == 0:
                raise ValidationError(f"line {ln.from_bus}-{ln.to_bus}: zero impedance")
        # connectivity
        adj = {b.id: set() for b in self.buses}
        for ln in self.lines:
            adj[ln.from_bus].add(ln.to_bus)
            adj[ln.to_bus].add(ln.from_bus)
        seen, stack = set(), [self.buses[0].id]
        while stack:
            b = stack.pop()
            if b in seen:
                continue
            seen.add(b)
            stack.extend(adj[b] - seen)
        if len(seen) != len(self.buses):
            raise ValidationError("network graph is not connected")
        mach_buses = [m.bus for m in self.machines]
        if len(set(mach_buses)) != len(mach_buses):
            raise ValidationError("at most one machine per bus")
        for m in self.machines:
            if m.bus not in by_id or by_id[m.bus].type != GENERATOR:
                raise ValidationError(f"machine at bus {m.bus}: must sit on a generator bus")
            if m.h <= 0:
                raise ValidationError(f"machine at bus {m.bus}: inertia h must be positive")
            if m.r <= 0:
                raise ValidationError(f"machine at bus {m.bus}: droop r must be positive")
            if m.t_g <= 0:
                raise ValidationError(f"machine at bus {m.bus}: governor t_g must be positive")
            if m.d < 0 or m.pss_damping < 0:
                raise ValidationError(f"machine at bus {m.bus}: damping must be nonnegative")
        ev_ids = [e.bus for e in self.ev_buses]
        if len(set(ev_ids)) != len(ev_ids):
            raise ValidationError("at most one ev_bus entry per bus")
        for e in self.ev_buses:
            if e.bus not in by_id or by_id[e.bus].type != LOAD:
                raise ValidationError(f"ev_bus {e.bus}: EV fleets must sit on load buses")
            if e.power_mw <= 0:
                raise ValidationError(f"ev_bus {e.bus}: power_mw must be positive")
            for ch in e.channels:
                if ch not in ("P", "Q"):
                    raise ValidationError(f"ev_bus {e.bus}: unknown channel {ch!r}")

    def bus_index(self) -> dict:
        return {b.id: i for i, b in enumerate(self.buses)}

    @property
    def load_buses(self) -> tuple:
        return tuple(b.id for b in self.buses if b.type == LOAD)

    @property
    def machine_buses(self) -> tuple:
        return tuple(m.bus for m in self.machines)

    @property
    def infinite_buses(self) -> tuple:
        """Generator buses without a machine act as fixed-phasor sources."""
        mach = set(self.machine_buses)
        return tuple(b.id for b in self.buses if b.type == GENERATOR and b.id not in mach)


@dataclass(frozen=True)
class OperatingPoint:
    v: np.ndarray          # bus voltage magnitudes, pu
    theta: np.ndarray      # bus angles, rad
    machine_p: np.ndarray  # machine electrical power, pu
    mismatch: float = 0.0


def grid_from_sections(doc: dict) -> GridSpec:
    """Build a validated GridSpec from a parsed scenario document."""
    def need(table, key, ctx):
        if key not in table:
            raise ValidationError(f"{ctx}: missing field {key!r}")
        return table[key]

    grid = doc.get("grid", {})
    buses = [Bus(id=int(need(t, "id", "bus")),
                 type=str(need(t, "type", "bus")),
                 voltage_pu=float(t.get("voltage_pu", 1.0)),
                 load_p_mw=float(t.get("load_p_mw", 0.0)),
                 load_q_mvar=float(t.get("load_q_mvar", 0.0)))
             for t in doc.get("bus", [])]
    lines = [Line(from_bus=int(need(t, "from", "line")),
                  to_bus=int(need(t, "to", "line")),
                  resistance_pu=float(t.get("resistance_pu", 0.0)),
                  reactance_pu=float(need(t, "reactance_pu", "line")),
                  shunt_pu=float(t.get("shunt_pu", 0.0)))
             for t in doc.get("line", [])]
    machines = [Machine(bus=int(need(t, "bus", "machine")),
                        h=float(need(t, "h", "machine")),
                        d=float(t.get("d", 0.0)),
                        r=float(need(t, "r", "machine")),
                        t_g=float(need(t, "t_g", "machine")),
                        pss_damping=float(t.get("pss_damping", 0.0)))
                for t in doc.get("machine", [])]
    ev_buses = [EvBus(bus=int(need(t, "bus", "ev_bus")),
                      power_mw=float(need(t, "power_mw", "ev_bus")),
                      channels=tuple(t.get("channels", ["P"])))
                for t in doc.get("ev_bus", [])]
    return GridSpec(buses=buses, lines=lines, machines=machines, ev_buses=ev_buses,
                    base_mva=float(grid.get("base_mva", 100.0)),
                    nominal_frequency_hz=float(grid.get("nominal_frequency_hz", 60.0)))


def grid_to_sections(grid: GridSpec) -> dict:
    """Inverse of grid_from_sections (round-trips through the text format)."""
    return {
        "grid": {"base_mva": grid.base_mva,
                 "nominal_frequency_hz": grid.nominal_frequency_hz},
        "bus": [{"id": b.id, "type": b.type, "voltage_pu": b.voltage_pu,
                 "load_p_mw": b.load_p_mw, "load_q_mvar": b.load_q_mvar}
                for b in grid.buses],
        "line": [{"from": ln.from_bus, "to": ln.to_bus,
                  "resistance_pu": ln.resistance_pu, "reactance_pu": ln.reactance_pu,
                  "shunt_pu": ln.shunt_pu} for ln in grid.lines],
        "machine": [{"bus": m.bus, "h": m.h, "d": m.d, "r": m.r, "t_g": m.t_g,
                     "pss_damping": m.pss_damping} for m in grid.machines],
        "ev_bus": [{"bus": e.bus, "power_mw": e.power_mw,
                    "channels": list(e.channels)} for e in grid.ev_buses],
    }


def load_grid(text: str) -> GridSpec:
    """Parse a scenario document and return its validated GridSpec."""
    return grid_from_sections(textdoc.parse_document(text))


def build_ybus(grid: GridSpec) -> np.ndarray:
    idx = grid.bus_index()
    n = len(grid.buses)
    Y = np.zeros((n, n), dtype=complex)
    for ln in grid.lines:
        f, t = idx[ln.from_bus], idx[ln.to_bus]
        y = 1.0 / complex(ln.resistance_pu, ln.reactance_pu)
        half_sh = 0.5j * ln.shunt_pu
        Y[f, f] += y + half_sh
        Y[t, t] += y + half_sh
        Y[f, t] -= y
        Y[t, f] -= y
    return Y


def bus_injections(Y: np.ndarray, v: np.ndarray, theta: np.ndarray):
    """Per-bus (P, Q) injections in pu for voltages v, angles theta."""
    V = v * np.exp(1j * theta)
    S = V * np.conj(Y @ V)
    return S.real, S.imag


def powerflow_jacobian(Y: np.ndarray, v: np.ndarray, theta: np.ndarray):
    """Full Jacobian of (P, Q) w.r.t. (theta, V): returns dP/dth, dP/dV,
    dQ/dth, dQ/dV as dense n x n blocks."""
    n = len(v)
    G, B = Y.real, Y.imag
    th = theta[:, None] - theta[None, :]
    cos, sin = np.cos(th), np.sin(th)
    VV = v[:, None] * v[None, :]
    P, Q = bus_injections(Y, v, theta)

    dP_dth = VV * (G * sin - B * cos)
    dP_dth[np.diag_indices(n)] = -Q - v**2 * np.diag(B)

    dP_dV = v[:, None] * (G * cos + B * sin)
    dP_dV[np.diag_indices(n)] = P / v + v * np.diag(G)

    dQ_dth = -VV * (G * cos + B * sin)
    dQ_dth[np.diag_indices(n)] = P - v**2 * np.diag(G)

    dQ_dV = v[:, None] * (G * sin - B * cos)
    dQ_dV[np.diag_indices(n)] = Q / v - v * np.diag(B)
    return dP_dth, dP_dV, dQ_dth, dQ_dV


def _dispatch(grid: GridSpec):
    """Specified injections (pu) and bus roles for the power flow.

    Non-slack machine buses share the total load equally; machine-less
    generator buses hold voltage with zero dispatch; the slack (an infinite
    bus when present, otherwise the first machine bus) absorbs the balance.
    """
    idx = grid.bus_index()
    n = len(grid.buses)
    p_load = np.array([b.load_p_mw for b in grid.buses]) / grid.base_mva
    q_load = np.array([b.load_q_mvar for b in grid.buses]) / grid.base_mva

    inf = grid.infinite_buses
    if inf:
        slack = idx[inf[0]]
    elif grid.machines:
        slack = idx[grid.machine_buses[0]]
    else:
        raise ValidationError("power flow needs at least one generator bus with a source")

    p_gen = np.zeros(n)
    if grid.machines:
        share = p_load.sum() / len(grid.machines)
        for m in grid.machines:
            p_gen[idx[m.bus]] = share
    p_spec = p_gen - p_load
    q_spec = -q_load
    pv = [idx[b.id] for b in grid.buses if b.type == GENERATOR and idx[b.id] != slack]
    pq = [idx[b.id] for b in grid.buses if b.type == LOAD]
    return slack, pv, pq, p_spec, q_spec


def solve_powerflow(grid: GridSpec, tol: float = 1e-8, max_iter: int = 50) -> OperatingPoint:
    """Newton-Raphson power flow from a flat start, mismatch <= tol pu."""
    idx = grid.bus_index()
    n = len(grid.buses)
    Y = build_ybus(grid)
    slack, pv, pq, p_spec, q_spec = _dispatch(grid)

    v = np.array([b.voltage_pu for b in grid.buses], dtype=float)
    v[pq] = 1.0
    theta = np.zeros(n)

    ang_idx = [i for i in range(n) if i != slack]
    for _ in range(max_iter):
        P, Q = bus_injections(Y, v, theta)
        mis_p = P[ang_idx] - p_spec[ang_idx]
        mis_q = Q[pq] - q_spec[pq]
        mismatch = np.concatenate([mis_p, mis_q])
        if np.linalg.norm(mismatch, np.inf) <= tol:
            # machine electrical output = bus injection + local load
            loads = np.array([b.load_p_mw for b in grid.buses]) / grid.base_mva
            mach_p = np.array([P[idx[m.bus]] + loads[idx[m.bus]] for m in grid.machines])
            return OperatingPoint(v=v, theta=theta, machine_p=mach_p,
                                  mismatch=float(np.linalg.norm(mismatch, np.inf)))
        dP_dth, dP_dV, dQ_dth, dQ_dV = powerflow_jacobian(Y, v, theta)
        J = np.block([
            [dP_dth[np.ix_(ang_idx, ang_idx)], dP_dV[np.ix_(ang_idx, pq)]],
            [dQ_dth[np.ix_(pq, ang_idx)], dQ_dV[np.ix_(pq, pq)]],
        ])
        try:
            step = np.linalg.solve(J, -mismatch)
        except np.linalg.LinAlgError as exc:
            raise DivergedError(f"singular power-flow Jacobian: {exc}") from exc
        theta[ang_idx] += step[: len(ang_idx)]
        v[pq] += step[len(ang_idx):]
        if np.any(v[pq] <= 0) or not np.all(np.isfinite(v)):
            raise DivergedError("power flow diverged (voltage collapse)")
    raise DivergedError(f"power flow did not converge in {max_iter} iterations")


def kron_reduce(Y: np.ndarray, retained: list) -> np.ndarray:
    """Eliminate all indices not in ``retained``: Y_rr - Y_re Y_ee^-1 Y_er."""
    Y = np.asarray(Y)
    n = Y.shape[0]
    retained = list(retained)
    elim = [i for i in range(n) if i not in retained]
    if not elim:
        return Y[np.ix_(retained, retained)].copy()
    Yrr = Y[np.ix_(retained, retained)]
    Yre = Y[np.ix_(retained, elim)]
    Yer = Y[np.ix_(elim, retained)]
    Yee = Y[np.ix_(elim, elim)]
    try:
        X = np.linalg.solve(Yee, Yer)
    except np.linalg.LinAlgError as exc:
        raise SingularEliminationBlockError("eliminated sub-block is singular") from exc
    if not np.all(np.isfinite(X)):
        raise SingularEliminationBlockError("eliminated sub-block is singular")
    return Yrr - Yre @ X


def _network_sensitivities(grid: GridSpec, op: OperatingPoint):
    """Synchronizing matrix Ks (machine angles -> machine electrical power)
    and load sensitivities (per-bus P/Q load increases -> machine power).

    Returns (Ks, gamma_p, gamma_q) with gamma_* of shape
    (n_machines, n_load_buses).
    """
    idx = grid.bus_index()
    Y = build_ybus(grid)
    dP_dth, dP_dV, dQ_dth, dQ_dV = powerflow_jacobian(Y, op.v, op.theta)

    mach = [idx[b] for b in grid.machine_buses]
    inf = [idx[b] for b in grid.infinite_buses]
    loads = [idx[b] for b in grid.load_buses]
    pv0 = [idx[b.id] for b in grid.buses
           if b.type == GENERATOR and idx[b.id] not in mach and idx[b.id] not in inf[:1]]
    # algebraic unknowns: angles at pv0 and load buses, voltages at load buses
    ang_alg = pv0 + loads
    # balance rows: P at pv0 and loads, Q at loads
    rowsP = ang_alg
    rowsQ = loads

    J_alg = np.block([
        [dP_dth[np.ix_(rowsP, ang_alg)], dP_dV[np.ix_(rowsP, loads)]],
        [dQ_dth[np.ix_(rowsQ, ang_alg)], dQ_dV[np.ix_(rowsQ, loads)]],
    ])
    J_algM = np.vstack([dP_dth[np.ix_(rowsP, mach)], dQ_dth[np.ix_(rowsQ, mach)]])
    J_Mz = np.hstack([dP_dth[np.ix_(mach, ang_alg)], dP_dV[np.ix_(mach, loads)]])
    J_MM = dP_dth[np.ix_(mach, mach)]

    if J_alg.size:
        try:
            X = np.linalg.solve(J_alg, np.hstack([J_algM, np.eye(J_alg.shape[0])]))
        except np.linalg.LinAlgError as exc:
            raise SingularEliminationBlockError("algebraic network block is singular") from exc
        Ks = J_MM - J_Mz @ X[:, : len(mach)]
        Sens = -J_Mz @ X[:, len(mach):]
    else:
        Ks = J_MM
        Sens = np.zeros((len(mach), 0))

    nl = len(loads)
    # load increase Delta_l enters the balance residual as +Delta_l (P rows of
    # its bus; Q rows for the reactive channel): gamma = Sens @ E.
    gamma_p = np.zeros((len(mach), nl))
    gamma_q = np.zeros((len(mach), nl))
    for j, bus_i in enumerate(loads):
        eP = np.zeros(J_alg.shape[0] if J_alg.size else 0)
        eQ = np.zeros_like(eP)
        eP[rowsP.index(bus_i)] = 1.0
        eQ[len(rowsP) + rowsQ.index(bus_i)] = 1.0
        gamma_p[:, j] = Sens @ eP
        gamma_q[:, j] = Sens @ eQ
    return Ks, gamma_p, gamma_q


def linearize(grid: GridSpec, op: OperatingPoint) -> StateSpaceModel:
    """Small-signal plant around the operating point.

    States per machine: relative rotor angle (rad), speed deviation (pu),
    governor output (pu); with an infinite bus the angles are absolute and
    n = 3*machines, otherwise the first machine is the reference and
    n = 3*machines - 1.  Inputs are per-unit load increases (EV channels in
    B, one P column per load bus in B_d); outputs are Hz deviations.
    """
    M = len(grid.machines)
    if M == 0:
        raise NoMachinesError("grid has no machines")
    has_inf = bool(grid.infinite_buses)
    if not has_inf and M == 1:
        raise UnobservableReferenceError(
            "single machine without an infinite bus has no angle reference")

    Ks, gamma_p, gamma_q = _network_sensitivities(grid, op)
    omega_s = 2 * np.pi * grid.nominal_frequency_hz
    H = np.array([m.h for m in grid.machines])
    Dtot = np.array([m.d + m.pss_damping for m in grid.machines])
    Rd = np.array([m.r for m in grid.machines])
    Tg = np.array([m.t_g for m in grid.machines])

    if has_inf:
        n_ang = M
        Xi = np.eye(M)                       # angle states -> machine angles
        Sw = np.eye(M)                       # speed -> angle-state derivative
    else:
        n_ang = M - 1
        Xi = np.zeros((M, n_ang))
        Xi[1:, :] = np.eye(n_ang)            # reference machine 0 pinned at 0
        Sw = np.zeros((n_ang, M))
        Sw[:, 1:] = np.eye(n_ang)
        Sw[:, 0] = -1.0                      # d/dt(delta_i - delta_ref)

    n = n_ang + 2 * M
    A = np.zeros((n, n))
    s_ang = slice(0, n_ang)
    s_w = slice(n_ang, n_ang + M)
    s_pm = slice(n_ang + M, n)

    A[s_ang, s_w] = omega_s * Sw
    A[s_w, s_ang] = -(Ks @ Xi) / (2 * H)[:, None]
    A[s_w, s_w] = np.diag(-Dtot / (2 * H))
    A[s_w, s_pm] = np.diag(1.0 / (2 * H))
    A[s_pm, s_w] = np.diag(-1.0 / (Rd * Tg))
    A[s_pm, s_pm] = np.diag(-1.0 / Tg)

    load_ids = list(grid.load_buses)
    col_of_load = {b: j for j, b in enumerate(load_ids)}

    input_labels = []
    b_cols = []
    for ev in grid.ev_buses:
        for ch in ev.channels:
            gam = gamma_p if ch == "P" else gamma_q
            col = np.zeros(n)
            col[s_w] = -gam[:, col_of_load[ev.bus]] / (2 * H)
            b_cols.append(col)
            input_labels.append((ev.bus, ch))
    B = np.column_stack(b_cols) if b_cols else np.zeros((n, 0))

    Bd = np.zeros((n, len(load_ids)))
    for j in range(len(load_ids)):
        Bd[s_w, j] = -gamma_p[:, j] / (2 * H)

    C = np.zeros((M, n))
    C[:, s_w] = grid.nominal_frequency_hz * np.eye(M)

    return StateSpaceModel(
        A=A, B=B, B_d=Bd, C=C,
        D=np.zeros((M, B.shape[1])), D_d=np.zeros((M, len(load_ids))),
        input_labels=tuple(input_labels),
        output_labels=tuple(grid.machine_buses),
        disturbance_labels=tuple(load_ids),
        u_base_mw=grid.base_mva,
    )


def relative_coordinates(sys: StateSpaceModel, tol: float = 1e-7) -> StateSpaceModel:
    """Remove an unobservable zero (angle-translation) mode from a model.

    For externally supplied models built in absolute angles; linearize()
    already produces reference-relative coordinates.
    """
    scale = max(1.0, float(np.linalg.norm(sys.A, 2)))
    lam, V = np.linalg.eig(sys.A)
    zero = np.where(np.abs(lam) <= tol * scale)[0]
    candidates = [i for i in zero
                  if np.linalg.norm(sys.C @ V[:, i].real) +
                  np.linalg.norm(sys.C @ V[:, i].imag) <= 1e-6 * scale]
    if not candidates:
        raise NoZeroModeError("no unobservable zero mode found")
    v = V[:, candidates[0]].real
    if np.linalg.norm(v) < 1e-12:
        v = V[:, candidates[0]].imag
    v = v / np.linalg.norm(v)

    # complete v to a basis; in z-coordinates the first column of T^-1 A T is
    # ~0 and C T e1 ~ 0, so state 1 is decoupled and unobservable: drop it.
    Q, _ = np.linalg.qr(np.column_stack([v, np.eye(sys.n)]))
    T = Q[:, : sys.n]
    Ti = T.T
    At = Ti @ sys.A @ T
    keep = slice(1, sys.n)
    return StateSpaceModel(
        A=At[keep, keep],
        B=(Ti @ sys.B)[keep, :],
        B_d=(Ti @ sys.B_d)[keep, :],
        C=(sys.C @ T)[:, keep],
        D=sys.D,
        D_d=sys.D_d,
        input_labels=sys.input_labels,
        output_labels=sys.output_labels,
        disturbance_labels=sys.disturbance_labels,
        u_base_mw=sys.u_base_mw,
    )
