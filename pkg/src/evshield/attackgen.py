"""Load-altering attack signal sources: static step, on/off switching at a
chosen frequency, and state-feedback dynamic modulation, plus the attacker's
resonance reconnaissance sweep.

All signals are exactly zero before the start time and are expressed in MW
per attacked bus; the simulator holds them constant between steps.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import numkernel
from .statespace import StateSpaceModel

__all__ = [
    "WrongKindError",
    "EmptyRangeError",
    "AttackScenario",
    "static_signal",
    "switching_signal",
    "dynamic_signal",
    "find_resonance",
    "attack_from_section",
    "attack_to_section",
]

STATIC = "static"
SWITCHING = "switching"
DYNAMIC = "dynamic"


class WrongKindError(ValueError):
    pass


class EmptyRangeError(ValueError):
    pass


@dataclass(frozen=True)
class AttackScenario:
    kind: str
    buses: tuple
    magnitudes_mw: tuple
    t0_s: float = 0.0
    name: str = ""
    freq_hz: float = 0.0        # switching only; 0 = use reconnaissance
    duty: float = 0.5           # switching on-fraction per period
    cap_mw: float = 0.0         # dynamic per-bus saturation
    delta_r: float = 0.25       # dynamic: required right-shift of eigenvalues
    gain: np.ndarray | None = field(default=None, compare=False)  # dynamic K_atk

    def __post_init__(self):
        object.__setattr__(self, "buses", tuple(int(b) for b in self.buses))
        object.__setattr__(self, "magnitudes_mw", tuple(float(m) for m in self.magnitudes_mw))
        if self.kind not in (STATIC, SWITCHING, DYNAMIC):
            raise ValueError(f"unknown attack kind {self.kind!r}")
        if not self.buses:
            raise ValueError("attack needs at least one bus")
        if len(self.buses) != len(self.magnitudes_mw):
            raise ValueError("buses and magnitudes_mw must have equal length")
        if any(m <= 0 for m in self.magnitudes_mw):
            raise ValueError("attack magnitudes must be positive")
        if self.kind == SWITCHING and not 0 < self.duty < 1:
            raise ValueError("switching duty must lie in (0, 1)")
        if self.gain is not None:
            object.__setattr__(self, "gain", np.atleast_2d(np.asarray(self.gain, dtype=float)))

    def with_gain(self, gain: np.ndarray) -> "AttackScenario":
        return AttackScenario(kind=self.kind, buses=self.buses,
                              magnitudes_mw=self.magnitudes_mw, t0_s=self.t0_s,
                              name=self.name, freq_hz=self.freq_hz, duty=self.duty,
                              cap_mw=self.cap_mw, delta_r=self.delta_r, gain=gain)

    def with_frequency(self, freq_hz: float) -> "AttackScenario":
        return AttackScenario(kind=self.kind, buses=self.buses,
                              magnitudes_mw=self.magnitudes_mw, t0_s=self.t0_s,
                              name=self.name, freq_hz=freq_hz, duty=self.duty,
                              cap_mw=self.cap_mw, delta_r=self.delta_r, gain=self.gain)

    def scaled_to(self, total_mw: float) -> "AttackScenario":
        """Same attack with magnitudes rescaled to the given total, keeping
        the per-bus split; the dynamic cap scales along."""
        cur = sum(self.magnitudes_mw)
        f = total_mw / cur
        return AttackScenario(kind=self.kind, buses=self.buses,
                              magnitudes_mw=tuple(m * f for m in self.magnitudes_mw),
                              t0_s=self.t0_s, name=self.name, freq_hz=self.freq_hz,
                              duty=self.duty, cap_mw=self.cap_mw * f,
                              delta_r=self.delta_r, gain=self.gain)


def static_signal(scn: AttackScenario, t: float) -> np.ndarray:
    """Step load: zero before t0, full magnitudes from t0 on."""
    if scn.kind != STATIC:
        raise WrongKindError(f"static_signal on {scn.kind!r} attack")
    mags = np.asarray(scn.magnitudes_mw)
    return mags if t >= scn.t0_s else np.zeros_like(mags)


def switching_signal(scn: AttackScenario, t: float) -> np.ndarray:
    """On/off square wave: on for the first duty fraction of each period."""
    if scn.kind != SWITCHING:
        raise WrongKindError(f"switching_signal on {scn.kind!r} attack")
    if scn.freq_hz <= 0:
        raise ValueError("switching attack needs a positive frequency")
    mags = np.asarray(scn.magnitudes_mw)
    if t < scn.t0_s:
        return np.zeros_like(mags)
    phase = (t - scn.t0_s) * scn.freq_hz % 1.0
    return mags if phase < scn.duty else np.zeros_like(mags)


def dynamic_signal(scn: AttackScenario, t: float, state: np.ndarray,
                   cap_mw: float | None = None, u_base_mw: float = 1.0) -> np.ndarray:
    """Feedback attack: clamp(K_atk x, +-cap) per bus, active from t0.

    ``state`` is the plant state (the attacker is assumed to know it); the
    gain maps states to per-unit bus loads, scaled to MW by u_base_mw.
    """
    if scn.kind != DYNAMIC:
        raise WrongKindError(f"dynamic_signal on {scn.kind!r} attack")
    if scn.gain is None:
        raise ValueError("dynamic attack needs a synthesized gain")
    cap = scn.cap_mw if cap_mw is None else cap_mw
    mags = np.asarray(scn.magnitudes_mw)
    if t < scn.t0_s:
        return np.zeros_like(mags)
    state = np.asarray(state, dtype=float).ravel()
    if scn.gain.shape[1] != state.size or scn.gain.shape[0] != len(scn.buses):
        raise ValueError(f"attack gain shape {scn.gain.shape} does not match "
                         f"{len(scn.buses)} buses x {state.size} states")
    raw = scn.gain @ state * u_base_mw
    return np.clip(raw, -cap, cap)


def find_resonance(sys: StateSpaceModel, attack_buses, f_lo_hz: float, f_hi_hz: float,
                   grid_points: int = 200) -> float:
    """Frequency (Hz) maximizing the gain from the attack buses to the
    outputs: coarse grid then golden-section refinement around the peak."""
    if f_hi_hz <= f_lo_hz or f_lo_hz < 0:
        raise EmptyRangeError(f"bad frequency range [{f_lo_hz}, {f_hi_hz}]")
    if numkernel.spectral_abscissa(sys.A) >= 0:
        raise numkernel.UnstableError("resonance sweep needs a stable open loop")
    cols = [sys.disturbance_labels.index(b) for b in attack_buses]

    def gain(f_hz):
        G = numkernel.freq_response(sys, 2 * np.pi * f_hz)[:, cols]
        return float(np.linalg.svd(G, compute_uv=False)[0])

    fs = np.linspace(f_lo_hz, f_hi_hz, grid_points)
    vals = [gain(f) for f in fs]
    k = int(np.argmax(vals))
    lo = fs[max(k - 1, 0)]
    hi = fs[min(k + 1, grid_points - 1)]

    invphi = (np.sqrt(5.0) - 1) / 2
    a, b = lo, hi
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    gc, gd = gain(c), gain(d)
    for _ in range(60):
        if b - a < 1e-10 * max(1.0, b):
            break
        if gc > gd:
            b, d, gd = d, c, gc
            c = b - invphi * (b - a)
            gc = gain(c)
        else:
            a, c, gc = c, d, gd
            d = a + invphi * (b - a)
            gd = gain(d)
    return 0.5 * (a + b)


def attack_from_section(table: dict) -> AttackScenario:
    return AttackScenario(
        kind=str(table.get("kind", STATIC)),
        buses=[int(b) for b in table.get("buses", [])],
        magnitudes_mw=[float(m) for m in table.get("magnitudes_mw", [])],
        t0_s=float(table.get("t0_s", 0.0)),
        name=str(table.get("name", "")),
        freq_hz=float(table.get("freq_hz", 0.0)),
        duty=float(table.get("duty", 0.5)),
        cap_mw=float(table.get("cap_mw", 0.0)),
        delta_r=float(table.get("delta_r", 0.25)),
    )


def attack_to_section(scn: AttackScenario) -> dict:
    out = {"name": scn.name, "kind": scn.kind, "buses": list(scn.buses),
           "magnitudes_mw": list(scn.magnitudes_mw), "t0_s": scn.t0_s}
    if scn.kind == SWITCHING:
        out["freq_hz"] = scn.freq_hz
        out["duty"] = scn.duty
    if scn.kind == DYNAMIC:
        out["cap_mw"] = scn.cap_mw
        out["delta_r"] = scn.delta_r
    return out
