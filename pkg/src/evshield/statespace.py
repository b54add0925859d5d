"""Continuous-time state-space containers shared by every other module.

Sign and unit conventions used throughout:

* control inputs ``u`` are per-unit load *increases* on the system MVA base
  (positive = extra EV charging load, negative = reduced charging / V2G),
* disturbance inputs ``w`` are per-unit load increases at load buses,
* outputs are generator frequency deviations in Hz.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["StateSpaceModel", "ReductionReport", "P_CHANNEL", "Q_CHANNEL"]

P_CHANNEL = "P"
Q_CHANNEL = "Q"


def _as_matrix(x, rows=None, cols=None, name="matrix"):
    a = np.atleast_2d(np.asarray(x, dtype=float))
    if rows is not None and a.shape[0] != rows:
        raise ValueError(f"{name} has {a.shape[0]} rows, expected {rows}")
    if cols is not None and a.shape[1] != cols:
        raise ValueError(f"{name} has {a.shape[1]} columns, expected {cols}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


@dataclass(frozen=True)
class StateSpaceModel:
    """Linear plant ``xdot = A x + B u + B_d w``, ``y = C x + D u + D_d w``.

    ``input_labels`` ties each column of ``B`` to an (ev bus id, channel)
    pair with channel in {"P", "Q"}; ``output_labels`` ties rows of ``C`` to
    generator ids; ``disturbance_labels`` ties columns of ``B_d`` to the load
    bus receiving the injection.  ``u_base_mw`` converts per-unit channel
    signals to MW (it equals the system MVA base).
    """

    A: np.ndarray
    B: np.ndarray
    B_d: np.ndarray
    C: np.ndarray
    D: np.ndarray
    D_d: np.ndarray
    input_labels: tuple = ()
    output_labels: tuple = ()
    disturbance_labels: tuple = ()
    u_base_mw: float = 100.0

    def __post_init__(self):
        n = np.atleast_2d(np.asarray(self.A)).shape[0]
        object.__setattr__(self, "A", _as_matrix(self.A, n, n, "A"))
        object.__setattr__(self, "B", _as_matrix(self.B, n, None, "B"))
        object.__setattr__(self, "B_d", _as_matrix(self.B_d, n, None, "B_d"))
        q = np.atleast_2d(np.asarray(self.C)).shape[0]
        object.__setattr__(self, "C", _as_matrix(self.C, q, n, "C"))
        object.__setattr__(self, "D", _as_matrix(self.D, q, self.B.shape[1], "D"))
        object.__setattr__(self, "D_d", _as_matrix(self.D_d, q, self.B_d.shape[1], "D_d"))
        object.__setattr__(self, "input_labels", tuple(self.input_labels))
        object.__setattr__(self, "output_labels", tuple(self.output_labels))
        object.__setattr__(self, "disturbance_labels", tuple(self.disturbance_labels))
        if self.input_labels and len(self.input_labels) != self.m:
            raise ValueError("input_labels length must equal the number of control inputs")
        if self.output_labels and len(self.output_labels) != self.q:
            raise ValueError("output_labels length must equal the number of outputs")
        if self.disturbance_labels and len(self.disturbance_labels) != self.p:
            raise ValueError("disturbance_labels length must equal the number of disturbances")
        if self.u_base_mw <= 0:
            raise ValueError("u_base_mw must be positive")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.B_d.shape[1]

    @property
    def q(self) -> int:
        return self.C.shape[0]

    def closed_loop(self, K: np.ndarray) -> "StateSpaceModel":
        """Model with state feedback u = K x folded in: A+BK, C+DK."""
        K = _as_matrix(K, self.m, self.n, "K")
        return StateSpaceModel(
            A=self.A + self.B @ K,
            B=self.B,
            B_d=self.B_d,
            C=self.C + self.D @ K,
            D=self.D,
            D_d=self.D_d,
            input_labels=self.input_labels,
            output_labels=self.output_labels,
            disturbance_labels=self.disturbance_labels,
            u_base_mw=self.u_base_mw,
        )

    def transformed(self, T: np.ndarray) -> "StateSpaceModel":
        """Similarity transform x = T z (inputs/outputs unchanged)."""
        T = _as_matrix(T, self.n, self.n, "T")
        Ti = np.linalg.inv(T)
        return StateSpaceModel(
            A=Ti @ self.A @ T,
            B=Ti @ self.B,
            B_d=Ti @ self.B_d,
            C=self.C @ T,
            D=self.D,
            D_d=self.D_d,
            input_labels=self.input_labels,
            output_labels=self.output_labels,
            disturbance_labels=self.disturbance_labels,
            u_base_mw=self.u_base_mw,
        )


@dataclass(frozen=True)
class ReductionReport:
    """Outcome of a Hankel balanced truncation.

    ``energy_fraction`` is the cumulative share of Hankel singular values
    retained; ``error_bound`` is the a-priori H-infinity truncation bound
    2 * sum of discarded singular values.
    """

    hsv: tuple = field(default=())
    kept_order: int = 0
    energy_fraction: float = 1.0
    error_bound: float = 0.0

    def __post_init__(self):
        hsv = tuple(float(s) for s in self.hsv)
        object.__setattr__(self, "hsv", hsv)
        if any(s < -1e-12 for s in hsv):
            raise ValueError("Hankel singular values must be nonnegative")
        if any(hsv[i] < hsv[i + 1] - 1e-12 for i in range(len(hsv) - 1)):
            raise ValueError("Hankel singular values must be nonincreasing")
        if not 0 <= self.kept_order <= len(hsv):
            raise ValueError("kept_order out of range")
        if not -1e-12 <= self.energy_fraction <= 1 + 1e-12:
            raise ValueError("energy_fraction must lie in [0, 1]")
