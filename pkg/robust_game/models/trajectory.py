"""Recorded closed-loop signals and identification samples."""
from dataclasses import dataclass

import numpy as np

from robust_game.errors import InputError


@dataclass(frozen=True)
class Trajectory:
    """
    Closed-loop signals on a uniform time grid.

    Row k of every signal array corresponds to times[k]. The exogenous
    disturbance w[k] is the value held over [times[k], times[k+1]).
    """

    times: np.ndarray
    states: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        n = len(self.times)
        for name in ("states", "u1", "u2", "w"):
            if len(getattr(self, name)) != n:
                raise InputError(f"Trajectory field {name} has {len(getattr(self, name))} rows, expected {n}")
        if n > 1 and np.any(np.diff(self.times) <= 0):
            raise InputError("Trajectory times must be strictly increasing")

    def __len__(self) -> int:
        return len(self.times)

    @property
    def is_empty(self) -> bool:
        return len(self.times) == 0

    @property
    def final_state(self) -> np.ndarray:
        if self.is_empty:
            raise InputError("Empty trajectory has no final state")
        return self.states[-1]

    def until(self, t_end: float) -> "Trajectory":
        """Prefix of the trajectory with times <= t_end."""
        keep = self.times <= t_end + 1e-12
        return Trajectory(self.times[keep], self.states[keep], self.u1[keep], self.u2[keep], self.w[keep])

    def index_of(self, t: float, tol: float = 1e-9) -> int:
        """Grid index of time t."""
        if self.is_empty:
            raise InputError("Empty trajectory")
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > tol:
            raise InputError(f"Sample time {t:.6g}s is not on the integration grid")
        return k

    @staticmethod
    def concatenate(parts: list["Trajectory"]) -> "Trajectory":
        """Join consecutive segments; a shared boundary point is taken from the later segment."""
        parts = [p for p in parts if not p.is_empty]
        if not parts:
            raise InputError("Nothing to concatenate")
        pieces = []
        for p, nxt in zip(parts, parts[1:] + [None]):
            stop = len(p) - 1 if nxt is not None and np.isclose(nxt.times[0], p.times[-1]) else len(p)
            pieces.append(Trajectory(p.times[:stop], p.states[:stop], p.u1[:stop], p.u2[:stop], p.w[:stop]))
        return Trajectory(
            times=np.concatenate([p.times for p in pieces]),
            states=np.vstack([p.states for p in pieces]),
            u1=np.vstack([p.u1 for p in pieces]),
            u2=np.vstack([p.u2 for p in pieces]),
            w=np.vstack([p.w for p in pieces]),
        )


@dataclass(frozen=True)
class Sample:
    """One identification sample (xdot, x, u1) taken at time t."""

    xdot: np.ndarray
    x: np.ndarray
    u1: np.ndarray
    t: float

    def __post_init__(self):
        if not (np.all(np.isfinite(self.xdot)) and np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.u1))):
            raise InputError(f"Sample at t={self.t:.6g}s has non-finite entries")
