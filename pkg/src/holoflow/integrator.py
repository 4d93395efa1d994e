"""Dormand-Prince 5(4) integration of dz/dt = F(z) along complex-time polylines.

Each path segment from ``t_a`` to ``t_b`` is integrated in its real arc
length ``s`` with ``dw/ds = u F(w)``, ``u = (t_b - t_a)/|t_b - t_a|``, so
the complex-time problem becomes an ordinary complex-valued IVP.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import EvaluationError, SingularityEncountered, StepSizeUnderflow
from .field import VectorField, eval_field
from .io import fmt, write_json

COMPLETED = "completed"
SINGULARITY = "singularity"
STEP_UNDERFLOW = "step-underflow"

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
# difference between 5th and embedded 4th order weights
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])
# continuous extension (Hairer, Norsett & Wanner, DOPRI5 dense output)
_D = np.array([-12715105075 / 11282082432, 0.0, 87487479700 / 32700410799,
               -10690763975 / 1880347072, 701980252875 / 199316789632,
               -1453857185 / 822651844, 69997945 / 29380423])

_SAFETY = 0.9
_BETA = 0.04
_ALPHA = 0.2 - 0.75 * _BETA
_FAC_MIN, _FAC_MAX = 0.2, 5.0


@dataclass(frozen=True)
class TimePath:
    """Polyline through complex-time waypoints."""

    waypoints: tuple[complex, ...]

    def __init__(self, waypoints: Sequence[complex]):
        pts = tuple(complex(w) for w in waypoints)
        if len(pts) < 2:
            raise ValueError("a time path needs at least two waypoints")
        for a, b in zip(pts, pts[1:]):
            if a == b:
                raise ValueError(f"consecutive waypoints must differ (repeated {a})")
            if not (math.isfinite(a.real) and math.isfinite(a.imag)):
                raise ValueError("waypoints must be finite")
        object.__setattr__(self, "waypoints", pts)

    @property
    def segments(self):
        return list(zip(self.waypoints, self.waypoints[1:]))


@dataclass(frozen=True)
class IntegratorConfig:
    rtol: float = 1e-10
    atol: float = 1e-12
    max_step_fraction: float = 0.1
    blowup: float = 1e12
    min_step_fraction: float = 1e-14
    dense_samples: int = 32
    fixed_step: float | None = None  # disables error control; for order studies
    max_steps: int = 1_000_000

    def __post_init__(self):
        eps = np.finfo(float).eps
        for name in ("rtol", "atol", "max_step_fraction", "blowup", "min_step_fraction"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.rtol < 10 * eps:
            raise ValueError("rtol must be at least 10 * machine epsilon")
        if self.dense_samples < 1:
            raise ValueError("dense_samples must be >= 1")
        if self.fixed_step is not None and not self.fixed_step > 0:
            raise ValueError("fixed_step must be positive")


@dataclass
class Trajectory:
    times: list[complex] = field(default_factory=list)
    states: list[np.ndarray] = field(default_factory=list)
    errors: list[float] = field(default_factory=list)
    status: str = COMPLETED
    message: str = ""
    t_reached: complex = 0j
    n_steps: int = 0
    n_rejected: int = 0
    last_state: np.ndarray | None = None  # last accepted step, may lie between samples

    def __len__(self):
        return len(self.times)

    @property
    def ok(self) -> bool:
        return self.status == COMPLETED

    @property
    def end(self) -> np.ndarray:
        return self.states[-1]

    def raise_for_status(self) -> "Trajectory":
        if self.status == SINGULARITY:
            raise SingularityEncountered(self.message, self)
        if self.status == STEP_UNDERFLOW:
            raise StepSizeUnderflow(self.message, self)
        return self

    def _append(self, t, z, err):
        self.times.append(complex(t))
        self.states.append(np.array(z, dtype=complex))
        self.errors.append(float(err))


def _error_norm(err, y, y_new, cfg) -> float:
    scale = cfg.atol + cfg.rtol * np.maximum(np.abs(y), np.abs(y_new))
    return float(np.max(np.abs(err) / scale))


def _initial_step(f, y, f0, length, cfg) -> float:
    scale = cfg.atol + cfg.rtol * np.abs(y)
    d0 = np.max(np.abs(y) / scale)
    d1 = np.max(np.abs(f0) / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, length)
    f1 = f(y + h0 * f0)
    d2 = np.max(np.abs(f1 - f0) / scale) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1)


class _Blowup(Exception):
    pass


def _segment(field: VectorField, y, ta, tb, cfg, traj, h_hint):
    """Integrate one segment; returns (y_end, last_step) or raises."""
    delta = tb - ta
    length = abs(delta)
    u = delta / length

    def f(w):
        out = eval_field(field, w)
        return out if u == 1 else u * out

    h_max = cfg.max_step_fraction * length
    h_min = cfg.min_step_fraction * length
    samples = [length * (j + 1) / cfg.dense_samples for j in range(cfg.dense_samples)]
    samples[-1] = length
    next_sample = 0

    s = 0.0
    k1 = f(y)
    if cfg.fixed_step is not None:
        h = min(cfg.fixed_step, length)
    elif h_hint is None:
        h = min(_initial_step(f, y, k1, length, cfg), h_max)
    else:
        h = min(h_hint, h_max)
    err_prev = 1e-4
    rejected = False

    while s < length:
        if traj.n_steps >= cfg.max_steps:
            raise StepSizeUnderflow(f"step budget {cfg.max_steps} exhausted")
        last = s + h >= length * (1 - 1e-15) or s + h >= length
        if last:
            h = length - s
        K = np.empty((7, len(y)), dtype=complex)
        K[0] = k1
        for i in range(1, 7):
            K[i] = f(y + h * (np.asarray(_A[i]) @ K[:i]))
        y_new = y + h * (_B @ K)
        if cfg.fixed_step is not None:
            err_norm = 0.0
            accept = True
        else:
            err = h * (_E @ K)
            err_norm = _error_norm(err, y, y_new, cfg)
            if not np.isfinite(err_norm) or not np.all(np.isfinite(y_new)):
                err_norm = math.inf
            accept = err_norm <= 1.0
        if accept:
            traj.n_steps += 1
            s_new = length if last else s + h
            while next_sample < len(samples) and samples[next_sample] <= s_new:
                sj = samples[next_sample]
                if sj == s_new:
                    z = y_new
                else:
                    theta = (sj - s) / h
                    z = _dense(y, y_new, K, h, theta)
                traj._append(ta + u * sj, z, err_norm)
                next_sample += 1
            traj.t_reached = ta + u * s_new
            traj.last_state = y_new
            y, s = y_new, s_new
            if np.max(np.abs(y)) > cfg.blowup:
                raise _Blowup(f"|z| exceeded {cfg.blowup:g} at t = {traj.t_reached}")
            k1 = K[6]
            if cfg.fixed_step is not None:
                h = cfg.fixed_step
                continue
            if err_norm == 0.0:
                fac = _FAC_MAX
            else:
                fac = _SAFETY * err_norm ** -_ALPHA * err_prev ** _BETA
                fac = min(_FAC_MAX, max(_FAC_MIN, fac))
            if rejected:
                fac = min(fac, 1.0)
            err_prev = max(err_norm, 1e-4)
            h = min(h * fac, h_max)
            rejected = False
        else:
            traj.n_rejected += 1
            if math.isfinite(err_norm):
                fac = max(_FAC_MIN, _SAFETY * err_norm ** -_ALPHA)
            else:
                fac = _FAC_MIN
            h *= fac
            rejected = True
        if h < h_min and s < length:
            raise StepSizeUnderflow(
                f"step {h:.3g} below minimum {h_min:.3g} at t = {ta + u * s}")
    return y, h


def _dense(y, y_new, K, h, theta):
    ydiff = y_new - y
    bspl = h * K[0] - ydiff
    r4 = ydiff - h * K[6] - bspl
    r5 = h * (_D @ K)
    return y + theta * (ydiff + (1 - theta) * (bspl + theta * (r4 + (1 - theta) * r5)))


def integrate_path(field: VectorField, z0: Sequence[complex], path: TimePath | Sequence[complex],
                   cfg: IntegratorConfig | None = None) -> Trajectory:
    """Integrate ``field`` from ``z0`` at ``path.waypoints[0]`` along the path.

    Always returns a :class:`Trajectory`. On failure its ``status`` is
    ``"singularity"`` or ``"step-underflow"`` and it holds the samples
    reached so far; call :meth:`Trajectory.raise_for_status` to turn that
    into an exception.
    """
    cfg = cfg or IntegratorConfig()
    if not isinstance(path, TimePath):
        path = TimePath(path)
    y = np.array(z0, dtype=complex)
    if y.shape != (field.dimension,):
        raise ValueError(f"initial state must have dimension {field.dimension}")
    if not np.all(np.isfinite(y)):
        raise ValueError("initial state must be finite")
    traj = Trajectory()
    traj._append(path.waypoints[0], y, 0.0)
    traj.t_reached = path.waypoints[0]
    h = None
    try:
        for ta, tb in path.segments:
            y, h = _segment(field, y, ta, tb, cfg, traj, h)
    except (_Blowup, EvaluationError) as exc:
        traj.status = SINGULARITY
        traj.message = str(exc)
    except StepSizeUnderflow as exc:
        if np.max(np.abs(y_last(traj))) > math.sqrt(cfg.blowup):
            # escaping to infinity faster than the step floor can follow
            traj.status = SINGULARITY
            traj.message = f"blow-up: {exc}"
        else:
            traj.status = STEP_UNDERFLOW
            traj.message = str(exc)
    return traj


def y_last(traj: Trajectory) -> np.ndarray:
    return traj.last_state if traj.last_state is not None else traj.states[-1]


def path_commutativity_defect(field: VectorField, z0: Sequence[complex], sigma: float, tau: float,
                              cfg: IntegratorConfig | None = None) -> float:
    """Max-norm gap between sigma-then-tau and tau-then-sigma continuations to sigma + i*tau.

    Near zero when the continued solution is single-valued on the
    rectangle; a large value means the two L-paths landed on different
    sheets.
    """
    if sigma == 0 or tau == 0:
        raise ValueError("sigma and tau must both be nonzero")
    cfg = cfg or IntegratorConfig()
    target = complex(sigma, tau)
    ends = []
    for leg, path in (("sigma-first", [0, sigma, target]), ("tau-first", [0, 1j * tau, target])):
        traj = integrate_path(field, z0, path, cfg)
        if not traj.ok:
            exc_type = SingularityEncountered if traj.status == SINGULARITY else StepSizeUnderflow
            raise exc_type(f"{leg} leg failed: {traj.message}", traj)
        ends.append(traj.end)
    return float(np.max(np.abs(ends[0] - ends[1])))


def write_trajectory_csv(traj: Trajectory, path) -> None:
    n = len(traj.states[0])
    header = ["re_t", "im_t"]
    for k in range(1, n + 1):
        header += [f"re_z{k}", f"im_z{k}"]
    header.append("err_est")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for t, z, e in zip(traj.times, traj.states, traj.errors):
            row = [fmt(t.real), fmt(t.imag)]
            for v in z:
                row += [fmt(v.real), fmt(v.imag)]
            row.append(fmt(e))
            w.writerow(row)


def trajectory_status(traj: Trajectory) -> dict:
    return {
        "status": traj.status,
        "message": traj.message,
        "samples": len(traj),
        "steps": traj.n_steps,
        "rejected": traj.n_rejected,
        "t_reached": [fmt(traj.t_reached.real), fmt(traj.t_reached.imag)],
    }


def write_status_json(traj: Trajectory, path) -> None:
    write_json(trajectory_status(traj), path)
