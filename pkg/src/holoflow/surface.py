"""Riemann-surface sampling over complex-time rectangles."""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .field import VectorField
from .integrator import IntegratorConfig, integrate_path
from .io import fmt

CONVENTION = "L-path: real axis 0 -> sigma, then imaginary direction"


@dataclass
class SurfaceMesh:
    sigma: np.ndarray  # (n_sigma,)
    tau: np.ndarray  # (n_tau,)
    nodes: np.ndarray  # (n_sigma, n_tau, dim) complex, nan where failed
    failures: np.ndarray  # (n_sigma, n_tau) object, "" where valid
    base: np.ndarray  # (n_sigma, dim) real-time values z(sigma_j), nan if unreachable
    convention: str = CONVENTION

    @property
    def valid(self) -> np.ndarray:
        return self.failures == ""

    @property
    def failure_fraction(self) -> float:
        return float(1.0 - self.valid.mean())

    @property
    def dimension(self) -> int:
        return self.nodes.shape[2]


def _grid(lo: float, hi: float, n: int) -> np.ndarray:
    g = np.linspace(lo, hi, n)
    if lo < 0 < hi:
        # snap the grid value nearest 0 so the real-time row is present exactly
        i = int(np.argmin(np.abs(g)))
        if abs(g[i]) <= 1e-12 * (hi - lo):
            g[i] = 0.0
    return g


def _march(field, z_start, t_start, targets, cfg):
    """Integrate from t_start through ``targets`` in order.

    Returns a list of (state | None, reason) per target; after the first
    failure every later target carries the failure reason.
    """
    out = []
    waypoints = [t_start]
    slots = []  # index into trajectory samples, or -1 for the start point
    for t in targets:
        if t == waypoints[-1]:
            slots.append(len(waypoints) - 1)
        else:
            waypoints.append(t)
            slots.append(len(waypoints) - 1)
    if len(waypoints) == 1:
        return [(np.array(z_start, dtype=complex), "") for _ in targets]
    traj = integrate_path(field, z_start, waypoints, cfg)
    reason = "" if traj.ok else f"{traj.status}: {traj.message}"
    for slot in slots:
        if slot < len(traj.states):
            out.append((traj.states[slot], ""))
        else:
            out.append((None, reason))
    return out


def _column(args):
    field, base, sigma, tau, cfg = args
    dim = field.dimension
    nodes = np.full((len(tau), dim), np.nan, dtype=complex)
    fails = np.full(len(tau), "", dtype=object)
    if base is None:
        fails[:] = "real leg failed"
        return nodes, fails
    t0 = complex(sigma, 0.0)
    up = [k for k in range(len(tau)) if tau[k] >= 0]
    down = [k for k in reversed(range(len(tau))) if tau[k] < 0]
    for ks in (up, down):
        if not ks:
            continue
        res = _march(field, base, t0, [complex(sigma, tau[k]) for k in ks], cfg)
        for k, (z, reason) in zip(ks, res):
            if z is None:
                fails[k] = reason
            else:
                nodes[k] = z
    return nodes, fails


def sample_surface(field: VectorField, z0: Sequence[complex], sigma_range: Sequence[float],
                   tau_range: Sequence[float], n_sigma: int, n_tau: int,
                   cfg: IntegratorConfig | None = None, workers: int = 1) -> SurfaceMesh:
    """Sample z(sigma + i tau) on a uniform grid using L-path continuation.

    Each column integrates along the real axis to ``sigma_j`` and then
    vertically. Failures poison only the nodes further along the same
    leg; they never raise.
    """
    s0, s1 = map(float, sigma_range)
    t0, t1 = map(float, tau_range)
    if n_sigma < 2 or n_tau < 2:
        raise ValueError("n_sigma and n_tau must be >= 2")
    if not (s0 < s1 and t0 < t1):
        raise ValueError("ranges must be strictly increasing")
    if not s0 <= 0 <= s1:
        raise ValueError("sigma range must contain 0 (the initial value)")
    cfg = cfg or IntegratorConfig()
    cfg = IntegratorConfig(**{**asdict(cfg), "dense_samples": 1})
    sigma = _grid(s0, s1, n_sigma)
    tau = _grid(t0, t1, n_tau)
    dim = field.dimension
    z0 = np.array(z0, dtype=complex)

    base: list = [None] * n_sigma
    fwd = [j for j in range(n_sigma) if sigma[j] >= 0]
    bwd = [j for j in reversed(range(n_sigma)) if sigma[j] < 0]
    for js in (fwd, bwd):
        if js:
            res = _march(field, z0, 0j, [complex(sigma[j]) for j in js], cfg)
            for j, (z, _) in zip(js, res):
                base[j] = z

    jobs = [(field, base[j], sigma[j], tau, cfg) for j in range(n_sigma)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            columns = list(pool.map(_column, jobs))
    else:
        columns = [_column(job) for job in jobs]

    nodes = np.stack([c[0] for c in columns])
    failures = np.stack([c[1] for c in columns])
    base_arr = np.array([b if b is not None else np.full(dim, np.nan) for b in base], dtype=complex)
    return SurfaceMesh(sigma, tau, nodes, failures, base_arr)


class CRResidual(NamedTuple):
    max_residual: float
    residuals: np.ndarray  # (n_sigma, n_tau), nan where not evaluated
    skipped: int


def cauchy_riemann_residual(mesh: SurfaceMesh) -> CRResidual:
    """max_k |dz_k/dtau - i dz_k/dsigma| by central differences on interior nodes."""
    ns, nt = len(mesh.sigma), len(mesh.tau)
    if ns < 3 or nt < 3:
        raise ValueError("mesh needs at least 3 nodes per axis")
    res = np.full((ns, nt), np.nan)
    ok = mesh.valid
    skipped = 0
    for j in range(1, ns - 1):
        hs = mesh.sigma[j + 1] - mesh.sigma[j - 1]
        for k in range(1, nt - 1):
            if not (ok[j, k] and ok[j - 1, k] and ok[j + 1, k] and ok[j, k - 1] and ok[j, k + 1]):
                skipped += 1
                continue
            ht = mesh.tau[k + 1] - mesh.tau[k - 1]
            d_sigma = (mesh.nodes[j + 1, k] - mesh.nodes[j - 1, k]) / hs
            d_tau = (mesh.nodes[j, k + 1] - mesh.nodes[j, k - 1]) / ht
            res[j, k] = np.max(np.abs(d_tau - 1j * d_sigma))
    if np.all(np.isnan(res)):
        raise ValueError("no valid interior nodes to evaluate")
    return CRResidual(float(np.nanmax(res)), res, skipped)


def tau_total_variation(mesh: SurfaceMesh) -> float:
    """Sum over columns of the path length of z along tau (valid neighbours only)."""
    dz = np.diff(mesh.nodes, axis=1)
    both = mesh.valid[:, 1:] & mesh.valid[:, :-1]
    steps = np.linalg.norm(dz, axis=2)
    return float(steps[both].sum())


def parse_axis(spec: str, dim: int) -> tuple[str, int]:
    """``"re2"`` -> ("re", 2)."""
    part, idx = spec[:2].lower(), spec[2:]
    if part not in ("re", "im") or not idx.isdigit() or not 1 <= int(idx) <= dim:
        raise ValueError(f"bad projection axis {spec!r} for dimension {dim}")
    return part, int(idx)


def _component(values: np.ndarray, axis: tuple[str, int]) -> np.ndarray:
    v = values[..., axis[1] - 1]
    return v.real if axis[0] == "re" else v.imag


_AZ, _EL = math.radians(35.0), math.radians(25.0)


def _project(p: np.ndarray) -> np.ndarray:
    """Fixed oblique view: rotate about the vertical axis, then tilt."""
    x, y, z = p[..., 0], p[..., 1], p[..., 2]
    u = x * math.cos(_AZ) - y * math.sin(_AZ)
    depth = x * math.sin(_AZ) + y * math.cos(_AZ)
    v = z * math.cos(_EL) - depth * math.sin(_EL)
    return np.stack([u, -v], axis=-1)


def project_surface_svg(mesh: SurfaceMesh, out_path, projection: Sequence[str] = ("re1", "re2", "im2"),
                        size: int = 600) -> dict:
    """Write an SVG wireframe of the mesh; the real-time row is drawn in red.

    Returns counts useful for checking the output (polylines drawn, red
    polyline present, degenerate flag).
    """
    if mesh.nodes.size == 0:
        raise ValueError("empty mesh")
    axes = [parse_axis(a, mesh.dimension) for a in projection]
    if len(axes) != 3:
        raise ValueError("projection needs three axes")

    def to3d(values):
        return np.stack([_component(values, a) for a in axes], axis=-1)

    grid2d = _project(to3d(mesh.nodes))
    base2d = _project(to3d(mesh.base))
    finite = np.isfinite(grid2d).all(axis=-1) & mesh.valid
    pts = np.concatenate([grid2d[finite], base2d[np.isfinite(base2d).all(axis=-1)]])
    if len(pts) == 0:
        raise ValueError("mesh has no valid nodes")
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    extent = float(np.max(hi - lo))
    degenerate = extent <= 1e-12 * max(1.0, float(np.max(np.abs(pts))))
    margin = 20.0
    scale = 1.0 if degenerate else (size - 2 * margin) / extent
    centre = (lo + hi) / 2

    def xy(p):
        q = (p - centre) * scale + size / 2
        return f"{q[0]:.4f},{q[1]:.4f}"

    def runs(points, mask):
        run = []
        for p, m in zip(points, mask):
            if m:
                run.append(p)
            else:
                if len(run) >= 2:
                    yield run
                run = []
        if len(run) >= 2:
            yield run

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
        '<g fill="none" stroke="#333333" stroke-width="0.6">',
    ]
    n_lines = 0
    if not degenerate:
        for j in range(grid2d.shape[0]):
            for run in runs(grid2d[j], finite[j]):
                lines.append('<polyline points="' + " ".join(xy(p) for p in run) + '"/>')
                n_lines += 1
        for k in range(grid2d.shape[1]):
            for run in runs(grid2d[:, k], finite[:, k]):
                lines.append('<polyline points="' + " ".join(xy(p) for p in run) + '"/>')
                n_lines += 1
    lines.append("</g>")
    base_ok = np.isfinite(base2d).all(axis=-1)
    red = 0
    for run in runs(base2d, base_ok):
        lines.append('<polyline class="real-time" fill="none" stroke="red" stroke-width="2" points="'
                     + " ".join(xy(p) for p in run) + '"/>')
        red += 1
    if degenerate:
        lines.append(f'<circle class="degenerate" cx="{size / 2:.4f}" cy="{size / 2:.4f}" r="4" fill="red"/>')
    lines.append("</svg>")
    with open(out_path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return {"polylines": n_lines, "red_polylines": red, "degenerate": bool(degenerate)}


def write_mesh_csv(mesh: SurfaceMesh, path) -> None:
    dim = mesh.dimension
    header = ["sigma", "tau"]
    for k in range(1, dim + 1):
        header += [f"re_z{k}", f"im_z{k}"]
    header.append("status")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for j, s in enumerate(mesh.sigma):
            for k, t in enumerate(mesh.tau):
                row = [fmt(s), fmt(t)]
                for v in mesh.nodes[j, k]:
                    row += [fmt(v.real), fmt(v.imag)]
                row.append(mesh.failures[j, k] or "ok")
                w.writerow(row)
