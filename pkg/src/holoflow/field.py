"""Vector fields on complexified phase space and the built-in benchmarks."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .errors import PoleOrBranch
from .expr import Expr, eval_ast, parameters, parse_expression


def _linear2d(z, p):
    return [-z[0], -p["gamma"] * z[1]]


def _davis_skodje(z, p):
    x, y = z
    g = p["gamma"]
    d = 1.0 + x
    if d == 0:
        raise PoleOrBranch("Davis-Skodje pole at x1 = -1")
    return [-x, -g * y + ((g - 1.0) * x + g * x * x) / (d * d)]


BUILTINS = {
    "linear2d": (_linear2d, 2),
    "davis_skodje": (_davis_skodje, 2),
}


@dataclass(frozen=True)
class VectorField:
    """Autonomous analytic vector field ``F`` evaluated over complex states.

    Either ``builtin`` names a closed-form system or ``components`` holds
    one expression per coordinate. ``rotation`` is a unit complex factor
    applied to every output (see :func:`rotate_field`).
    """

    dimension: int
    name: str
    params: tuple[tuple[str, float], ...] = ()
    builtin: str | None = None
    components: tuple[Expr, ...] | None = None
    rotation: complex = 1.0 + 0.0j

    @property
    def param_map(self) -> dict[str, float]:
        return dict(self.params)

    def __call__(self, z: Sequence[complex]) -> np.ndarray:
        return eval_field(self, z)


def _check_gamma(gamma: float) -> float:
    gamma = float(gamma)
    if not gamma > 1.0:
        raise ValueError(f"gamma must exceed 1 for time-scale separation, got {gamma}")
    return gamma


def linear2d(gamma: float = 5.0) -> VectorField:
    """Diagonal linear system (-x1, -gamma*x2); the SIM is the x1 axis."""
    return VectorField(2, f"linear2d(gamma={gamma:g})", (("gamma", _check_gamma(gamma)),),
                       builtin="linear2d")


def davis_skodje(gamma: float = 10.0) -> VectorField:
    """Davis-Skodje system with SIM x2 = x1/(1+x1) and a pole at x1 = -1."""
    return VectorField(2, f"davis_skodje(gamma={gamma:g})", (("gamma", _check_gamma(gamma)),),
                       builtin="davis_skodje")


def builtin_field(name: str, **params) -> VectorField:
    if name == "linear2d":
        return linear2d(**params)
    if name == "davis_skodje":
        return davis_skodje(**params)
    raise ValueError(f"unknown builtin system {name!r}; known: {sorted(BUILTINS)}")


def expression_field(sources: Sequence[str], params: Mapping[str, float] | None = None,
                     name: str | None = None) -> VectorField:
    """Build a field from one expression per component over ``x1..xn``."""
    n = len(sources)
    if n < 1:
        raise ValueError("at least one component expression is required")
    asts = tuple(parse_expression(s, n) for s in sources)
    params = dict(params or {})
    missing = set().union(*(parameters(a) for a in asts)) - set(params)
    if missing:
        raise ValueError(f"unbound parameters: {sorted(missing)}")
    return VectorField(n, name or "(" + ", ".join(sources) + ")",
                       tuple(sorted((k, float(v)) for k, v in params.items())),
                       components=asts)


def eval_field(field: VectorField, z: Sequence[complex]) -> np.ndarray:
    if len(z) != field.dimension:
        raise ValueError(f"state has dimension {len(z)}, field expects {field.dimension}")
    zs = [complex(v) for v in z]
    p = field.param_map
    if field.builtin is not None:
        out = BUILTINS[field.builtin][0](zs, p)
    else:
        out = [eval_ast(c, zs, p) for c in field.components]
    out = np.array(out, dtype=complex)
    if field.rotation != 1:
        out = field.rotation * out
    return out


def unit_phase(theta: float) -> complex:
    """``exp(i*theta)``, exact at integer multiples of pi/2."""
    k = round(theta / (math.pi / 2))
    if abs(theta - k * math.pi / 2) <= 4 * np.finfo(float).eps * max(1.0, abs(theta)):
        return (1.0 + 0.0j, 1.0j, -1.0 + 0.0j, -1.0j)[k % 4]
    return cmath.exp(1j * theta)


def rotate_field(field: VectorField, theta: float) -> VectorField:
    """Field for the flow in complex-time direction ``exp(i*theta)``.

    ``theta = pi/2`` gives the imaginary-time flow dz/dtau = i F(z).
    """
    return replace(field, rotation=field.rotation * unit_phase(theta))


@dataclass(frozen=True)
class JacobianSpectrum:
    point: np.ndarray
    eigenvalues: np.ndarray  # sorted by real part, descending
    frequencies: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "frequencies", self.eigenvalues / (2 * math.pi))


def jacobian(field: VectorField, z: Sequence[complex]) -> np.ndarray:
    """Central finite-difference Jacobian, step 1e-6*max(1, |z_k|)."""
    z = np.asarray(z, dtype=complex)
    n = field.dimension
    J = np.empty((n, n), dtype=complex)
    for k in range(n):
        h = 1e-6 * max(1.0, abs(z[k]))
        zp = z.copy()
        zm = z.copy()
        zp[k] += h
        zm[k] -= h
        J[:, k] = (eval_field(field, zp) - eval_field(field, zm)) / (2 * h)
    return J


def charpoly(A: np.ndarray) -> np.ndarray:
    """Monic characteristic polynomial coefficients [1, c1, ..., cn] (Faddeev-LeVerrier)."""
    A = np.asarray(A, dtype=complex)
    n = A.shape[0]
    coeffs = [1.0 + 0j]
    M = np.zeros_like(A)
    I = np.eye(n, dtype=complex)
    for k in range(1, n + 1):
        M = A @ M + coeffs[-1] * I
        coeffs.append(-np.trace(A @ M) / k)
    return np.array(coeffs)


def durand_kerner(coeffs: Sequence[complex], tol: float = 1e-10, max_iter: int = 500) -> np.ndarray:
    """All roots of the monic polynomial with the given coefficients.

    Iterates until every root has residual |p(r)| < tol. Raises
    RuntimeError when that does not happen within ``max_iter`` sweeps.
    """
    c = np.asarray(coeffs, dtype=complex)
    c = c / c[0]
    n = len(c) - 1
    if n == 0:
        return np.empty(0, dtype=complex)
    if n == 1:
        return np.array([-c[1]])
    radius = 1.0 + max(abs(c[1:]))  # Cauchy bound
    roots = radius * (0.4 + 0.9j) ** np.arange(n) / abs(0.4 + 0.9j) ** np.arange(n)
    for _ in range(max_iter):
        for i in range(n):
            denom = np.prod([roots[i] - roots[j] for j in range(n) if j != i])
            if denom == 0:
                denom = 1e-300
            roots[i] = roots[i] - np.polyval(c, roots[i]) / denom
        if np.all(np.abs(np.polyval(c, roots)) < tol):
            return roots
    raise RuntimeError(f"Durand-Kerner did not converge in {max_iter} iterations")


def jacobian_spectrum(field: VectorField, z: Sequence[complex]) -> JacobianSpectrum:
    if field.dimension > 6:
        raise ValueError("jacobian_spectrum supports dimension <= 6")
    z = np.asarray(z, dtype=complex)
    eig = durand_kerner(charpoly(jacobian(field, z)))
    order = sorted(range(len(eig)), key=lambda i: (-eig[i].real, -eig[i].imag))
    return JacobianSpectrum(z, eig[order])
