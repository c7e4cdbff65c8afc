"""Independent cross-checks built on uniform latitude-longitude grids.

Nothing here touches the Gauss-Legendre/harmonic machinery: Laplacians are
finite differences, time integration is explicit RK4, integrals are
composite midpoint/trapezoid sums, and curvature comes from fitting an
implicit quadric to mesh neighbourhoods.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, NamedTuple

import numpy as np

from .line_space import CenterPoint, Mesh

__all__ = [
    "LatLongGrid",
    "MeshCurvatureSample",
    "MeshRadii",
    "fd_laplacian",
    "polar_filter",
    "stability_bound",
    "timestep_flow",
    "quad_center",
    "mesh_principal_radii",
]

RK4_REAL_AXIS = 2.78


@dataclass(frozen=True, eq=False)
class LatLongGrid:
    """Cell-centred colatitudes ``(j + 1/2) pi / n_theta`` and ``n_phi`` longitudes."""

    n_theta: int
    n_phi: int

    def __post_init__(self):
        if self.n_theta < 2 or self.n_phi < 3:
            raise ValueError("grid too small")

    @property
    def h_theta(self) -> float:
        return np.pi / self.n_theta

    @property
    def h_phi(self) -> float:
        return 2.0 * np.pi / self.n_phi

    @cached_property
    def theta_nodes(self) -> np.ndarray:
        return (np.arange(self.n_theta) + 0.5) * self.h_theta

    @cached_property
    def phi_nodes(self) -> np.ndarray:
        return np.arange(self.n_phi) * self.h_phi

    @cached_property
    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.theta_nodes, self.phi_nodes, indexing="ij")

    @classmethod
    def for_shape(cls, shape) -> "LatLongGrid":
        return cls(int(shape[0]), int(shape[1]))

    def sample(self, func: Callable) -> np.ndarray:
        th, ph = self.mesh
        return func(th, ph)

    def integrate(self, values: np.ndarray) -> float:
        """Midpoint rule for the surface integral over the sphere."""
        w = np.sin(self.theta_nodes) * self.h_theta * self.h_phi
        return np.sum(values * w[:, None])


def _laplacian_operator(grid: LatLongGrid) -> Callable[[np.ndarray], np.ndarray]:
    h, k = grid.h_theta, grid.h_phi
    s = np.sin(grid.theta_nodes)[:, None]
    s_faces = np.sin(np.arange(1, grid.n_theta) * h)[:, None] / h
    inv_area = 1.0 / (s * h)
    inv_zonal = 1.0 / (s * k) ** 2

    def apply(f: np.ndarray) -> np.ndarray:
        flux = np.zeros((grid.n_theta + 1, grid.n_phi), dtype=f.dtype)
        flux[1:-1] = s_faces * (f[1:] - f[:-1])
        out = (flux[1:] - flux[:-1]) * inv_area
        zonal = np.empty_like(f)
        zonal[:, 1:-1] = f[:, 2:] + f[:, :-2]
        zonal[:, 0] = f[:, 1] + f[:, -1]
        zonal[:, -1] = f[:, 0] + f[:, -2]
        out += (zonal - 2.0 * f) * inv_zonal
        return out

    return apply


def fd_laplacian(values: np.ndarray, grid: LatLongGrid | None = None) -> np.ndarray:
    """Five-point finite-volume Laplacian on the sphere.

    The colatitude flux through the pole faces vanishes because
    ``sin(0) = sin(pi) = 0``, which closes the first and last rows.
    """
    f = np.asarray(values)
    grid = LatLongGrid.for_shape(f.shape) if grid is None else grid
    return _laplacian_operator(grid)(f)


def _row_cutoffs(grid: LatLongGrid) -> np.ndarray:
    return np.maximum(1, np.floor(0.5 * grid.n_phi * np.sin(grid.theta_nodes))).astype(int)


def _filter_operator(grid: LatLongGrid) -> Callable[[np.ndarray], np.ndarray]:
    cut = _row_cutoffs(grid)
    rows = np.flatnonzero(cut < grid.n_phi // 2)
    keep = np.arange(grid.n_phi // 2 + 1)[None, :] <= cut[rows, None]

    def apply(f: np.ndarray) -> np.ndarray:
        out = np.array(f, copy=True)
        spec = np.fft.rfft(f[rows], axis=1)
        out[rows] = np.fft.irfft(spec * keep, n=grid.n_phi, axis=1)
        return out

    return apply


def polar_filter(values: np.ndarray, grid: LatLongGrid | None = None) -> np.ndarray:
    """Drop zonal wavenumbers above ``n_phi sin(theta) / 2`` on each row (real fields)."""
    f = np.asarray(values, dtype=float)
    grid = LatLongGrid.for_shape(f.shape) if grid is None else grid
    return _filter_operator(grid)(f)


def stability_bound(grid: LatLongGrid, c: float, filtered: bool = True) -> float:
    """Largest RK4 step for the (filtered) operator ``fd_laplacian + c``."""
    h, k = grid.h_theta, grid.h_phi
    s = np.sin(grid.theta_nodes)
    if filtered:
        zonal = 4.0 * np.sin(0.5 * _row_cutoffs(grid) * k) ** 2 / (s * k) ** 2
    else:
        zonal = 4.0 / (s * k) ** 2
    rate = 4.0 / h**2 + float(np.max(zonal)) + abs(c)
    return RK4_REAL_AXIS / rate


def timestep_flow(f0: np.ndarray, c: float, dt: float, T: float, filtered: bool = True) -> np.ndarray:
    """Integrate ``df/dt = fd_laplacian(f) + c f`` to time ``T`` by classical RK4.

    ``dt`` is shortened so that a whole number of steps lands on ``T``.
    """
    grid = LatLongGrid.for_shape(np.shape(f0))
    limit = stability_bound(grid, c, filtered)
    if dt > limit:
        raise ValueError(f"dt={dt:.3e} exceeds the explicit stability bound {limit:.3e}")
    n = max(1, int(np.ceil(T / dt - 1e-12)))
    dt = T / n

    lap = _laplacian_operator(grid)
    smooth = _filter_operator(grid) if filtered else (lambda x: x)

    def rhs(f):
        return smooth(lap(f)) + c * f

    f = np.array(f0, dtype=float)
    cap = np.exp((c + 1.0) * T) * max(np.max(np.abs(f)), 1e-300)
    for _ in range(n):
        k1 = rhs(f)
        k2 = rhs(f + 0.5 * dt * k1)
        k3 = rhs(f + 0.5 * dt * k2)
        k4 = rhs(f + dt * k3)
        f = f + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(f)) or np.max(np.abs(f)) > cap:
            raise FloatingPointError("explicit time stepping went unstable")
    return f


def _moment_integrals(values: np.ndarray, grid: LatLongGrid) -> np.ndarray:
    th, ph = grid.mesh
    a = grid.integrate(values * np.sin(th) * np.exp(1j * ph))
    b = grid.integrate(values * np.cos(th))
    return 3.0 / (4.0 * np.pi) * np.array([a.real, a.imag, b.real])


def quad_center(r, grid: LatLongGrid | None = None, extrapolate: bool = True) -> CenterPoint:
    """Centre ``(3/4pi) int r n dA`` by composite midpoint sums.

    ``r`` is either samples on ``grid`` or a callable ``r(theta, phi)``.
    With a callable and ``extrapolate``, the sums on ``grid`` and on a grid
    of half the spacing are combined by one Richardson step.
    """
    grid = LatLongGrid(400, 800) if grid is None else grid
    if not callable(r):
        x = _moment_integrals(np.asarray(r), grid)
    elif extrapolate:
        fine = LatLongGrid(2 * grid.n_theta, 2 * grid.n_phi)
        coarse_x = _moment_integrals(grid.sample(r), grid)
        fine_x = _moment_integrals(fine.sample(r), fine)
        x = (4.0 * fine_x - coarse_x) / 3.0
    else:
        x = _moment_integrals(grid.sample(r), grid)
    return CenterPoint.from_xyz(x)


# ---------------------------------------------------------------------------
# Mesh curvature
# ---------------------------------------------------------------------------


class MeshCurvatureSample(NamedTuple):
    vertex: int
    position: np.ndarray
    radii: tuple[float, float]


class MeshRadii(NamedTuple):
    samples: list[MeshCurvatureSample]
    skipped: list[int]


def _neighbours(n_vertices: int, faces: np.ndarray) -> list[set[int]]:
    adj = [set() for _ in range(n_vertices)]
    for a, b, c in faces:
        adj[a].update((b, c))
        adj[b].update((a, c))
        adj[c].update((a, b))
    return adj


def _quadric_radii(points: np.ndarray, centre: np.ndarray):
    p = points - centre
    scale = np.mean(np.linalg.norm(p, axis=1))
    x, y, z = (p / scale).T
    A = np.column_stack([x * x, y * y, z * z, x * y, x * z, y * z, x, y, z, np.ones_like(x)])
    _, sv, vt = np.linalg.svd(A, full_matrices=False)
    if sv[-2] <= 0 or sv[-1] / sv[-2] > 1e-3:
        return None
    q = vt[-1]
    grad = q[6:9]
    g = np.linalg.norm(grad)
    if g < 1e-12 * np.linalg.norm(q):
        return None
    hess = np.array([[2 * q[0], q[3], q[4]], [q[3], 2 * q[1], q[5]], [q[4], q[5], 2 * q[2]]])
    n = grad / g
    proj = np.eye(3) - np.outer(n, n)
    shape = proj @ hess @ proj / g
    ev = np.linalg.eigvalsh(shape)
    # one eigenvalue is the (zero) normal direction
    k = np.delete(ev, np.argmin(np.abs(ev))) / scale
    if np.any(k == 0) or not np.all(np.isfinite(k)):
        return None
    radii = sorted(np.abs(1.0 / k), reverse=True)
    return float(radii[0]), float(radii[1])


def mesh_principal_radii(mesh: Mesh, vertices=None) -> MeshRadii:
    """Principal radii per vertex from an implicit quadric fitted to its 2-ring."""
    verts = np.asarray(mesh.vertices)
    adj = _neighbours(len(verts), np.asarray(mesh.faces))
    targets = range(len(verts)) if vertices is None else vertices
    samples, skipped = [], []
    for v in targets:
        ring = set(adj[v])
        for u in adj[v]:
            ring |= adj[u]
        ring.add(v)
        idx = np.fromiter(sorted(ring), int)
        radii = _quadric_radii(verts[idx], verts[v]) if len(idx) >= 10 else None
        if radii is None:
            skipped.append(v)
        else:
            samples.append(MeshCurvatureSample(v, verts[v], radii))
    return MeshRadii(samples, skipped)
