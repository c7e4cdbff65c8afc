"""Oriented lines of R^3 as points of the tangent bundle of the sphere.

A line is a direction ``xi`` (north-chart stereographic coordinate, or the
south chart ``zeta = 1/xi``) plus a fibre coordinate ``eta``. A convex
surface is represented either by its support function ``r`` or by the
section ``xi -> F(xi)`` of its normal lines.

Section derivatives are evaluated through the smooth spin-1 function
``G = exp(-i phi) cos^2(theta/2) F``: the slopes become
``rho + i lambda = -ethbar G`` and ``dbar F = -exp(2 i phi) eth G``, which
avoids the large ``(1 + |xi|^2)`` factors near the south pole.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import singledispatch
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .sphere_harmonics import (
    ComplexField,
    HarmonicSpectrum,
    ScalarField,
    SphereGrid,
    dbar,
    eth,
    ethbar,
    evaluate,
    make_grid,
    sht_forward,
    sht_inverse,
)

__all__ = [
    "OrientedLine",
    "CenterPoint",
    "SupportField",
    "SectionField",
    "SlopeFields",
    "Radii",
    "Mesh",
    "direction_vector",
    "line_to_point",
    "point_to_line",
    "perp_distance",
    "section_from_support",
    "section_from_potential",
    "holomorphic_section",
    "section_spin1",
    "slopes",
    "radii_of_curvature",
    "translate",
    "sphere_support",
    "ellipsoid_support",
    "reconstruct_surface",
    "write_obj",
]

_FLIP = np.array([1.0, -1.0, -1.0])  # rotation by pi about x maps the charts


# ---------------------------------------------------------------------------
# Single lines
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OrientedLine:
    """An oriented line in one of two stereographic charts.

    In the south chart ``xi`` holds ``zeta = 1/xi_north`` and ``eta`` holds
    ``-eta_north / xi_north**2``.
    """

    chart: str
    xi: complex
    eta: complex

    def __post_init__(self):
        if self.chart not in ("north", "south"):
            raise ValueError(f"unknown chart {self.chart!r}")

    @classmethod
    def from_north(cls, xi: complex, eta: complex) -> OrientedLine:
        """Build from north-chart coordinates, switching charts when ``|xi| > 1``."""
        xi, eta = complex(xi), complex(eta)
        if abs(xi) > 1.0:
            return cls("south", 1.0 / xi, -eta / xi**2)
        return cls("north", xi, eta)

    def to_chart(self, chart: str) -> OrientedLine:
        if chart == self.chart:
            return self
        if self.xi == 0:
            raise ValueError(f"line is at the pole of the {chart} chart")
        return OrientedLine(chart, 1.0 / self.xi, -self.eta / self.xi**2)

    def direction(self) -> np.ndarray:
        return direction_vector(self.xi, self.chart)


@dataclass(frozen=True)
class CenterPoint:
    """A point of R^3 as ``alpha = x1 + i x2`` and ``b = x3``."""

    alpha: complex
    b: float

    @classmethod
    def from_xyz(cls, x) -> CenterPoint:
        x1, x2, x3 = (float(v) for v in x)
        return cls(complex(x1, x2), x3)

    @property
    def xyz(self) -> np.ndarray:
        return np.array([self.alpha.real, self.alpha.imag, self.b])


def direction_vector(xi: complex, chart: str = "north") -> np.ndarray:
    """Unit vector ``(sin t cos p, sin t sin p, cos t)`` for ``xi = tan(t/2) e^{ip}``."""
    xi = complex(xi)
    q = 1.0 + abs(xi) ** 2
    n = np.array([2.0 * xi.real / q, 2.0 * xi.imag / q, (1.0 - abs(xi) ** 2) / q])
    return n * _FLIP if chart == "south" else n


def _north_point(xi: complex, eta: complex, r: float) -> np.ndarray:
    q = 1.0 + xi * xi.conjugate()
    z = (2.0 * (eta - eta.conjugate() * xi**2) + 2.0 * xi * q * r) / q**2
    x3 = (-2.0 * (eta * xi.conjugate() + eta.conjugate() * xi) + (1.0 - (xi * xi.conjugate()) ** 2) * r) / q**2
    return np.array([z.real, z.imag, x3.real])


def line_to_point(line: OrientedLine, r: float) -> np.ndarray:
    """Point at signed distance ``r`` from the foot of the perpendicular from 0."""
    p = _north_point(complex(line.xi), complex(line.eta), float(r))
    return p * _FLIP if line.chart == "south" else p


def point_to_line(point, xi: complex, chart: str = "north") -> tuple[complex, float]:
    """Fibre coordinate ``eta`` and signed distance ``r`` of ``point`` on the
    line with direction ``xi`` through it."""
    x = np.asarray(point, dtype=float)
    if chart == "south":
        x = x * _FLIP
    xi = complex(xi)
    a = complex(x[0], x[1])
    eta = 0.5 * (a - 2.0 * x[2] * xi - a.conjugate() * xi**2)
    r = (a * xi.conjugate() + a.conjugate() * xi + x[2] * (1.0 - abs(xi) ** 2)) / (1.0 + abs(xi) ** 2)
    return eta, float(r.real)


def perp_distance(line: OrientedLine) -> float:
    """Distance from the origin, ``2|eta| / (1 + |xi|^2)``."""
    return 2.0 * abs(line.eta) / (1.0 + abs(line.xi) ** 2)


# ---------------------------------------------------------------------------
# Fields of lines
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SupportField:
    """Support function sampled at the grid directions (outward normals)."""

    field: ScalarField

    @property
    def grid(self) -> SphereGrid:
        return self.field.grid

    @property
    def values(self) -> np.ndarray:
        return self.field.values

    @classmethod
    def from_values(cls, grid: SphereGrid, values) -> SupportField:
        return cls(ScalarField(grid, values))


@dataclass(frozen=True, eq=False)
class SectionField:
    """North-chart section ``F(xi)`` sampled at the grid directions."""

    field: ComplexField

    @property
    def grid(self) -> SphereGrid:
        return self.field.grid

    @property
    def values(self) -> np.ndarray:
        return self.field.values

    @classmethod
    def from_values(cls, grid: SphereGrid, values) -> SectionField:
        return cls(ComplexField(grid, values))


class SlopeFields(NamedTuple):
    sigma: ComplexField
    rho: ScalarField
    lam: ScalarField


class Radii(NamedTuple):
    major: ScalarField
    minor: ScalarField
    convex: bool


def section_from_support(r: SupportField) -> SectionField:
    """Normal-line section ``F = (1 + |xi|^2)^2 dbar(r) / 2``."""
    grid = r.grid
    return SectionField(ComplexField(grid, 0.5 * grid.conformal**2 * dbar(r.field).values))


def section_from_potential(r: SupportField, s: ScalarField | None = None) -> SectionField:
    """Section of the complex potential ``r + i s``; ``s`` makes it non-Lagrangian."""
    if s is None:
        return section_from_support(r)
    grid = r.grid
    u = ComplexField(grid, r.values + 1j * s.values)
    return SectionField(ComplexField(grid, 0.5 * grid.conformal**2 * dbar(u).values))


def holomorphic_section(c: CenterPoint, grid: SphereGrid) -> SectionField:
    """Lines through ``c``: ``F = (alpha - 2 b xi - conj(alpha) xi^2) / 2``."""
    xi = grid.xi
    a = complex(c.alpha)
    return SectionField(ComplexField(grid, 0.5 * (a - 2.0 * c.b * xi - a.conjugate() * xi**2)))


def section_spin1(F: SectionField) -> HarmonicSpectrum:
    """Spin-1 spectrum of ``exp(-i phi) cos^2(theta/2) F``."""
    grid = F.grid
    g = np.exp(-1j * grid.phi) * np.cos(grid.theta / 2.0) ** 2 * F.values
    return sht_forward(ComplexField(grid, g), spin=1)


def slopes(F: SectionField) -> SlopeFields:
    """Complex slopes: ``dbar F = -conj(sigma)`` and
    ``(1+|xi|^2)^2 partial(F / (1+|xi|^2)^2) = rho + i lambda``."""
    grid = F.grid
    g = section_spin1(F)
    rl = sht_inverse(ethbar(g), grid).values * -1.0
    dbar_f = -np.exp(2j * grid.phi) * sht_inverse(eth(g), grid).values
    return SlopeFields(
        sigma=ComplexField(grid, -np.conj(dbar_f)),
        rho=ScalarField(grid, rl.real),
        lam=ScalarField(grid, rl.imag),
    )


def radii_of_curvature(r: SupportField, s: SlopeFields) -> Radii:
    """Principal radii ``(r + rho) +- |sigma|`` with the larger one first."""
    mean = r.values + s.rho.values
    half_gap = np.abs(s.sigma.values)
    major, minor = mean + half_gap, mean - half_gap
    return Radii(ScalarField(r.grid, major), ScalarField(r.grid, minor), bool(np.all(minor > 0.0)))


# ---------------------------------------------------------------------------
# Translations
# ---------------------------------------------------------------------------


@singledispatch
def translate(obj, c: CenterPoint):
    """Apply the translation taking the origin to ``c``."""
    raise TypeError(f"cannot translate {type(obj).__name__}")


@translate.register
def _(obj: SupportField, c: CenterPoint) -> SupportField:
    xi = obj.grid.xi
    a = complex(c.alpha)
    shift = (a * np.conj(xi) + a.conjugate() * xi + c.b * (1.0 - np.abs(xi) ** 2)) / (1.0 + np.abs(xi) ** 2)
    return SupportField.from_values(obj.grid, obj.values + shift.real)


@translate.register
def _(obj: SectionField, c: CenterPoint) -> SectionField:
    shift = holomorphic_section(c, obj.grid).values
    return SectionField.from_values(obj.grid, obj.values + shift)


@translate.register
def _(obj: OrientedLine, c: CenterPoint) -> OrientedLine:
    a, b = complex(c.alpha), c.b
    if obj.chart == "south":
        # the south chart sees the translation conjugated by the chart flip
        a, b = a.conjugate(), -b
    xi = complex(obj.xi)
    return OrientedLine(obj.chart, xi, obj.eta + 0.5 * (a - 2.0 * b * xi - a.conjugate() * xi**2))


# ---------------------------------------------------------------------------
# Presets and surface reconstruction
# ---------------------------------------------------------------------------


def sphere_support(grid: SphereGrid, center=(0.0, 0.0, 0.0), radius: float = 1.0) -> SupportField:
    """Support function ``c . n + R`` of a round sphere."""
    c = np.asarray(center, dtype=float)
    return SupportField.from_values(grid, np.tensordot(c, grid.normals, axes=1) + radius)


def ellipsoid_support(grid: SphereGrid, axes=(1.0, 1.0, 1.2), l_max: int | None = None) -> SupportField:
    """Band-limited projection of the support function of an axis-aligned ellipsoid.

    The exact support ``sqrt(sum a_i^2 n_i^2)`` is sampled on a doubled grid
    and truncated to degree ``l_max`` (default: the grid band limit).
    """
    L = grid.l_max if l_max is None else l_max
    fine = make_grid(2 * L)
    a = np.asarray(axes, dtype=float)
    exact = np.sqrt(np.einsum("i,ijk->jk", a**2, fine.normals**2))
    spec = sht_forward(ScalarField(fine, exact), l_max=L)
    return SupportField(sht_inverse(spec, grid))


@dataclass(frozen=True, eq=False)
class Mesh:
    vertices: np.ndarray
    faces: np.ndarray
    convex: bool = True


def _grid_faces(n_theta: int, n_phi: int) -> np.ndarray:
    idx = np.arange(n_theta * n_phi).reshape(n_theta, n_phi)
    nxt = np.roll(idx, -1, axis=1)
    a, b = idx[:-1], idx[1:]
    c, d = nxt[:-1], nxt[1:]
    quads = np.concatenate(
        [np.stack([a, b, c], -1).reshape(-1, 3), np.stack([b, d, c], -1).reshape(-1, 3)]
    )
    north, south = n_theta * n_phi, n_theta * n_phi + 1
    top = np.stack([np.full(n_phi, north), idx[0], nxt[0]], -1)
    bottom = np.stack([np.full(n_phi, south), nxt[-1], idx[-1]], -1)
    return np.concatenate([quads, top, bottom])


def _pole_point(r_spec: HarmonicSpectrum, g_spec: HarmonicSpectrum, theta: float) -> np.ndarray:
    # surface point r n + grad r, with grad r = Re(2 conj(G) (e_theta + i e_phi)) at phi = 0
    r0 = evaluate(r_spec, theta, 0.0)[0].real
    g0 = evaluate(g_spec, theta, 0.0)[0]
    ct = np.cos(theta)
    e_theta = np.array([ct, 0.0, -np.sin(theta)])
    e_phi = np.array([0.0, 1.0, 0.0])
    grad = (2.0 * np.conj(g0) * (e_theta + 1j * e_phi)).real
    return r0 * np.array([0.0, 0.0, np.sign(ct)]) + grad


def reconstruct_surface(r: SupportField) -> Mesh:
    """Triangle mesh of the surface with support function ``r``.

    One vertex per grid node on the normal line ``(xi, F(xi))`` at signed
    distance ``r``, plus one apex per pole. Faces are counter-clockwise seen
    from outside.
    """
    grid = r.grid
    F = section_from_support(r)
    xi, eta = grid.xi, F.values
    q = grid.conformal
    z = (2.0 * (eta - np.conj(eta) * xi**2) + 2.0 * xi * q * r.values) / q**2
    x3 = (-2.0 * (eta * np.conj(xi) + np.conj(eta) * xi) + (1.0 - np.abs(xi) ** 4) * r.values) / q**2
    body = np.stack([z.real, z.imag, x3.real], -1).reshape(-1, 3)

    r_spec = sht_forward(r.field)
    g_spec = section_spin1(F)
    apexes = np.stack([_pole_point(r_spec, g_spec, 0.0), _pole_point(r_spec, g_spec, np.pi)])
    convex = radii_of_curvature(r, slopes(F)).convex
    return Mesh(np.concatenate([body, apexes]), _grid_faces(grid.n_theta, grid.n_phi), convex)


def write_obj(mesh: Mesh, path) -> Path:
    """Write ``v``/``f`` records with 17 significant digits."""
    path = Path(path)
    lines = [f"v {x:.17g} {y:.17g} {z:.17g}" for x, y, z in mesh.vertices]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.faces]
    path.write_text("\n".join(lines) + "\n")
    return path
