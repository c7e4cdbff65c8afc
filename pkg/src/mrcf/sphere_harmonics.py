"""Spherical-harmonic analysis and synthesis on a Gauss-Legendre grid.

Conventions
-----------
* Colatitude ``theta`` in (0, pi), longitude ``phi`` in [0, 2 pi).
* Complex orthonormal harmonics with the Condon-Shortley phase, so that a
  real field has ``conj(B[l, m]) == (-1)**m * B[l, -m]``.
* Spin-weighted harmonics follow the Newman-Penrose/Goldberg ladder

      eth    sY_lm =  sqrt((l - s)(l + s + 1)) (s+1)Y_lm
      ethbar sY_lm = -sqrt((l + s)(l - s + 1)) (s-1)Y_lm

  with ``eth f = -sin^s (d_theta + i/sin d_phi) (sin^-s f)``.
* The stereographic chart is ``xi = tan(theta/2) exp(i phi)``; in it
  ``dbar f = -exp(i phi) cos^2(theta/2) eth f`` and
  ``partial f = -exp(-i phi) cos^2(theta/2) ethbar f`` for spin-0 ``f``.

Transforms are direct quadrature (FFT in longitude, Gauss-Legendre sums in
colatitude). Sums use ``np.einsum`` without BLAS dispatch so the result does
not depend on the thread count.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple

import numpy as np
from scipy.special import gammaln, roots_legendre

__all__ = [
    "SphereGrid",
    "ScalarField",
    "ComplexField",
    "HarmonicSpectrum",
    "SpinDerivatives",
    "make_grid",
    "assoc_legendre",
    "spin_basis",
    "sht_forward",
    "sht_inverse",
    "synthesize",
    "evaluate",
    "laplacian",
    "eth",
    "ethbar",
    "dbar",
    "partial",
    "spin_derivatives",
    "spherical_area",
    "ylm_field",
]


# ---------------------------------------------------------------------------
# Grid
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SphereGrid:
    """Gauss-Legendre colatitudes times uniform longitudes.

    ``gl_weights`` integrate over ``cos(theta)`` in [-1, 1]; multiplied by
    ``2 pi / n_phi`` they give the steradian weight of each node.
    """

    l_max: int
    n_theta: int
    n_phi: int
    theta_nodes: np.ndarray
    gl_weights: np.ndarray
    _basis_cache: dict = field(default_factory=dict, repr=False)

    @cached_property
    def phi_nodes(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.n_phi) / self.n_phi

    @cached_property
    def theta(self) -> np.ndarray:
        """Colatitude of each node, shape ``(n_theta, n_phi)``."""
        return np.broadcast_to(self.theta_nodes[:, None], self.shape)

    @cached_property
    def phi(self) -> np.ndarray:
        return np.broadcast_to(self.phi_nodes[None, :], self.shape)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_theta, self.n_phi)

    @cached_property
    def xi(self) -> np.ndarray:
        """North-chart stereographic coordinate at each node."""
        return np.tan(self.theta / 2.0) * np.exp(1j * self.phi)

    @cached_property
    def conformal(self) -> np.ndarray:
        """``1 + |xi|^2 = 1 / cos^2(theta/2)`` at each node."""
        return 1.0 / np.cos(self.theta / 2.0) ** 2

    @cached_property
    def area_weights(self) -> np.ndarray:
        return np.broadcast_to(
            (self.gl_weights * (2.0 * np.pi / self.n_phi))[:, None], self.shape
        )

    @cached_property
    def normals(self) -> np.ndarray:
        """Unit direction ``n(xi)`` at each node, shape ``(3, n_theta, n_phi)``."""
        st, ct = np.sin(self.theta), np.cos(self.theta)
        return np.stack([st * np.cos(self.phi), st * np.sin(self.phi), ct])

    def basis(self, spin: int, l_max: int) -> np.ndarray:
        key = (spin, l_max)
        if key not in self._basis_cache:
            self._basis_cache[key] = spin_basis(l_max, spin, self.theta_nodes)
        return self._basis_cache[key]


def make_grid(l_max: int, n_theta: int | None = None, n_phi: int | None = None) -> SphereGrid:
    """Build the quadrature grid for band limit ``l_max``.

    Defaults to ``l_max + 1`` colatitudes and ``2 l_max + 2`` longitudes, the
    smallest sizes for which analysis of degree ``<= l_max`` is exact.
    """
    if l_max < 2:
        raise ValueError(f"l_max must be >= 2, got {l_max}")
    n_theta = l_max + 1 if n_theta is None else n_theta
    n_phi = 2 * l_max + 2 if n_phi is None else n_phi
    if n_theta < l_max + 1 or n_phi < 2 * l_max + 1:
        raise ValueError(
            f"grid {n_theta}x{n_phi} cannot resolve band limit {l_max}"
        )
    x, w = roots_legendre(n_theta)
    # north to south
    theta = np.arccos(x[::-1])
    return SphereGrid(l_max, n_theta, n_phi, theta, w[::-1].copy())


# ---------------------------------------------------------------------------
# Basis functions
# ---------------------------------------------------------------------------


def assoc_legendre(l_max: int, theta: np.ndarray) -> np.ndarray:
    """Orthonormal associated Legendre functions ``Pbar[l, m]`` for m >= 0.

    ``Y_lm(theta, phi) = Pbar[l, m](theta) exp(i m phi)`` including the
    Condon-Shortley phase. Returns shape ``(l_max + 1, l_max + 1, n)``.
    Standard three-term recurrence in ``l`` seeded from the sectoral terms.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    x, y = np.cos(theta), np.sin(theta)
    p = np.zeros((l_max + 1, l_max + 1, theta.size))
    p[0, 0] = 1.0 / np.sqrt(4.0 * np.pi)
    for m in range(1, l_max + 1):
        p[m, m] = -np.sqrt((2 * m + 1) / (2.0 * m)) * y * p[m - 1, m - 1]
    for m in range(0, l_max):
        p[m + 1, m] = np.sqrt(2 * m + 3.0) * x * p[m, m]
        for l in range(m + 2, l_max + 1):
            a = np.sqrt((4.0 * l * l - 1) / (l * l - m * m))
            b = np.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1) ** 2 - 1))
            p[l, m] = a * (x * p[l - 1, m] - b * p[l - 2, m])
    return p


def _wigner_d_column(l_max: int, mp: int, m: int, theta: np.ndarray) -> np.ndarray:
    """Wigner small-d ``d^l_{mp, m}(theta)`` for ``l = 0..l_max``."""
    out = np.zeros((l_max + 1, theta.size))
    l0 = max(abs(mp), abs(m))
    if l0 > l_max:
        return out
    ks = [l0 + m, l0 - m, l0 + mp, l0 - mp]
    if ks.index(min(ks)) in (0, 3):
        a, sign = mp - m, (-1) ** ((mp - m) % 2)
    else:
        a, sign = m - mp, 1
    b = 2 * l0 - a
    lognorm = 0.5 * (gammaln(2 * l0 + 1) - gammaln(a + 1) - gammaln(b + 1))
    with np.errstate(under="ignore"):
        out[l0] = (
            sign * np.exp(lognorm)
            * np.sin(theta / 2.0) ** a * np.cos(theta / 2.0) ** b
        )
    c = np.cos(theta)
    for l in range(l0, l_max):
        if l == 0:
            out[1] = c * out[0]
            continue
        lhs = l * np.sqrt(((l + 1.0) ** 2 - m * m) * ((l + 1.0) ** 2 - mp * mp))
        nxt = (2 * l + 1) * (l * (l + 1) * c - m * mp) * out[l]
        if l > l0:
            nxt -= (l + 1) * np.sqrt((l * l - m * m) * (l * l - mp * mp * 1.0)) * out[l - 1]
        out[l + 1] = nxt / lhs
    return out


def spin_basis(l_max: int, spin: int, theta: np.ndarray) -> np.ndarray:
    """Colatitude part of ``sY_lm``: array ``[m + l_max, l, j]``.

    Entries with ``l < max(|m|, |spin|)`` are zero. Spin 0 uses the Legendre
    recurrence; other spins use the Wigner-d recurrence.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    out = np.zeros((2 * l_max + 1, l_max + 1, theta.size))
    ell = np.arange(l_max + 1)[:, None]
    if spin == 0:
        p = assoc_legendre(l_max, theta)
        for m in range(l_max + 1):
            out[l_max + m] = p[:, m]
            if m:
                out[l_max - m] = (-1) ** m * p[:, m]
        return out
    norm = (-1) ** (spin % 2) * np.sqrt((2 * ell + 1) / (4.0 * np.pi))
    for m in range(-l_max, l_max + 1):
        out[l_max + m] = norm * _wigner_d_column(l_max, m, -spin, theta)
    return out


# ---------------------------------------------------------------------------
# Fields and spectra
# ---------------------------------------------------------------------------


def _check_values(grid: SphereGrid, values: np.ndarray) -> None:
    if values.shape != grid.shape:
        raise ValueError(f"field shape {values.shape} does not match grid {grid.shape}")
    if not np.all(np.isfinite(values)):
        raise ValueError("field contains non-finite values")


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: SphereGrid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        _check_values(self.grid, self.values)


@dataclass(frozen=True, eq=False)
class ComplexField:
    grid: SphereGrid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=complex))
        _check_values(self.grid, self.values)


@dataclass(frozen=True, eq=False)
class HarmonicSpectrum:
    """Coefficients ``coeffs[l, m + l_max]`` of a spin-weighted expansion."""

    coeffs: np.ndarray
    spin: int = 0
    real: bool = False

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.ndim != 2 or c.shape[1] != 2 * c.shape[0] - 1:
            raise ValueError(f"bad coefficient array shape {c.shape}")
        object.__setattr__(self, "coeffs", c)

    @property
    def l_max(self) -> int:
        return self.coeffs.shape[0] - 1

    @classmethod
    def zeros(cls, l_max: int, spin: int = 0, real: bool = False) -> HarmonicSpectrum:
        return cls(np.zeros((l_max + 1, 2 * l_max + 1), complex), spin, real)

    @classmethod
    def from_entries(cls, l_max: int, entries, real: bool = False) -> HarmonicSpectrum:
        """Build a spin-0 spectrum from ``(l, m, value)`` triples."""
        c = np.zeros((l_max + 1, 2 * l_max + 1), complex)
        for l, m, v in entries:
            if not (0 <= l <= l_max and abs(m) <= l):
                raise ValueError(f"invalid degree/order (l={l}, m={m})")
            c[l, m + l_max] += v
        return cls(c, 0, real)

    def __getitem__(self, lm: tuple[int, int]) -> complex:
        l, m = lm
        return self.coeffs[l, m + self.l_max]

    def degrees(self) -> np.ndarray:
        return np.arange(self.l_max + 1)

    def scaled(self, factors: np.ndarray) -> HarmonicSpectrum:
        """Multiply each degree ``l`` by ``factors[l]``."""
        return HarmonicSpectrum(self.coeffs * np.asarray(factors)[:, None], self.spin, self.real)

    def with_l_max(self, l_max: int) -> HarmonicSpectrum:
        out = np.zeros((l_max + 1, 2 * l_max + 1), complex)
        k = min(l_max, self.l_max)
        out[: k + 1, l_max - k: l_max + k + 1] = self.coeffs[: k + 1, self.l_max - k: self.l_max + k + 1]
        return HarmonicSpectrum(out, self.spin, self.real)

    def band(self, lo: int, hi: int | None = None) -> HarmonicSpectrum:
        """Keep only degrees ``lo <= l <= hi``."""
        hi = self.l_max if hi is None else hi
        mask = (self.degrees() >= lo) & (self.degrees() <= hi)
        return self.scaled(mask.astype(float))

    def reality_error(self) -> float:
        """Max of ``|conj(B[l, m]) - (-1)^m B[l, -m]|`` (spin 0 only)."""
        L = self.l_max
        m = np.arange(-L, L + 1)
        mirrored = self.coeffs[:, ::-1] * ((-1.0) ** np.abs(m))[None, :]
        return float(np.max(np.abs(np.conj(self.coeffs) - mirrored), initial=0.0))

    def _combine(self, other, op) -> HarmonicSpectrum:
        if self.spin != other.spin:
            raise ValueError("cannot combine spectra of different spin")
        L = max(self.l_max, other.l_max)
        a, b = self.with_l_max(L), other.with_l_max(L)
        return HarmonicSpectrum(op(a.coeffs, b.coeffs), self.spin, self.real and other.real)

    def __add__(self, other):
        return self._combine(other, np.add)

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __mul__(self, k):
        k = complex(k)
        return HarmonicSpectrum(self.coeffs * k, self.spin, self.real and k.imag == 0)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def norm(self) -> float:
        """L2 norm of the represented function."""
        return float(np.sqrt(np.sum(np.abs(self.coeffs) ** 2)))


# ---------------------------------------------------------------------------
# Transforms
# ---------------------------------------------------------------------------


def _m_index(l_max: int, n_phi: int) -> np.ndarray:
    return np.arange(-l_max, l_max + 1) % n_phi


def sht_forward(field: ScalarField | ComplexField, l_max: int | None = None,
                spin: int = 0) -> HarmonicSpectrum:
    """Analyse grid samples into spin-``spin`` harmonic coefficients."""
    grid = field.grid
    L = grid.l_max if l_max is None else l_max
    if L > grid.l_max:
        raise ValueError(f"requested band limit {L} exceeds grid band limit {grid.l_max}")
    rows = np.fft.fft(field.values, axis=1) * (2.0 * np.pi / grid.n_phi)
    rows = rows[:, _m_index(L, grid.n_phi)]  # (j, m)
    basis = grid.basis(spin, L)  # (m, l, j)
    coeffs = np.einsum("mlj,j,jm->lm", basis, grid.gl_weights, rows)
    real = isinstance(field, ScalarField) and spin == 0
    return HarmonicSpectrum(coeffs, spin, real)


def _synthesize_rows(spec: HarmonicSpectrum, basis: np.ndarray, n_phi: int) -> np.ndarray:
    L = spec.l_max
    if n_phi < 2 * L + 1:
        raise ValueError(f"{n_phi} longitudes cannot represent band limit {L}")
    modes = np.einsum("lm,mlj->jm", spec.coeffs, basis)
    rows = np.zeros((basis.shape[2], n_phi), complex)
    rows[:, _m_index(L, n_phi)] = modes
    return np.fft.ifft(rows, axis=1) * n_phi


def sht_inverse(spec: HarmonicSpectrum, grid: SphereGrid) -> ScalarField | ComplexField:
    """Pointwise synthesis of ``spec`` on ``grid``."""
    if spec.l_max > grid.l_max:
        raise ValueError(
            f"spectrum band limit {spec.l_max} exceeds grid band limit {grid.l_max}"
        )
    values = _synthesize_rows(spec, grid.basis(spec.spin, spec.l_max), grid.n_phi)
    if spec.real:
        return ScalarField(grid, values.real)
    return ComplexField(grid, values)


def synthesize(spec: HarmonicSpectrum, theta: np.ndarray, n_phi: int) -> np.ndarray:
    """Synthesis on arbitrary colatitudes and ``n_phi`` uniform longitudes."""
    basis = spin_basis(spec.l_max, spec.spin, theta)
    return _synthesize_rows(spec, basis, n_phi)


def evaluate(spec: HarmonicSpectrum, theta, phi) -> np.ndarray:
    """Evaluate ``spec`` at scattered points (direct summation)."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    L = spec.l_max
    basis = spin_basis(L, spec.spin, theta)  # (m, l, j)
    m = np.arange(-L, L + 1)
    radial = np.einsum("lm,mlj->jm", spec.coeffs, basis)
    return np.einsum("jm,jm->j", radial, np.exp(1j * np.outer(phi, m)))


def ylm_field(grid: SphereGrid, l: int, m: int) -> ComplexField:
    """Samples of the orthonormal harmonic ``Y_l^m``."""
    spec = HarmonicSpectrum.from_entries(l, [(l, m, 1.0)])
    return sht_inverse(spec, grid)


# ---------------------------------------------------------------------------
# Differential operators
# ---------------------------------------------------------------------------


def laplacian(spec: HarmonicSpectrum) -> HarmonicSpectrum:
    """Spherical Laplacian; multiplies degree ``l`` by ``-l(l+1)``."""
    if spec.spin != 0:
        raise ValueError("laplacian is defined here for spin-0 spectra")
    ell = spec.degrees()
    return spec.scaled(-ell * (ell + 1.0))


def eth(spec: HarmonicSpectrum) -> HarmonicSpectrum:
    """Spin-raising operator; ``s -> s + 1``."""
    s, ell = spec.spin, spec.degrees()
    fac = np.sqrt(np.clip((ell - s) * (ell + s + 1.0), 0.0, None))
    out = spec.scaled(fac)
    return HarmonicSpectrum(out.coeffs, s + 1, False)


def ethbar(spec: HarmonicSpectrum) -> HarmonicSpectrum:
    """Spin-lowering operator; ``s -> s - 1``."""
    s, ell = spec.spin, spec.degrees()
    fac = -np.sqrt(np.clip((ell + s) * (ell - s + 1.0), 0.0, None))
    out = spec.scaled(fac)
    return HarmonicSpectrum(out.coeffs, s - 1, False)


def _spin0_spectrum(field) -> HarmonicSpectrum:
    return sht_forward(field, spin=0)


def dbar(field: ScalarField | ComplexField) -> ComplexField:
    """``d/d conj(xi)`` of a smooth band-limited function, north chart.

    The result has band limit ``l_max + 2``; compose operators on a grid
    with that much headroom.
    """
    grid = field.grid
    g = sht_inverse(eth(_spin0_spectrum(field)), grid).values
    half_cos2 = np.cos(grid.theta / 2.0) ** 2
    return ComplexField(grid, -np.exp(1j * grid.phi) * half_cos2 * g)


def partial(field: ScalarField | ComplexField) -> ComplexField:
    """``d/d xi`` of a smooth band-limited function, north chart."""
    grid = field.grid
    g = sht_inverse(ethbar(_spin0_spectrum(field)), grid).values
    half_cos2 = np.cos(grid.theta / 2.0) ** 2
    return ComplexField(grid, -np.exp(-1j * grid.phi) * half_cos2 * g)


class SpinDerivatives(NamedTuple):
    """Samples of a spin-weighted function and its coordinate derivatives."""

    f: np.ndarray
    f_t: np.ndarray
    f_p: np.ndarray
    f_tt: np.ndarray
    f_tp: np.ndarray
    f_pp: np.ndarray


def _phi_derivative(spec: HarmonicSpectrum) -> HarmonicSpectrum:
    L = spec.l_max
    m = np.arange(-L, L + 1)
    return HarmonicSpectrum(spec.coeffs * (1j * m)[None, :], spec.spin, False)


def _theta_parts(spec: HarmonicSpectrum) -> list[HarmonicSpectrum]:
    # d_theta = -(eth + ethbar) / 2, valid for every spin weight
    return [eth(spec) * -0.5, ethbar(spec) * -0.5]


def spin_derivatives(spec: HarmonicSpectrum, grid: SphereGrid) -> SpinDerivatives:
    """Coordinate derivatives in ``(theta, phi)`` up to second order."""

    def synth(parts):
        return sum(sht_inverse(p, grid).values.astype(complex) for p in parts)

    t_parts = _theta_parts(spec)
    tt_parts = [q for p in t_parts for q in _theta_parts(p)]
    sp = _phi_derivative(spec)
    return SpinDerivatives(
        f=synth([HarmonicSpectrum(spec.coeffs, spec.spin, False)]),
        f_t=synth(t_parts),
        f_p=synth([sp]),
        f_tt=synth(tt_parts),
        f_tp=synth([_phi_derivative(p) for p in t_parts]),
        f_pp=synth([_phi_derivative(sp)]),
    )


def spherical_area(field: ScalarField | ComplexField) -> float:
    """Integral of ``field`` over the unit sphere."""
    total = np.einsum("jk,jk->", field.grid.area_weights, field.values)
    return float(total.real) if isinstance(field, ScalarField) else total
