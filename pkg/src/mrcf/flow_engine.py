"""Exact spectral evolution of mean radius of curvature flow.

The support function obeys ``(d/dt - Lap) r = 2 r``, which is diagonal in
spherical harmonics: degree ``l`` scales by ``exp((2 - l(l+1)) t)``. The
normal-line section is always derived from the evolved potential(s); the
first-order section, slope and distance equations are only checked, by
finite differences in time, through :func:`pde_residual`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import NamedTuple

import numpy as np
from scipy.optimize import minimize

from .line_space import (
    CenterPoint,
    SectionField,
    SupportField,
    holomorphic_section,
    section_from_potential,
    section_from_support,
    section_spin1,
    slopes,
)
from .sphere_harmonics import (
    ComplexField,
    HarmonicSpectrum,
    ScalarField,
    SphereGrid,
    eth,
    ethbar,
    evaluate,
    laplacian,
    make_grid,
    sht_forward,
    sht_inverse,
    spherical_area,
    spin_derivatives,
)

__all__ = [
    "FlowState",
    "FlowReport",
    "Dichotomy",
    "DichotomyResult",
    "CenterRouteError",
    "RESIDUAL_KINDS",
    "evolve_scalar",
    "evolve_support",
    "evolve_lambda",
    "section_at",
    "extract_center",
    "center_routes",
    "rescaled_limit_radius",
    "area_dichotomy",
    "pde_residual",
    "sup_norm",
    "section_norms",
    "fit_exponent",
    "convergence_report",
    "lambda_sign_comparison",
]

SUPPORT_REACTION = 2.0
RESIDUAL_KINDS = (
    "support", "chi2", "section_A", "section_B", "rho",
    "lambda_minus", "lambda_plus", "sigma",
)


# sup|lambda| below this is round-off; no decay rate is fitted to it
LAMBDA_NOISE_FLOOR = 1e-11


class CenterRouteError(RuntimeError):
    """The quadrature and spectral centre estimates disagree."""


@dataclass(frozen=True, eq=False)
class FlowState:
    """Spectral state at flow time ``t``.

    ``s_spec`` is the imaginary potential of a non-Lagrangian section, which
    evolves with reaction coefficient ``lambda_coeff``.
    """

    t: float
    r_spec: HarmonicSpectrum
    s_spec: HarmonicSpectrum
    l_max: int
    lambda_coeff: float = -2.0

    def __post_init__(self):
        for name in ("r_spec", "s_spec"):
            spec = getattr(self, name)
            if spec.spin != 0:
                raise ValueError(f"{name} must be spin 0")
            scale = max(1.0, float(np.max(np.abs(spec.coeffs), initial=0.0)))
            if spec.reality_error() > 1e-12 * scale:
                raise ValueError(f"{name} violates the reality condition")
        object.__setattr__(self, "r_spec", _real(self.r_spec.with_l_max(self.l_max)))
        object.__setattr__(self, "s_spec", _real(self.s_spec.with_l_max(self.l_max)))

    @classmethod
    def from_fields(cls, r0: SupportField, s0: ScalarField | None = None,
                    lambda_coeff: float = -2.0) -> FlowState:
        L = r0.grid.l_max
        r_spec = sht_forward(r0.field)
        s_spec = sht_forward(s0) if s0 is not None else HarmonicSpectrum.zeros(L, real=True)
        return cls(0.0, r_spec, s_spec, L, lambda_coeff)

    @property
    def lagrangian(self) -> bool:
        return not np.any(self.s_spec.coeffs)


def _real(spec: HarmonicSpectrum) -> HarmonicSpectrum:
    return HarmonicSpectrum(spec.coeffs, spec.spin, True)


# ---------------------------------------------------------------------------
# Evolution
# ---------------------------------------------------------------------------


def evolve_scalar(spec0: HarmonicSpectrum, c: float, t: float) -> HarmonicSpectrum:
    """Solve ``(d/dt - Lap) f = c f`` for time ``t`` mode by mode."""
    ell = spec0.degrees()
    return spec0.scaled(np.exp((c - ell * (ell + 1.0)) * t))


def _advance(state: FlowState, duration: float) -> FlowState:
    return replace(
        state,
        t=state.t + duration,
        r_spec=evolve_scalar(state.r_spec, SUPPORT_REACTION, duration),
        s_spec=evolve_scalar(state.s_spec, state.lambda_coeff, duration),
    )


def evolve_support(state: FlowState, t: float) -> FlowState:
    """Advance ``state`` to absolute flow time ``t >= state.t``."""
    if t < state.t:
        raise ValueError(f"cannot evolve backwards from t={state.t} to t={t}")
    return _advance(state, t - state.t)


def evolve_lambda(lambda0: HarmonicSpectrum, t: float, coeff: float = -2.0) -> HarmonicSpectrum:
    """Solve ``(d/dt - Lap) lambda = coeff * lambda``."""
    if t < 0:
        raise ValueError("t must be non-negative")
    return evolve_scalar(lambda0, coeff, t)


def section_at(state: FlowState, grid: SphereGrid | None = None) -> SectionField:
    """Section ``F_t = (1+|xi|^2)^2 dbar(r_t + i s_t) / 2`` on ``grid``."""
    grid = make_grid(state.l_max) if grid is None else grid
    r = SupportField(sht_inverse(state.r_spec, grid))
    if state.lagrangian:
        return section_from_support(r)
    return section_from_potential(r, sht_inverse(state.s_spec, grid))


# ---------------------------------------------------------------------------
# Centre and limits
# ---------------------------------------------------------------------------


def _center_by_quadrature(r: SupportField) -> CenterPoint:
    grid = r.grid
    w = grid.area_weights * r.values
    n = grid.normals
    k = 3.0 / (4.0 * np.pi)
    alpha = k * np.sum(w * (n[0] + 1j * n[1]))
    b = k * np.sum(w * n[2])
    return CenterPoint(complex(alpha), float(b))


def _center_from_rho(rho_spec: HarmonicSpectrum) -> CenterPoint:
    # on l = 1, rho = -(c . n); invert the orthonormal expansion of c . n
    alpha = math.sqrt(3.0 / (2.0 * np.pi)) * np.conj(rho_spec[1, 1])
    b = -math.sqrt(3.0 / (4.0 * np.pi)) * rho_spec[1, 0].real
    return CenterPoint(complex(alpha), float(b))


def center_routes(r: SupportField) -> tuple[CenterPoint, CenterPoint]:
    """The centre by first-moment quadrature and from the degree-1 modes of ``rho``."""
    rho = slopes(section_from_support(r)).rho
    return _center_by_quadrature(r), _center_from_rho(sht_forward(rho, l_max=1))


def extract_center(r: SupportField, tol: float = 1e-8) -> CenterPoint:
    """Limit centre of the normal lines, from the first-moment integrals of ``r``.

    The same point is recomputed from the degree-1 modes of ``rho``; a
    disagreement beyond ``tol`` (relative to ``max(1, sup|r|)``) raises
    :class:`CenterRouteError`.
    """
    quad, spectral = center_routes(r)
    gap = float(np.max(np.abs(quad.xyz - spectral.xyz)))
    scale = max(1.0, float(np.max(np.abs(r.values))))
    if gap > tol * scale:
        raise CenterRouteError(f"centre routes disagree by {gap:.3e}")
    return quad


def rescaled_limit_radius(r0: SupportField) -> float:
    """Mean of ``r0`` over the sphere: radius of the limit of ``r e^{-2t}``."""
    return spherical_area(r0.field) / (4.0 * np.pi)


class Dichotomy(str, Enum):
    CONVERGES = "Converges"
    BLOWS_UP = "BlowsUp"


class DichotomyResult(NamedTuple):
    outcome: Dichotomy
    constant: float | None = None
    onset: float | None = None


def area_dichotomy(f0: ScalarField, tol: float | None = None) -> DichotomyResult:
    """Classify the flow ``(d/dt - Lap) f = 2 f`` by the spherical area of ``f0``.

    For a blow-up returns ``C`` and ``t0`` with ``|f_t| >= C e^t`` for all
    ``t >= t0``: every ``l >= 1`` mode is non-growing and bounded by
    ``K = sum |B_lm| sqrt((2l+1)/4pi)``, so ``|f_t| >= |mean| e^{2t} - K``.
    """
    area = spherical_area(f0)
    scale = float(np.max(np.abs(f0.values)))
    tol = 1e-10 * scale * 4.0 * np.pi if tol is None else tol
    if abs(area) <= tol:
        return DichotomyResult(Dichotomy.CONVERGES)
    spec = sht_forward(f0)
    ell = spec.degrees()
    bound = np.sqrt((2 * ell + 1) / (4.0 * np.pi))[:, None] * np.abs(spec.coeffs)
    K = float(np.sum(bound[1:]))
    mean = abs(area) / (4.0 * np.pi)
    t0 = max(0.0, 0.5 * math.log(2.0 * K / mean)) if K > 0 else 0.0
    C = mean * math.exp(t0) - K * math.exp(-t0)
    return DichotomyResult(Dichotomy.BLOWS_UP, C, t0)


# ---------------------------------------------------------------------------
# Norms
# ---------------------------------------------------------------------------


def sup_norm(spec: HarmonicSpectrum, oversample: int = 4, refine: bool = True) -> float:
    """Sup of ``|f|`` over the sphere: dense sampling then local maximisation."""
    L = max(spec.l_max, 2)
    grid = make_grid(oversample * L)
    vals = np.abs(sht_inverse(spec.with_l_max(L), grid).values)
    best = float(vals.max())
    if not refine:
        return best
    flat = np.argsort(vals, axis=None)[-4:]
    for j, k in zip(*np.unravel_index(flat, vals.shape)):
        x0 = [grid.theta_nodes[j], grid.phi_nodes[k]]
        res = minimize(lambda p: -abs(evaluate(spec, p[0], p[1])[0]), x0,
                       method="Nelder-Mead", options={"xatol": 1e-11, "fatol": 1e-15})
        best = max(best, -float(res.fun))
    return best


def _spin1_norms(g: HarmonicSpectrum, grid: SphereGrid) -> tuple[float, float]:
    def sup(spec):
        return float(np.max(np.abs(sht_inverse(spec, grid).values)))

    c0 = 2.0 * sup(g)
    first = [eth(g), ethbar(g)]
    second = [op(f) for f in first for op in (eth, ethbar)]
    c2 = max([c0] + [2.0 * sup(s) for s in first + second])
    return c0, c2


def section_norms(F: SectionField, F_ref: SectionField) -> tuple[float, float]:
    """C0 and C2-proxy norms of ``F - F_ref``.

    Pointwise size is the fibre length ``2|F - F_ref| / (1 + |xi|^2)``; the
    C2 proxy adds the first and second eth-derivatives of the difference.
    """
    diff = SectionField.from_values(F.grid, F.values - F_ref.values)
    return _spin1_norms(section_spin1(diff), F.grid)


def fit_exponent(times, values) -> float | None:
    """Least-squares slope of ``log(values)`` against ``times``."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    ok = v > 0
    if ok.sum() < 2:
        return None
    return float(np.polyfit(t[ok], np.log(v[ok]), 1)[0])


# ---------------------------------------------------------------------------
# Residuals
# ---------------------------------------------------------------------------


@dataclass
class _Snapshot:
    """Fields derived from a state on one grid."""

    state: FlowState
    grid: SphereGrid
    r: np.ndarray = field(init=False)
    F: SectionField = field(init=False)
    sigma: np.ndarray = field(init=False)
    rho: np.ndarray = field(init=False)
    lam: np.ndarray = field(init=False)

    def __post_init__(self):
        self.r = sht_inverse(self.state.r_spec, self.grid).values
        self.F = section_at(self.state, self.grid)
        s = slopes(self.F)
        self.sigma, self.rho, self.lam = s.sigma.values, s.rho.values, s.lam.values

    @property
    def chi2(self) -> np.ndarray:
        return 4.0 * np.abs(self.F.values) ** 2 / self.grid.conformal**2


def _lap(values: np.ndarray, grid: SphereGrid) -> np.ndarray:
    return sht_inverse(laplacian(sht_forward(ScalarField(grid, values))), grid).values


def _coordinate_laplacian(d, grid: SphereGrid) -> np.ndarray:
    th = grid.theta
    return d.f_tt + d.f_t / np.tan(th) + d.f_pp / np.sin(th) ** 2


def _section_derivatives(F: SectionField):
    """``Lap F`` and ``dbar F`` of the coordinate function F."""
    grid = F.grid
    g = section_spin1(F)
    d = spin_derivatives(g, grid)
    th, ph = grid.theta, grid.phi
    # F = e^{i phi} w(theta) G with w = 1 / cos^2(theta/2)
    w = 2.0 / (1.0 + np.cos(th))
    w1 = 2.0 * np.sin(th) / (1.0 + np.cos(th)) ** 2
    w2 = 2.0 * np.cos(th) / (1.0 + np.cos(th)) ** 2 + 4.0 * np.sin(th) ** 2 / (1.0 + np.cos(th)) ** 3
    e = np.exp(1j * ph)
    F_t = e * (w1 * d.f + w * d.f_t)
    F_tt = e * (w2 * d.f + 2.0 * w1 * d.f_t + w * d.f_tt)
    F_pp = e * w * (-d.f + 2j * d.f_p + d.f_pp)
    lap = F_tt + F_t / np.tan(th) + F_pp / np.sin(th) ** 2
    dbar_f = -np.exp(2j * ph) * sht_inverse(eth(g), grid).values
    return lap, dbar_f


def _sigma_terms(sigma: np.ndarray, grid: SphereGrid):
    """``Lap sigma`` and ``d_phi sigma`` from the spin -2 function e^{2 i phi} sigma."""
    th, ph = grid.theta, grid.phi
    tau = sht_forward(ComplexField(grid, np.exp(2j * ph) * sigma), spin=-2)
    d = spin_derivatives(tau, grid)
    e = np.exp(-2j * ph)
    s_t, s_tt = e * d.f_t, e * d.f_tt
    s_p = e * (d.f_p - 2j * d.f)
    s_pp = e * (d.f_pp - 4j * d.f_p - 4.0 * d.f)
    lap = s_tt + s_t / np.tan(th) + s_pp / np.sin(th) ** 2
    return lap, s_p


def pde_residual(which: str, state: FlowState, t: float, dt: float = 1e-4,
                 grid: SphereGrid | None = None) -> float:
    """Max-norm residual of one evolution equation at time ``t``.

    ``d/dt`` is a centred difference of exactly evolved states; spatial terms
    are spectral on a grid with twice the band limit. Section residuals are
    measured in fibre length ``2|.|/(1+|xi|^2)``.
    """
    if which not in RESIDUAL_KINDS:
        raise ValueError(f"unknown residual {which!r}; expected one of {RESIDUAL_KINDS}")
    grid = make_grid(2 * state.l_max) if grid is None else grid
    snaps = [_Snapshot(_advance(state, t + k * dt - state.t), grid) for k in (-1, 0, 1)]
    lo, mid, hi = snaps

    def ddt(name):
        return (getattr(hi, name) - getattr(lo, name)) / (2.0 * dt)

    if which == "support":
        res = ddt("r") - _lap(mid.r, grid) - 2.0 * mid.r
    elif which == "rho":
        res = ddt("rho") - _lap(mid.rho, grid) - 2.0 * mid.rho
    elif which in ("lambda_minus", "lambda_plus"):
        k = -2.0 if which == "lambda_minus" else 2.0
        res = ddt("lam") - _lap(mid.lam, grid) - k * mid.lam
    elif which == "chi2":
        rhs = 2.0 * mid.chi2 - 4.0 * (mid.rho**2 + np.abs(mid.sigma) ** 2)
        res = ddt("chi2") - _lap(mid.chi2, grid) - rhs
    elif which == "sigma":
        q = grid.conformal
        lap, s_p = _sigma_terms(mid.sigma, grid)
        # (1+|xi|^2)(conj(xi) dbar - xi partial) sigma reduces to i (1+|xi|^2) d_phi sigma
        rhs = -2.0 * (1.0 + 2.0 * np.abs(grid.xi) ** 2) * mid.sigma + 2j * q * s_p
        res = ddt("sigma") - lap - rhs
    else:
        q = grid.conformal
        dF = (hi.F.values - lo.F.values) / (2.0 * dt)
        lap, dbar_f = _section_derivatives(mid.F)
        coeff = q if which == "section_B" else 1.0 / q
        rhs = -2.0 * np.conj(grid.xi) * coeff * dbar_f
        res = 2.0 * (dF - lap - rhs) / q
    return float(np.max(np.abs(res)))


# ---------------------------------------------------------------------------
# Report
# ---------------------------------------------------------------------------


@dataclass
class FlowReport:
    times: list[float]
    area: list[float]
    sup_lambda: list[float]
    centers: list[CenterPoint]
    c0: list[float]
    c2: list[float]
    center0: CenterPoint
    limit_radius: float
    decay_exponent: float | None
    c2_exponent: float | None
    lambda_exponent: float | None
    residuals: dict[str, float]
    residual_time: float
    section_variant: str
    lambda_comparison: dict
    convex: list[bool]

    def rows(self) -> list[dict[str, float]]:
        out = []
        for i, t in enumerate(self.times):
            x = self.centers[i].xyz
            out.append({
                "t": t, "area": self.area[i], "sup_lambda": self.sup_lambda[i],
                "x1": x[0], "x2": x[1], "x3": x[2], "c0": self.c0[i], "c2": self.c2[i],
            })
        return out

    def to_dict(self) -> dict:
        return {
            "rows": self.rows(),
            "center0": list(self.center0.xyz),
            "limit_radius": self.limit_radius,
            "decay_exponent": self.decay_exponent,
            "c2_exponent": self.c2_exponent,
            "lambda_exponent": self.lambda_exponent,
            "residual_time": self.residual_time,
            "residuals": dict(self.residuals),
            "section_variant": self.section_variant,
            "lambda_comparison": self.lambda_comparison,
            "convex": list(self.convex),
        }


def _section_verdict(res_a: float, res_b: float, ok: float = 1e-5, bad: float = 1e-2) -> str:
    if res_a <= ok < bad < res_b:
        return "A"
    if res_b <= ok < bad < res_a:
        return "B"
    return "undetermined"


def _probe_potential(l_max: int) -> HarmonicSpectrum:
    # fixed non-Lagrangian test potential with l = 1 and l = 2 content
    entries = [(1, 0, 0.2), (2, 0, 0.1), (2, 1, 0.05 + 0.03j), (2, -1, -0.05 + 0.03j)]
    return HarmonicSpectrum.from_entries(l_max, entries, real=True)


def lambda_sign_comparison(state: FlowState, t: float) -> dict:
    """Evolve ``s`` with either sign and test each against the section flow.

    Lagrangian states carry no information about the sign, so a fixed
    non-Lagrangian potential is substituted for them. ``consistent`` names
    the coefficient whose λ evolution keeps the section equation satisfied.
    """
    base = state
    if state.lagrangian:
        base = replace(state, s_spec=_probe_potential(state.l_max))
    out: dict = {"probe_potential": state.lagrangian}
    hits = []
    for coeff in (-2.0, 2.0):
        alt = replace(base, lambda_coeff=coeff)
        key = f"{coeff:+g}"
        out[key] = {k: pde_residual(k, alt, t) for k in ("section_B", "lambda_minus", "lambda_plus")}
        if out[key]["section_B"] <= 1e-5:
            hits.append(key)
    out["consistent"] = hits[0] if len(hits) == 1 else "neither" if not hits else "both"
    return out


def convergence_report(r0: SupportField, s0: ScalarField | None, times,
                       lambda_coeff: float = -2.0, fit_from: float = 0.5,
                       residual_time: float | None = None) -> FlowReport:
    """Track the flow of ``r0`` (and imaginary potential ``s0``) at ``times``.

    The limit section is fixed from ``t = 0`` data only, as the lines
    through :func:`extract_center` of ``r0``.
    """
    from .line_space import radii_of_curvature

    times = [float(t) for t in times]
    if not times or any(b <= a for a, b in zip(times, times[1:])) or times[0] < 0:
        raise ValueError("times must be non-empty, ascending and non-negative")
    grid = r0.grid
    state0 = FlowState.from_fields(r0, s0, lambda_coeff)
    center0 = extract_center(r0)
    F_inf = holomorphic_section(center0, grid)

    area, sup_lam, centers, c0, c2, convex = [], [], [], [], [], []
    for t in times:
        st = evolve_support(state0, t)
        r_t = SupportField(sht_inverse(st.r_spec, grid))
        F_t = section_at(st, grid)
        sl = slopes(F_t)
        area.append(spherical_area(r_t.field))
        sup_lam.append(float(np.max(np.abs(sl.lam.values))))
        centers.append(extract_center(r_t))
        a, b = section_norms(F_t, F_inf)
        c0.append(a)
        c2.append(b)
        convex.append(radii_of_curvature(r_t, sl).convex)

    t_res = times[0] if residual_time is None else residual_time
    residuals = {k: pde_residual(k, state0, t_res) for k in RESIDUAL_KINDS}
    lagr = replace(state0, s_spec=HarmonicSpectrum.zeros(state0.l_max, real=True))
    variant = _section_verdict(pde_residual("section_A", lagr, t_res),
                               pde_residual("section_B", lagr, t_res))
    comparison = lambda_sign_comparison(state0, t_res)

    fit = [i for i, t in enumerate(times) if t >= fit_from]
    tt = [times[i] for i in fit]
    return FlowReport(
        times=times, area=area, sup_lambda=sup_lam, centers=centers, c0=c0, c2=c2,
        center0=center0, limit_radius=rescaled_limit_radius(r0),
        decay_exponent=fit_exponent(tt, [c0[i] for i in fit]),
        c2_exponent=fit_exponent(tt, [c2[i] for i in fit]),
        lambda_exponent=(fit_exponent(tt, [sup_lam[i] for i in fit])
                         if max(sup_lam) > LAMBDA_NOISE_FLOOR else None),
        residuals=residuals, residual_time=t_res, section_variant=variant,
        lambda_comparison=comparison, convex=convex,
    )
