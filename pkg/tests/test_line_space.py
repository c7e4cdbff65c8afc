import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from helpers import random_spectrum, y20
from mrcf import line_space as ls
from mrcf import sphere_harmonics as sh


def fibre(F, grid):
    """Section magnitude as a length: 2|F| / (1 + |xi|^2)."""
    return 2 * np.abs(F) / grid.conformal


def support_of(spec, grid):
    return ls.SupportField(sh.sht_inverse(spec, grid))


# single lines -------------------------------------------------------------

def test_line_to_point_examples():
    on = ls.OrientedLine.from_north
    assert np.allclose(ls.line_to_point(on(0, 0), 5), [0, 0, 5], atol=1e-15)
    assert np.allclose(ls.line_to_point(on(0, 0.5), 1), [1, 0, 1], atol=1e-15)
    assert np.allclose(ls.line_to_point(on(1, 0), 0), [0, 0, 0], atol=1e-15)


def test_point_to_line_examples():
    eta, r = ls.point_to_line([0, 0, 5], 0)
    assert eta == 0 and r == pytest.approx(5)
    eta, r = ls.point_to_line([1, 0, 0], 0)
    assert eta == pytest.approx(0.5) and abs(r) < 1e-15


def test_point_line_round_trip(rng):
    for _ in range(100):
        p = rng.normal(size=3) * 3
        xi = complex(*rng.normal(size=2))
        eta, r = ls.point_to_line(p, xi)
        assert np.max(np.abs(ls.line_to_point(ls.OrientedLine.from_north(xi, eta), r) - p)) < 1e-12


def test_point_lies_on_line(rng):
    p = rng.normal(size=3)
    xi = 0.4 - 0.7j
    eta, r = ls.point_to_line(p, xi)
    line = ls.OrientedLine.from_north(xi, eta)
    foot = ls.line_to_point(line, 0)
    n = line.direction()
    assert abs(np.dot(foot, n)) < 1e-13
    assert np.allclose(foot + r * n, p, atol=1e-13)


def test_perp_distance_examples():
    assert ls.perp_distance(ls.OrientedLine.from_north(0, 0)) == 0
    assert ls.perp_distance(ls.OrientedLine.from_north(0, 0.5)) == pytest.approx(1)


def test_perp_distance_brute_force(rng):
    for _ in range(100):
        line = ls.OrientedLine.from_north(complex(*rng.normal(size=2)), complex(*rng.normal(size=2)))
        p0, n = ls.line_to_point(line, 0), line.direction()
        best = minimize_scalar(lambda s: np.sum((p0 + s * n) ** 2), bracket=(-1, 1), tol=1e-12)
        assert ls.perp_distance(line) ** 2 == pytest.approx(best.fun, abs=1e-10)


def test_chart_consistency_near_equator(rng):
    for _ in range(50):
        xi = np.exp(1j * rng.uniform(0, 2 * np.pi)) * (1 + rng.uniform(-1e-3, 1e-3))
        north = ls.OrientedLine("north", xi, complex(*rng.normal(size=2)))
        south = north.to_chart("south")
        assert south.chart == "south"
        assert ls.perp_distance(north) == pytest.approx(ls.perp_distance(south), abs=1e-12)
        assert np.max(np.abs(ls.line_to_point(north, 0.7) - ls.line_to_point(south, 0.7))) < 1e-12
        assert np.allclose(north.direction(), south.direction(), atol=1e-14)


def test_from_north_keeps_xi_bounded():
    line = ls.OrientedLine.from_north(4 + 3j, 1j)
    assert line.chart == "south" and abs(line.xi) <= 1
    with pytest.raises(ValueError):
        ls.OrientedLine("east", 0, 0)


def test_south_chart_pole_line():
    # xi -> infinity is the direction -e3; in the south chart it is zeta = 0
    line = ls.OrientedLine("south", 0, 0.5)
    assert np.allclose(line.direction(), [0, 0, -1])
    assert ls.perp_distance(line) == pytest.approx(1)


def test_direction_vector_examples():
    assert np.allclose(ls.direction_vector(0), [0, 0, 1])
    assert np.allclose(ls.direction_vector(1), [1, 0, 0])
    v = ls.direction_vector(0.3 + 2.1j)
    assert np.linalg.norm(v) == pytest.approx(1, abs=1e-14)


def test_sphere_support_formula():
    g = sh.make_grid(16)
    c, R = np.array([0.2, -0.5, 0.9]), 1.7
    r = ls.sphere_support(g, c, R)
    n = np.stack([np.sin(g.theta) * np.cos(g.phi), np.sin(g.theta) * np.sin(g.phi), np.cos(g.theta)])
    assert np.max(np.abs(r.values - (np.tensordot(c, n, 1) + R))) < 1e-12


# sections -----------------------------------------------------------------

def test_section_of_constant_vanishes():
    g = sh.make_grid(12)
    F = ls.section_from_support(ls.sphere_support(g, radius=3)).values
    assert np.max(fibre(F, g)) < 1e-12


def test_section_of_l1_modes():
    g = sh.make_grid(12)
    xi = g.xi
    r = ls.SupportField.from_values(g, np.sin(g.theta) * np.cos(g.phi))
    F = ls.section_from_support(r).values
    assert np.max(fibre(F - 0.5 * (1 - xi**2), g)) < 1e-12
    hol = ls.holomorphic_section(ls.CenterPoint(1, 0), g).values
    assert np.max(fibre(F - hol, g)) < 1e-12
    r = ls.SupportField.from_values(g, np.cos(g.theta))
    assert np.max(fibre(ls.section_from_support(r).values + xi, g)) < 1e-12


def test_holomorphic_section_examples():
    g = sh.make_grid(8)
    assert not np.any(ls.holomorphic_section(ls.CenterPoint(0, 0), g).values)
    c = ls.CenterPoint(0.5 - 2j, 1.5)
    xi = g.xi
    expected = 0.5 * (c.alpha - 2 * c.b * xi - np.conj(c.alpha) * xi**2)
    assert np.allclose(ls.holomorphic_section(c, g).values, expected)


def test_holomorphic_sections_have_no_slopes(rng):
    g = sh.make_grid(16)
    for _ in range(5):
        x = rng.uniform(-10, 10, size=3) / np.sqrt(3)
        s = ls.slopes(ls.holomorphic_section(ls.CenterPoint.from_xyz(x), g))
        assert np.max(np.abs(s.sigma.values)) < 1e-9
        assert np.max(np.abs(s.lam.values)) < 1e-9


def test_slopes_of_zero_section():
    g = sh.make_grid(8)
    s = ls.slopes(ls.SectionField.from_values(g, np.zeros(g.theta.shape, complex)))
    for f in s:
        assert not np.any(np.abs(f.values) > 1e-15)


def test_slopes_of_translated_sphere():
    g = sh.make_grid(12)
    l1 = np.sin(g.theta) * np.cos(g.phi)
    s = ls.slopes(ls.section_from_support(ls.SupportField.from_values(g, 2 + l1)))
    assert np.max(np.abs(s.sigma.values)) < 1e-12
    assert np.max(np.abs(s.lam.values)) < 1e-12
    assert np.max(np.abs(s.rho.values + l1)) < 1e-11


def test_imaginary_potential_gives_lambda():
    g = sh.make_grid(12)
    cos = np.cos(g.theta)
    F = ls.section_from_support(ls.SupportField.from_values(g, cos))
    s = ls.slopes(ls.SectionField.from_values(g, 1j * F.values))
    assert np.max(np.abs(s.lam.values + cos)) < 1e-12
    assert np.max(np.abs(s.rho.values)) < 1e-12


def test_section_from_potential_matches_two_parts(rng):
    g = sh.make_grid(12)
    r = support_of(random_spectrum(rng, 12), g)
    s = sh.sht_inverse(random_spectrum(rng, 12), g)
    F = ls.section_from_potential(r, s).values
    parts = ls.section_from_support(r).values + 1j * ls.section_from_support(ls.SupportField(s)).values
    assert np.max(fibre(F - parts, g)) < 1e-11


def test_lagrangian_criterion_random_support(rng):
    g = sh.make_grid(24)
    for _ in range(5):
        r = support_of(random_spectrum(rng, 24, amp=2), g)
        assert np.max(np.abs(ls.slopes(ls.section_from_support(r)).lam.values)) < 1e-9


def test_rho_is_half_laplacian(rng):
    g = sh.make_grid(20)
    spec = random_spectrum(rng, 20)
    rho = ls.slopes(ls.section_from_support(support_of(spec, g))).rho.values
    half_lap = 0.5 * sh.sht_inverse(sh.laplacian(spec), g).values
    assert np.max(np.abs(rho - half_lap)) < 1e-8


def test_lambda_is_half_laplacian_of_potential(rng):
    g = sh.make_grid(16)
    s_spec = random_spectrum(rng, 16)
    F = ls.section_from_potential(ls.sphere_support(g), sh.sht_inverse(s_spec, g))
    lam = ls.slopes(F).lam.values
    assert np.max(np.abs(lam - 0.5 * sh.sht_inverse(sh.laplacian(s_spec), g).values)) < 1e-9


def test_spin1_spectrum_reproduces_section(rng):
    g = sh.make_grid(12)
    F = ls.section_from_support(support_of(random_spectrum(rng, 12), g))
    G = sh.sht_inverse(ls.section_spin1(F), g).values
    expected = np.exp(-1j * g.phi) * np.cos(g.theta / 2) ** 2 * F.values
    assert np.max(np.abs(G - expected)) < 1e-10


# radii --------------------------------------------------------------------

def test_radii_of_round_spheres():
    g = sh.make_grid(12)
    for values in (np.full(g.theta.shape, 1.5), 1.5 + np.sin(g.theta) * np.cos(g.phi)):
        r = ls.SupportField.from_values(g, values)
        rad = ls.radii_of_curvature(r, ls.slopes(ls.section_from_support(r)))
        assert np.max(np.abs(rad.major.values - 1.5)) < 1e-11
        assert np.max(np.abs(rad.minor.values - 1.5)) < 1e-11
        assert rad.convex


def test_radii_flag_non_convex():
    g = sh.make_grid(12)
    r = ls.SupportField.from_values(g, 0.2 + y20(g.theta))
    rad = ls.radii_of_curvature(r, ls.slopes(ls.section_from_support(r)))
    assert not rad.convex
    assert np.all(rad.major.values >= rad.minor.values)


def test_radii_sum_matches_support_operator(rng):
    g = sh.make_grid(12)
    spec = random_spectrum(rng, 12, amp=0.1) + sh.HarmonicSpectrum.from_entries(12, [(0, 0, 6.0)], real=True)
    r = support_of(spec, g)
    rad = ls.radii_of_curvature(r, ls.slopes(ls.section_from_support(r)))
    # r1 + r2 = 2r + Lap r
    lap = sh.sht_inverse(sh.laplacian(spec), g).values
    assert np.max(np.abs(rad.major.values + rad.minor.values - (2 * r.values + lap))) < 1e-9


# translation --------------------------------------------------------------

def test_translate_constant_support():
    g = sh.make_grid(8)
    r = ls.translate(ls.sphere_support(g), ls.CenterPoint(1, 0))
    assert np.max(np.abs(r.values - 1 - np.sin(g.theta) * np.cos(g.phi))) < 1e-13


def test_translate_zero_section():
    g = sh.make_grid(8)
    c = ls.CenterPoint(0.3 + 0.1j, -0.8)
    F0 = ls.SectionField.from_values(g, np.zeros(g.theta.shape, complex))
    assert np.allclose(ls.translate(F0, c).values, ls.holomorphic_section(c, g).values, atol=1e-14)


def test_translate_line_moves_points(rng):
    c = ls.CenterPoint(0.4 - 1.2j, 0.7)
    for _ in range(20):
        line = ls.OrientedLine.from_north(complex(*rng.normal(size=2)), complex(*rng.normal(size=2)))
        moved = ls.translate(line, c)
        assert moved.chart == line.chart
        p, q = ls.line_to_point(line, 0.3), ls.line_to_point(moved, 0.3 + np.dot(c.xyz, line.direction()))
        assert np.max(np.abs(q - p - c.xyz)) < 1e-12


def test_translation_invariance_of_slopes(rng):
    g = sh.make_grid(16)
    r = support_of(random_spectrum(rng, 16), g)
    c = ls.CenterPoint(complex(*rng.normal(size=2)), rng.normal())
    a, b = ls.slopes(ls.section_from_support(r)), ls.slopes(ls.section_from_support(ls.translate(r, c)))
    assert np.max(np.abs(a.sigma.values - b.sigma.values)) < 1e-10
    r2 = ls.translate(r, c)
    assert np.max(np.abs((r.values + a.rho.values) - (r2.values + b.rho.values))) < 1e-10


def test_translating_section_matches_translating_support(rng):
    g = sh.make_grid(12)
    r = support_of(random_spectrum(rng, 12), g)
    c = ls.CenterPoint(0.2 + 0.5j, -0.3)
    via_r = ls.section_from_support(ls.translate(r, c)).values
    via_F = ls.translate(ls.section_from_support(r), c).values
    assert np.max(fibre(via_r - via_F, g)) < 1e-11


@settings(max_examples=30, deadline=None)
@given(st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False),
       st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False),
       st.floats(-5, 5))
def test_line_point_round_trip_property(xi, eta, r):
    line = ls.OrientedLine.from_north(xi, eta)
    p = ls.line_to_point(line, r)
    eta2, r2 = ls.point_to_line(p, line.xi, line.chart)
    assert abs(r2 - r) < 1e-10
    assert abs(eta2 - line.eta) < 1e-10


# surfaces -----------------------------------------------------------------

def test_unit_sphere_mesh():
    g = sh.make_grid(16)
    mesh = ls.reconstruct_surface(ls.sphere_support(g))
    assert len(mesh.vertices) == g.n_theta * g.n_phi + 2
    assert np.max(np.abs(np.linalg.norm(mesh.vertices, axis=1) - 1)) < 1e-12


def test_translated_sphere_mesh():
    g = sh.make_grid(16)
    r = ls.SupportField.from_values(g, 1 + np.sin(g.theta) * np.cos(g.phi))
    mesh = ls.reconstruct_surface(r)
    d = np.linalg.norm(mesh.vertices - [1, 0, 0], axis=1)
    assert np.max(np.abs(d - 1)) < 1e-12


def test_ellipsoid_mesh_implicit_equation():
    g = sh.make_grid(48)
    a = np.array([1.0, 1.0, 1.2])
    v = ls.reconstruct_surface(ls.ellipsoid_support(g, tuple(a))).vertices
    assert np.max(np.abs(np.sum((v / a) ** 2, axis=1) - 1)) < 1e-6


def test_mesh_faces_outward_and_closed():
    g = sh.make_grid(12)
    mesh = ls.reconstruct_surface(ls.sphere_support(g, (0.3, 0.1, -0.2), 1.1))
    v, f = mesh.vertices, mesh.faces
    cross = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
    centroid = v[f].mean(axis=1) - [0.3, 0.1, -0.2]
    assert np.all(np.sum(cross * centroid, axis=1) > 0)
    # every edge is shared by exactly two faces
    edges = np.sort(np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]]), axis=1)
    _, counts = np.unique(edges, axis=0, return_counts=True)
    assert np.all(counts == 2)


def test_write_obj(tmp_path):
    g = sh.make_grid(4)
    mesh = ls.reconstruct_surface(ls.sphere_support(g))
    path = ls.write_obj(mesh, tmp_path / "s.obj")
    lines = path.read_text().splitlines()
    assert {ln.split()[0] for ln in lines} == {"v", "f"}
    assert sum(ln.startswith("v ") for ln in lines) == len(mesh.vertices)
