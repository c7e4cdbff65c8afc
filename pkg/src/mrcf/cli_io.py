"""Scenario files, batch runs, and CSV/JSON/OBJ output.

Command line::

    mrcf run --config scenario.json [--out-dir DIR]
    mrcf center --config scenario.json
    mrcf verify --lmax N [--variant A|B|minus|plus]
    mrcf export --config scenario.json --time T --out surface.obj

Exit status is 0 on success, 2 for invalid input and 3 when the engine
raises a flag (non-convex state, centre routes disagreeing, failed check).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from dataclasses import dataclass, field, replace
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Mapping, NamedTuple, Sequence

import jsonschema
import numpy as np

from . import oracle
from .flow_engine import (
    CenterRouteError,
    FlowReport,
    FlowState,
    convergence_report,
    evolve_support,
    extract_center,
    lambda_sign_comparison,
    pde_residual,
)
from .line_space import (
    CenterPoint,
    SupportField,
    ellipsoid_support,
    reconstruct_surface,
    sphere_support,
    write_obj,
)
from .sphere_harmonics import (
    HarmonicSpectrum,
    ScalarField,
    SphereGrid,
    laplacian,
    make_grid,
    sht_forward,
    sht_inverse,
    synthesize,
)

__all__ = [
    "CSV_COLUMNS",
    "DEFAULT_L_MAX",
    "Entry",
    "NonConvexError",
    "RunRecord",
    "Scenario",
    "ScenarioError",
    "parse_scenario",
    "load_scenario",
    "run",
    "center",
    "export_surface",
    "verify",
    "write_csv",
    "write_json",
    "main",
]

DEFAULT_L_MAX = 32
CSV_COLUMNS = ("t", "area", "sup_lambda", "x1", "x2", "x3", "c0", "c2")
LAMBDA_VARIANTS = {"minus": -2.0, "plus": 2.0}
REALITY_TOL = 1e-12

EXIT_OK, EXIT_INVALID, EXIT_FLAG = 0, 2, 3


class ScenarioError(ValueError):
    """Malformed or inconsistent scenario input."""


class NonConvexError(RuntimeError):
    """A sampled state has a non-positive principal radius.

    ``record`` holds the completed :class:`RunRecord` when raised by :func:`run`.
    """

    def __init__(self, message: str, record=None):
        super().__init__(message)
        self.record = record


class Entry(NamedTuple):
    l: int
    m: int
    re: float
    im: float = 0.0

    def as_dict(self) -> dict:
        return {"l": self.l, "m": self.m, "re": self.re, "im": self.im}


@lru_cache(maxsize=1)
def _validator() -> jsonschema.Draft202012Validator:
    text = resources.files("mrcf").joinpath("scenario.schema.json").read_text()
    return jsonschema.Draft202012Validator(json.loads(text))


def _entries(raw) -> tuple[Entry, ...]:
    return tuple(Entry(int(e["l"]), int(e["m"]), float(e["re"]), float(e.get("im", 0.0))) for e in raw)


def _spectrum(entries: Sequence[Entry], l_max: int, where: str) -> HarmonicSpectrum:
    seen = set()
    for e in entries:
        if abs(e.m) > e.l:
            raise ScenarioError(f"{where}: |m| > l in entry (l={e.l}, m={e.m})")
        if e.l > l_max:
            raise ScenarioError(f"{where}: degree l={e.l} exceeds l_max={l_max}")
        if (e.l, e.m) in seen:
            raise ScenarioError(f"{where}: duplicate entry (l={e.l}, m={e.m})")
        seen.add((e.l, e.m))
    spec = HarmonicSpectrum.from_entries(l_max, [(e.l, e.m, complex(e.re, e.im)) for e in entries])
    for e in entries:
        partner = (-1) ** e.m * spec[e.l, -e.m]
        if abs(np.conj(spec[e.l, e.m]) - partner) > REALITY_TOL:
            raise ScenarioError(
                f"{where}: entry (l={e.l}, m={e.m}) violates the reality condition "
                f"conj(B[l,m]) = (-1)^m B[l,-m]"
            )
    return HarmonicSpectrum(spec.coeffs, 0, real=True)


@dataclass(frozen=True)
class Scenario:
    """Validated run description; ``support`` is kept in canonical JSON form."""

    support: Mapping
    times: tuple[float, ...]
    l_max: int = DEFAULT_L_MAX
    potential: tuple[Entry, ...] | None = None
    lambda_variant: str = "minus"
    outputs: Mapping = field(default_factory=dict)

    @property
    def lambda_coeff(self) -> float:
        return LAMBDA_VARIANTS[self.lambda_variant]

    def to_dict(self) -> dict:
        out = {"l_max": self.l_max, "times": list(self.times),
               "support": json.loads(json.dumps(self.support)),
               "lambda_variant": self.lambda_variant}
        if self.potential is not None:
            out["potential"] = [e.as_dict() for e in self.potential]
        if self.outputs:
            out["outputs"] = dict(self.outputs)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @property
    def digest(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()

    def grid(self) -> SphereGrid:
        return make_grid(self.l_max)

    def support_field(self, grid: SphereGrid | None = None) -> SupportField:
        grid = self.grid() if grid is None else grid
        sup = self.support
        if "spectrum" in sup:
            spec = _spectrum(_entries(sup["spectrum"]), self.l_max, "support/spectrum")
            return SupportField(sht_inverse(spec, grid))
        if sup["preset"] == "sphere":
            base = sphere_support(grid, sup["center"], sup["radius"])
        else:
            base = ellipsoid_support(grid, tuple(sup["axes"]), self.l_max)
        if sup.get("perturbation"):
            spec = _spectrum(_entries(sup["perturbation"]), self.l_max, "support/perturbation")
            base = SupportField.from_values(grid, base.values + sht_inverse(spec, grid).values)
        return base

    def potential_field(self, grid: SphereGrid | None = None) -> ScalarField | None:
        if self.potential is None:
            return None
        grid = self.grid() if grid is None else grid
        return sht_inverse(_spectrum(self.potential, self.l_max, "potential"), grid)


def _canonical_support(raw: Mapping) -> dict:
    if "spectrum" in raw:
        return {"spectrum": [e.as_dict() for e in _entries(raw["spectrum"])]}
    out: dict = {"preset": raw["preset"]}
    if raw["preset"] == "sphere":
        out["center"] = [float(x) for x in raw.get("center", (0.0, 0.0, 0.0))]
        out["radius"] = float(raw.get("radius", 1.0))
    else:
        out["axes"] = [float(x) for x in raw["axes"]]
    if "perturbation" in raw:
        out["perturbation"] = [e.as_dict() for e in _entries(raw["perturbation"])]
    return out


def _default_l_max() -> int:
    env = os.environ.get("MRCF_LMAX")
    if env is None:
        return DEFAULT_L_MAX
    try:
        value = int(env)
    except ValueError:
        raise ScenarioError(f"MRCF_LMAX={env!r} is not an integer") from None
    if value < 2:
        raise ScenarioError(f"MRCF_LMAX={value} must be at least 2")
    return value


_DISCRIMINATORS = ("preset", "spectrum")


def _discriminator_failed(err: jsonschema.ValidationError) -> bool:
    if err.validator == "const":
        return True
    if err.validator == "required" and not err.path:
        missing = [k for k in err.validator_value if k not in err.instance]
        return any(k in _DISCRIMINATORS for k in missing)
    return False


def _explain(err: jsonschema.ValidationError) -> jsonschema.ValidationError:
    """Descend into the ``oneOf`` branch whose discriminator matched."""
    while err.validator == "oneOf" and err.context:
        branches: dict = {}
        for sub in err.context:
            branches.setdefault(sub.relative_schema_path[0], []).append(sub)
        chosen = [subs for subs in branches.values() if not any(map(_discriminator_failed, subs))]
        if len(chosen) != 1:
            break
        err = jsonschema.exceptions.best_match(chosen[0])
    return err


def parse_scenario(text: str) -> Scenario:
    """Validate a JSON scenario document.

    ``l_max`` falls back to ``$MRCF_LMAX`` and then to :data:`DEFAULT_L_MAX`.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    errors = list(_validator().iter_errors(doc))
    if errors:
        err = jsonschema.exceptions.best_match(_explain(e) for e in errors)
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ScenarioError(f"{where}: {err.message}")

    times = tuple(float(t) for t in doc["times"])
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ScenarioError("times: sample times must be strictly ascending")
    l_max = int(doc["l_max"]) if "l_max" in doc else _default_l_max()
    potential = _entries(doc["potential"]) if "potential" in doc else None
    scenario = Scenario(
        support=_canonical_support(doc["support"]),
        times=times,
        l_max=l_max,
        potential=potential,
        lambda_variant=doc.get("lambda_variant", "minus"),
        outputs=dict(doc.get("outputs", {})),
    )
    # surface reality and degree errors now rather than mid-run
    sup = scenario.support
    for key in ("spectrum", "perturbation"):
        if key in sup:
            _spectrum(_entries(sup[key]), l_max, f"support/{key}")
    if potential is not None:
        _spectrum(potential, l_max, "potential")
    return scenario


def load_scenario(path) -> Scenario:
    return parse_scenario(Path(path).read_text())


# ---------------------------------------------------------------------------
# Runs
# ---------------------------------------------------------------------------


def _finite(x):
    if isinstance(x, dict):
        return {k: _finite(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_finite(v) for v in x]
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.bool_):
        return bool(x)
    return x


@dataclass
class RunRecord:
    digest: str
    rows: list[dict[str, float]]
    residuals: dict[str, float]
    exponents: dict[str, float | None]
    report: FlowReport

    def to_dict(self) -> dict:
        rep = self.report
        return _finite({
            "digest": self.digest,
            "columns": list(CSV_COLUMNS),
            "rows": self.rows,
            "center0": list(rep.center0.xyz),
            "limit_radius": rep.limit_radius,
            "exponents": self.exponents,
            "residual_time": rep.residual_time,
            "residuals": self.residuals,
            "section_variant": rep.section_variant,
            "lambda_comparison": rep.lambda_comparison,
            "convex": rep.convex,
        })


def write_csv(record: RunRecord, path) -> Path:
    """Fixed columns :data:`CSV_COLUMNS`, 17 significant digits."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(CSV_COLUMNS)
        out.writerows([f"{row[c]:.17g}" for c in CSV_COLUMNS] for row in record.rows)
    return path


def write_json(record: RunRecord, path, scenario: Scenario | None = None) -> Path:
    path = Path(path)
    doc = record.to_dict()
    if scenario is not None:
        doc["scenario"] = scenario.to_dict()
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n")
    return path


def run(scenario: Scenario, out_dir=None) -> RunRecord:
    """Evolve the scenario and write the selected outputs.

    Output paths in ``scenario.outputs`` are resolved against ``out_dir``
    (default: the working directory). Non-convexity does not stop the
    flow: outputs are written first, then :class:`NonConvexError` is raised
    so callers see the flag.
    """
    grid = scenario.grid()
    report = convergence_report(scenario.support_field(grid), scenario.potential_field(grid),
                                scenario.times, lambda_coeff=scenario.lambda_coeff)
    record = RunRecord(
        digest=scenario.digest,
        rows=report.rows(),
        residuals=dict(report.residuals),
        exponents={"c0": report.decay_exponent, "c2": report.c2_exponent,
                   "sup_lambda": report.lambda_exponent},
        report=report,
    )
    base = Path.cwd() if out_dir is None else Path(out_dir)
    if "csv" in scenario.outputs:
        write_csv(record, base / scenario.outputs["csv"])
    if "json" in scenario.outputs:
        write_json(record, base / scenario.outputs["json"], scenario)
    bad = [t for t, ok in zip(report.times, report.convex) if not ok]
    if bad:
        raise NonConvexError(f"state is not convex at t = {bad}", record)
    return record


def center(scenario: Scenario) -> CenterPoint:
    return extract_center(scenario.support_field())


def export_surface(scenario: Scenario, t: float, path) -> Path:
    """Write the surface at time ``t`` as an OBJ mesh."""
    if t < 0:
        raise ScenarioError("export time must be non-negative")
    grid = scenario.grid()
    state = FlowState.from_fields(scenario.support_field(grid), scenario.potential_field(grid),
                                  scenario.lambda_coeff)
    r_t = SupportField(sht_inverse(evolve_support(state, t).r_spec, grid))
    mesh = reconstruct_surface(r_t)
    if not mesh.convex:
        raise NonConvexError(f"state is not convex at t = {t}")
    return write_obj(mesh, path)


# ---------------------------------------------------------------------------
# Verification battery
# ---------------------------------------------------------------------------

_SECTION_OK = 1e-5


def _verify_support(grid: SphereGrid) -> SupportField:
    th, ph = grid.theta, grid.phi
    values = (1.0 + 0.3 * np.sin(th) * np.cos(ph) + 0.1 * (3 * np.cos(th) ** 2 - 1)
              + 0.05 * np.sin(th) ** 3 * np.cos(3 * ph))
    return SupportField.from_values(grid, values)


def _oracle_checks(r0: SupportField) -> dict:
    spec = sht_forward(r0.field)
    fine = oracle.LatLongGrid(200, 400)

    def sampled(th, ph):
        return synthesize(spec, th[:, 0], th.shape[1]).real

    quad = oracle.quad_center(sampled, fine)
    spectral = extract_center(r0)
    lap_err = []
    for n in (32, 64):
        g = oracle.LatLongGrid(n, 2 * n)
        f = synthesize(spec, g.theta_nodes, g.n_phi).real
        exact = synthesize(laplacian(spec), g.theta_nodes, g.n_phi).real
        err = oracle.fd_laplacian(f) - exact
        # area-weighted L2; pole rows cap the max-norm order near 1.4
        lap_err.append(float(np.sqrt(g.integrate(err**2))))
    order = math.log2(lap_err[0] / lap_err[1])
    return {
        "center_gap": float(np.max(np.abs(np.subtract(quad.xyz, spectral.xyz)))),
        "fd_laplacian_errors": lap_err,
        "fd_laplacian_order": order,
    }


def verify(l_max: int, variant: str | None = None, t: float = 0.5) -> dict:
    """Residual and oracle battery on fixed l <= 3 test data.

    With ``variant`` only one check runs: ``A``/``B`` test the two section
    equations on Lagrangian data, ``minus``/``plus`` test whether the section
    flow survives evolving λ with coefficient -2 or +2.
    """
    if l_max < 3:
        raise ScenarioError("verify needs l_max >= 3")
    grid = make_grid(l_max)
    r0 = _verify_support(grid)
    state = FlowState.from_fields(r0)
    if variant is not None:
        if variant in ("A", "B"):
            res = pde_residual(f"section_{variant}", state, t)
        elif variant in LAMBDA_VARIANTS:
            cmp = lambda_sign_comparison(state, t)
            res = cmp[f"{LAMBDA_VARIANTS[variant]:+g}"]["section_B"]
        else:
            raise ScenarioError(f"unknown variant {variant!r}")
        return {"l_max": l_max, "t": t, "variant": variant, "residual": res,
                "tolerance": _SECTION_OK, "passed": bool(res <= _SECTION_OK)}

    residuals = {k: pde_residual(k, state, t) for k in
                 ("support", "rho", "chi2", "sigma", "section_A", "section_B")}
    cmp = lambda_sign_comparison(state, t)
    checks = _oracle_checks(r0)
    passed = (all(residuals[k] <= 1e-6 for k in ("support", "rho", "chi2"))
              and residuals["section_B"] <= _SECTION_OK
              and checks["center_gap"] <= 1e-6 and checks["fd_laplacian_order"] >= 1.9)
    return _finite({"l_max": l_max, "t": t, "residuals": residuals,
                    "lambda_comparison": cmp, "oracle": checks, "passed": bool(passed)})


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mrcf", description="Spectral MRCF simulator.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="evolve a scenario and write CSV/JSON")
    r.add_argument("--config", required=True)
    r.add_argument("--out-dir", default=None, help="directory for outputs (default: next to config)")

    c = sub.add_parser("center", help="print the centre extracted from t = 0 data")
    c.add_argument("--config", required=True)

    v = sub.add_parser("verify", help="run the residual and oracle battery")
    v.add_argument("--lmax", type=int, required=True)
    v.add_argument("--variant", choices=("A", "B", "minus", "plus"))

    e = sub.add_parser("export", help="write the surface at time T as OBJ")
    e.add_argument("--config", required=True)
    e.add_argument("--time", type=float, required=True)
    e.add_argument("--out", required=True)
    return p


def _dump(doc) -> None:
    sys.stdout.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def main(argv: Sequence[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "verify":
            result = verify(args.lmax, args.variant)
            _dump(result)
            return EXIT_OK if result["passed"] else EXIT_FLAG

        config = Path(args.config)
        scenario = load_scenario(config)
        if args.command == "run":
            if not scenario.outputs:
                scenario = replace(scenario, outputs={"csv": config.stem + ".csv",
                                                      "json": config.stem + ".json"})
            out_dir = config.parent if args.out_dir is None else Path(args.out_dir)
            out_dir.mkdir(parents=True, exist_ok=True)
            record = run(scenario, out_dir)
            _dump({"digest": record.digest, "rows": len(record.rows),
                   "outputs": {k: str(out_dir / v) for k, v in scenario.outputs.items()}})
        elif args.command == "center":
            _dump(dict(zip(("x1", "x2", "x3"), center(scenario).xyz)))
        else:
            _dump({"obj": str(export_surface(scenario, args.time, args.out))})
    except (ScenarioError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (NonConvexError, CenterRouteError) as exc:
        print(f"engine flag: {exc}", file=sys.stderr)
        return EXIT_FLAG
    return EXIT_OK
