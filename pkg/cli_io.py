"""
Command-line front end: run configuration parsing, command dispatch and artifact writing.

Usage:
    python main.py <command> --config run.ini [--out DIR] [--seed N]

Commands: mesh, solve-static, solve-dynamic, verify-extension, korn, convergence.
"""

import argparse
import logging
import os
import sys
from typing import Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from assembly import MaterialParams, assemble_forms, assemble_micromorphic, validate_params
from dynamic_solver import DynamicRun, InitialData, run_dynamic, step_count
from errors import ConfigError, InvalidSpecError, MicromorphicError
from manufactured import MANUFACTURED_CASES, ManufacturedCase, build_fields
from mesh import BoxSpec, build_box_mesh, first_betti_number
from output_writers import write_csv, write_matrix_market, write_report, write_vtk
from settings import get_settings
from spaces import H1VectorSpace, HcurlSpace, evaluate_hcurl
from static_solver import StaticProblem, solve_static
from verification import (
    SURROGATE_NOTE,
    constant_reports,
    extension_property_suite,
    interpolate_rows,
    l2_error_curl,
    l2_error_h1,
    l2_error_hcurl,
    manufactured_convergence,
    unconstrained_skew_quotient,
)

logger = logging.getLogger(__name__)

COMMANDS = ("mesh", "solve-static", "solve-dynamic", "verify-extension", "korn", "convergence")
INLINE_CASE = "inline"


# --- CONFIGURATION MODEL ---

class _Section(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class SpaceConfig(_Section):
    u_degree: int = Field(1, ge=1, le=2)


class ProblemConfig(_Section):
    case: str = "zero"
    u: Optional[str] = None  # inline: three expressions separated by ';'
    p: Optional[str] = None  # inline: nine expressions, row-major
    boundary: Optional[Literal["case", "coupled", "homogeneous"]] = None
    loads: Literal["case", "zero"] = "case"
    lifting: Literal["direct", "constructive"] = "direct"


class DynamicsConfig(_Section):
    integrator: Literal["implicit-midpoint", "newmark"] = "implicit-midpoint"
    model: Literal["micromorphic", "elastic"] = "micromorphic"
    t_end: float = Field(1.0, gt=0)
    dt: float = Field(0.01, gt=0)
    output_every: int = Field(10, ge=1)
    initial: Literal["case", "zero"] = "case"

    @model_validator(mode="after")
    def _whole_steps(self):
        try:
            step_count(self.t_end, self.dt)
        except InvalidSpecError as exc:
            raise ValueError(str(exc)) from None
        return self


class VerifyConfig(_Section):
    levels: Tuple[int, ...] = (2, 4, 8)
    ensemble_size: int = Field(5, ge=1)

    @field_validator("levels", mode="before")
    @classmethod
    def _split_levels(cls, value):
        if isinstance(value, str):
            return tuple(part.strip() for part in value.split(",") if part.strip())
        return value

    @field_validator("levels")
    @classmethod
    def _positive_levels(cls, value):
        if not value or any(level < 1 for level in value):
            raise ValueError("levels must be a non-empty list of positive integers")
        return value


class OutputConfig(_Section):
    directory: str = "output"
    dump_matrices: bool = False


class RunConfig(_Section):
    command: Literal[COMMANDS] = "mesh"
    seed: int = Field(0, ge=0)
    mesh: BoxSpec = BoxSpec()
    material: MaterialParams = MaterialParams()
    space: SpaceConfig = SpaceConfig()
    problem: ProblemConfig = ProblemConfig()
    dynamics: DynamicsConfig = DynamicsConfig()
    verify: VerifyConfig = VerifyConfig()
    output: OutputConfig = OutputConfig()

    @model_validator(mode="after")
    def _check(self):
        violations = validate_params(self.material)
        if violations:
            raise ValueError("material parameters violate " + "; ".join(violations))
        if self.problem.case == INLINE_CASE:
            if not self.problem.u:
                raise ValueError("inline case needs problem.u")
        elif self.problem.case not in MANUFACTURED_CASES:
            known = ", ".join(sorted(MANUFACTURED_CASES) + [INLINE_CASE])
            raise ValueError(f"unknown case {self.problem.case!r} (known: {known})")
        return self


SECTIONS = {
    "mesh": BoxSpec,
    "material": MaterialParams,
    "space": SpaceConfig,
    "problem": ProblemConfig,
    "dynamics": DynamicsConfig,
    "verify": VerifyConfig,
    "output": OutputConfig,
}
TOP_LEVEL_KEYS = ("command", "seed")


# --- PARSE / SERIALIZE ---

def _strip_comment(line):
    stripped = line.lstrip()
    if stripped.startswith("#"):
        return ""
    position = line.find(" #")
    return line if position < 0 else line[:position]


def parse_config(text):
    """Parse INI-style run configuration text into a validated RunConfig.

    Keys go under [section] headers or are written fully dotted
    (material.mu_e = 2). Unknown or repeated keys are errors.
    """
    raw = {}
    line_of = {}
    section = None
    for lineno, original in enumerate(text.splitlines(), 1):
        line = _strip_comment(original).strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {line!r}", lineno)
            section = line[1:-1].strip()
            if section not in SECTIONS:
                raise ConfigError(f"unknown section [{section}]", lineno)
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        target = section
        if "." in key:
            target, key = key.split(".", 1)
            if target not in SECTIONS:
                raise ConfigError(f"unknown section {target!r}", lineno)
        if target is None:
            if key not in TOP_LEVEL_KEYS:
                raise ConfigError(f"unknown top-level key {key!r}", lineno)
        elif key not in SECTIONS[target].model_fields:
            raise ConfigError(f"unknown key {key!r} in [{target}]", lineno)
        location = (target, key)
        if location in line_of:
            raise ConfigError(f"duplicate key {key!r} (first set on line {line_of[location]})", lineno)
        line_of[location] = lineno
        if target is None:
            raw[key] = value
        else:
            raw.setdefault(target, {})[key] = value
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as exc:
        first = exc.errors()[0]
        loc = tuple(str(part) for part in first["loc"])
        message = first["msg"].removeprefix("Value error, ")
        where = ".".join(loc)
        line = line_of.get((loc[0], loc[1])) if len(loc) >= 2 else line_of.get((None, loc[0])) if loc else None
        raise ConfigError(f"{where}: {message}" if where else message, line) from None


def _serialize_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(str(v) for v in value)
    return str(value)


def serialize_config(config):
    """Canonical text form; parse_config(serialize_config(c)) == c."""
    lines = [f"command = {config.command}", f"seed = {config.seed}"]
    for name in SECTIONS:
        lines.append("")
        lines.append(f"[{name}]")
        section = getattr(config, name)
        for key in type(section).model_fields:
            value = getattr(section, key)
            if value is not None:
                lines.append(f"{key} = {_serialize_value(value)}")
    return "\n".join(lines) + "\n"


def load_config(path):
    try:
        with open(path, "r", encoding="utf-8") as f:
            return parse_config(f.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc


# --- COMMANDS ---

def _case(problem):
    if problem.case != INLINE_CASE:
        return MANUFACTURED_CASES[problem.case]
    u = tuple(part.strip() for part in problem.u.split(";"))
    P = tuple(part.strip() for part in problem.p.split(";")) if problem.p else None
    if len(u) != 3 or (P is not None and len(P) != 9):
        raise ConfigError("inline problem.u needs 3 and problem.p 9 ';'-separated expressions")
    return ManufacturedCase(INLINE_CASE, u, P)


def _elastic_load(case, params):
    """Body force of the classical elastic model for the case displacement (P ≡ 0, no Cosserat term)."""
    elastic_case = ManufacturedCase(case.name, case.u, ("0",) * 9)
    return build_fields(elastic_case, params.model_copy(update={"mu_c": 0.0})).F


def _spaces(config):
    mesh = build_box_mesh(config.mesh)
    return mesh, H1VectorSpace(mesh, config.space.u_degree), HcurlSpace(mesh)


def _solution_vtk(path, mesh, Vu, VP, u, P):
    centroid = np.full((1, 4), 0.25)
    cell_data = {f"P_row{i}": evaluate_hcurl(VP, P[i], centroid)[:, 0, :] for i in range(3)}
    return write_vtk(path, mesh, {"u": Vu.vertex_values(u)}, cell_data)


def _dump_matrices(config, out, params, Vu, VP):
    if not config.output.dump_matrices:
        return []
    K = assemble_micromorphic(params, Vu, VP)
    mass = assemble_forms(Vu, VP).mass
    return [
        write_matrix_market(os.path.join(out, "stiffness.mtx"), K, "micromorphic stiffness"),
        write_matrix_market(os.path.join(out, "mass.mtx"), mass, "block mass"),
    ]


def run_mesh(config, out):
    mesh = build_box_mesh(config.mesh)
    files = [write_vtk(os.path.join(out, "mesh.vtk"), mesh)]
    files.append(
        write_report(
            os.path.join(out, "mesh_report.txt"),
            {
                "vertices": mesh.n_vertices,
                "cells": mesh.n_cells,
                "edges": mesh.n_edges,
                "faces": mesh.n_faces,
                "boundary_faces": len(mesh.boundary_faces),
                "boundary_edges": len(mesh.boundary_edges),
                "volume": float(mesh.cell_volumes.sum()),
                "betti_1": first_betti_number(mesh),
            },
        )
    )
    return files


def run_static(config, out):
    params = config.material
    mesh, Vu, VP = _spaces(config)
    fields = build_fields(_case(config.problem), params)
    if fields.time_dependent:
        raise ConfigError(f"case {fields.case.name!r} is time dependent; use solve-dynamic")
    F, M = fields.static_loads() if config.problem.loads == "case" else (None, None)
    bdata = fields.boundary_data(config.problem.boundary)
    sol = solve_static(StaticProblem(Vu, VP, params, F, M, bdata, config.problem.lifting))
    values = {
        "case": fields.case.name,
        "lifting": config.problem.lifting,
        "free_method": sol.method,
        "iterations": sol.iterations,
        "energy": sol.energy,
        "relative_residual": sol.residual,
        "boundary_error": sol.boundary_error,
    }
    if config.problem.loads == "case":
        values["l2_error_u"] = l2_error_h1(Vu, sol.u, lambda p: fields.u(p, 0.0))
        values["l2_error_P"] = l2_error_hcurl(VP, sol.P, lambda p: fields.P(p, 0.0))
        values["l2_error_curl_P"] = l2_error_curl(VP, sol.P, lambda p: fields.curl_P(p, 0.0))
    files = [_solution_vtk(os.path.join(out, "solution.vtk"), mesh, Vu, VP, sol.u, sol.P)]
    files.append(write_report(os.path.join(out, "static_report.txt"), values))
    return files + _dump_matrices(config, out, params, Vu, VP)


def run_dynamics(config, out):
    params = config.material
    dyn = config.dynamics
    mesh, Vu, VP = _spaces(config)
    fields = build_fields(_case(config.problem), params)
    bdata = fields.boundary_data(config.problem.boundary)
    if dyn.initial == "case":
        initial = InitialData(
            Vu.from_nodal(fields.u(Vu.node_coordinates, 0.0)),
            Vu.from_nodal(fields.u_t(Vu.node_coordinates, 0.0)),
            interpolate_rows(VP, lambda p: fields.P(p, 0.0)),
            interpolate_rows(VP, lambda p: fields.P_t(p, 0.0)),
        )
    else:
        initial = InitialData.zeros(Vu, VP)
    loads = (fields.F, fields.M) if config.problem.loads == "case" else (None, None)
    if dyn.model == "elastic" and config.problem.loads == "case":
        loads = (_elastic_load(fields.case, params), None)
    run = DynamicRun(
        Vu, VP, initial, dyn.t_end, dyn.dt, params, loads[0], loads[1], bdata,
        integrator=dyn.integrator, output_every=dyn.output_every, lifting=config.problem.lifting, model=dyn.model,
    )
    result = run_dynamic(run)
    terms = list(result.energies[0].terms)
    rows = [(e.time, e.kinetic, *[e.terms[k] for k in terms], e.potential, e.total) for e in result.energies]
    files = [write_csv(os.path.join(out, "energy.csv"), ["time", "kinetic", *terms, "potential", "total"], rows)]
    for k, state in enumerate(result.states):
        P = state.P if dyn.model == "micromorphic" else np.zeros((3, VP.n_dofs))
        files.append(_solution_vtk(os.path.join(out, f"solution_{k:04d}.vtk"), mesh, Vu, VP, state.u, P))
    e0, e1 = result.energies[0].total, result.energies[-1].total
    files.append(
        write_report(
            os.path.join(out, "dynamic_report.txt"),
            {
                "case": fields.case.name,
                "model": dyn.model,
                "integrator": dyn.integrator,
                "steps": run.n_steps,
                "dt": dyn.dt,
                "t_end": result.times[-1],
                "energy_initial": e0,
                "energy_final": e1,
                "relative_energy_drift": abs(e1 - e0) / e0 if e0 > 0 else abs(e1 - e0),
            },
        )
    )
    return files + _dump_matrices(config, out, params, Vu, VP)


def run_verify_extension(config, out, seed):
    suite = extension_property_suite(config.verify.levels, config.verify.ensemble_size, seed, config.mesh.lx)
    header = list(suite.rows[0]) if suite.rows else ["level", "member"]
    files = [write_csv(os.path.join(out, "extension.csv"), header, [[row[k] for k in header] for row in suite.rows])]
    values = {"seed": seed, "smooth_residuals_decrease": suite.smooth_decreasing}
    for report in suite.constants.values():
        for name, level, value in report.rows():
            values[f"{name}.level_{level}"] = value
        values[f"{report.name}.spread"] = report.spread
    files.append(write_report(os.path.join(out, "extension_report.txt"), values, [SURROGATE_NOTE]))
    return files


def run_korn(config, out):
    korn, coercivity = constant_reports(config.verify.levels, config.material)
    rows = korn.rows() + coercivity.rows()
    files = [write_csv(os.path.join(out, "constants.csv"), ["constant", "level", "value"], rows)]
    mesh = build_box_mesh(BoxSpec.cube(config.verify.levels[0]))
    values = {}
    for name, level, value in rows:
        values[f"{name}.level_{level}"] = value
    values[f"{korn.name}.spread"] = korn.spread
    values[f"{coercivity.name}.spread"] = coercivity.spread
    values["unconstrained_skew_quotient"] = unconstrained_skew_quotient(mesh)
    files.append(write_report(os.path.join(out, "korn_report.txt"), values))
    return files


def run_convergence(config, out):
    params = config.material
    fields = build_fields(_case(config.problem), params)
    dyn = config.dynamics
    table = manufactured_convergence(
        fields,
        config.verify.levels,
        params,
        config.space.u_degree,
        config.problem.boundary,
        config.problem.lifting,
        (dyn.t_end, dyn.dt, dyn.integrator),
        config.mesh.lx,
    )
    header = ["level", "h", "l2_error_u", "l2_error_P", "l2_error_curl_P", "relative_residual"]
    files = [write_csv(os.path.join(out, "convergence.csv"), header, list(table.rows()))]
    values = {"case": table.case}
    values.update({f"order_{name}": value for name, value in table.orders.items()})
    files.append(write_report(os.path.join(out, "convergence_report.txt"), values))
    return files


def run(config, out=None, seed=None):
    """Execute config.command, writing artifacts under out (default config.output.directory)."""
    out = out or config.output.directory
    seed = config.seed if seed is None else seed
    os.makedirs(out, exist_ok=True)
    logger.info("Running %s into %s", config.command, out)
    if config.command == "mesh":
        files = run_mesh(config, out)
    elif config.command == "solve-static":
        files = run_static(config, out)
    elif config.command == "solve-dynamic":
        files = run_dynamics(config, out)
    elif config.command == "verify-extension":
        files = run_verify_extension(config, out, seed)
    elif config.command == "korn":
        files = run_korn(config, out)
    else:
        files = run_convergence(config, out)
    for path in files:
        print(f"✓ wrote {path}")
    return 0


# --- ENTRY POINT ---

class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser():
    parser = _ArgumentParser(description="Relaxed micromorphic finite-element solver and verification suite")
    parser.add_argument("command", choices=COMMANDS, help="what to run")
    parser.add_argument("--config", required=True, help="run configuration file (INI style)")
    parser.add_argument("--out", help="output directory (overrides output.directory)")
    parser.add_argument("--seed", type=int, help="seed for random ensembles (overrides seed)")
    return parser


def main(argv=None):
    settings = get_settings()
    logging.basicConfig(level=settings.log_level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
        config = load_config(args.config)
        config = config.model_copy(update={"command": args.command})
        if args.seed is not None and args.seed < 0:
            raise ConfigError("--seed must be non-negative")
        return run(config, args.out, args.seed)
    except ConfigError as exc:
        print(f"error: {exc.kind}: {exc}", file=sys.stderr)
        return 2
    except MicromorphicError as exc:
        print(f"error: {exc.kind}: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        logger.debug("Unhandled failure", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
