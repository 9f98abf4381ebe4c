"""Config-driven command line front end.

A scenario lives in one JSON file: grid, constants, the A and V
expressions, mode, representation, one task, and an output location.
Artifacts are CSV/JSON written atomically (temp file + rename) with a
manifest of checksums, plus PNG companions for plot-ready tables.
Numbers in CSV bodies are printed in shortest round-trip form so two
runs of the same config produce byte-identical tables.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import dataclasses
import csv
import datetime
import hashlib
import io
import json
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__, diagnostics, dynamics, figures
from .errors import GenqmError
from .exprlang import ExprError, parse
from .model import (
    AsymmetricGridError,
    Field,
    Grid,
    PhysicalConstants,
    ProblemSpec,
    SampledProfiles,
    build_problem,
    pt_reflect,
    pt_symmetry_report,
)
from .operators import TridiagonalOperator, assemble_hamiltonian
from .spectra import EigenPair, solve_spectrum

__all__ = ["ConfigError", "ScenarioConfig", "main", "run_scenario"]

SWEEP_PLACEHOLDER = "PARAM"

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2


class ConfigError(GenqmError):
    """Invalid configuration; carries the offending field path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"config field '{path}': {message}")
        self.path = path


# ---------------------------------------------------------------------------
# Config loading and validation


_SENTINEL = object()


def _type_name(value: Any) -> str:
    return type(value).__name__


def _get(cfg: dict, path: str, default=_SENTINEL, base: str = ""):
    node: Any = cfg
    walked = []
    for key in path.split("."):
        walked.append(key)
        if not isinstance(node, dict):
            raise ConfigError(base + ".".join(walked[:-1]), "expected an object")
        if key not in node:
            if default is not _SENTINEL:
                return default
            raise ConfigError(base + ".".join(walked), "missing required field")
        node = node[key]
    return node


def _number(cfg: dict, path: str, default=_SENTINEL, base: str = "") -> float:
    v = _get(cfg, path, default, base)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(base + path, f"expected a number, got {_type_name(v)}")
    if not np.isfinite(v):
        raise ConfigError(base + path, f"expected a finite number, got {v!r}")
    return float(v)


def _integer(cfg: dict, path: str, default=_SENTINEL, base: str = "") -> int:
    v = _get(cfg, path, default, base)
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(base + path, f"expected an integer, got {_type_name(v)}")
    return v


def _string(cfg: dict, path: str, default=_SENTINEL, base: str = "") -> str:
    v = _get(cfg, path, default, base)
    if not isinstance(v, str):
        raise ConfigError(base + path, f"expected a string, got {_type_name(v)}")
    return v


def _choice(cfg: dict, path: str, options: tuple, default=_SENTINEL, base: str = "") -> str:
    v = _string(cfg, path, default, base)
    if v not in options:
        raise ConfigError(base + path, f"expected one of {options}, got {v!r}")
    return v


@dataclass(frozen=True)
class ScenarioConfig:
    grid_xmin: float
    grid_xmax: float
    grid_points: int
    hbar: float
    mass: float
    A_text: str
    V_text: str
    mode: str
    representation: str
    task: dict
    out_directory: str
    out_prefix: str
    raw: dict = field(repr=False)

    def resolved(self) -> dict:
        return {
            "grid": {"xmin": self.grid_xmin, "xmax": self.grid_xmax,
                     "points": self.grid_points},
            "constants": {"hbar": self.hbar, "mass": self.mass},
            "A": self.A_text,
            "V": self.V_text,
            "mode": self.mode,
            "representation": self.representation,
            "task": self.task,
            "output": {"directory": self.out_directory,
                       "prefix": self.out_prefix},
        }


def _validate_task(task: Any, base: str = "task.") -> dict:
    if not isinstance(task, dict):
        raise ConfigError(base.rstrip("."), f"expected an object, got {_type_name(task)}")
    kind = _choice(task, "type", ("eigen", "evolve", "check", "sweep"), base=base)
    if kind == "eigen":
        count = _integer(task, "count", base=base)
        if count < 1:
            raise ConfigError(f"{base}count", f"must be >= 1, got {count}")
        return {"type": "eigen", "count": count}
    if kind == "evolve":
        dt = _number(task, "dt", base=base)
        if dt <= 0:
            raise ConfigError(f"{base}dt", f"must be positive, got {dt}")
        steps = _integer(task, "steps", base=base)
        if steps < 1:
            raise ConfigError(f"{base}steps", f"must be >= 1, got {steps}")
        cadence = _integer(task, "cadence", 1, base=base)
        if cadence < 1 or steps % cadence != 0:
            raise ConfigError(
                f"{base}cadence", f"must divide steps={steps}, got {cadence}"
            )
        initial = _get(task, "initial", base=base)
        if not isinstance(initial, dict):
            raise ConfigError(f"{base}initial", "expected an object")
        ibase = f"{base}initial."
        ikind = _choice(initial, "type", ("gaussian", "eigenstate"), base=ibase)
        if ikind == "gaussian":
            init = {
                "type": "gaussian",
                "x0": _number(initial, "x0", base=ibase),
                "sigma": _number(initial, "sigma", base=ibase),
                "k0": _number(initial, "k0", base=ibase),
            }
            if init["sigma"] <= 0:
                raise ConfigError(f"{ibase}sigma", "must be positive")
        else:
            index = _integer(initial, "index", base=ibase)
            if index < 0:
                raise ConfigError(f"{ibase}index", "must be >= 0")
            init = {"type": "eigenstate", "index": index}
        return {"type": "evolve", "dt": dt, "steps": steps,
                "cadence": cadence, "initial": init}
    if kind == "check":
        return {"type": "check"}
    # sweep
    name = _string(task, "parameter", base=base)
    values = _get(task, "values", base=base)
    if not isinstance(values, list) or not values:
        raise ConfigError(f"{base}values", "expected a non-empty list of numbers")
    for i, v in enumerate(values):
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not np.isfinite(v):
            raise ConfigError(f"{base}values[{i}]", f"expected a finite number, got {v!r}")
    inner = _validate_task(_get(task, "task", base=base), base=f"{base}task.")
    if inner["type"] != "eigen":
        raise ConfigError(
            f"{base}task.type",
            f"sweep inner task must be 'eigen', got {inner['type']!r}",
        )
    return {"type": "sweep", "parameter": name,
            "values": [float(v) for v in values], "task": inner}


def validate_config(raw: Any, out_dir_override: str | None = None) -> ScenarioConfig:
    if not isinstance(raw, dict):
        raise ConfigError("", f"top level must be an object, got {_type_name(raw)}")
    points = _integer(raw, "grid.points")
    if points < 3:
        raise ConfigError("grid.points", f"must be >= 3, got {points}")
    xmin = _number(raw, "grid.xmin")
    xmax = _number(raw, "grid.xmax")
    if not xmin < xmax:
        raise ConfigError("grid.xmax", f"need xmin < xmax, got [{xmin}, {xmax}]")
    hbar = _number(raw, "constants.hbar")
    mass = _number(raw, "constants.mass")
    if hbar <= 0:
        raise ConfigError("constants.hbar", "must be positive")
    if mass <= 0:
        raise ConfigError("constants.mass", "must be positive")
    cfg = ScenarioConfig(
        grid_xmin=xmin,
        grid_xmax=xmax,
        grid_points=points,
        hbar=hbar,
        mass=mass,
        A_text=_string(raw, "A"),
        V_text=_string(raw, "V"),
        mode=_choice(raw, "mode", ("hermitian", "pt")),
        representation=_choice(raw, "representation", ("psi", "phi"), "psi"),
        task=_validate_task(_get(raw, "task")),
        out_directory=(out_dir_override or _string(raw, "output.directory")),
        out_prefix=_string(raw, "output.prefix", ""),
        raw=raw,
    )
    return cfg


def load_config(path: str, out_dir_override: str | None = None) -> ScenarioConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError("", f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"config is not valid JSON: {exc}") from None
    return validate_config(raw, out_dir_override)


# ---------------------------------------------------------------------------
# Problem construction


def build_simulation(
    cfg: ScenarioConfig,
) -> tuple[ProblemSpec, SampledProfiles, TridiagonalOperator]:
    try:
        a_ast = parse(cfg.A_text)
    except ExprError as exc:
        raise ConfigError("A", str(exc)) from exc
    try:
        v_ast = parse(cfg.V_text)
    except ExprError as exc:
        raise ConfigError("V", str(exc)) from exc
    try:
        spec = ProblemSpec(
            A=a_ast,
            V=v_ast,
            constants=PhysicalConstants(cfg.hbar, cfg.mass),
            grid=Grid(cfg.grid_xmin, cfg.grid_xmax, cfg.grid_points),
            mode=cfg.mode,
            representation=cfg.representation,
        )
    except AsymmetricGridError as exc:
        # geometry requirement of pt mode: a config-level failure
        raise ConfigError("grid", str(exc)) from exc
    profiles = build_problem(spec)
    op = assemble_hamiltonian(profiles, spec.constants, spec.representation)
    return spec, profiles, op


# ---------------------------------------------------------------------------
# Atomic output with checksums


def _fmt(v: float) -> str:
    return repr(float(v))


class OutputWriter:
    def __init__(self, directory: str, prefix: str = ""):
        self.directory = Path(directory)
        self.prefix = prefix
        self.directory.mkdir(parents=True, exist_ok=True)
        self.checksums: dict[str, str] = {}

    def _target(self, name: str) -> Path:
        return self.directory / f"{self.prefix}{name}"

    def _record(self, name: str, data: bytes) -> None:
        self.checksums[f"{self.prefix}{name}"] = hashlib.sha256(data).hexdigest()

    def write_bytes(self, name: str, data: bytes) -> Path:
        target = self._target(name)
        fd, tmp = tempfile.mkstemp(dir=self.directory, prefix=target.name, suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            os.replace(tmp, target)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        self._record(name, data)
        return target

    def write_text(self, name: str, text: str) -> Path:
        return self.write_bytes(name, text.encode("utf-8"))

    def write_figure(self, name: str, render, *args) -> Path:
        target = self._target(name)
        fd, tmp = tempfile.mkstemp(dir=self.directory, prefix=target.name, suffix=".tmp")
        os.close(fd)
        try:
            render(tmp, *args)
            os.replace(tmp, target)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        self._record(name, target.read_bytes())
        return target

    def write_manifest(self, cfg: ScenarioConfig, error: dict | None = None) -> None:
        manifest = {
            "tool": "genqm",
            "version": __version__,
            "created": datetime.datetime.now(datetime.timezone.utc).isoformat(),
            "config": cfg.resolved(),
            "outputs": dict(sorted(self.checksums.items())),
        }
        if error is not None:
            manifest["error"] = error
        text = json.dumps(manifest, indent=2, sort_keys=True) + "\n"
        target = self._target("manifest.json")
        fd, tmp = tempfile.mkstemp(dir=self.directory, prefix=target.name, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(text)
            os.replace(tmp, target)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise


def _csv_table(header: str, rows: list[str]) -> str:
    return "\n".join([header, *rows]) + "\n"


# ---------------------------------------------------------------------------
# Tasks


def _state_density(
    pair_state: Field, spec: ProblemSpec, profiles: SampledProfiles
) -> np.ndarray:
    sharp = pt_reflect(pair_state, profiles.grid) if spec.mode == "pt" else None
    return diagnostics.probability_density(pair_state, spec.mode, profiles, sharp)


def run_eigen(
    spec: ProblemSpec,
    profiles: SampledProfiles,
    op: TridiagonalOperator,
    count: int,
    writer: OutputWriter,
) -> list[EigenPair]:
    pairs = solve_spectrum(op, count, spec.mode, profiles, profiles.grid)
    rows = [
        f"{p.index},{_fmt(p.energy.real)},{_fmt(p.energy.imag)}" for p in pairs
    ]
    writer.write_text("spectrum.csv", _csv_table("index,energy_re,energy_im", rows))
    writer.write_figure(
        "spectrum.png", figures.render_spectrum,
        np.array([p.energy for p in pairs]),
    )

    x = profiles.grid.nodes
    xh = profiles.grid.half_nodes
    for p in pairs:
        rho = _state_density(p.state, spec, profiles)
        sharp = pt_reflect(p.state, profiles.grid) if spec.mode == "pt" else None
        current = diagnostics.current_density(
            p.state, spec.mode, profiles, spec.constants, profiles.grid, sharp
        )
        v = p.state.values
        state_rows = [
            f"{_fmt(x[i])},{_fmt(v[i].real)},{_fmt(v[i].imag)},"
            f"{_fmt(rho[i].real)},{_fmt(rho[i].imag)}"
            for i in range(len(x))
        ]
        writer.write_text(
            f"state_{p.index}.csv",
            _csv_table("x,psi_re,psi_im,rho_re,rho_im", state_rows),
        )
        current_rows = [
            f"{_fmt(xh[i])},{_fmt(current[i].real)},{_fmt(current[i].imag)}"
            for i in range(len(xh))
        ]
        writer.write_text(
            f"current_{p.index}.csv",
            _csv_table("x_half,J_re,J_im", current_rows),
        )
        writer.write_figure(
            f"state_{p.index}.png", figures.render_state,
            x, v, rho, xh, current,
            "phi" if p.state.representation == "phi" else "psi",
        )
    return pairs


def run_evolve(
    spec: ProblemSpec,
    profiles: SampledProfiles,
    op: TridiagonalOperator,
    task: dict,
    writer: OutputWriter,
) -> None:
    init_cfg = task["initial"]
    if init_cfg["type"] == "gaussian":
        initial = dynamics.initial_state_gaussian(
            spec, profiles, init_cfg["x0"], init_cfg["sigma"], init_cfg["k0"]
        )
    else:
        initial = dynamics.initial_state_eigenstate(
            spec, profiles, op, init_cfg["index"]
        )
    reports, _final = dynamics.evolve(
        spec, profiles, op, initial, task["dt"], task["steps"], task["cadence"]
    )
    rows = []
    fig_rows = []
    for rep in reports:
        rows.append(
            f"{rep.step_index},{_fmt(rep.t)},"
            f"{_fmt(rep.total_probability.real)},{_fmt(rep.total_probability.imag)},"
            f"{_fmt(rep.energy_functional.real)},{_fmt(rep.energy_functional.imag)},"
            f"{_fmt(rep.continuity_residual_max)},{_fmt(rep.continuity_residual_l2)}"
        )
        fig_rows.append(
            {
                "t": rep.t,
                "total_prob": rep.total_probability,
                "energy": rep.energy_functional,
                "continuity_max": rep.continuity_residual_max,
            }
        )
    writer.write_text(
        "timeseries.csv",
        _csv_table(
            "step,t,total_prob_re,total_prob_im,energy_re,energy_im,"
            "continuity_max,continuity_l2",
            rows,
        ),
    )
    writer.write_figure("timeseries.png", figures.render_timeseries, fig_rows)


def run_check(
    spec: ProblemSpec, profiles: SampledProfiles, writer: OutputWriter
) -> dict:
    psi_op = assemble_hamiltonian(profiles, spec.constants, "psi")
    symmetry_gap = float(np.max(np.abs(psi_op.sub - psi_op.sup)))
    hermiticity_gap = max(
        float(np.max(np.abs(psi_op.diag.imag))),
        float(np.max(np.abs(psi_op.sub - np.conj(psi_op.sup)))),
    )
    symmetric = spec.grid.symmetric
    report = {
        "mode": spec.mode,
        "representation": spec.representation,
        "grid": {"xmin": spec.grid.xmin, "xmax": spec.grid.xmax,
                 "points": spec.grid.points, "symmetric": symmetric},
        "pt_residual_A": pt_symmetry_report(spec.A, spec.grid) if symmetric else None,
        "pt_residual_V": pt_symmetry_report(spec.V, spec.grid) if symmetric else None,
        "max_imag_A": float(np.max(np.abs(profiles.A.imag))),
        "max_imag_V": float(np.max(np.abs(profiles.V.imag))),
        "min_abs_A": float(
            min(np.min(np.abs(profiles.A)), np.min(np.abs(profiles.A_half)))
        ),
        "symmetry_gap": symmetry_gap,
        "hermiticity_gap": hermiticity_gap,
    }
    writer.write_text("check.json", json.dumps(report, indent=2, sort_keys=True) + "\n")
    for key in (
        "pt_residual_A", "pt_residual_V", "symmetry_gap", "hermiticity_gap",
        "min_abs_A",
    ):
        print(f"{key}: {report[key]}")
    return report


def _sweep_one(
    cfg: ScenarioConfig, index: int, value: float
) -> tuple[int, float, list[complex] | None, str]:
    raw = dict(cfg.raw)
    replacement = f"({_fmt(value)})"
    raw["A"] = cfg.A_text.replace(SWEEP_PLACEHOLDER, replacement)
    raw["V"] = cfg.V_text.replace(SWEEP_PLACEHOLDER, replacement)
    raw["task"] = cfg.task["task"]
    raw["output"] = {
        "directory": str(Path(cfg.out_directory) / f"value_{index:03d}"),
        "prefix": cfg.out_prefix,
    }
    sub_cfg = validate_config(raw)
    writer = OutputWriter(sub_cfg.out_directory, sub_cfg.out_prefix)
    error: dict | None = None
    try:
        spec, profiles, op = build_simulation(sub_cfg)
        pairs = run_eigen(spec, profiles, op, sub_cfg.task["count"], writer)
        writer.write_manifest(sub_cfg)
        return index, value, [p.energy for p in pairs], "ok"
    except (GenqmError, ValueError) as exc:
        error = {"type": type(exc).__name__, "message": str(exc)}
        writer.write_manifest(sub_cfg, error=error)
        return index, value, None, f"error: {exc}"


def run_sweep(cfg: ScenarioConfig, writer: OutputWriter) -> None:
    if (
        SWEEP_PLACEHOLDER not in cfg.A_text
        and SWEEP_PLACEHOLDER not in cfg.V_text
    ):
        raise ConfigError(
            "task.parameter",
            f"placeholder '{SWEEP_PLACEHOLDER}' does not occur in A or V",
        )
    values = cfg.task["values"]
    count = cfg.task["task"]["count"]
    workers = max(1, int(os.environ.get("GENQM_THREADS", "1") or 1))
    results: list[tuple[int, float, list[complex] | None, str]] = [None] * len(values)  # type: ignore
    if workers == 1:
        for i, v in enumerate(values):
            results[i] = _sweep_one(cfg, i, v)
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_sweep_one, cfg, i, v) for i, v in enumerate(values)
            ]
            for fut in concurrent.futures.as_completed(futures):
                res = fut.result()
                results[res[0]] = res

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = [cfg.task["parameter"], "status"]
    for j in range(count):
        header += [f"E{j}_re", f"E{j}_im"]
    header.append("max_abs_im")
    w.writerow(header)
    table = []
    for _, value, energies, status in results:
        row = [_fmt(value), status]
        if energies is None:
            row += [""] * (2 * count + 1)
            table.append({"value": value, "status": status,
                          "energies": None, "max_abs_im": None})
        else:
            for e in energies:
                row += [_fmt(e.real), _fmt(e.imag)]
            max_im = max(abs(e.imag) for e in energies)
            row.append(_fmt(max_im))
            table.append({"value": value, "status": "ok",
                          "energies": energies, "max_abs_im": max_im})
        w.writerow(row)
    writer.write_text("summary.csv", buf.getvalue())
    writer.write_figure("summary.png", figures.render_sweep, values, table)


# ---------------------------------------------------------------------------
# Entry points


def run_scenario(cfg: ScenarioConfig) -> int:
    """Dispatch the configured task; returns a process exit code."""
    writer = OutputWriter(cfg.out_directory, cfg.out_prefix)
    stale = writer.directory / f"{cfg.out_prefix}error.json"
    if stale.exists():
        stale.unlink()
    error: dict | None = None
    try:
        if cfg.task["type"] == "sweep":
            run_sweep(cfg, writer)
        else:
            spec, profiles, op = build_simulation(cfg)
            if cfg.task["type"] == "eigen":
                run_eigen(spec, profiles, op, cfg.task["count"], writer)
            elif cfg.task["type"] == "evolve":
                run_evolve(spec, profiles, op, cfg.task, writer)
            else:
                run_check(spec, profiles, writer)
        return EXIT_OK
    except ConfigError:
        raise
    except (GenqmError, ValueError) as exc:
        error = {"type": type(exc).__name__, "message": str(exc)}
        _emit_error_record(error, writer)
        return EXIT_RUNTIME
    finally:
        writer.write_manifest(cfg, error=error)


def _emit_error_record(error: dict, writer: OutputWriter | None = None) -> None:
    record = json.dumps({"error": error}, sort_keys=True)
    print(record, file=sys.stderr)
    if writer is not None:
        writer.write_text("error.json", record + "\n")


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="genqm",
        description="1D generalized-momentum quantum simulations from JSON scenarios",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("run", "run the task configured in the scenario file"),
        ("sweep", "run a parameter sweep scenario"),
        ("check", "run symmetry/validation checks for a scenario"),
    ):
        p = sub.add_parser(name, help=text)
        p.add_argument("config", help="path to the scenario JSON file")
        p.add_argument("--out-dir", default=None,
                       help="override output.directory from the config")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config, args.out_dir)
        if args.command == "sweep" and cfg.task["type"] != "sweep":
            raise ConfigError(
                "task.type", f"'genqm sweep' needs a sweep task, got {cfg.task['type']!r}"
            )
        if args.command == "check" and cfg.task["type"] != "check":
            cfg = dataclasses.replace(cfg, task={"type": "check"})
        return run_scenario(cfg)
    except ConfigError as exc:
        _emit_error_record(
            {"type": "ConfigError", "message": str(exc), "path": exc.path}
        )
        return EXIT_CONFIG
    except GenqmError as exc:
        _emit_error_record({"type": type(exc).__name__, "message": str(exc)})
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
