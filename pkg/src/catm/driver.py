"""Scenario orchestration: config ingestion, runs, scans and output files.

A scenario is one JSON document (schema version 1, atomic units). Missing
sections take the values of :data:`DEFAULT_SCENARIO`, which describes the
shipped photodissociation scenario. Every run writes into its output
directory:

``probabilities*.csv``
    ``t,P_0,...,P_{n-1},P_diss,norm`` rows (see :func:`emit_probabilities`)
``convergence.csv``
    one row per solver iteration
``summary.json``
    final probabilities, residue, iteration counts and wall time
"""

from __future__ import annotations

import copy
import csv
import json
import logging
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from .errors import ConfigError, ConvergenceError
from .floquet import AbsorberEnvelope, FloquetOperator, PulseEdgeWarning, PulseSpec, PulseWindow
from .interaction import RepresentationConfig
from .propagators import (
    MolecularHamiltonian,
    StepConfig,
    dense_expm_oracle,
    sod_propagate,
    split_operator_propagate,
)
from .solver import (
    SolverSettings,
    reconstruct_wavefunction,
    residue_epsilon,
    solve_constrained_floquet,
    transition_probabilities,
)
from .spatial import (
    ComplexEigenbasis,
    SpatialGrid,
    SurfaceModel,
    bound_state_mask,
    build_eigenbasis,
    dipole_function,
    morse,
    repulsive,
)
from .timegrid import TimeGrid

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
RUN_KINDS = ("catm", "sod", "split", "oracle", "compare", "scan-e0", "scan-v0", "multistep")

DEFAULT_SCENARIO = {
    "schema_version": SCHEMA_VERSION,
    "run": {"kind": "catm", "segments": 1, "snap_segments": True, "scan_values": [],
            "methods": ["catm", "sod", "split"], "workers": 1},
    "model": {
        "kind": "surfaces",
        "n_points": 256, "x_min": 0.5, "x_max": 16.5, "mass": 918.0,
        "ground": {"depth": 0.103, "width": 0.72, "x0": 2.0},
        "excited": {"amplitude": 0.38, "decay": 0.9, "shift": 0.096},
        "dipole": {"scale": 0.5, "cutoff": 3.0},
        "cap": {"strength": 0.001, "onset": None, "order": 2},
        "energy_cutoff": 0.5,
        "n_states": 200,
    },
    "initial_state": {"index": 0},
    "time": {"n_modes": 256, "physical_duration": 212.9, "absorbing_duration": 70.0},
    "pulse": {"amplitude": 0.05, "frequency": 0.2958678, "envelope": "gaussian",
              "width": 20.0, "center": None, "plateau": 0.0, "phase": 0.0},
    "absorber": {"amplitude": 0.6, "shape": "cos4"},
    "representation": {"mode": "direct", "im_threshold": 0.5},
    "solver": {"method": "auto", "tolerance": 1e-12, "max_iterations": 500, "k_max": 50,
               "freeze_diagonal": False},
    "propagation": {"n_steps": 20000, "record_every": 200, "oracle_steps": 200},
    "bound_states": {"threshold": 0.0, "im_cutoff": 1e-6},
}

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_NONNEG = {"type": "number", "minimum": 0}
_INT = {"type": "integer", "minimum": 1}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema_version"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "run": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "kind": {"enum": list(RUN_KINDS)},
                "segments": _INT,
                "snap_segments": {"type": "boolean"},
                "scan_values": {"type": "array", "items": _NONNEG},
                "methods": {"type": "array", "minItems": 1,
                            "items": {"enum": ["catm", "sod", "split", "oracle"]}},
                "workers": _INT,
            },
        },
        "model": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["surfaces", "explicit"]},
                "n_points": _INT, "x_min": _NUM, "x_max": _NUM, "mass": _POS,
                "ground": {"type": "object", "additionalProperties": False,
                           "properties": {"depth": _NUM, "width": _POS, "x0": _NUM}},
                "excited": {"type": "object", "additionalProperties": False,
                            "properties": {"amplitude": _NUM, "decay": _NUM, "shift": _NUM}},
                "dipole": {"type": ["object", "array"]},
                "cap": {"type": "object", "additionalProperties": False,
                        "properties": {"strength": _NONNEG,
                                       "onset": {"type": ["number", "null"]},
                                       "order": _INT}},
                "energy_cutoff": _NONNEG,
                "n_states": {"type": ["integer", "null"], "minimum": 1},
                "energies": {"type": "array", "items": _NUM, "minItems": 1},
                "energies_imag": {"type": "array", "items": _NUM},
            },
        },
        "initial_state": {
            "type": "object", "additionalProperties": False,
            "properties": {"index": {"type": "integer", "minimum": 0},
                           "coefficients": {"type": "array", "items": _NUM, "minItems": 1},
                           "coefficients_imag": {"type": "array", "items": _NUM}},
        },
        "time": {"type": "object", "additionalProperties": False,
                 "properties": {"n_modes": _INT, "physical_duration": _POS,
                                "absorbing_duration": _POS}},
        "pulse": {"type": "object", "additionalProperties": False,
                  "properties": {"amplitude": _NUM, "frequency": _NUM,
                                 "envelope": {"enum": ["gaussian", "gaussian-plateau",
                                                       "flat-top", "constant"]},
                                 "width": _POS, "center": {"type": ["number", "null"]},
                                 "plateau": _NONNEG, "phase": _NUM}},
        "absorber": {"type": "object", "additionalProperties": False,
                     "properties": {"amplitude": _NONNEG,
                                    "shape": {"enum": ["sinc2", "cos4"]}}},
        "representation": {"type": "object", "additionalProperties": False,
                           "properties": {"mode": {"enum": ["direct", "full", "real-part"]},
                                          "im_threshold": _POS}},
        "solver": {"type": "object", "additionalProperties": False,
                   "properties": {"method": {"enum": ["rdwa", "krylov", "auto"]},
                                  "tolerance": _POS, "max_iterations": _INT,
                                  "k_max": {"type": "integer", "minimum": 2},
                                  "freeze_diagonal": {"type": "boolean"}}},
        "propagation": {"type": "object", "additionalProperties": False,
                        "properties": {"n_steps": _INT, "record_every": _INT,
                                       "oracle_steps": _INT}},
        "bound_states": {"type": "object", "additionalProperties": False,
                         "properties": {"threshold": _NUM, "im_cutoff": _POS}},
    },
}


def _merge(base, update):
    out = copy.deepcopy(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


class _Section:
    """Re-raise configuration errors with the section path prepended."""

    def __init__(self, name):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, kind, exc, tb):
        if isinstance(exc, ConfigError):
            path = f"{self.name}.{exc.path}" if exc.path else self.name
            message = str(exc).split(": ", 1)[-1] if exc.path else str(exc)
            raise ConfigError(message, path) from exc
        if isinstance(exc, (ValueError, TypeError)) and not isinstance(exc, ConfigError):
            raise ConfigError(str(exc), self.name) from exc
        return False


@dataclass
class ScenarioConfig:
    """Validated scenario document with defaults filled in."""

    document: dict
    source: str | None = None

    @classmethod
    def from_dict(cls, document: dict, source=None) -> "ScenarioConfig":
        try:
            jsonschema.validate(document, SCHEMA)
        except jsonschema.ValidationError as exc:
            path = ".".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigError(exc.message, path) from None
        cfg = cls(_merge(DEFAULT_SCENARIO, document), source)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        path = Path(path)
        try:
            document = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read scenario: {exc}", str(path)) from None
        if not isinstance(document, dict):
            raise ConfigError("scenario must be a JSON object", str(path))
        return cls.from_dict(document, str(path))

    def __getitem__(self, key):
        return self.document[key]

    @property
    def kind(self) -> str:
        return self["run"]["kind"]

    def with_updates(self, **sections) -> "ScenarioConfig":
        return ScenarioConfig.from_dict(_merge(self.document, sections), self.source)

    # -- construction helpers -------------------------------------------------

    def time_grid(self, physical_duration=None) -> TimeGrid:
        t = self["time"]
        with _Section("time"):
            return TimeGrid(int(t["n_modes"]), physical_duration or t["physical_duration"],
                            t["absorbing_duration"])

    def pulse(self, warn=True) -> PulseSpec:
        p = self["pulse"]
        with _Section("pulse"):
            with warnings.catch_warnings():
                if not warn:
                    warnings.simplefilter("ignore", PulseEdgeWarning)
                return PulseSpec(
                    amplitude=p["amplitude"], frequency=p["frequency"],
                    duration=self["time"]["physical_duration"], envelope=p["envelope"],
                    width=p["width"], center=p["center"], plateau=p["plateau"], phase=p["phase"],
                )

    def spatial(self) -> tuple[SpatialGrid, SurfaceModel]:
        m = self["model"]
        if m["kind"] != "surfaces":
            raise ConfigError("needs a grid model (kind 'surfaces')", "model.kind")
        with _Section("model"):
            grid = SpatialGrid(int(m["n_points"]), m["x_min"], m["x_max"])
            dip = m["dipole"]
            if not isinstance(dip, dict):
                raise ConfigError("grid models take {scale, cutoff}", "dipole")
            model = SurfaceModel(
                ground_potential=morse(**m["ground"]),
                excited_potential=repulsive(**m["excited"]),
                dipole=dipole_function(**dip),
                mass=m["mass"],
                cap_strength=m["cap"]["strength"],
                cap_onset=m["cap"]["onset"],
                cap_order=int(m["cap"]["order"]),
                energy_cutoff=m["energy_cutoff"],
            )
            model.validate(grid)
        return grid, model

    def basis(self) -> ComplexEigenbasis:
        m = self["model"]
        if m["kind"] == "explicit":
            with _Section("model"):
                if "energies" not in m:
                    raise ConfigError("explicit models need 'energies'", "energies")
                energies = np.asarray(m["energies"], dtype=complex)
                if "energies_imag" in m:
                    imag = np.asarray(m["energies_imag"], dtype=float)
                    if imag.shape != energies.shape:
                        raise ConfigError("length differs from energies", "energies_imag")
                    energies = energies + 1j * imag
                dipole = np.asarray(m["dipole"], dtype=complex)
                n = len(energies)
                if dipole.shape != (n, n):
                    raise ConfigError(f"must be a {n}x{n} matrix", "dipole")
                eye = np.eye(n, dtype=complex)
                return ComplexEigenbasis(energies, eye, eye.copy(), dipole)
        grid, model = self.spatial()
        with _Section("model"):
            n_states = m["n_states"]
            if n_states is not None and n_states > 2 * grid.n_points:
                raise ConfigError(f"at most {2 * grid.n_points} states", "n_states")
            return build_eigenbasis(grid, model, n_states=n_states, min_bound_states=2)

    def initial_state(self, n_states: int) -> np.ndarray:
        s = self["initial_state"]
        with _Section("initial_state"):
            if "coefficients" in s:
                psi = np.asarray(s["coefficients"], dtype=complex)
                if "coefficients_imag" in s:
                    psi = psi + 1j * np.asarray(s["coefficients_imag"], dtype=float)
                if len(psi) != n_states:
                    raise ConfigError(f"needs {n_states} coefficients", "coefficients")
                norm = np.linalg.norm(psi)
                if abs(norm - 1) > 1e-10:
                    raise ConfigError(f"not normalized (norm {norm:.12g})", "coefficients")
                return psi
            index = int(s.get("index", 0))
            if index >= n_states:
                raise ConfigError(f"index {index} >= n_states {n_states}", "index")
            psi = np.zeros(n_states, dtype=complex)
            psi[index] = 1.0
            return psi

    def absorber(self, grid: TimeGrid) -> AbsorberEnvelope:
        a = self["absorber"]
        with _Section("absorber"):
            return AbsorberEnvelope.for_grid(a["amplitude"], grid, a["shape"])

    def representation(self) -> RepresentationConfig:
        r = self["representation"]
        with _Section("representation"):
            return RepresentationConfig(r["mode"], r["im_threshold"])

    def solver_settings(self) -> SolverSettings:
        s = self["solver"]
        with _Section("solver"):
            return SolverSettings(
                tolerance=s["tolerance"], max_iterations=int(s["max_iterations"]),
                use_krylov=s["method"] == "krylov", k_max=int(s["k_max"]),
                freeze_diagonal=s["freeze_diagonal"],
            )

    def step_config(self, n_steps=None) -> StepConfig:
        p = self["propagation"]
        with _Section("propagation"):
            return StepConfig(int(n_steps or p["n_steps"]), self["time"]["physical_duration"],
                              int(p["record_every"]))

    def validate(self) -> None:
        """Check cross-module preconditions before any heavy computation."""
        self.time_grid()
        self.pulse(warn=False)
        self.representation()
        self.solver_settings()
        self.step_config()
        m = self["model"]
        if m["kind"] == "surfaces":
            self.spatial()
            n_states = m["n_states"] or 2 * m["n_points"]
        else:
            n_states = len(m.get("energies", []))
            self.basis()
        self.initial_state(n_states)
        run = self["run"]
        if self.kind in ("scan-e0", "scan-v0") and not run["scan_values"]:
            raise ConfigError("scan runs need a non-empty list", "run.scan_values")
        if self.kind == "oracle" or (self.kind == "compare" and "oracle" in run["methods"]):
            if n_states > 64:
                raise ConfigError("the dense oracle is limited to 64 states", "model.n_states")
        if self.kind == "split" or (self.kind == "compare" and "split" in run["methods"]):
            if m["kind"] != "surfaces":
                raise ConfigError("split-operator runs need a grid model", "model.kind")
        if self.kind == "multistep" and run["segments"] > 1 \
                and self["representation"]["mode"] == "direct":
            raise ConfigError(
                "multistep runs start later segments from superpositions; "
                "use the 'full' or 'real-part' representation",
                "representation.mode",
            )
        if self["propagation"]["record_every"] > self["propagation"]["n_steps"]:
            raise ConfigError("must not exceed n_steps", "propagation.record_every")


def default_config(**sections) -> ScenarioConfig:
    """The shipped scenario, optionally with some sections overridden."""
    return ScenarioConfig.from_dict(_merge({"schema_version": SCHEMA_VERSION}, sections))


# -- probability records ------------------------------------------------------


@dataclass
class ProbabilityRecord:
    t: float
    populations: np.ndarray
    dissociation: float
    norm: float


def records_from_series(series) -> list[ProbabilityRecord]:
    return [
        ProbabilityRecord(float(t), p, float(d), float(n))
        for t, p, d, n in zip(series.times, series.populations, series.dissociation, series.norm)
    ]


def emit_probabilities(records, path) -> Path:
    """Write ``t,P_0,...,P_{n-1},P_diss,norm`` with 12 significant digits."""
    records = list(records)
    if not records:
        raise ValueError("no records to write")
    n = len(records[0].populations)
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(["t"] + [f"P_{j}" for j in range(n)] + ["P_diss", "norm"]) + "\n")
        for r in records:
            values = [r.t, *np.asarray(r.populations, float), r.dissociation, r.norm]
            fh.write(",".join(f"{v:.11e}" for v in values) + "\n")
    return path


def read_probabilities(path) -> list[ProbabilityRecord]:
    with Path(path).open(encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    n = len(header) - 3
    out = []
    for row in body:
        v = np.array(row, dtype=float)
        out.append(ProbabilityRecord(v[0], v[1 : 1 + n], v[1 + n], v[2 + n]))
    return out


# -- runs ---------------------------------------------------------------------


@dataclass
class CatmResult:
    series: object
    psi: np.ndarray
    epsilon: float
    iterations: int
    residual: float
    energy: complex
    method: str
    history: list = field(default_factory=list)
    segments: int = 1
    boundaries: list = field(default_factory=list)
    join_jumps: list = field(default_factory=list)


def _solve(op, psi0, cfg: ScenarioConfig, history: list, segment=None):
    """Solve with the configured method; ``auto`` retries with Krylov."""
    method = cfg["solver"]["method"]
    settings = cfg.solver_settings()

    def record(it, res, h_eff):
        history.append((segment or 0, it, res, h_eff))

    if method == "auto":
        try:
            return solve_constrained_floquet(op, psi0, settings, callback=record), "rdwa"
        except ConvergenceError as exc:
            log.info("RDWA failed (%s); retrying with the Krylov variant", exc)
        settings = SolverSettings(**{**settings.__dict__, "use_krylov": True})
        return solve_constrained_floquet(op, psi0, settings, callback=record), "krylov"
    return solve_constrained_floquet(op, psi0, settings, callback=record), method


def segment_boundaries(cfg: ScenarioConfig, k: int) -> list[float]:
    """Segment edges; interior edges snap to the nearest carrier node if asked."""
    t0 = cfg["time"]["physical_duration"]
    edges = [s * t0 / k for s in range(k + 1)]
    p = cfg["pulse"]
    if cfg["run"]["snap_segments"] and p["frequency"] > 0 and k > 1:
        w, phi = p["frequency"], p["phase"]
        for s in range(1, k):
            n = np.round((w * edges[s] + phi - np.pi / 2) / np.pi)
            edges[s] = float((np.pi / 2 + n * np.pi - phi) / w)
        if any(b <= a for a, b in zip(edges, edges[1:])):
            raise ConfigError("too many segments for the carrier period", "run.segments")
    return edges


def run_catm(cfg: ScenarioConfig, basis=None, segments=None) -> CatmResult:
    """Single-shot (``segments=1``) or multistep CATM propagation."""
    basis = basis or cfg.basis()
    psi0 = cfg.initial_state(basis.n_states)
    k = segments or (cfg["run"]["segments"] if cfg.kind == "multistep" else 1)
    rep = cfg.representation()
    pulse = cfg.pulse()
    bounds = cfg["bound_states"]
    bound = bound_state_mask(basis.energies, bounds["threshold"], bounds["im_cutoff"])
    edges = segment_boundaries(cfg, k)
    history: list = []
    jumps: list = []
    times, states = [], []
    psi = psi0
    iterations, residual, method, sol = 0, 0.0, "", None
    for s in range(k):
        start, length = edges[s], edges[s + 1] - edges[s]
        grid = cfg.time_grid(length)
        field_ = pulse if k == 1 else PulseWindow(pulse, start, length)
        op = FloquetOperator(basis.energies, basis.dipole, field_, grid,
                             absorber=cfg.absorber(grid), initial_state=psi, representation=rep)
        try:
            sol, method = _solve(op, psi, cfg, history, segment=s)
        except ConvergenceError as exc:
            raise ConvergenceError(str(exc), exc.history, segment=s if k > 1 else None) from exc
        t, seg = reconstruct_wavefunction(sol, grid, psi, representation=rep.mode,
                                          energies=basis.energies)
        if s > 0:
            # the reconstructed start should reproduce the state handed over
            jumps.append(float(np.max(np.abs(seg[0] - psi))))
            t, seg = t[1:], seg[1:]
        times.append(t + start)
        states.append(seg)
        psi = seg[-1]
        iterations += sol.iterations
        residual = max(residual, sol.residual)
    eps = initial_residue(states[0][0], psi0)
    times, states = np.concatenate(times), np.concatenate(states)
    series = transition_probabilities(times, states, bound)
    return CatmResult(series, states, eps, iterations, residual, sol.energy, method, history,
                      k, edges, jumps)


def initial_residue(start, psi0) -> float:
    """Residue of the reconstructed ``Psi(0)``.

    For a single basis state this is the largest unwanted squared component;
    for a superposition, the largest squared deviation from ``psi0``.
    """
    psi0 = np.asarray(psi0)
    i = int(np.argmax(np.abs(psi0)))
    if np.count_nonzero(psi0) == 1:
        return residue_epsilon(start, i)
    return float(np.max(np.abs(start - psi0) ** 2))


def run_steps(cfg: ScenarioConfig, method: str, basis=None):
    """Step-by-step reference run; returns a probability series."""
    basis = basis or cfg.basis()
    psi0 = cfg.initial_state(basis.n_states)
    bounds = cfg["bound_states"]
    bound = bound_state_mask(basis.energies, bounds["threshold"], bounds["im_cutoff"])
    pulse = cfg.pulse()
    if method == "sod":
        h = MolecularHamiltonian(basis.energies, basis.dipole, pulse)
        times, states = sod_propagate(h, psi0, cfg.step_config())
    elif method == "oracle":
        h = MolecularHamiltonian(basis.energies, basis.dipole, pulse)
        steps = cfg.step_config(cfg["propagation"]["oracle_steps"])
        n_rec = max(1, min(steps.n_steps, cfg["propagation"]["n_steps"]
                           // cfg["propagation"]["record_every"]))
        steps = StepConfig(steps.n_steps, steps.duration, max(1, steps.n_steps // n_rec))
        times, states = dense_expm_oracle(h, psi0, steps)
    elif method == "split":
        grid, model = cfg.spatial()
        on_grid = basis.to_grid(psi0).reshape(2, grid.n_points)
        times, grid_states = split_operator_propagate(grid, model, pulse, on_grid,
                                                      cfg.step_config())
        states = np.array([basis.coefficients(s.ravel()) for s in grid_states])
    else:
        raise ConfigError(f"unknown method {method!r}", "run.methods")
    return transition_probabilities(times, states, bound)


def _write_history(history, path):
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        fh.write("segment,iteration,residual,h_eff_real,h_eff_imag\n")
        for seg, it, res, h in history:
            fh.write(f"{seg},{it},{res:.6e},{complex(h).real:.15e},{complex(h).imag:.15e}\n")


def _final(series) -> dict:
    return {
        "t": float(series.times[-1]),
        "populations": [float(p) for p in series.final],
        "P_diss": series.final_dissociation,
        "norm": float(series.norm[-1]),
    }


def _scan_point(cfg: ScenarioConfig, basis, value):
    section = "pulse" if cfg.kind == "scan-e0" else "absorber"
    point = cfg.with_updates(**{section: {"amplitude": value}, "run": {"kind": "catm"}})
    try:
        res = run_catm(point, basis)
    except ConvergenceError as exc:
        return {"value": value, "converged": False, "iterations": len(exc.history),
                "epsilon": None, "P_diss": None, "residual": exc.history[-1][1]
                if exc.history else None, "method": point["solver"]["method"]}
    return {"value": value, "converged": True, "iterations": res.iterations,
            "epsilon": res.epsilon, "P_diss": res.series.final_dissociation,
            "residual": res.residual, "method": res.method}


@dataclass
class RunReport:
    kind: str
    out_dir: Path
    converged: bool
    summary: dict
    files: list


def run_scenario(cfg: ScenarioConfig, out_dir) -> RunReport:
    """Execute the configured pipeline and write its output files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    kind = cfg.kind
    summary: dict = {"kind": kind, "schema_version": SCHEMA_VERSION}
    files: list[Path] = []
    converged = True
    basis = cfg.basis()
    if kind in ("catm", "multistep"):
        try:
            res = run_catm(cfg, basis)
        except ConvergenceError as exc:
            converged = False
            _write_history([(exc.segment or 0, *h) for h in exc.history], out / "convergence.csv")
            summary.update(converged=False, error=str(exc), segment=exc.segment)
        else:
            files.append(emit_probabilities(records_from_series(res.series),
                                            out / "probabilities.csv"))
            _write_history(res.history, out / "convergence.csv")
            summary.update(
                converged=True, final=_final(res.series), epsilon=res.epsilon,
                iterations=res.iterations, residual=res.residual, method=res.method,
                energy=[res.energy.real, res.energy.imag], segments=res.segments,
                boundaries=res.boundaries,
            )
        files.append(out / "convergence.csv")
    elif kind in ("sod", "split", "oracle"):
        series = run_steps(cfg, kind, basis)
        files.append(emit_probabilities(records_from_series(series), out / "probabilities.csv"))
        summary.update(converged=True, final=_final(series))
    elif kind == "compare":
        finals = {}
        for method in cfg["run"]["methods"]:
            if method == "catm":
                try:
                    series = run_catm(cfg, basis, segments=1).series
                except ConvergenceError as exc:
                    converged = False
                    summary["catm_error"] = str(exc)
                    continue
            else:
                series = run_steps(cfg, method, basis)
            files.append(emit_probabilities(records_from_series(series),
                                            out / f"probabilities_{method}.csv"))
            finals[method] = _final(series)
        summary.update(converged=converged, final=finals, diff=_compare(finals))
    else:
        values = [float(v) for v in cfg["run"]["scan_values"]]
        with ThreadPoolExecutor(max_workers=int(cfg["run"]["workers"])) as pool:
            rows = list(pool.map(lambda v: _scan_point(cfg, basis, v), values))
        path = out / "scan.csv"
        with path.open("w", encoding="utf-8", newline="") as fh:
            fh.write("value,converged,iterations,epsilon,P_diss,residual,method\n")
            for r in rows:
                cells = [f"{r['value']:.11e}", str(int(r["converged"])), str(r["iterations"])]
                cells += ["" if r[k] is None else f"{r[k]:.11e}"
                          for k in ("epsilon", "P_diss", "residual")]
                fh.write(",".join(cells + [r["method"]]) + "\n")
        files.append(path)
        summary.update(converged=True, points=rows)
    summary["wall_time"] = time.perf_counter() - start
    summary_path = out / "summary.json"
    summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n",
                            encoding="utf-8")
    files.append(summary_path)
    return RunReport(kind, out, converged, summary, files)


def _compare(finals: dict, floor: float = 1e-4) -> dict:
    """Max relative deviation of each method's final probabilities from the reference."""
    if not finals:
        return {}
    reference = "oracle" if "oracle" in finals else next(iter(finals))
    ref = np.array(finals[reference]["populations"] + [finals[reference]["P_diss"]])
    mask = np.abs(ref) >= floor
    out = {"reference": reference}
    for method, data in finals.items():
        if method == reference:
            continue
        values = np.array(data["populations"] + [data["P_diss"]])
        rel = np.abs(values[mask] - ref[mask]) / np.abs(ref[mask])
        out[method] = float(rel.max()) if rel.size else 0.0
    return out


def multistep_propagate(cfg: ScenarioConfig, segments: int, basis=None) -> CatmResult:
    """CATM over ``segments`` successive windows of the physical interval."""
    cfg = cfg.with_updates(run={"kind": "multistep", "segments": segments})
    return run_catm(cfg, basis, segments)
