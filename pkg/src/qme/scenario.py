"""JSON scenario files: validation, execution, artifact writing and self-checks.

A scenario describes a system (named builder or explicit matrices), a solver,
a time grid and a list of outputs. Complex numbers are ``[re, im]`` pairs and
matrices are row-major nested lists; 2x2 operators may also be given by name
(``sigma_x``, ``sigma_plus``, ...).
"""
import hashlib
import inspect
import json
import math
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .correlations import default_taus, emission_spectrum, steady_correlation
from .errors import ConfigError
from .floquet import (
    FloquetProblem,
    local_maxima,
    quasi_energies_hf,
    quasi_energies_propagator,
    quasi_energy_distance,
    time_averaged_probability,
    transition_probability,
)
from .liouville import LindbladChannel, build_liouvillian, hamiltonian_superoperator
from .mcwf import TrajectoryConfig, ensemble_average
from .models import BUILDERS, SIGMA_MINUS, SIGMA_PLUS, Model, marginal_purity
from .operators import SIGMA_X, SIGMA_Y, SIGMA_Z, ket2dm, purity
from .propagation import (
    TimeDependentGenerator,
    TimeGrid,
    Trajectory,
    expm_trajectory,
    generator_norm,
    generator_rhs,
    propagate_piecewise,
    propagator,
    rk45_propagate,
    semigroup_propagate,
    spectral_solution,
    trotter_propagate,
    trotter_step,
)
from .redfield import (
    CouplingSpec,
    OhmicSpectrum,
    TabulatedSpectrum,
    bloch_redfield_tensor,
    eigenframe,
    pauli_propagate,
    pauli_rates,
)

SOLVERS = ("expm", "spectral", "semigroup", "trotter", "rk45", "piecewise", "mcwf",
           "bloch_redfield", "pauli", "floquet")
LINDBLAD_SOLVERS = ("expm", "spectral", "semigroup", "trotter", "rk45", "piecewise", "mcwf")
DETERMINISTIC_LINDBLAD = ("expm", "spectral", "semigroup", "trotter", "rk45", "piecewise")
TASKS = ("dynamics", "purity_sweep")
OUTPUT_KINDS = ("populations", "coherences", "expectation", "purity", "correlation", "spectrum",
                "quasi_energies", "transition_probability")
TOP_KEYS = {"name", "description", "task", "system", "solver", "options", "times", "initial_state",
            "seed", "outputs", "checks", "correlation", "sweep"}
NAMED_OPERATORS = {
    "sigma_x": SIGMA_X, "sigma_y": SIGMA_Y, "sigma_z": SIGMA_Z,
    "sigma_plus": SIGMA_PLUS, "sigma_minus": SIGMA_MINUS,
}
MANIFEST = "manifest.json"
PIECEWISE_STEP_BOUND = 0.1


# ---------------------------------------------------------------- parsing

def _complex(x, key):
    if isinstance(x, bool):
        raise ConfigError(f"{key}: expected a number, got {x!r}", key)
    if isinstance(x, (int, float)):
        return complex(x)
    if isinstance(x, list) and len(x) == 2 and all(isinstance(v, (int, float)) for v in x):
        return complex(x[0], x[1])
    raise ConfigError(f"{key}: expected a number or [re, im] pair, got {x!r}", key)


def parse_matrix(x, key, d=None):
    """Matrix from nested lists or an operator name."""
    if isinstance(x, str):
        if x == "identity":
            if d is None:
                raise ConfigError(f"{key}: 'identity' needs a known dimension", key)
            return np.eye(d, dtype=complex)
        if x not in NAMED_OPERATORS:
            raise ConfigError(f"{key}: unknown operator name {x!r}", key)
        m = NAMED_OPERATORS[x].copy()
    else:
        if not isinstance(x, list) or not x or not all(isinstance(r, list) for r in x):
            raise ConfigError(f"{key}: expected a row-major nested list", key)
        if len({len(r) for r in x}) != 1:
            raise ConfigError(f"{key}: rows have different lengths", key)
        m = np.array([[_complex(v, f"{key}[{i}][{j}]") for j, v in enumerate(r)]
                      for i, r in enumerate(x)], dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ConfigError(f"{key}: matrix must be square, got shape {m.shape}", key)
    if d is not None and m.shape[0] != d:
        raise ConfigError(f"{key}: expected a {d}x{d} matrix, got {m.shape[0]}x{m.shape[1]}", key)
    return m


def parse_vector(x, key, d=None):
    if not isinstance(x, list) or not x:
        raise ConfigError(f"{key}: expected a list", key)
    v = np.array([_complex(c, f"{key}[{i}]") for i, c in enumerate(x)])
    if d is not None and len(v) != d:
        raise ConfigError(f"{key}: expected length {d}, got {len(v)}", key)
    return v


def _number(cfg, name, key, positive=False, nonneg=False, integer=False, default=None):
    if name not in cfg:
        if default is not None:
            return default
        raise ConfigError(f"{key}.{name}: required", f"{key}.{name}")
    v = cfg[name]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{key}.{name}: expected a finite number, got {v!r}", f"{key}.{name}")
    if integer and int(v) != v:
        raise ConfigError(f"{key}.{name}: expected an integer, got {v!r}", f"{key}.{name}")
    if positive and v <= 0:
        raise ConfigError(f"{key}.{name}: must be positive", f"{key}.{name}")
    if nonneg and v < 0:
        raise ConfigError(f"{key}.{name}: must be non-negative", f"{key}.{name}")
    return int(v) if integer else float(v)


def _dict(cfg, name, key, required=True):
    v = cfg.get(name)
    if v is None:
        if required:
            raise ConfigError(f"{key}{name}: required", f"{key}{name}")
        return {}
    if not isinstance(v, dict):
        raise ConfigError(f"{key}{name}: expected an object", f"{key}{name}")
    return v


def _range(cfg, key):
    """``{start, stop, points}`` or ``{start, stop, step}`` -> array."""
    start = _number(cfg, "start", key)
    stop = _number(cfg, "stop", key)
    if stop <= start:
        raise ConfigError(f"{key}.stop: must exceed start", f"{key}.stop")
    if "points" in cfg:
        return np.linspace(start, stop, _number(cfg, "points", key, integer=True, positive=True))
    step = _number(cfg, "step", key, positive=True)
    n = int(round((stop - start) / step))
    return start + step * np.arange(n + 1)


def _spectrum(spec, key):
    if not isinstance(spec, dict):
        raise ConfigError(f"{key}: expected an object", key)
    kind = spec.get("kind")
    if kind == "ohmic":
        try:
            return OhmicSpectrum(_number(spec, "eta", key, nonneg=True),
                                 _number(spec, "omega_c", key, positive=True),
                                 _number(spec, "beta", key, positive=True))
        except ValueError as e:
            raise ConfigError(f"{key}: {e}", key) from None
    if kind == "tabulated":
        w = spec.get("omegas")
        s = spec.get("values")
        if not isinstance(w, list) or not isinstance(s, list) or len(w) != len(s) or len(w) < 4:
            raise ConfigError(f"{key}: tabulated spectra need equal-length omegas/values (>= 4)", key)
        return TabulatedSpectrum(tuple(map(float, w)), tuple(map(float, s)))
    raise ConfigError(f"{key}.kind: expected 'ohmic' or 'tabulated', got {kind!r}", f"{key}.kind")


def _drive(items, d, key):
    """``[{hamiltonian, omega, phase}]`` -> coherent drive terms ``cos(w t + phase) H``."""
    out = []
    for i, item in enumerate(items):
        k = f"{key}[{i}]"
        if not isinstance(item, dict):
            raise ConfigError(f"{k}: expected an object", k)
        h = parse_matrix(item.get("hamiltonian"), f"{k}.hamiltonian", d)
        w = _number(item, "omega", k)
        ph = _number(item, "phase", k, default=0.0)
        out.append((hamiltonian_superoperator(h), lambda t, w=w, ph=ph: np.cos(w * t + ph)))
    return out


# ---------------------------------------------------------------- scenario

@dataclass
class Scenario:
    """A validated scenario; ``model`` holds the assembled matrices."""

    name: str
    task: str
    solver: str | None
    model: Model | None
    config: dict
    options: dict = field(default_factory=dict)
    times: np.ndarray | None = None
    seed: int | None = None
    outputs: list = field(default_factory=list)
    checks: list = field(default_factory=list)
    source_hash: str = ""

    @property
    def environment(self):
        m = self.model
        if m is None:
            return None
        if m.floquet is not None:
            return "floquet"
        return "couplings" if m.couplings else "channels"


def _build_named(system):
    name = system["builder"]
    if name not in BUILDERS:
        raise ConfigError(f"system.builder: unknown builder {name!r}; known: {sorted(BUILDERS)}",
                          "system.builder")
    params = _dict(system, "params", "system.", required=False)
    fn = BUILDERS[name]
    allowed = inspect.signature(fn).parameters
    for k, v in params.items():
        if k not in allowed:
            raise ConfigError(f"system.params.{k}: not a parameter of builder {name!r}", f"system.params.{k}")
        if isinstance(v, bool) and k != "excited":
            raise ConfigError(f"system.params.{k}: expected a number", f"system.params.{k}")
    for k in ("gamma", "gamma_down", "gamma_0", "eta"):
        if k in params and params[k] is not None and params[k] < 0:
            raise ConfigError(f"system.params.{k}: rate must be non-negative", f"system.params.{k}")
    try:
        return fn(**params)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"system.params: {e}", "system.params") from None


def _build_explicit(system):
    d = _number(system, "dimension", "system", integer=True, positive=True)
    h = parse_matrix(system.get("hamiltonian"), "system.hamiltonian", d)
    if np.linalg.norm(h - h.conj().T) > 1e-10:
        raise ConfigError("system.hamiltonian: must be Hermitian", "system.hamiltonian")
    envs = [k for k in ("channels", "couplings", "floquet") if k in system]
    if len(envs) != 1:
        raise ConfigError(f"system: exactly one of channels/couplings/floquet is required, got {envs}", "system")
    env = envs[0]
    if env == "channels":
        chans = []
        items = system["channels"]
        if not isinstance(items, list):
            raise ConfigError("system.channels: expected a list", "system.channels")
        for i, c in enumerate(items):
            k = f"system.channels[{i}]"
            if not isinstance(c, dict):
                raise ConfigError(f"{k}: expected an object", k)
            label = c.get("name", str(i))
            op = parse_matrix(c.get("operator"), f"{k}.operator", d)
            rate = c.get("rate", 1.0)
            if isinstance(rate, bool) or not isinstance(rate, (int, float)) or not math.isfinite(rate):
                raise ConfigError(f"channel {label!r}: rate must be a finite number", f"{k}.rate")
            if rate < 0:
                raise ConfigError(f"channel {label!r}: rate must be non-negative, got {rate}", f"{k}.rate")
            chans.append(LindbladChannel(op, rate))
        model = Model(h, chans)
        if "drive" in system:
            if not isinstance(system["drive"], list):
                raise ConfigError("system.drive: expected a list", "system.drive")
            static = build_liouvillian(h, chans)
            model.generator = TimeDependentGenerator(static, _drive(system["drive"], d, "system.drive"))
        return model
    if env == "couplings":
        cps = []
        items = system["couplings"]
        if not isinstance(items, list) or not items:
            raise ConfigError("system.couplings: expected a non-empty list", "system.couplings")
        for i, c in enumerate(items):
            k = f"system.couplings[{i}]"
            if not isinstance(c, dict):
                raise ConfigError(f"{k}: expected an object", k)
            op = parse_matrix(c.get("operator"), f"{k}.operator", d)
            if np.linalg.norm(op - op.conj().T) > 1e-10:
                raise ConfigError(f"{k}.operator: coupling operators must be Hermitian", f"{k}.operator")
            cps.append(CouplingSpec(op, _spectrum(c.get("spectrum"), f"{k}.spectrum")))
        return Model(h, couplings=cps)
    fl = _dict(system, "floquet", "system.")
    hp = parse_matrix(fl.get("h_plus"), "system.floquet.h_plus", d)
    omega = _number(fl, "omega", "system.floquet", positive=True)
    n = _number(fl, "n_harmonics", "system.floquet", integer=True, positive=True, default=4)
    return Model(h, floquet=FloquetProblem(h, hp, omega, n_harmonics=n))


def _initial_state(cfg, model, key="initial_state"):
    d = model.dim
    spec = cfg.get(key)
    if spec is None:
        if model.rho0 is None:
            raise ConfigError(f"{key}: required for this system", key)
        return model.rho0, model.psi0
    if not isinstance(spec, dict) or len(spec) != 1:
        raise ConfigError(f"{key}: expected exactly one of basis/ket/populations/matrix", key)
    (kind, val), = spec.items()
    if kind == "basis":
        if isinstance(val, bool) or not isinstance(val, int) or not 0 <= val < d:
            raise ConfigError(f"{key}.basis: expected an index in [0, {d})", f"{key}.basis")
        psi = np.zeros(d, dtype=complex)
        psi[val] = 1.0
        return ket2dm(psi), psi
    if kind == "ket":
        psi = parse_vector(val, f"{key}.ket", d)
        n = np.linalg.norm(psi)
        if n == 0:
            raise ConfigError(f"{key}.ket: zero vector", f"{key}.ket")
        psi = psi / n
        return ket2dm(psi), psi
    if kind == "populations":
        p = parse_vector(val, f"{key}.populations", d).real
        if np.any(p < 0) or abs(p.sum() - 1) > 1e-10:
            raise ConfigError(f"{key}.populations: must be a probability vector", f"{key}.populations")
        return np.diag(p).astype(complex), None
    if kind == "matrix":
        rho = parse_matrix(val, f"{key}.matrix", d)
        if np.linalg.norm(rho - rho.conj().T) > 1e-10 or abs(np.trace(rho) - 1) > 1e-10 \
                or np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() < -1e-10:
            raise ConfigError(f"{key}.matrix: not a density operator", f"{key}.matrix")
        return rho, None
    raise ConfigError(f"{key}.{kind}: unknown initial-state form", f"{key}.{kind}")


def _times(cfg):
    t = _dict(cfg, "times", "")
    t0 = _number(t, "t0", "times", default=0.0)
    t1 = _number(t, "t1", "times")
    pts = _number(t, "points", "times", integer=True)
    if t1 <= t0:
        raise ConfigError("times.t1: must exceed t0", "times.t1")
    if pts < 2:
        raise ConfigError("times.points: need at least 2", "times.points")
    return np.linspace(t0, t1, pts)


def _check_solver(solver, model, scn_cfg):
    env = "floquet" if model.floquet is not None else ("couplings" if model.couplings else "channels")
    need = {"floquet": ("floquet",), "couplings": ("bloch_redfield", "pauli")}.get(env, LINDBLAD_SOLVERS)
    if solver not in need:
        raise ConfigError(f"solver: {solver!r} is not consistent with a system described by {env}", "solver")
    if model.generator is not None and solver not in ("piecewise", "rk45"):
        raise ConfigError(f"solver: {solver!r} needs a time-independent generator; use piecewise or rk45",
                          "solver")


def _validate_options(solver, opts, times):
    key = "options"
    out = dict(opts)
    dt_out = times[1] - times[0] if times is not None else None
    if solver == "mcwf":
        dt = _number(opts, "dt", key, positive=True)
        n = _number(opts, "trajectories", key, positive=True, integer=True)
        steps = (times[-1] - times[0]) / dt
        stride = dt_out / dt
        if abs(steps - round(steps)) > 1e-6 or abs(stride - round(stride)) > 1e-6:
            raise ConfigError("options.dt: output times must fall on the trajectory step grid", "options.dt")
        out.update(dt=dt, trajectories=n)
    elif solver == "piecewise":
        # without dt, solve_dynamics picks substeps from the generator norm
        if "dt" in opts:
            dt = _number(opts, "dt", key, positive=True)
            stride = dt_out / dt
            if abs(stride - round(stride)) > 1e-6:
                raise ConfigError("options.dt: must divide the output spacing", "options.dt")
            out["dt"] = dt
    elif solver == "trotter":
        out["substeps"] = _number(opts, "substeps", key, positive=True, integer=True, default=1)
        out["correction"] = bool(opts.get("correction", False))
    elif solver == "rk45":
        out["rtol"] = _number(opts, "rtol", key, positive=True, default=1e-10)
        out["atol"] = _number(opts, "atol", key, positive=True, default=1e-12)
    elif solver == "bloch_redfield":
        if opts.get("secular_cutoff") is not None:
            out["secular_cutoff"] = _number(opts, "secular_cutoff", key, nonneg=True)
    return out


def _check_path(p, key):
    if not isinstance(p, str) or not p:
        raise ConfigError(f"{key}: expected a relative file path", key)
    path = Path(p)
    if path.is_absolute() or ".." in path.parts or p == MANIFEST:
        raise ConfigError(f"{key}: output paths must stay inside the output directory", key)
    return p


def validate_config(cfg, source_hash=""):
    """Check a parsed JSON document and assemble its model.

    Raises
    ------
    ConfigError
        With ``key`` naming the offending entry.
    """
    if not isinstance(cfg, dict):
        raise ConfigError("scenario must be a JSON object", "")
    for k in cfg:
        if k not in TOP_KEYS:
            raise ConfigError(f"{k}: unknown key", k)
    name = cfg.get("name")
    if not isinstance(name, str) or not name:
        raise ConfigError("name: required string", "name")
    task = cfg.get("task", "dynamics")
    if task not in TASKS:
        raise ConfigError(f"task: expected one of {TASKS}, got {task!r}", "task")
    outputs = cfg.get("outputs")
    if not isinstance(outputs, list) or not outputs:
        raise ConfigError("outputs: expected a non-empty list", "outputs")
    checks = cfg.get("checks", [])
    if not isinstance(checks, list) or not all(isinstance(c, dict) and c.get("kind") in CHECKS for c in checks):
        raise ConfigError(f"checks: each entry needs a kind in {sorted(CHECKS)}", "checks")
    seed = cfg.get("seed")
    if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int) or seed < 0):
        raise ConfigError("seed: expected a non-negative integer", "seed")

    if task == "purity_sweep":
        system = _dict(cfg, "system", "")
        if system.get("builder") != "bell_pair":
            raise ConfigError("system.builder: purity_sweep needs the 'bell_pair' builder", "system.builder")
        sweep = _range(_dict(cfg, "sweep", ""), "sweep")
        for i, o in enumerate(outputs):
            if not isinstance(o, dict) or o.get("kind") != "purity":
                raise ConfigError(f"outputs[{i}].kind: purity_sweep only writes purity", f"outputs[{i}].kind")
            _check_path(o.get("path"), f"outputs[{i}].path")
        return Scenario(name, task, None, None, cfg, times=sweep, seed=seed, outputs=outputs,
                        checks=checks, source_hash=source_hash)

    system = _dict(cfg, "system", "")
    if "builder" in system:
        extra = {"channels", "couplings", "floquet", "hamiltonian"} & set(system)
        if extra:
            raise ConfigError(f"system: builder systems cannot also set {sorted(extra)}", "system")
        model = _build_named(system)
    else:
        model = _build_explicit(system)
    solver = cfg.get("solver")
    if solver not in SOLVERS:
        raise ConfigError(f"solver: expected one of {SOLVERS}, got {solver!r}", "solver")
    _check_solver(solver, model, cfg)
    if solver == "mcwf" and seed is None:
        raise ConfigError("seed: required for mcwf scenarios", "seed")
    times = _times(cfg) if solver != "floquet" or "times" in cfg else None
    if solver != "floquet":
        model.rho0, model.psi0 = _initial_state(cfg, model)
        if solver == "mcwf" and model.psi0 is None:
            evals, evecs = np.linalg.eigh(model.rho0)
            if evals[-1] < 1 - 1e-10:
                raise ConfigError("initial_state: mcwf needs a pure initial state", "initial_state")
            model.psi0 = evecs[:, -1]
    opts = _validate_options(solver, _dict(cfg, "options", "", required=False), times)

    for i, o in enumerate(outputs):
        k = f"outputs[{i}]"
        if not isinstance(o, dict):
            raise ConfigError(f"{k}: expected an object", k)
        kind = o.get("kind")
        if kind not in OUTPUT_KINDS:
            raise ConfigError(f"{k}.kind: expected one of {OUTPUT_KINDS}, got {kind!r}", f"{k}.kind")
        _check_path(o.get("path"), f"{k}.path")
        floquet_kind = kind in ("quasi_energies", "transition_probability")
        if floquet_kind != (solver == "floquet"):
            raise ConfigError(f"{k}.kind: {kind!r} does not apply to solver {solver!r}", f"{k}.kind")
        if kind == "expectation":
            parse_matrix(o.get("observable"), f"{k}.observable", model.dim)
        if kind in ("correlation", "spectrum"):
            if solver not in LINDBLAD_SOLVERS or model.generator is not None:
                raise ConfigError(f"{k}.kind: correlations need a time-independent Lindblad system", f"{k}.kind")
            _correlation_block(cfg, model.dim)
        if kind == "transition_probability" and "sweep" not in cfg and times is None:
            raise ConfigError(f"{k}: needs either times or a sweep block", k)
        for key in ("alpha", "beta"):
            if key in o and not (isinstance(o[key], int) and 0 <= o[key] < model.dim):
                raise ConfigError(f"{k}.{key}: state index out of range", f"{k}.{key}")
    if solver == "floquet" and "sweep" in cfg:
        _floquet_sweep(cfg, system)
    return Scenario(name, task, solver, model, cfg, opts, times, seed, outputs, checks, source_hash)


def _correlation_block(cfg, d):
    c = _dict(cfg, "correlation", "")
    a = parse_matrix(c.get("a"), "correlation.a", d)
    b = parse_matrix(c.get("b"), "correlation.b", d)
    taus = None
    if "taus" in c:
        t = _dict(c, "taus", "correlation.")
        taus = np.linspace(0.0, _number(t, "t1", "correlation.taus", positive=True),
                           _number(t, "points", "correlation.taus", integer=True, positive=True))
    omegas = _range(_dict(c, "omegas", "correlation."), "correlation.omegas")
    return a, b, bool(c.get("connected", False)), taus, omegas


def _floquet_sweep(cfg, system):
    sw = _dict(cfg, "sweep", "")
    omegas = _range(_dict(sw, "omegas", "sweep."), "sweep.omegas")
    couplings = sw.get("couplings")
    if couplings is not None:
        if "builder" not in system or "coupling" not in inspect.signature(BUILDERS[system["builder"]]).parameters:
            raise ConfigError("sweep.couplings: needs a builder with a 'coupling' parameter", "sweep.couplings")
        if not isinstance(couplings, list) or not couplings:
            raise ConfigError("sweep.couplings: expected a non-empty list", "sweep.couplings")
        for i, v in enumerate(couplings):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(f"sweep.couplings[{i}]: expected a number", f"sweep.couplings[{i}]")
    return omegas, couplings


def load_scenario(path):
    """Read and validate a scenario file."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e.strerror}", "path") from None
    try:
        cfg = json.loads(raw)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise ConfigError(f"{path}: invalid JSON ({e})", "json") from None
    return validate_config(cfg, hashlib.sha256(raw).hexdigest())


def bundled_scenarios():
    """``name -> path`` of the scenario files shipped with the package."""
    root = resources.files("qme") / "scenarios"
    return {Path(p.name).stem: Path(str(p)) for p in sorted(root.iterdir(), key=lambda p: p.name)
            if p.name.endswith(".json")}


def resolve_scenario(ref):
    """A file path, or the name of a bundled scenario."""
    p = Path(ref)
    if p.exists():
        return p
    bundled = bundled_scenarios()
    if ref in bundled:
        return bundled[ref]
    raise ConfigError(f"no scenario file or bundled scenario named {ref!r}", "path")


# ---------------------------------------------------------------- solving

def _floquet_problem(scn, **overrides):
    system = scn.config["system"]
    if not overrides:
        return scn.model.floquet
    params = dict(system.get("params", {}), **overrides)
    return BUILDERS[system["builder"]](**params).floquet


def solve_dynamics(scn: Scenario, solver=None, n_trajectories=None, seed=None):
    """Trajectory of ``scn`` under ``solver`` (default: the scenario's own).

    Bloch-Redfield and Pauli results are in the Hamiltonian eigenbasis.
    """
    solver = solver or scn.solver
    m = scn.model
    times = scn.times
    t0 = times[0]
    dt_out = times[1] - times[0]
    steps = len(times) - 1
    rho0 = m.rho0
    opts = scn.options if solver == scn.solver else _validate_options(solver, {}, times)
    if solver == "bloch_redfield":
        frame = eigenframe(m.hamiltonian)
        g = bloch_redfield_tensor(m.hamiltonian, m.couplings, secular_cutoff=opts.get("secular_cutoff"))
        traj = expm_trajectory(g, frame.to_eigenbasis(rho0), times - t0)
        return Trajectory(times, traj.states)
    if solver == "pauli":
        frame = eigenframe(m.hamiltonian)
        p0 = np.real(np.diag(frame.to_eigenbasis(rho0)))
        p = pauli_propagate(pauli_rates(m.hamiltonian, m.couplings), p0, times - t0)
        return Trajectory(times, np.array([np.diag(x).astype(complex) for x in p]))
    if solver == "piecewise":
        gen = m.generator or TimeDependentGenerator(m.liouvillian())
        if "dt" in opts:
            sub = int(round(dt_out / opts["dt"]))
        else:
            norm = max(generator_norm(gen(t)) for t in times)
            sub = max(1, int(np.ceil(dt_out * norm / PIECEWISE_STEP_BOUND)))
        traj = propagate_piecewise(gen, rho0, TimeGrid(t0, dt_out / sub, steps * sub))
        return Trajectory(times, traj.states[::sub])
    if solver == "rk45":
        rhs = generator_rhs(m.generator) if m.generator is not None else m.liouvillian()
        traj = rk45_propagate(rhs, rho0, (t0, times[-1]), t_eval=times, rtol=opts["rtol"], atol=opts["atol"])
        return Trajectory(times, traj.states)
    if solver == "mcwf":
        dt = opts["dt"]
        n_steps = int(round((times[-1] - t0) / dt))
        cfg = TrajectoryConfig(dt, n_steps, n_trajectories or opts["trajectories"],
                               scn.seed if seed is None else seed, m.hamiltonian, m.channels)
        res = ensemble_average(cfg, m.psi0)
        stride = int(round(dt_out / dt))
        return Trajectory(times, res.mean_state.states[::stride])
    l = m.liouvillian()
    if solver == "expm":
        return Trajectory(times, expm_trajectory(l, rho0, times - t0).states)
    if solver == "spectral":
        return Trajectory(times, spectral_solution(l, rho0, times, t0=t0).states)
    if solver == "semigroup":
        return semigroup_propagate(l, rho0, TimeGrid(t0, dt_out, steps))
    if solver == "trotter":
        l1, l2 = m.split()
        sub = opts.get("substeps", 1)
        step = np.linalg.matrix_power(trotter_step(l1, l2, dt_out / sub, opts.get("correction", False)), sub)
        v = rho0.reshape(-1, order="F")
        states = [rho0]
        for _ in range(steps):
            v = step @ v
            states.append(v.reshape(m.dim, m.dim, order="F"))
        return Trajectory(times, np.array(states))
    raise ConfigError(f"solver: {solver!r} does not produce a trajectory", "solver")


def applicable_solvers(scn: Scenario):
    """Deterministic Lindblad solvers that can run ``scn``."""
    if scn.model is None or scn.environment != "channels":
        return ()
    if scn.model.generator is not None:
        return ("piecewise", "rk45")
    return DETERMINISTIC_LINDBLAD


# ---------------------------------------------------------------- output

def _fmt(x):
    return "%.17g" % x


def write_csv(path, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


def state_table(traj: Trajectory, parts=("populations", "coherences")):
    """Header and rows in the ``t, p_i, re_rho_ij, im_rho_ij`` (i < j) layout."""
    d = traj.states.shape[1]
    iu = np.triu_indices(d, 1)
    header, cols = ["t"], [traj.times]
    if "populations" in parts:
        header += [f"p_{i}" for i in range(d)]
        cols += list(traj.populations().T)
    if "coherences" in parts:
        off = traj.states[:, iu[0], iu[1]]
        header += [f"re_rho_{i}{j}" for i, j in zip(*iu)] + [f"im_rho_{i}{j}" for i, j in zip(*iu)]
        cols += list(off.real.T) + list(off.imag.T)
    return header, np.column_stack(cols)


@dataclass
class RunResult:
    scenario: Scenario
    out_dir: Path
    files: list
    manifest: dict
    context: dict


def run_scenario(scn: Scenario, out_dir, seed=None):
    """Execute ``scn`` and write its outputs plus ``manifest.json`` into ``out_dir``.

    Parameters
    ----------
    scn : Scenario
    out_dir : path-like
    seed : int, optional
        Overrides the scenario seed.

    Returns
    -------
    RunResult
        ``context`` holds the in-memory results used by :func:`run_checks`.
    """
    if seed is not None:
        scn.seed = int(seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    ctx = {}
    files = []
    if scn.task == "purity_sweep":
        thetas = scn.times
        vals = np.array([marginal_purity(t) for t in thetas])
        ctx.update(thetas=thetas, purity=vals)
        for o in scn.outputs:
            write_csv(out / o["path"], ["theta", "purity"], np.column_stack([thetas, vals]))
            files.append(o["path"])
    elif scn.solver == "floquet":
        files += _run_floquet(scn, out, ctx)
    else:
        traj = solve_dynamics(scn)
        ctx["trajectory"] = traj
        for o in scn.outputs:
            files.append(_write_dynamic_output(scn, o, traj, out, ctx))
    wall = time.perf_counter() - start
    manifest = {
        "scenario": scn.name,
        "scenario_sha256": scn.source_hash,
        "seed": scn.seed,
        "solver": scn.solver,
        "solver_options": {k: v for k, v in scn.options.items()},
        "basis": "eigen" if scn.solver in ("bloch_redfield", "pauli") else "computational",
        "library_version": __version__,
        "wall_time_s": wall,
        "outputs": files,
    }
    (out / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return RunResult(scn, out, files, manifest, ctx)


def _write_dynamic_output(scn, o, traj, out, ctx):
    kind = o["kind"]
    path = out / o["path"]
    if kind == "populations":
        write_csv(path, *state_table(traj))
    elif kind == "coherences":
        write_csv(path, *state_table(traj, ("coherences",)))
    elif kind == "expectation":
        obs = parse_matrix(o["observable"], "observable", scn.model.dim)
        e = traj.expectation(obs)
        write_csv(path, ["t", "re", "im"], np.column_stack([traj.times, e.real, e.imag]))
    elif kind == "purity":
        write_csv(path, ["t", "purity"], np.column_stack([traj.times, [purity(r) for r in traj.states]]))
    elif kind in ("correlation", "spectrum"):
        series, spec = _correlation_results(scn, ctx)
        if kind == "correlation":
            write_csv(path, ["tau", "re", "im"], np.column_stack([series.taus, series.values.real,
                                                                 series.values.imag]))
        else:
            write_csv(path, ["omega", "value"], np.column_stack([spec.omegas, spec.values]))
    return o["path"]


def _correlation_results(scn, ctx):
    if "correlation" not in ctx:
        a, b, connected, taus, omegas = _correlation_block(scn.config, scn.model.dim)
        l = scn.model.liouvillian()
        taus = default_taus(l) if taus is None else taus
        series = steady_correlation(l, a, b, taus, connected=connected)
        ctx["correlation"] = series
        ctx["spectrum"] = emission_spectrum(series, omegas)
    return ctx["correlation"], ctx["spectrum"]


def _run_floquet(scn, out, ctx):
    files = []
    p = scn.model.floquet
    for o in scn.outputs:
        path = out / o["path"]
        if o["kind"] == "quasi_energies":
            hf = quasi_energies_hf(p).quasi_energies
            cols, header = [np.arange(p.dim), hf], ["index", "hf"]
            if o.get("propagator", False):
                cols.append(quasi_energies_propagator(p))
                header.append("propagator")
            write_csv(path, header, np.column_stack(cols))
        else:
            alpha, beta = o.get("alpha", 0), o.get("beta", 1)
            if "sweep" in scn.config:
                omegas, couplings = _floquet_sweep(scn.config, scn.config["system"])
                couplings = couplings or [None]
                cols = [omegas]
                for v in couplings:
                    kw = {} if v is None else {"coupling": v}
                    cols.append(np.array([time_averaged_probability(_floquet_problem(scn, omega=float(w), **kw),
                                                                    alpha, beta) for w in omegas]))
                header = ["omega"] + ["p_bar" if v is None else f"p_bar_V{v:g}" for v in couplings]
                ctx["sweep"] = (omegas, couplings, cols[1:])
                write_csv(path, header, np.column_stack(cols))
            else:
                prob = transition_probability(p, alpha, beta, scn.times)
                write_csv(path, ["t", "probability"], np.column_stack([scn.times, prob]))
        files.append(o["path"])
    return files


# ---------------------------------------------------------------- checks

@dataclass
class CheckOutcome:
    kind: str
    passed: bool
    detail: str


def _cptp(scn, ctx, p):
    tol_tr = p.get("trace_tol", 1e-8)
    tol_h = p.get("hermitian_tol", 1e-8)
    tol_e = p.get("eig_tol", 1e-7)
    worst = [0.0, 0.0, 0.0]
    solvers = p.get("solvers", [scn.solver])
    for s in solvers:
        traj = ctx["trajectory"] if s == scn.solver else solve_dynamics(scn, s)
        for rho in traj.states:
            worst[0] = max(worst[0], abs(np.trace(rho) - 1))
            worst[1] = max(worst[1], np.max(np.abs(rho - rho.conj().T)))
            worst[2] = max(worst[2], -np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min())
    ok = worst[0] <= tol_tr and worst[1] <= tol_h and worst[2] <= tol_e
    return ok, f"solvers={solvers} trace={worst[0]:.2e} herm={worst[1]:.2e} min_eig={-worst[2]:.2e}"


def _cross_method(scn, ctx, p):
    tol = p["tol"]
    trajs = {scn.solver: ctx["trajectory"]}
    for s in p["methods"]:
        if s not in trajs:
            trajs[s] = solve_dynamics(scn, s)
    names = list(trajs)
    worst = 0.0
    for i in range(len(names)):
        for j in range(i + 1, len(names)):
            worst = max(worst, np.max(np.abs(trajs[names[i]].populations() - trajs[names[j]].populations())))
    return worst <= tol, f"methods={names} max population deviation {worst:.2e} (tol {tol:g})"


def _final_populations(scn, ctx, p):
    got = ctx["trajectory"].populations()[-1]
    err = np.max(np.abs(got - np.asarray(p["expected"], dtype=float)))
    return err <= p["tol"], f"final populations {np.round(got, 12).tolist()} error {err:.2e}"


def _purity_curve(scn, ctx, p):
    th, vals = ctx["thetas"], ctx["purity"]
    err = np.max(np.abs(vals - (np.cos(th) ** 4 + np.sin(th) ** 4)))
    mid = abs(marginal_purity(np.pi / 4) - 0.5)
    return max(err, mid) <= p["tol"], f"sweep error {err:.2e}, |purity(pi/4) - 1/2| = {mid:.2e}"


def _semigroup_law(scn, ctx, p):
    rng = np.random.default_rng(p.get("seed", 0))
    l = scn.model.liouvillian()
    worst = 0.0
    for s, t in rng.uniform(0, p.get("t_max", 2.0), size=(p.get("samples", 20), 2)):
        worst = max(worst, np.linalg.norm(propagator(l, s) @ propagator(l, t) - propagator(l, s + t), 2))
    return worst <= p["tol"], f"max ||P(s)P(t) - P(s+t)|| = {worst:.2e}"


def trotter_errors(model, rho0, t, slices, correction=False):
    l1, l2 = model.split()
    exact = expm_trajectory(l1 + l2, rho0, [t]).states[0]
    return np.array([np.linalg.norm(trotter_propagate(l1, l2, rho0, t, n, correction) - exact)
                     for n in slices])


def _trotter_convergence(scn, ctx, p):
    slices = p.get("slices", [50, 100, 1000])
    t = scn.times[-1] - scn.times[0]
    errs = trotter_errors(scn.model, scn.model.rho0, t, slices)
    slope = np.polyfit(np.log(t / np.asarray(slices)), np.log(errs), 1)[0]
    lo, hi = p.get("slope", [0.8, 1.2])
    ok = bool(np.all(np.diff(errs) < 0)) and lo <= slope <= hi
    return ok, f"errors {[f'{e:.2e}' for e in errs]} slope {slope:.3f}"


def mcwf_scaling(scn, sizes, seed=None):
    """``RMS_t ||rho_N(t) - rho(t)||_F * sqrt(N)`` for each ensemble size."""
    exact = solve_dynamics(scn, "expm").states
    out = []
    for n in sizes:
        est = solve_dynamics(scn, "mcwf", n_trajectories=n, seed=seed).states
        rms = np.sqrt(np.mean(np.sum(np.abs(est - exact) ** 2, axis=(1, 2))))
        out.append(rms * np.sqrt(n))
    return np.array(out)


def _mcwf_scaling(scn, ctx, p):
    c = mcwf_scaling(scn, p.get("sizes", [100, 400, 1600]))
    ratio = c.max() / c.min()
    return ratio <= p.get("factor", 2.0), f"RMS*sqrt(N) = {np.round(c, 3).tolist()} spread {ratio:.2f}"


def _spectrum_peaks(scn, ctx, p):
    _, spec = _correlation_results(scn, ctx)
    peaks = spec.peaks()
    miss = [w for w in p["expected"] if peaks.size == 0 or np.min(np.abs(peaks - w)) > p["tol"]]
    return not miss, f"peaks {np.round(np.sort(peaks[:len(p['expected']) + 2]), 4).tolist()} missing {miss}"


def _pauli_vs_redfield(scn, ctx, p):
    traj = ctx["trajectory"]
    other = solve_dynamics(scn, "bloch_redfield" if scn.solver == "pauli" else "pauli")
    dev = np.max(np.abs(traj.populations() - other.populations()))
    pauli = traj if scn.solver == "pauli" else other
    pp = pauli.populations()
    simplex = max(np.max(np.abs(pp.sum(axis=1) - 1)), max(0.0, -pp.min()))
    ok = dev <= p["tol"] and simplex <= p.get("simplex_tol", 1e-9)
    return ok, f"max deviation {dev:.2e}, simplex violation {simplex:.2e}"


def _floquet_dual_route(scn, ctx, p):
    base = scn.model.floquet
    kw = {"coupling": p["coupling_ratio"] * base.omega} if "coupling_ratio" in p else {}
    prob = _floquet_problem(scn, **kw)
    a = quasi_energies_hf(prob).quasi_energies
    b = quasi_energies_propagator(prob, steps=p.get("steps", 10000))
    dist = quasi_energy_distance(a, b, prob.omega)
    return dist <= p["tol"], f"quasi-energy mismatch {dist:.2e}"


def _resonance_peaks(scn, ctx, p):
    omegas, couplings, curves = ctx["sweep"]
    h0 = scn.model.floquet.h0
    e = np.linalg.eigvalsh(h0)
    gap = e[p.get("beta", 1)] - e[p.get("alpha", 0)]
    step = omegas[1] - omegas[0]
    report, ok = [], True
    for v, curve in zip(couplings, curves):
        found = omegas[local_maxima(curve)]
        for n in p.get("orders", [1, 2]):
            hit = found.size and np.min(np.abs(found - gap / n)) <= step * (1 + 1e-9)
            ok &= bool(hit)
            report.append(f"V={v} n={n}: {'ok' if hit else 'missing'}")
    return ok, "; ".join(report)


CHECKS = {
    "cptp": _cptp,
    "cross_method": _cross_method,
    "final_populations": _final_populations,
    "purity_curve": _purity_curve,
    "semigroup_law": _semigroup_law,
    "trotter_convergence": _trotter_convergence,
    "mcwf_scaling": _mcwf_scaling,
    "spectrum_peaks": _spectrum_peaks,
    "pauli_vs_redfield": _pauli_vs_redfield,
    "floquet_dual_route": _floquet_dual_route,
    "resonance_peaks": _resonance_peaks,
}


def run_checks(result: RunResult):
    """Evaluate every embedded check of a finished run."""
    out = []
    for c in result.scenario.checks:
        params = {k: v for k, v in c.items() if k != "kind"}
        ok, detail = CHECKS[c["kind"]](result.scenario, result.context, params)
        out.append(CheckOutcome(c["kind"], bool(ok), detail))
    return out
