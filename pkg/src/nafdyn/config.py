"""Run configuration: a TOML file with [model], [method], [run] and [observables]."""
import math
import sys
from dataclasses import dataclass, field, replace

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib
import tomli_w

from . import units
from .dynamics import ELECTRONIC_VARIANTS, METHOD_NAMES, make_method
from .errors import ConfigError
from .estimators import ObservableRequest
from .models import SCATTERING_MODELS, build_model

RUN_METHODS = METHOD_NAMES + ("exact_grid",)
REPRESENTATIONS = ("diabatic", "adiabatic")

_METHOD_KEYS = {"name", "gamma", "electronic", "hard_wall"}
_RUN_KEYS = {"dt", "dt_fs", "t_final", "t_final_fs", "record_every", "n_traj", "seed", "workers",
             "chunk_size", "occupied_state", "occupation", "output", "grid_dt"}
_OBSERVABLE_KEYS = {
    "population": {"representation", "states"},
    "coherence": {"representation", "pairs"},
    "population_difference": {"representation", "states"},
    "mean_R": {"dofs"},
    "mean_P": {"dofs"},
    "momentum_distribution": {"damping", "p_min", "p_max", "n_points", "dof"},
    "scattering": set(),
}


@dataclass(frozen=True)
class RunSpec:
    model: dict
    method: str
    gamma: float = None
    electronic: str = "diabatic_transform"
    hard_wall: bool = False
    dt: float = None
    t_final: float = None
    auto_t_final: bool = True
    record_every: int = None
    n_traj: int = None
    seed: int = 0
    workers: int = 1
    chunk_size: int = 500
    occupation: tuple = None  # (0-based state, representation)
    observables: tuple = ()
    output: str = None
    grid_dt: float = 0.5
    F: int = field(default=None, compare=False)

    @property
    def n_steps(self):
        return max(1, int(math.ceil(self.t_final / self.dt - 1e-9)))

    @property
    def n_records(self):
        return len(record_steps(self))


def record_steps(spec):
    steps = list(range(0, spec.n_steps + 1, spec.record_every))
    if steps[-1] != spec.n_steps:
        steps.append(spec.n_steps)
    return steps


def _check_keys(section, table, allowed):
    unknown = sorted(set(table) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(unknown)}")


def _positive(name, value, kind=float):
    try:
        value = kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a number") from None
    if not value > 0:
        raise ConfigError(f"{name} must be positive")
    return value


def _index_list(name, values, limit):
    if not isinstance(values, (list, tuple)):
        raise ConfigError(f"{name} must be a list of 1-based indices")
    out = []
    for v in values:
        if not isinstance(v, int) or not 1 <= v <= limit:
            raise ConfigError(f"{name}: index {v!r} outside 1..{limit}")
        out.append(v - 1)
    return tuple(out)


def _parse_observables(table, model, method):
    if not isinstance(table, dict):
        raise ConfigError("[observables] must be a table")
    _check_keys("observables", table, _OBSERVABLE_KEYS)
    requests = []
    for kind in _OBSERVABLE_KEYS:
        if kind not in table:
            continue
        sub = table[kind]
        if sub is True:
            sub = {}
        if not isinstance(sub, dict):
            raise ConfigError(f"[observables.{kind}] must be a table")
        _check_keys(f"observables.{kind}", sub, _OBSERVABLE_KEYS[kind])
        rep = sub.get("representation", "diabatic")
        if rep not in REPRESENTATIONS:
            raise ConfigError(f"[observables.{kind}] representation must be diabatic or adiabatic")
        if kind == "population":
            idx = _index_list("population states", sub.get("states", list(range(1, model.F + 1))), model.F)
            requests.append(ObservableRequest(kind, rep, idx))
        elif kind == "coherence":
            pairs = sub.get("pairs", [[1, 2]])
            idx = tuple(_index_list("coherence pair", p, model.F) for p in pairs)
            if any(len(p) != 2 or p[0] == p[1] for p in idx):
                raise ConfigError("coherence pairs need two different states")
            requests.append(ObservableRequest(kind, rep, idx))
        elif kind == "population_difference":
            idx = _index_list("population_difference states", sub.get("states", [1, 2]), model.F)
            if len(idx) != 2:
                raise ConfigError("population_difference needs exactly two states")
            requests.append(ObservableRequest(kind, rep, idx))
        elif kind in ("mean_R", "mean_P"):
            idx = _index_list(f"{kind} dofs", sub.get("dofs", list(range(1, model.N + 1))), model.N)
            requests.append(ObservableRequest(kind, "diabatic", idx))
        elif kind == "momentum_distribution":
            damping = _positive("damping", sub.get("damping", model.defaults.get("momentum_damping", 0.05)))
            dof = _index_list("momentum dof", [sub.get("dof", 1)], model.N)
            n_points = _positive("n_points", sub.get("n_points", 401), int)
            p_min, p_max = float(sub.get("p_min", -50.0)), float(sub.get("p_max", 50.0))
            if not p_max > p_min:
                raise ConfigError("p_max must exceed p_min")
            requests.append(ObservableRequest(kind, "diabatic", dof, damping, (p_min, p_max, n_points)))
        elif kind == "scattering":
            if model.N != 1:
                raise ConfigError("scattering channels need a model with one nuclear DOF")
            requests.append(ObservableRequest(kind, "adiabatic"))
    return tuple(requests)


def _default_observables(model):
    if model.label in SCATTERING_MODELS:
        return (ObservableRequest("population", "adiabatic", tuple(range(model.F))),
                ObservableRequest("scattering", "adiabatic"))
    return (ObservableRequest("population", "diabatic", tuple(range(model.F))),)


def parse_run_spec(data):
    """Validate a configuration mapping and apply defaults."""
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a table")
    _check_keys("top level", data, {"model", "method", "run", "observables"})
    for section in ("model", "method"):
        if section not in data:
            raise ConfigError(f"missing [{section}] section")
    model_spec = dict(data["model"])
    model = build_model(model_spec)

    mtab = dict(data["method"])
    _check_keys("method", mtab, _METHOD_KEYS)
    name = mtab.get("name")
    if name not in RUN_METHODS:
        raise ConfigError(f"unknown method {name!r}; choose from {', '.join(RUN_METHODS)}")
    gamma = mtab.get("gamma")
    electronic = mtab.get("electronic", "diabatic_transform")
    if electronic not in ELECTRONIC_VARIANTS:
        raise ConfigError(f"electronic must be one of {', '.join(ELECTRONIC_VARIANTS)}")
    hard_wall = mtab.get("hard_wall", False)
    if not isinstance(hard_wall, bool):
        raise ConfigError("hard_wall must be true or false")
    if name == "exact_grid":
        if model.N != 1:
            raise ConfigError("exact_grid needs a model with one nuclear DOF")
        if gamma is not None or hard_wall:
            raise ConfigError("exact_grid takes neither gamma nor a hard wall")
    else:
        if hard_wall and model.hard_wall is None:
            raise ConfigError(f"model {model.label} has no positive-domain coordinate for a hard wall")
        method = make_method(name, F=model.F, gamma=gamma, electronic=electronic, hard_wall=hard_wall)
        gamma = method.gamma

    rtab = dict(data.get("run", {}))
    _check_keys("run", rtab, _RUN_KEYS)
    for key in ("dt", "t_final"):
        if key in rtab and key + "_fs" in rtab:
            raise ConfigError(f"give either {key} or {key}_fs, not both")
    dt = rtab.get("dt", units.fs(rtab["dt_fs"]) if "dt_fs" in rtab else model.defaults.get("dt"))
    if dt is None:
        raise ConfigError("no default time step for this model; set run.dt")
    dt = _positive("dt", dt)
    auto = "t_final" not in rtab and "t_final_fs" not in rtab
    t_final = rtab.get("t_final", units.fs(rtab["t_final_fs"]) if "t_final_fs" in rtab else model.defaults.get("t_final"))
    if t_final is None:
        raise ConfigError("no default final time for this model; set run.t_final")
    t_final = _positive("t_final", t_final)
    n_traj = _positive("n_traj", rtab.get("n_traj", model.defaults.get("n_traj", 1000)), int)
    seed = rtab.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed must be a non-negative integer")
    workers = _positive("workers", rtab.get("workers", 1), int)
    chunk = _positive("chunk_size", rtab.get("chunk_size", 500), int)
    occupation = None
    if "occupied_state" in rtab or "occupation" in rtab:
        state = rtab.get("occupied_state", model.occupation[0] + 1)
        rep = rtab.get("occupation", model.occupation[1])
        if rep not in REPRESENTATIONS:
            raise ConfigError("occupation must be diabatic or adiabatic")
        occupation = (_index_list("occupied_state", [state], model.F)[0], rep)
    n_steps = max(1, int(math.ceil(t_final / dt - 1e-9)))
    record_every = _positive("record_every", rtab.get("record_every", max(1, n_steps // 200)), int)
    output = rtab.get("output")
    if output is not None and not isinstance(output, str):
        raise ConfigError("output must be a path string")
    grid_dt = _positive("grid_dt", rtab.get("grid_dt", 0.5))

    if "observables" in data:
        observables = _parse_observables(data["observables"], model, name)
    else:
        observables = _default_observables(model)
    if any(r.kind == "scattering" for r in observables) and model.N != 1:
        raise ConfigError("scattering channels need a model with one nuclear DOF")

    return RunSpec(model=model_spec, method=name, gamma=gamma, electronic=electronic,
                   hard_wall=hard_wall, dt=dt, t_final=t_final, auto_t_final=auto,
                   record_every=record_every, n_traj=n_traj, seed=seed, workers=workers,
                   chunk_size=chunk, occupation=occupation, observables=observables,
                   output=output, grid_dt=grid_dt, F=model.F)


def load_run_spec(path):
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_run_spec(data)


def loads_run_spec(text):
    try:
        return parse_run_spec(tomllib.loads(text))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(str(exc)) from None


def spec_to_dict(spec):
    """Configuration mapping that parses back to an equal RunSpec."""
    method = {"name": spec.method, "electronic": spec.electronic}
    if spec.gamma is not None:
        method["gamma"] = spec.gamma
    if spec.hard_wall:
        method["hard_wall"] = True
    run = {"dt": spec.dt, "record_every": spec.record_every, "n_traj": spec.n_traj,
           "seed": spec.seed, "workers": spec.workers, "chunk_size": spec.chunk_size,
           "grid_dt": spec.grid_dt}
    if not spec.auto_t_final:
        run["t_final"] = spec.t_final
    if spec.occupation is not None:
        run["occupied_state"] = spec.occupation[0] + 1
        run["occupation"] = spec.occupation[1]
    if spec.output is not None:
        run["output"] = spec.output
    obs = {}
    for r in spec.observables:
        if r.kind == "population":
            obs[r.kind] = {"representation": r.representation, "states": [i + 1 for i in r.indices]}
        elif r.kind == "coherence":
            obs[r.kind] = {"representation": r.representation,
                           "pairs": [[n + 1, m + 1] for n, m in r.indices]}
        elif r.kind == "population_difference":
            obs[r.kind] = {"representation": r.representation, "states": [i + 1 for i in r.indices]}
        elif r.kind in ("mean_R", "mean_P"):
            obs[r.kind] = {"dofs": [i + 1 for i in r.indices]}
        elif r.kind == "momentum_distribution":
            p_min, p_max, n = r.grid
            obs[r.kind] = {"damping": r.damping, "p_min": p_min, "p_max": p_max,
                           "n_points": n, "dof": r.indices[0] + 1}
        elif r.kind == "scattering":
            obs[r.kind] = {}
    return {"model": dict(spec.model), "method": method, "run": run, "observables": obs}


def dump_run_spec(spec):
    return tomli_w.dumps(spec_to_dict(spec))


def with_model_parameter(spec, **params):
    """Copy of spec with model parameters replaced; automatic t_final is re-derived."""
    data = spec_to_dict(spec)
    data["model"].update(params)
    if spec.auto_t_final:
        data["run"].pop("t_final", None)
    return parse_run_spec(data)
