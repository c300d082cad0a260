"""Scenario files: TOML documents describing a plant, cost, disturbance and controllers."""

import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from ..errors import MdrcError, ScenarioInvalid
from ..model import CostSpec, PlantModel, Signal, lift_reference, validate_system

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

CONTROLLER_KINDS = ("finite_horizon", "pseudo_inverse", "infinite_horizon", "receding_horizon",
                    "pid", "gesobc")


@dataclass(frozen=True)
class ControllerSpec:
    name: str
    kind: str
    params: dict = field(default_factory=dict)
    x0: object = None  # None (scenario default), "steady_state", or a vector


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    plant: PlantModel
    cost: CostSpec
    disturbance: Signal
    target: np.ndarray
    x0: np.ndarray
    controllers: tuple
    T: float
    step: float
    out_dir: Path = Path("artifacts")
    verify: dict = field(default_factory=dict)
    description: str = ""


def _matrix(v, what):
    try:
        a = np.asarray(v, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ScenarioInvalid(f"{what} is not numeric") from exc
    return a


def _signal(sec, q):
    kind = sec.get("kind", "constant")
    if kind == "constant":
        return Signal.constant(np.asarray(sec.get("value", [0.0] * q), dtype=float))
    if kind == "step":
        return Signal.step(float(sec["time"]), np.asarray(sec.get("before", [0.0] * q), float),
                           np.asarray(sec["after"], dtype=float))
    if kind == "samples":
        return Signal(np.asarray(sec["times"], float), np.asarray(sec["values"], float))
    raise ScenarioInvalid(f"unknown disturbance kind {kind!r}")


def parse_scenario(doc, out_dir=None):
    """Build a :class:`Scenario` from a parsed TOML mapping."""
    try:
        name = str(doc["name"])
        p = doc["plant"]
        plant = PlantModel(_matrix(p["A"], "A"), _matrix(p["B"], "B"), _matrix(p["E"], "E"),
                           _matrix(p["c_o"], "c_o"))
        c = doc["cost"]
        n = plant.n
        target = np.atleast_1d(_matrix(c.get("target", [0.0] * plant.l), "target"))
        if target.shape != (plant.l,):
            raise ScenarioInvalid(f"target has shape {target.shape}, expected ({plant.l},)")
        R = _matrix(c["R"], "R") if "R" in c else np.eye(n)
        P_T = _matrix(c["P_T"], "P_T") if "P_T" in c else np.zeros((n, n))
        cost = CostSpec(np.atleast_2d(_matrix(c["Qbar"], "Qbar")), R, P_T, float(c["T"]),
                        lift_reference(plant, target))
        validate_system(plant, cost)
        d = _signal(doc.get("disturbance", {}), plant.q)
        if d.dim != plant.q:
            raise ScenarioInvalid(f"disturbance has dimension {d.dim}, plant has q={plant.q}")
        sim = doc["simulation"]
        x0 = np.asarray(sim.get("x0", [0.0] * n), dtype=float)
        ctrls = []
        for i, cs in enumerate(doc.get("controllers", [])):
            cs = dict(cs)
            kind = cs.pop("kind")
            if kind not in CONTROLLER_KINDS:
                raise ScenarioInvalid(f"unknown controller kind {kind!r}")
            cname = cs.pop("name", kind)
            cx0 = cs.pop("x0", None)
            ctrls.append(ControllerSpec(cname, kind, cs, cx0))
    except KeyError as exc:
        raise ScenarioInvalid(f"missing key {exc.args[0]!r}") from exc
    except ScenarioInvalid:
        raise
    except MdrcError as exc:
        raise ScenarioInvalid(str(exc)) from exc
    if not ctrls:
        raise ScenarioInvalid(f"scenario {name!r} lists no controllers")
    names = [c.name for c in ctrls]
    if len(set(names)) != len(names):
        raise ScenarioInvalid("controller names must be unique")
    return Scenario(name, plant, cost, d, target, x0, tuple(ctrls), float(sim["T"]),
                    float(sim["step"]), Path(out_dir or doc.get("out_dir", "artifacts")),
                    dict(doc.get("verify", {})), str(doc.get("description", "")))


def builtin_names():
    root = resources.files(__package__) / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def load_scenario(ref, out_dir=None):
    """Load a scenario from a file path or a built-in name."""
    path = Path(ref)
    if path.suffix == ".toml" and path.exists():
        text = path.read_text()
    elif ref in builtin_names():
        text = (resources.files(__package__) / "scenarios" / f"{ref}.toml").read_text()
    else:
        raise ScenarioInvalid(f"no scenario file or built-in named {ref!r}")
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioInvalid(f"cannot parse {ref}: {exc}") from exc
    return parse_scenario(doc, out_dir)
