"""Scenario files: strict JSON schema, invariant checks and model construction."""

from dataclasses import dataclass, field
from importlib import resources
import json
import math
import os

import jsonschema

from tmwave import coefficients


class ParseError(ValueError):
    pass


class ValidationError(ValueError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid scenario:\n  " + "\n  ".join(self.problems))


_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}

MODEL_SCHEMAS = {
    "constant": {
        "properties": {"type": {"const": "constant"}, "rho0": _pos, "kappa0": _pos},
    },
    "separable_gaussian": {
        "properties": {
            "type": {"const": "separable_gaussian"},
            "alpha_rho": _num, "alpha_kappa": _num, "beta_sigma": _num,
            "x_r": _num, "sigma_r": _pos,
        },
    },
    "resonator_chain": {
        "properties": {
            "type": {"const": "resonator_chain"},
            "n_resonators": {"type": "integer", "minimum": 1},
            "length": _pos, "gap": _pos, "start": _num,
            "rho_r": _pos, "kappa_r": _pos, "alpha_rho": _num, "alpha_kappa": _num,
            "omega_rho": {"type": "number", "minimum": 0},
            "omega_kappa": {"type": "number", "minimum": 0},
            "rho0": _pos, "kappa0": _pos,
        },
    },
}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["name", "command", "domain", "T", "model", "mesh_levels", "dt_rule"],
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "command": {"enum": ["convergence", "resonators", "projection-study"]},
        "domain": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2},
        "T": _num,
        "model": {
            "type": "object",
            "required": ["type"],
            "properties": {"type": {"enum": sorted(MODEL_SCHEMAS)}},
            "allOf": [
                {"if": {"properties": {"type": {"const": k}}},
                 "then": dict(v, additionalProperties=False)}
                for k, v in MODEL_SCHEMAS.items()
            ],
        },
        "gain_loss": {"type": "array", "items": {"enum": ["damping", "gain"]},
                      "uniqueItems": True},
        "lumped": {"type": "boolean"},
        "pulse": {
            "type": "object",
            "additionalProperties": False,
            "required": ["center", "width"],
            "properties": {
                "center": _num, "width": _pos,
                "direction": {"enum": [1, -1]},
                "speed": _pos,
                "boundary": {"enum": ["homogeneous", "incident"]},
            },
        },
        "solution": {"enum": ["standing_wave", "sin_cos", "quadratic"]},
        "mesh_levels": {"type": "array", "items": {"type": "integer", "minimum": 1},
                        "minItems": 1},
        "dt_rule": {
            "oneOf": [
                {"type": "object", "additionalProperties": False,
                 "required": ["kind"],
                 "properties": {"kind": {"const": "cfl"}, "c_cfl": _pos}},
                {"type": "object", "additionalProperties": False,
                 "required": ["kind", "dt0"],
                 "properties": {"kind": {"const": "h_power"}, "dt0": _pos, "h0": _pos,
                                "exponent": _pos}},
            ],
        },
        "snapshot_times": {"type": "array", "items": _num},
        "reference_factor": {"type": "integer", "minimum": 2},
        "amplitude_every": {"type": "integer", "minimum": 1},
        "output_dir": {"type": "string"},
        "notes": {"type": "array", "items": {"type": "string"}},
    },
}


@dataclass
class Scenario:
    name: str
    command: str
    domain: tuple
    T: float
    model: dict
    mesh_levels: list
    dt_rule: dict
    gain_loss: tuple = ()
    lumped: bool = True
    pulse: dict = None
    solution: str = None
    snapshot_times: list = field(default_factory=list)
    reference_factor: int = 16
    amplitude_every: int = 10
    output_dir: str = "out"
    description: str = ""
    notes: list = field(default_factory=list)
    overrides: dict = field(default_factory=dict)

    def resolved(self):
        """Plain dict of every setting, defaults filled in."""
        d = {k: getattr(self, k) for k in self.__dataclass_fields__ if k != "overrides"}
        d["domain"] = list(self.domain)
        d["gain_loss"] = list(self.gain_loss)
        return d

    def header_lines(self):
        lines = ["config " + json.dumps(self.resolved(), sort_keys=True)]
        if self.overrides:
            lines.append("overrides " + json.dumps(self.overrides, sort_keys=True))
        return lines


def bundled_path(name):
    return resources.files("tmwave") / "scenarios" / f"{name}.json"


def bundled_names():
    folder = resources.files("tmwave") / "scenarios"
    return sorted(p.name[:-5] for p in folder.iterdir() if p.name.endswith(".json"))


def _read(path):
    p = str(path)
    if not os.path.exists(p):
        if p in bundled_names():
            return bundled_path(p).read_text()
        raise ParseError(f"{p}: no such file (bundled scenarios: {', '.join(bundled_names())})")
    with open(p) as fh:
        return fh.read()


def parse_scenario(path):
    text = _read(path)
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return scenario_from_dict(raw, source=str(path))


def scenario_from_dict(raw, source="<dict>"):
    validator = jsonschema.Draft202012Validator(SCHEMA)
    problems = []
    for err in sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path)):
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        problems.append(f"{where}: {err.message}")
    if problems:
        raise ValidationError(problems)
    sc = Scenario(**{k: v for k, v in raw.items()})
    sc.domain = tuple(float(v) for v in sc.domain)
    sc.gain_loss = tuple(sc.gain_loss)
    problems = check_invariants(sc)
    if problems:
        raise ValidationError(problems)
    return sc


def check_invariants(sc):
    problems = []
    if not sc.T > 0:
        problems.append(f"T: must be > 0 (got {sc.T})")
    lo, hi = sc.domain
    if not lo < hi:
        problems.append(f"domain: left must be < right (got {lo}, {hi})")
    lv = sc.mesh_levels
    if any(b <= a for a, b in zip(lv, lv[1:])):
        problems.append(f"mesh_levels: must be strictly increasing (got {lv})")
    bad = [t for t in sc.snapshot_times if t < 0 or t > sc.T]
    if bad:
        problems.append(f"snapshot_times: {bad} outside [0, T={sc.T}]")
    if sc.command == "convergence" and len(lv) < 3:
        problems.append("mesh_levels: a convergence study needs at least 3 levels")
    if sc.command in ("convergence", "resonators") and sc.pulse is None \
            and sc.solution != "standing_wave":
        problems.append("pulse: required unless solution is 'standing_wave'")
    if sc.command == "projection-study" and sc.solution not in ("sin_cos", "quadratic"):
        problems.append("solution: projection-study needs 'sin_cos' or 'quadratic'")
    if sc.command == "resonators" and sc.model.get("type") != "resonator_chain":
        problems.append("model: resonators command needs a resonator_chain model")
    if not problems:
        try:
            build_model(sc)
        except coefficients.CoefficientError as exc:
            problems.append(f"model: {exc}")
    return problems


def build_model(sc):
    spec = dict(sc.model)
    kind = spec.pop("type")
    if kind == "constant":
        return coefficients.ConstantMedium(domain=sc.domain, **spec)
    if kind == "separable_gaussian":
        return coefficients.SeparableGaussian(domain=sc.domain, **spec)
    chain = {k: spec.pop(k) for k in ("n_resonators", "length", "gap", "start") if k in spec}
    intervals = coefficients.chain_intervals(**chain)
    return coefficients.ResonatorChain(intervals=intervals, domain=sc.domain, **spec)


def required_vertices(sc, model):
    if isinstance(model, coefficients.ResonatorChain):
        return model.interfaces
    return None


def dt_for(sc, mesh, space, model):
    rule = sc.dt_rule
    from tmwave import stepping
    if rule["kind"] == "cfl":
        return stepping.stable_dt(space, model, rule.get("c_cfl", 0.5))
    h0 = rule.get("h0", (sc.domain[1] - sc.domain[0]) / sc.mesh_levels[0])
    return stepping.power_law_dt(mesh.h, rule["dt0"], h0, rule.get("exponent", 1.5))


def apply_overrides(sc, out=None, levels=None):
    if out is not None:
        sc.overrides["output_dir"] = out
        sc.output_dir = out
    if levels is not None:
        sc.overrides["mesh_levels"] = list(levels)
        sc.mesh_levels = list(levels)
        problems = check_invariants(sc)
        if problems:
            raise ValidationError(problems)
    return sc


def pulse_functions(pulse, x_left, x_right):
    """Initial displacement, velocity and end-point data of a Gaussian pulse.

    ``G(s) = exp(-s^2 / (2 width^2))`` travelling as ``G(x - center - direction speed t)``;
    the velocity ``-direction speed G'`` makes it one-way in the background.
    """
    c0 = float(pulse["center"])
    w = float(pulse["width"])
    d = pulse.get("direction", 1) * pulse.get("speed", 1.0)

    def G(s):
        return __import__("numpy").exp(-s * s / (2.0 * w * w))

    def u0(x):
        return G(x - c0)

    def v0(x):
        s = x - c0
        return d * s / (w * w) * G(s)

    ends = __import__("numpy").array([x_left, x_right])

    def boundary(t):
        return G(ends - c0 - d * t)

    if pulse.get("boundary", "homogeneous") == "homogeneous":
        return u0, v0, None
    return u0, v0, boundary


def period_of(model):
    w = getattr(model, "omega_kappa", 0.0) or getattr(model, "omega_rho", 0.0)
    return 2.0 * math.pi / w if w else 1.0
