"""JSON experiment configuration.

A config is one JSON object::

    {
      "model":  {"type": "dissipative_ktm", "params": {"K": 0.3, "m": 1, "omega": 1,
                                                       "alpha": 0.1, "minimized_gamma": true}},
      "units":  {"hbar": 1, "G": 1, "kB": 1},
      "engine": "moments",
      "t_max": 20, "n_outputs": 41,
      "initial": {"x": [0, 0], "p": [0, 0]},
      "integrator": {"method": "rk45_adaptive", "rtol": 1e-10, "atol": 1e-12},
      "dense": {"ncut": 12, "dt": 0.01},
      "sse": {"n_traj": 2000, "dt": 0.001, "master_seed": 0},
      "predict": "asymptote",
      "sweep": {"parameter": "alpha", "values": [0.05, 0.1, 0.2]},
      "output": {"dir": "out"}
    }

Model parameter shorthands: ``m``, ``omega``, ``alpha``, ``gamma`` set both
particles; ``K`` fixes the coupling directly (the separation is solved for);
``lambda`` sets both Caldeira damping rates.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from typing import Any

from .model import CaldeiraParams, KtmParams, ModelSpec, TdLinearParams, build_generator
from .units import UnitConstants

MODEL_TYPES = ("ktm", "dissipative_ktm", "td_linear", "caldeira")
ENGINES = ("moments", "dense", "sse")
PREDICTIONS = (None, "growth", "asymptote")


class ConfigError(ValueError):
    """The configuration is malformed or inconsistent."""


def _num(d: dict, key: str, default=None, *, positive=False, nonneg=False) -> float:
    if key not in d:
        if default is None:
            raise ConfigError(f"missing required field {key!r}")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{key!r} must be a finite number, got {v!r}")
    if positive and not v > 0:
        raise ConfigError(f"{key!r} must be > 0")
    if nonneg and v < 0:
        raise ConfigError(f"{key!r} must be >= 0")
    return float(v)


def _int(d: dict, key: str, default: int, minimum: int) -> int:
    v = d.get(key, default)
    if isinstance(v, bool) or not isinstance(v, int) or v < minimum:
        raise ConfigError(f"{key!r} must be an integer >= {minimum}, got {v!r}")
    return v


def _pair(p: dict, short: str, a: str, b: str, default=None, **kw) -> tuple[float, float]:
    if short in p:
        v = _num(p, short, **kw)
        return v, v
    return _num(p, a, default, **kw), _num(p, b, default, **kw)


_KNOWN = {
    "ktm": {"K", "d", "m", "m1", "m2", "omega", "omega1", "omega2", "gamma", "gamma1", "gamma2", "minimized_gamma"},
    "td_linear": {"m", "d", "alpha", "R0", "omega", "masses", "x0", "alphas"},
    "caldeira": {"m", "m1", "m2", "omega", "omega1", "omega2", "lambda", "lambda1", "lambda2", "T", "high_T"},
}
_KNOWN["dissipative_ktm"] = _KNOWN["ktm"] | {"alpha", "alpha1", "alpha2", "include_delta_h0"}


def build_model(block: Any, units: UnitConstants) -> ModelSpec:
    """Turn the ``model`` block of a config into a params dataclass."""
    if not isinstance(block, dict):
        raise ConfigError("'model' must be an object")
    kind = block.get("type")
    if kind not in MODEL_TYPES:
        raise ConfigError(f"model type must be one of {MODEL_TYPES}, got {kind!r}")
    p = block.get("params", {})
    if not isinstance(p, dict):
        raise ConfigError("'model.params' must be an object")
    unknown = set(p) - _KNOWN[kind]
    if unknown:
        raise ConfigError(f"unknown {kind} parameters: {sorted(unknown)}")
    try:
        if kind in ("ktm", "dissipative_ktm"):
            m1, m2 = _pair(p, "m", "m1", "m2", positive=True)
            w1, w2 = _pair(p, "omega", "omega1", "omega2", nonneg=True)
            g1, g2 = _pair(p, "gamma", "gamma1", "gamma2", 0.0, nonneg=True)
            a1, a2 = (0.0, 0.0)
            if kind == "dissipative_ktm":
                a1, a2 = _pair(p, "alpha", "alpha1", "alpha2", nonneg=True)
            minimized = bool(p.get("minimized_gamma", False))
            if ("K" in p) == ("d" in p):
                raise ConfigError("give exactly one of 'K' or 'd'")
            if "K" in p:
                K = _num(p, "K", nonneg=True)
                if m1 != m2 or w1 != w2:
                    raise ConfigError("'K' shorthand needs identical particles; give 'd' instead")
                return KtmParams.from_coupling(
                    K, m1, w1, units,
                    gamma1=g1, gamma2=g2, alpha1=a1, alpha2=a2,
                    minimized_gamma=minimized, include_delta_h0=bool(p.get("include_delta_h0", False)),
                )
            return KtmParams(
                m1, m2, w1, w2, _num(p, "d", positive=True), g1, g2, a1, a2,
                minimized, bool(p.get("include_delta_h0", False)), units,
            )
        if kind == "td_linear":
            if "masses" in p:
                masses = tuple(float(v) for v in p["masses"])
                x0 = tuple(float(v) for v in p["x0"])
                alphas = tuple(float(v) for v in p["alphas"])
                if len(masses) != 2:
                    raise ConfigError("td_linear runs support exactly two particles")
                return TdLinearParams(masses, x0, alphas, _num(p, "R0", positive=True), _num(p, "omega", positive=True), units)
            return TdLinearParams.pair(
                _num(p, "m", positive=True), _num(p, "d", positive=True), _num(p, "alpha", nonneg=True),
                _num(p, "R0", positive=True), _num(p, "omega", positive=True), units,
            )
        m1, m2 = _pair(p, "m", "m1", "m2", positive=True)
        w1, w2 = _pair(p, "omega", "omega1", "omega2", positive=True)
        l1, l2 = _pair(p, "lambda", "lambda1", "lambda2", nonneg=True)
        return CaldeiraParams(m1, m2, w1, w2, l1, l2, _num(p, "T", positive=True), bool(p.get("high_T", False)), units)
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"invalid {kind} parameters: {exc}") from exc


@dataclass
class ExperimentConfig:
    """Validated experiment description; ``raw`` keeps the source JSON for echoing and sweeps."""

    raw: dict
    model: ModelSpec
    units: UnitConstants
    engine: str
    t_max: float
    n_outputs: int
    initial_x: tuple[float, float] = (0.0, 0.0)
    initial_p: tuple[float, float] = (0.0, 0.0)
    integrator: dict = field(default_factory=dict)
    ncut: int = 12
    dense_dt: float = 0.01
    n_traj: int = 2000
    sse_dt: float = 1e-3
    master_seed: int = 0
    workers: int | None = None
    predict: str | None = None
    sweep_parameter: str | None = None
    sweep_values: list | None = None
    output_dir: str = "out"

    @classmethod
    def from_dict(cls, raw: Any) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        raw = copy.deepcopy(raw)
        known = {"model", "units", "engine", "t_max", "n_outputs", "initial", "integrator", "dense", "sse",
                 "predict", "sweep", "output"}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        ub = raw.get("units", {})
        if not isinstance(ub, dict):
            raise ConfigError("'units' must be an object")
        try:
            units = UnitConstants(
                hbar=_num(ub, "hbar", 1.0), G=_num(ub, "G", 1.0), kB=_num(ub, "kB", 1.0)
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if "model" not in raw:
            raise ConfigError("missing required field 'model'")
        model = build_model(raw["model"], units)

        engine = raw.get("engine", "moments")
        if engine not in ENGINES:
            raise ConfigError(f"engine must be one of {ENGINES}, got {engine!r}")
        t_max = _num(raw, "t_max", positive=True)
        n_outputs = _int(raw, "n_outputs", 2, 2)

        init = raw.get("initial", {})
        if not isinstance(init, dict):
            raise ConfigError("'initial' must be an object")
        ix = tuple(float(v) for v in init.get("x", (0.0, 0.0)))
        ip = tuple(float(v) for v in init.get("p", (0.0, 0.0)))
        if len(ix) != 2 or len(ip) != 2:
            raise ConfigError("'initial.x' and 'initial.p' need two entries")

        integ = raw.get("integrator", {})
        if not isinstance(integ, dict) or integ.get("method", "rk45_adaptive") not in ("rk45_adaptive", "rk4_fixed"):
            raise ConfigError("integrator.method must be 'rk45_adaptive' or 'rk4_fixed'")
        integrator = {
            "method": integ.get("method", "rk45_adaptive"),
            "rtol": _num(integ, "rtol", 1e-10, positive=True),
            "atol": _num(integ, "atol", 1e-12, positive=True),
        }
        if "dt" in integ:
            integrator["dt"] = _num(integ, "dt", positive=True)

        dense = raw.get("dense", {})
        sse = raw.get("sse", {})
        if not isinstance(dense, dict) or not isinstance(sse, dict):
            raise ConfigError("'dense' and 'sse' must be objects")
        ncut = _int(dense if engine == "dense" else sse, "ncut", 12, 4)
        dense_dt = _num(dense, "dt", 0.01, positive=True)
        if engine == "sse":
            if not isinstance(model, KtmParams):
                raise ConfigError("the sse engine supports the ktm and dissipative_ktm models only")
            for key in ("n_traj", "dt", "master_seed"):
                if key not in sse:
                    raise ConfigError(f"sse engine requires sse.{key}")
        if engine in ("dense", "sse") and not isinstance(model, (KtmParams, CaldeiraParams, TdLinearParams)):
            raise ConfigError("unsupported model for this engine")
        n_traj = _int(sse, "n_traj", 2000, 100)
        sse_dt = _num(sse, "dt", 1e-3, positive=True)
        seed = _int(sse, "master_seed", 0, 0)
        workers = sse.get("workers")
        if workers is not None and (not isinstance(workers, int) or workers < 1):
            raise ConfigError("sse.workers must be a positive integer")

        predict = raw.get("predict")
        if predict not in PREDICTIONS:
            raise ConfigError(f"predict must be one of {PREDICTIONS}, got {predict!r}")

        sweep_parameter = sweep_values = None
        if "sweep" in raw:
            sw = raw["sweep"]
            if not isinstance(sw, dict) or not isinstance(sw.get("parameter"), str):
                raise ConfigError("sweep needs a 'parameter' name")
            values = sw.get("values")
            if not isinstance(values, list) or not values:
                raise ConfigError("sweep.values must be a non-empty list")
            if sw["parameter"] not in _KNOWN[raw["model"]["type"]]:
                raise ConfigError(f"cannot sweep unknown parameter {sw['parameter']!r}")
            sweep_parameter, sweep_values = sw["parameter"], values

        try:
            build_generator(model)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

        out = raw.get("output", {})
        if not isinstance(out, dict):
            raise ConfigError("'output' must be an object")
        return cls(
            raw=raw, model=model, units=units, engine=engine, t_max=t_max, n_outputs=n_outputs,
            initial_x=ix, initial_p=ip, integrator=integrator, ncut=ncut, dense_dt=dense_dt,
            n_traj=n_traj, sse_dt=sse_dt, master_seed=seed, workers=workers, predict=predict,
            sweep_parameter=sweep_parameter, sweep_values=sweep_values,
            output_dir=str(out.get("dir", "out")),
        )

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed JSON: {exc}") from exc
        return cls.from_dict(raw)

    def with_param(self, name: str, value) -> "ExperimentConfig":
        """Copy with one model parameter replaced (used by sweeps)."""
        raw = copy.deepcopy(self.raw)
        params = raw["model"].setdefault("params", {})
        params[name] = value
        if raw["model"]["type"] in ("ktm", "dissipative_ktm") and name in ("K", "d"):
            params.pop("d" if name == "K" else "K", None)
        for suffix in ("1", "2"):
            params.pop(name + suffix, None)
        raw.pop("sweep", None)
        return ExperimentConfig.from_dict(raw)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        raw = copy.deepcopy(self.raw)
        raw.setdefault("sse", {})["master_seed"] = seed
        return ExperimentConfig.from_dict(raw)
