"""Command-line experiment runner.

Subcommands::

    gravchannel simulate --config run.json [--seed N] [--out DIR]
    gravchannel sweep    --config run.json [--seed N] [--out DIR]
    gravchannel asymptote --config run.json [--out DIR]
    gravchannel eta --R0 1 --d 2 5 20 [--quadrature] [--out DIR]
    gravchannel validate --config run.json

Exit status is 0 on success, 1 for an invalid config and 2 for a numerical
failure. Artifacts are assembled in memory and written atomically, so a
failing run leaves nothing behind.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import analytics
from .config import ConfigError, ExperimentConfig
from .errors import NotDissipative, NumericalFailure
from .eta import eta_closed, eta_quadrature
from .gaussian import GaussianState, integrate_moments, steady_state
from .hilbert import DenseState, coherent_amplitude, coherent_ket, compile_model, dense_integrate, dense_moments
from .model import (
    COM_REL_TRANSFORM,
    KtmParams,
    TdLinearParams,
    build_generator,
    mass_of,
    trap_frequency,
)
from .trajectories import ensemble_run

CSV_COLUMNS = (
    "t", "E_total", "E_cm", "E_rel", "x1", "p1", "x2", "p2",
    "var_x1", "var_p1", "var_x2", "var_p2", "cov_x1x2",
)


def fmt(v) -> str:
    """Round-trip float formatting (17 significant digits)."""
    v = float(v)
    if math.isnan(v):
        return "nan"
    return format(v, ".17g")


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return None if math.isnan(v) or math.isinf(v) else v
    if isinstance(v, np.integer):
        return int(v)
    return v


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def write_atomic(files: dict[Path, str]) -> None:
    """Write every file through a temporary sibling and rename it into place."""
    for path, text in files.items():
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
        try:
            with os.fdopen(fd, "w", newline="") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise


@dataclass
class Series:
    t: np.ndarray
    mean: np.ndarray
    cov: np.ndarray
    ham: np.ndarray
    energy_se: np.ndarray | None = None

    @property
    def second(self) -> np.ndarray:
        return self.cov + np.einsum("ti,tj->tij", self.mean, self.mean)

    def energy(self) -> np.ndarray:
        return 0.5 * np.einsum("ij,tij->t", self.ham, self.second)

    def split_energies(self) -> tuple[np.ndarray, np.ndarray]:
        """CoM and relative energies, or NaN when the Hamiltonian does not separate."""
        n = len(self.t)
        if self.ham.shape != (4, 4):
            return np.full(n, np.nan), np.full(n, np.nan)
        T = COM_REL_TRANSFORM
        Ti = np.linalg.inv(T)
        Hp = Ti.T @ self.ham @ Ti
        if np.abs(Hp[:2, 2:]).max() > 1e-12 * max(np.abs(Hp).max(), 1.0):
            return np.full(n, np.nan), np.full(n, np.nan)
        Sp = np.einsum("ij,tjk,lk->til", T, self.second, T)
        e_cm = 0.5 * np.einsum("ij,tij->t", Hp[:2, :2], Sp[:, :2, :2])
        e_rel = 0.5 * np.einsum("ij,tij->t", Hp[2:, 2:], Sp[:, 2:, 2:])
        return e_cm, e_rel

    def to_csv(self) -> str:
        E = self.energy()
        e_cm, e_rel = self.split_energies()
        lines = [",".join(CSV_COLUMNS)]
        for i, t in enumerate(self.t):
            m, c = self.mean[i], self.cov[i]
            row = [t, E[i], e_cm[i], e_rel[i], *m, c[0, 0], c[1, 1], c[2, 2], c[3, 3], c[0, 2]]
            lines.append(",".join(fmt(v) for v in row))
        return "\n".join(lines) + "\n"


def initial_gaussian(cfg: ExperimentConfig) -> GaussianState:
    hbar = cfg.units.hbar
    mean, var = [], []
    for k in range(2):
        m, w = mass_of(cfg.model, k), trap_frequency(cfg.model, k)
        if not w > 0:
            raise ConfigError("a positive trap frequency is needed to define the initial state")
        mean += [cfg.initial_x[k], cfg.initial_p[k]]
        var += [hbar / (2.0 * m * w), hbar * m * w / 2.0]
    return GaussianState(np.array(mean), np.diag(var), hbar)


def initial_ket(cfg: ExperimentConfig, ncut: int) -> np.ndarray:
    betas = [
        coherent_amplitude(cfg.initial_x[k], cfg.initial_p[k], mass_of(cfg.model, k), trap_frequency(cfg.model, k), cfg.units)
        for k in range(2)
    ]
    return coherent_ket(ncut, betas)


def simulate(cfg: ExperimentConfig) -> Series:
    """Run the configured engine and return moment time series."""
    t_grid = np.linspace(0.0, cfg.t_max, cfg.n_outputs)
    gen = build_generator(cfg.model)
    if cfg.engine == "moments":
        opts = dict(cfg.integrator)
        states = integrate_moments(gen, initial_gaussian(cfg), t_grid, **opts)
        return Series(t_grid, np.array([s.mean for s in states]), np.array([s.cov for s in states]), gen.ham)
    if cfg.engine == "dense":
        cm = compile_model(cfg.model, cfg.ncut)
        rho0 = DenseState.from_ket(initial_ket(cfg, cfg.ncut), cfg.ncut)
        states = dense_integrate(cm, rho0, t_grid, dt=cfg.dense_dt)
        moments = [dense_moments(s, cm.ops) for s in states]
        return Series(t_grid, np.array([m for m, _ in moments]), np.array([c for _, c in moments]), gen.ham)
    stats = ensemble_run(
        cfg.model, initial_ket(cfg, cfg.ncut), cfg.n_traj, t_grid, cfg.master_seed,
        dt=cfg.sse_dt, workers=cfg.workers, ncut=cfg.ncut,
    )
    return Series(t_grid, stats.mean, stats.cov, gen.ham, stats.energy_se)


def model_echo(cfg: ExperimentConfig) -> dict:
    model = asdict(cfg.model)
    model["units"] = asdict(cfg.units)
    return {"type": cfg.raw["model"]["type"], "params": model}


def predictions(cfg: ExperimentConfig) -> dict:
    """Closed-form predictions for the configured model and ``predict`` mode."""
    model, units = cfg.model, cfg.units
    out: dict = {"kind": cfg.predict}
    if isinstance(model, TdLinearParams):
        e = eta_closed(model.R0, abs(model.x0[1] - model.x0[0]))
        out["eta"] = asdict(e)
    if cfg.predict == "growth":
        if isinstance(model, KtmParams) and not model.is_dissipative:
            if not model.minimized_gamma:
                raise ConfigError("growth prediction needs minimized_gamma")
            out["growth_rate"] = analytics.ktm_growth_rate(model, units)
        elif isinstance(model, TdLinearParams) and not any(model.alphas):
            # one-dimensional linearization injects one third of the 3D rate
            out["growth_rate"] = analytics.td_growth_rate(model.masses, model.R0, units) / 3.0
        else:
            raise ConfigError("growth prediction applies to ktm and to td_linear with alpha = 0")
        out["value"] = out["growth_rate"]
    elif cfg.predict == "asymptote":
        if isinstance(model, KtmParams):
            if not model.is_dissipative:
                raise NotDissipative("alpha = 0: the energy grows without bound; no asymptote")
            E = analytics.ktm_asymptotic_energy(model, units)
            out["asymptotic_energy"] = E
            m, a = model.m1, model.alpha1
            if model.minimized_gamma:
                out["T_eff_small_alpha"] = analytics.effective_temperature("minimized", m, a, units=units)
            elif model.gamma1 > 0:
                # reference mass m0 = m, so gamma0 = gamma d^3
                out["T_eff_small_alpha"] = analytics.effective_temperature("general", m, a, model.gamma1 * model.d**3, units)
        elif isinstance(model, TdLinearParams):
            E = analytics.td_asymptotic_energy(model, units)
            out["asymptotic_energy"] = E
        else:
            E = analytics.caldeira_asymptote(model.T, units)
            out["asymptotic_energy"] = E
        out["asymptote_over_2kB"] = E / (2.0 * units.kB)
        out["value"] = E
    return out


@dataclass
class RunSummary:
    model: dict
    engine: str
    seed: int | None
    prediction: dict
    measured: dict
    relative_deviation: float | None
    runtime_s: float = field(default=float("nan"))

    def to_json(self) -> str:
        """Deterministic summary; runtime is kept out so bytes depend only on (config, seed)."""
        d = asdict(self)
        d.pop("runtime_s")
        return dumps(d)


def summarize(cfg: ExperimentConfig, series: Series | None, pred: dict) -> RunSummary:
    measured: dict = {}
    deviation = None
    if series is not None:
        E = series.energy()
        measured["final_energy"] = E[-1]
        if series.energy_se is not None:
            measured["final_energy_se"] = series.energy_se[-1]
        if cfg.predict == "growth":
            slope = np.polyfit(series.t, E, 1)[0]
            measured["slope"] = slope
            deviation = abs(slope - pred["value"]) / abs(pred["value"]) if pred["value"] else None
    if cfg.predict == "asymptote":
        ref = None
        if cfg.engine == "moments":
            _, E_ss = steady_state(build_generator(cfg.model))
            measured["steady_state_energy"] = E_ss
            ref = E_ss
        elif series is not None:
            ref = measured["final_energy"]
        if ref is not None:
            deviation = abs(ref - pred["value"]) / abs(pred["value"])
    seed = cfg.master_seed if cfg.engine == "sse" else None
    return RunSummary(model_echo(cfg), cfg.engine, seed, pred, measured, deviation)


def run(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> int:
    """Simulate, summarize and write ``series.csv``, ``summary.json`` and ``timing.json``."""
    start = time.perf_counter()
    pred = predictions(cfg)
    series = simulate(cfg)
    summary = summarize(cfg, series, pred)
    summary.runtime_s = time.perf_counter() - start
    out = Path(out_dir or cfg.output_dir)
    write_atomic(
        {
            out / "series.csv": series.to_csv(),
            out / "summary.json": summary.to_json(),
            out / "timing.json": dumps({"runtime_s": summary.runtime_s}),
        }
    )
    return 0


SWEEP_COLUMNS = ("parameter", "value", "prediction", "measured", "relative_deviation", "eta12", "eta12_d3_over_2", "error")


def sweep(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> int:
    """One summary row per swept value; failures are recorded in their row."""
    if not cfg.sweep_values:
        raise ConfigError("sweep has no values")
    rows = []
    for value in cfg.sweep_values:
        row = {"parameter": cfg.sweep_parameter, "value": value, "prediction": None, "measured": None,
               "relative_deviation": None, "eta12": None, "eta12_d3_over_2": None, "error": ""}
        try:
            point = cfg.with_param(cfg.sweep_parameter, value)
            if isinstance(point.model, TdLinearParams):
                d = abs(point.model.x0[1] - point.model.x0[0])
                e12 = eta_closed(point.model.R0, d).eta12
                row["eta12"], row["eta12_d3_over_2"] = e12, -e12 * d**3 / 2.0
            pred = predictions(point)
            series = simulate(point) if point.predict != "asymptote" or point.engine != "moments" else None
            s = summarize(point, series, pred)
            row["prediction"] = pred.get("value")
            row["measured"] = s.measured.get("slope", s.measured.get("steady_state_energy", s.measured.get("final_energy")))
            row["relative_deviation"] = s.relative_deviation
        except (ConfigError, NumericalFailure, ValueError) as exc:
            row["error"] = f"{type(exc).__name__}: {exc}"
        rows.append(row)
    lines = [",".join(SWEEP_COLUMNS)]
    for r in rows:
        cells = []
        for c in SWEEP_COLUMNS:
            v = r[c]
            if c in ("parameter", "error"):
                cells.append(json.dumps(v) if v else "")
            else:
                cells.append("nan" if v is None else fmt(v))
        lines.append(",".join(cells))
    out = Path(out_dir or cfg.output_dir)
    write_atomic({out / "sweep.csv": "\n".join(lines) + "\n", out / "sweep.json": dumps({"rows": rows})})
    return 0


def eta_table(R0: float, ds, quadrature: bool = False) -> str:
    cols = ["R0", "d", "eta", "eta12", "eta_plus", "eta_minus", "eta12_d3_over_2"]
    if quadrature:
        cols += ["eta12_quadrature", "relative_difference"]
    lines = [",".join(cols)]
    for d in ds:
        e = eta_closed(R0, d)
        row = [R0, d, e.eta, e.eta12, e.eta_plus, e.eta_minus, -e.eta12 * d**3 / 2.0]
        if quadrature:
            q = eta_quadrature(R0, d, tol=1e-12).eta12
            row += [q, abs(q - e.eta12) / abs(e.eta12)]
        lines.append(",".join(fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def _load(path: str, seed: int | None) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    cfg = ExperimentConfig.from_json(text)
    return cfg.with_seed(seed) if seed is not None else cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gravchannel", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "sweep", "asymptote", "validate"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int)
        p.add_argument("--out")
    p = sub.add_parser("eta")
    p.add_argument("--R0", type=float, required=True)
    p.add_argument("--d", type=float, nargs="+", required=True)
    p.add_argument("--quadrature", action="store_true")
    p.add_argument("--out")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code else 0
    try:
        if args.command == "eta":
            if not args.R0 > 0 or any(d <= 0 for d in args.d):
                raise ConfigError("need R0 > 0 and d > 0")
            table = eta_table(args.R0, args.d, args.quadrature)
            if args.out:
                write_atomic({Path(args.out) / "eta.csv": table})
            sys.stdout.write(table)
            return 0
        cfg = _load(args.config, args.seed)
        if args.command == "validate":
            print("config ok")
            return 0
        if args.command == "asymptote":
            text = dumps({"model": model_echo(cfg), "prediction": predictions(cfg)})
            if args.out:
                write_atomic({Path(args.out) / "prediction.json": text})
            sys.stdout.write(text)
            return 0
        if args.command == "sweep":
            return sweep(cfg, args.out)
        return run(cfg, args.out)
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return 1
    except NumericalFailure as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
