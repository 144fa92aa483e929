"""Configuration-driven experiments and their on-disk reports.

A configuration is a JSON document::

    {
      "copula":   {"family": "clayton", "theta": 1.0},
      "grid":     {"m": 128, "m2": 256},
      "coeffs":   {"enabled": true},
      "profile":  {"n_max": 10},
      "doeblin":  {"enabled": true},
      "simulate": {"n": 10000, "seed": 7, "marginal": {"kind": "uniform01"}, "empirical_m": 8},
      "sweep":    {"parameters": {"theta": [0.5, 1, 2]}},
      "output":   {"directory": "out", "formats": ["csv", "json"]}
    }

A task runs when its section is present and not ``"enabled": false``.
Sweep parameters are dotted paths into the copula description, for
example ``"weights"`` or ``"components.1.beta"``.
"""

from __future__ import annotations

import copy
import csv
import io
import itertools
import json
import os
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Mapping

import numpy as np
from scipy import stats

from .copulas import Copula, Mixture, describe, validate
from .errors import CopulaChainError, InvalidSpec
from .grid import MAX_RESOLUTION, discretize
from .mixing import MAX_LAGS, beta_coeff, doeblin_report, phi_coeff, profile_from_matrix, rho_coeff
from .simulate import Uniform01, empirical_transition, marginal_from_dict, sample_chain

TASKS = ("coeffs", "profile", "doeblin", "simulate", "sweep")
FORMATS = ("csv", "json")
PASS, FAIL, NA = "pass", "fail", "not-applicable"


class ConfigError(CopulaChainError, ValueError):
    def __init__(self, field_name: str, message: str):
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


def _g(x: float) -> str:
    return f"{x:.15g}"


def _section(raw: Mapping, name: str) -> dict | None:
    sec = raw.get(name)
    if sec is None:
        return None
    if not isinstance(sec, Mapping):
        raise ConfigError(name, "must be an object")
    return dict(sec)


def _int(sec: Mapping, key: str, where: str, lo: int, hi: int | None = None, default=None) -> int:
    val = sec.get(key, default)
    if val is None:
        raise ConfigError(f"{where}.{key}", "is required")
    if isinstance(val, bool) or not isinstance(val, (int, float)) or int(val) != val:
        raise ConfigError(f"{where}.{key}", f"must be an integer, got {val!r}")
    val = int(val)
    if val < lo or (hi is not None and val > hi):
        rng = f"[{lo}, {hi}]" if hi is not None else f">= {lo}"
        raise ConfigError(f"{where}.{key}", f"must be in {rng}, got {val}")
    return val


def _sort_key(v: Any):
    return tuple(_sort_key(x) for x in v) if isinstance(v, (list, tuple)) else v


def _enabled(sec: dict | None) -> bool:
    return sec is not None and bool(sec.get("enabled", True))


def _set_path(desc: Any, path: str, value: Any) -> None:
    keys = path.split(".")
    node = desc
    for k in keys[:-1]:
        node = node[int(k)] if isinstance(node, list) else node[k]
    last = keys[-1]
    if isinstance(node, list):
        node[int(last)] = value
    else:
        node[last] = value


@dataclass
class ExperimentConfig:
    copula: Copula
    m: int
    m2: int | None = None
    n_max: int = 10
    sim_n: int | None = None
    seed: int = 0
    marginal: Any = field(default_factory=Uniform01)
    empirical_m: int | None = None
    sweep: dict[str, list] = field(default_factory=dict)
    enabled: tuple[str, ...] = ()
    directory: Path = Path("out")
    formats: tuple[str, ...] = FORMATS
    raw: dict = field(default_factory=dict)

    @classmethod
    def from_dict(
        cls, raw: Mapping, out: str | None = None, seed: int | None = None, require_task: bool = True
    ) -> "ExperimentConfig":
        if not isinstance(raw, Mapping):
            raise ConfigError("config", "top level must be an object")
        unknown = set(raw) - {"copula", "grid", "output", *TASKS}
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown section")
        if "copula" not in raw:
            raise ConfigError("copula", "is required")
        try:
            spec = validate(raw["copula"])
        except InvalidSpec as exc:
            raise ConfigError("copula", str(exc)) from exc

        grid = _section(raw, "grid") or {}
        m = _int(grid, "m", "grid", 2, MAX_RESOLUTION, default=64)
        m2 = _int(grid, "m2", "grid", 2, MAX_RESOLUTION) if "m2" in grid else None

        sections = {t: _section(raw, t) for t in TASKS}
        enabled = tuple(t for t in TASKS if _enabled(sections[t]))
        if require_task and not enabled:
            raise ConfigError("config", f"no task enabled; add one of {', '.join(TASKS)}")

        prof = sections["profile"] or {}
        n_max = _int(prof, "n_max", "profile", 1, MAX_LAGS, default=10)

        sim = sections["simulate"] or {}
        sim_n = empirical_m = None
        sim_seed, marginal = 0, Uniform01()
        if "simulate" in enabled:
            sim_n = _int(sim, "n", "simulate", 1, 2**32 - 1)
            sim_seed = _int(sim, "seed", "simulate", 0, 2**64 - 1, default=0)
            try:
                marginal = marginal_from_dict(sim.get("marginal"))
            except InvalidSpec as exc:
                raise ConfigError("simulate.marginal", str(exc)) from exc
            if "empirical_m" in sim:
                empirical_m = _int(sim, "empirical_m", "simulate", 2, MAX_RESOLUTION)
        if seed is not None:
            if not 0 <= int(seed) < 2**64:
                raise ConfigError("--seed", "must be a 64-bit unsigned integer")
            sim_seed = int(seed)

        sweep: dict[str, list] = {}
        if "sweep" in enabled:
            params = (sections["sweep"] or {}).get("parameters")
            if not isinstance(params, Mapping) or not params:
                raise ConfigError("sweep.parameters", "must map parameter paths to value lists")
            base = describe(spec)
            for key, values in params.items():
                if not isinstance(values, list) or not values:
                    raise ConfigError(f"sweep.parameters.{key}", "must be a nonempty list")
                sweep[str(key)] = values
            for combo in itertools.product(*sweep.values()):
                desc = copy.deepcopy(base)
                try:
                    for key, val in zip(sweep, combo):
                        _set_path(desc, key, val)
                    validate(desc)
                except (KeyError, IndexError, ValueError, TypeError) as exc:
                    raise ConfigError("sweep.parameters", f"{dict(zip(sweep, combo))}: {exc}") from exc

        output = _section(raw, "output") or {}
        directory = Path(out if out is not None else output.get("directory", "out"))
        formats = output.get("formats", list(FORMATS))
        if not isinstance(formats, list) or not set(formats) <= set(FORMATS) or not formats:
            raise ConfigError("output.formats", f"must be a nonempty subset of {list(FORMATS)}")
        try:
            directory.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError("output.directory", f"cannot create {directory}: {exc}") from exc
        if not os.access(directory, os.W_OK):
            raise ConfigError("output.directory", f"{directory} is not writable")

        return cls(
            copula=spec,
            m=m,
            m2=m2,
            n_max=n_max,
            sim_n=sim_n,
            seed=sim_seed,
            marginal=marginal,
            empirical_m=empirical_m,
            sweep=sweep,
            enabled=enabled,
            directory=directory,
            formats=tuple(f for f in FORMATS if f in formats),
            raw=json.loads(json.dumps(raw)),
        )


@dataclass
class RunReport:
    config: dict
    outputs: dict = field(default_factory=dict)
    verdicts: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    artifacts: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(v != FAIL for v in self.verdicts.values())

    def to_json(self) -> dict:
        return {
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "config": self.config,
            "outputs": self.outputs,
            "verdicts": self.verdicts,
            "wall_clock_seconds": self.timings,
            "artifacts": self.artifacts,
        }


def _verdict(ok: bool | None) -> str:
    return NA if ok is None else (PASS if ok else FAIL)


def _write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    path.write_text(buf.getvalue(), encoding="ascii", newline="\n")


class _Runner:
    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.report = RunReport(config={**cfg.raw, "copula": describe(cfg.copula)})
        self.write_csv = "csv" in cfg.formats
        self._matrices: dict[int, Any] = {}
        self._rho1: float | None = None

    def matrix(self, m: int):
        if m not in self._matrices:
            self._matrices[m] = discretize(self.cfg.copula, m)
        return self._matrices[m]

    def artifact(self, name: str) -> Path:
        path = self.cfg.directory / name
        self.report.artifacts.append(str(path))
        return path

    def coeffs(self) -> dict:
        cfg = self.cfg
        rows = []
        for m in [cfg.m] + ([cfg.m2] if cfg.m2 else []):
            p = self.matrix(m)
            rows.append({"m": m, "beta": beta_coeff(p), "rho": rho_coeff(p), "phi": phi_coeff(p)})
        self._rho1 = rows[0]["rho"]
        out: dict[str, Any] = {"resolutions": rows}
        if len(rows) == 2:
            out["rho_gap"] = abs(rows[1]["rho"] - rows[0]["rho"])
        if self.write_csv:
            _write_csv(
                self.artifact("coeffs.csv"),
                ["m", "beta", "rho", "phi"],
                [[r["m"], _g(r["beta"]), _g(r["rho"]), _g(r["phi"])] for r in rows],
            )
        return out

    def profile(self) -> dict:
        prof = profile_from_matrix(self.matrix(self.cfg.m), self.cfg.n_max)
        self._rho1 = float(prof.rho[0])
        self._profile = prof
        if self.write_csv:
            prof.to_csv(self.artifact("profile.csv"))
        return {
            "m": prof.m,
            "beta": prof.beta.tolist(),
            "rho": prof.rho.tolist(),
            "phi": prof.phi.tolist(),
            "fitted_rates": prof.fitted_rates,
            "nondecreasing": list(prof.nondecreasing),
        }

    def doeblin(self) -> dict:
        rep = doeblin_report(self.cfg.copula, self.cfg.m)
        self._doeblin = rep
        fields = ["m", "density_floor", "epsilon", "phi_bound", "grid_phi1", "applicable"]
        values = [rep.m, _g(rep.density_floor), _g(rep.epsilon), _g(rep.phi_bound), _g(rep.grid_phi1), str(rep.applicable).lower()]
        if self.write_csv:
            _write_csv(self.artifact("doeblin.csv"), fields, [values])
        return {k: getattr(rep, k) for k in fields}

    def simulate(self) -> dict:
        cfg = self.cfg
        path = sample_chain(cfg.copula, cfg.marginal, cfg.sim_n, cfg.seed)
        if self.write_csv:
            path.to_csv(self.artifact("path.csv"))
        vals = path.values
        out: dict[str, Any] = {
            "n": path.n,
            "seed": path.seed,
            "generator": path.generator_id,
            "mean": float(vals.mean()),
            "min": float(vals.min()),
            "max": float(vals.max()),
        }
        if isinstance(cfg.marginal, Uniform01):
            out["ks_uniform"] = float(stats.kstest(vals, "uniform").statistic)
            if cfg.empirical_m and path.n >= cfg.empirical_m**2:
                emp = empirical_transition(path, cfg.empirical_m)
                grid = discretize(cfg.copula, cfg.empirical_m)
                tv = 0.5 * np.abs(emp.entries - grid.entries).sum(axis=1)
                out["empirical_max_row_tv"] = float(tv.max())
                out["empirical_empty_rows"] = list(emp.empty_rows)
        return out

    def sweep(self) -> dict:
        cfg = self.cfg
        keys = list(cfg.sweep)
        base = describe(cfg.copula)
        rows = []
        for combo in itertools.product(*cfg.sweep.values()):
            desc = copy.deepcopy(base)
            for key, val in zip(keys, combo):
                _set_path(desc, key, val)
            p = discretize(validate(desc), cfg.m)
            rows.append((tuple(combo), beta_coeff(p), rho_coeff(p), phi_coeff(p)))
        rows.sort(key=lambda r: tuple(_sort_key(v) for v in r[0]))
        if self.write_csv:
            _write_csv(
                self.artifact("sweep.csv"),
                keys + ["m", "beta", "rho", "phi"],
                [[json.dumps(v) if isinstance(v, list) else v for v in combo] + [cfg.m, _g(b), _g(r), _g(f)] for combo, b, r, f in rows],
            )
        return {"rows": [{"parameters": dict(zip(keys, c)), "beta": b, "rho": r, "phi": f} for c, b, r, f in rows]}

    def verdicts(self) -> dict:
        cfg = self.cfg
        outs = self.report.outputs
        v: dict[str, str] = {}
        if "profile" in outs:
            for k, ok in self._profile.check().items():
                v[k] = _verdict(ok)
        elif "coeffs" in outs:
            r = outs["coeffs"]["resolutions"][0]
            v["beta_le_phi"] = _verdict(r["beta"] <= r["phi"] + 1e-12)
            v["rho_le_rho1_pow"] = PASS
            v["rho_le_2sqrt_phi"] = _verdict(r["rho"] <= 2 * np.sqrt(r["phi"]) + 1e-9)
        else:
            v["beta_le_phi"] = v["rho_le_rho1_pow"] = v["rho_le_2sqrt_phi"] = NA
        if isinstance(cfg.copula, Mixture) and self._rho1 is not None:
            bound = sum(w * rho_coeff(discretize(c, cfg.m)) for c, w in zip(cfg.copula.components, cfg.copula.weights))
            outs["mixture_rho_bound"] = {"rho_mixture": self._rho1, "weighted_component_rho": bound}
            v["mixture_rho_bound"] = _verdict(self._rho1 <= bound + 1e-9)
        else:
            v["mixture_rho_bound"] = NA
        v["doeblin_bound"] = _verdict(self._doeblin.holds()) if "doeblin" in outs else NA
        return v


def run_experiment(cfg: ExperimentConfig, tasks: tuple[str, ...] | None = None) -> RunReport:
    """Run the requested (default: enabled) tasks, write artifacts, return the report.

    Numerical errors propagate with the failing task recorded in ``task``.
    """
    runner = _Runner(cfg)
    tasks = cfg.enabled if tasks is None else tasks
    for task in TASKS:
        if task not in tasks:
            continue
        t0 = time.perf_counter()
        try:
            runner.report.outputs[task] = getattr(runner, task)()
        except CopulaChainError as exc:
            exc.task = task
            raise
        runner.report.timings[task] = time.perf_counter() - t0
    runner.report.verdicts = runner.verdicts()
    if "json" in cfg.formats:
        path = runner.artifact("report.json")
        path.write_text(json.dumps(runner.report.to_json(), indent=2, default=_json_default) + "\n", encoding="utf-8")
    return runner.report


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def load_config(
    path: str | Path, out: str | None = None, seed: int | None = None, require_task: bool = True
) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError("--config", f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError("--config", f"{path} is not valid JSON: {exc}") from exc
    return ExperimentConfig.from_dict(raw, out=out, seed=seed, require_task=require_task)
