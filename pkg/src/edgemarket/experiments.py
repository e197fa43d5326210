"""Configuration-driven experiment sweeps.

Each experiment id reruns one of the stock studies at desk scale: the
fig3 family compares the month strategies for a single user, fig4/fig5
measure the pricing policy against the hindsight-optimal fixed price,
and fig6 compares the whole ecosystem with and without edge service.
Every (sweep value, seed) cell is deterministic, so reruns reproduce the
result table byte for byte.
"""
from __future__ import annotations

import csv
import io
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .ecosystem import (DEFAULT_PLAN, PopulationSpec, PricingParams,
                        build_grid, ex_post_optimal_revenue, run_scenario,
                        sample_population, simulate_greedy_months,
                        simulate_months, simulate_offline_months)
from .model import DataPlan


class ConfigError(ValueError):
    """Bad experiment configuration file."""


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    seeds: tuple[int, ...]
    sweep_name: str
    sweep_values: tuple[float, ...]
    population: PopulationSpec
    price: float              # fixed edge price for the strategy studies
    pricing: PricingParams

    def __post_init__(self) -> None:
        if not self.seeds:
            raise ConfigError("need at least one seed")
        if not self.sweep_values:
            raise ConfigError("need at least one sweep value")
        if not all(np.isfinite(self.sweep_values)):
            raise ConfigError("sweep values must be finite")


# Stock experiment definitions: sweep variable, sweep values, population
# overrides (applied on top of PopulationSpec defaults) and fixed price.
_STOCK: dict[str, dict] = {
    # single-user strategy studies: payoff of hindsight / adaptive / myopic
    "fig3a": dict(sweep="price", values=(0.1, 0.25, 0.4, 0.55, 0.7, 0.85, 1.0),
                  population=dict(n_users=1, plan=DataPlan(2.4, 10.0, 15.0))),
    "fig3b": dict(sweep="Q", values=(0.4, 0.9, 1.4, 1.9, 2.4, 2.9, 3.4, 3.9),
                  population=dict(n_users=1)),
    "fig3c": dict(sweep="pi", values=(10.0, 12.5, 15.0, 17.5, 20.0),
                  population=dict(n_users=1, plan=DataPlan(2.4, 10.0, 15.0))),
    # provider revenue studies: policy against the hindsight benchmark
    "fig4": dict(sweep="d_bar", values=(0.1, 0.15, 0.2, 0.25, 0.3),
                 population=dict(plan=DataPlan(3.0, 10.0, 15.0))),
    "fig5": dict(sweep="r_bar", values=(0.05, 0.075, 0.1, 0.125, 0.15),
                 population=dict(plan=DataPlan(3.0, 10.0, 15.0))),
    # ecosystem study: market with vs without edge service
    "fig6": dict(sweep="c_bar", values=(0.5, 1.0, 1.5, 2.0, 2.5, 3.0),
                 population=dict(d_bar=0.06, r_bar=0.03)),
    "custom": dict(sweep=None, values=None, population=dict()),
}

_PLAN_FIELDS = {"Q", "Pi", "pi"}
_SPEC_FIELDS = {"n_users", "T", "d_bar", "r_bar", "c_bar", "a", "b", "cp_tau"}
_SWEEPABLE = _PLAN_FIELDS | _SPEC_FIELDS | {"price"}


def load_config(path: str | Path, seed_override: int | None = None
                ) -> ExperimentConfig:
    """Parse a TOML experiment file; raises ConfigError on any problem."""
    try:
        raw = tomllib.loads(Path(path).read_text())
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_dict(raw, seed_override)


def config_from_dict(raw: dict, seed_override: int | None = None
                     ) -> ExperimentConfig:
    experiment = raw.get("experiment")
    if experiment not in _STOCK:
        raise ConfigError(f"experiment must be one of {sorted(_STOCK)}, "
                          f"got {experiment!r}")
    stock = _STOCK[experiment]

    if seed_override is not None:
        seeds = (int(seed_override),)
    else:
        seeds = tuple(int(s) for s in raw.get("seeds", ()))
    sweep_name = raw.get("sweep_variable", stock["sweep"])
    if sweep_name not in _SWEEPABLE:
        raise ConfigError(f"sweep_variable must be one of {sorted(_SWEEPABLE)}, "
                          f"got {sweep_name!r}")
    values = tuple(float(v) for v in raw.get("sweep_values", stock["values"] or ()))

    plan_kw = dict(Q=DEFAULT_PLAN.Q, Pi=DEFAULT_PLAN.Pi, pi=DEFAULT_PLAN.pi)
    spec_kw = dict(stock["population"])
    if "plan" in spec_kw:
        plan = spec_kw.pop("plan")
        plan_kw = dict(Q=plan.Q, Pi=plan.Pi, pi=plan.pi)
    for key, val in raw.get("plan", {}).items():
        if key not in _PLAN_FIELDS:
            raise ConfigError(f"unknown plan field {key!r}")
        plan_kw[key] = float(val)
    for key, val in raw.get("population", {}).items():
        if key not in _SPEC_FIELDS:
            raise ConfigError(f"unknown population field {key!r}")
        spec_kw[key] = type(PopulationSpec.__dataclass_fields__[key].default)(val)

    pricing_kw = dict(raw.get("pricing", {}))
    if "alpha" in pricing_kw:
        pricing = PricingParams.from_alpha(
            float(pricing_kw.pop("alpha")),
            p_min=float(pricing_kw.pop("p_min", 0.113)),
            refinement=int(pricing_kw.pop("refinement", 20)))
        if pricing_kw:
            raise ConfigError(f"unknown pricing fields {sorted(pricing_kw)}")
    else:
        try:
            pricing = PricingParams(**{k: (int(v) if k == "refinement" else float(v))
                                       for k, v in pricing_kw.items()})
        except TypeError as exc:
            raise ConfigError(f"bad pricing section: {exc}") from exc

    try:
        spec = PopulationSpec(plan=DataPlan(**plan_kw), **spec_kw)
        config = ExperimentConfig(
            experiment=experiment, seeds=seeds, sweep_name=sweep_name,
            sweep_values=values, population=spec,
            price=float(raw.get("price", 0.2)), pricing=pricing)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    return config


def _apply_sweep(config: ExperimentConfig, value: float, seed: int
                 ) -> tuple[PopulationSpec, float]:
    """Population spec and fixed price for one sweep cell."""
    spec, price = config.population, config.price
    name = config.sweep_name
    if name == "price":
        price = value
    elif name in _PLAN_FIELDS:
        spec = replace(spec, plan=replace(spec.plan, **{name: value}))
    else:
        if name in ("n_users", "T"):
            value = int(value)
        spec = replace(spec, **{name: value})
    return replace(spec, seed=seed), price


def run_cell(config: ExperimentConfig, value: float, seed: int) -> dict:
    """Metrics of one (sweep value, seed) cell."""
    spec, price = _apply_sweep(config, value, seed)
    u, e = spec.utility, spec.cost
    if config.experiment in ("fig3a", "fig3b", "fig3c", "custom"):
        pop = sample_population(spec)
        plan = spec.plan
        opt = simulate_offline_months(pop, plan, u, e, price).payoffs(plan)
        alg1 = simulate_months(pop, plan, u, e, price).payoffs(plan)
        greedy = simulate_greedy_months(pop, plan, u, e, price).payoffs(plan)
        return {"payoff_opt": float(opt.mean()),
                "payoff_alg1": float(alg1.mean()),
                "payoff_greedy": float(greedy.mean())}
    if config.experiment in ("fig4", "fig5"):
        led = run_scenario(spec, "edge", config.pricing)
        pop = sample_population(spec)
        grid = build_grid(config.pricing.p_min, config.pricing.epsilon,
                          spec.price_cap)
        bench = ex_post_optimal_revenue(pop, spec.plan, u, e, grid,
                                        config.pricing.refinement)
        return {"revenue_opt": bench.v_star,
                "revenue_alg2": led.esp_revenue,
                "ratio": led.esp_revenue / bench.v_star}
    if config.experiment == "fig6":
        none = run_scenario(spec, "none")
        edge = run_scenario(spec, "edge", config.pricing)
        return {
            "mu_payoff_none": float(none.mu_payoffs.sum()),
            "mu_payoff_edge": float(edge.mu_payoffs.sum()),
            "cp_revenue_none": none.cp_revenue,
            "cp_revenue_edge": edge.cp_revenue,
            "isp_revenue_none": none.isp_revenue,
            "isp_revenue_edge": edge.isp_revenue,
            "esp_revenue_edge": edge.esp_revenue,
            "welfare_none": none.social_welfare,
            "welfare_edge": edge.social_welfare - edge.esp_revenue,
            "welfare_edge_with_esp": edge.social_welfare,
        }
    raise ConfigError(f"no runner for experiment {config.experiment!r}")


@dataclass(frozen=True)
class ResultTable:
    sweep_name: str
    metrics: tuple[str, ...]
    rows: tuple[tuple[float, int, tuple[float, ...]], ...]  # (value, seed, metrics)

    def column(self, metric: str) -> np.ndarray:
        i = self.metrics.index(metric)
        return np.asarray([r[2][i] for r in self.rows])

    def sweep_column(self) -> np.ndarray:
        return np.asarray([r[0] for r in self.rows])

    def summary(self) -> list[tuple[float, dict[str, tuple[float, float]]]]:
        """Per sweep value: metric -> (mean, std) in sweep order."""
        out = []
        for value in dict.fromkeys(r[0] for r in self.rows):
            block = np.asarray([r[2] for r in self.rows if r[0] == value])
            out.append((value, {m: (float(block[:, i].mean()),
                                    float(block[:, i].std()))
                                for i, m in enumerate(self.metrics)}))
        return out


def _cell_worker(args) -> tuple[int, int, dict]:
    config, vi, value, si, seed = args
    return vi, si, run_cell(config, value, seed)


def run_experiment(config: ExperimentConfig, jobs: int = 1) -> ResultTable:
    """All (sweep value, seed) cells, in deterministic order.

    A failure in any cell propagates with the offending sweep value and
    seed attached, so the CLI can report it and exit with the numeric
    failure code.
    """
    tasks = [(config, vi, value, si, seed)
             for vi, value in enumerate(config.sweep_values)
             for si, seed in enumerate(config.seeds)]
    results: dict[tuple[int, int], dict] = {}
    try:
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                for vi, si, metrics in pool.map(_cell_worker, tasks):
                    results[(vi, si)] = metrics
        else:
            for task in tasks:
                vi, si, metrics = _cell_worker(task)
                results[(vi, si)] = metrics
    except Exception as exc:
        done = set(results)
        pending = next(t for t in tasks if (t[1], t[3]) not in done)
        raise RuntimeError(
            f"cell failed at {config.sweep_name}={pending[2]} "
            f"seed={pending[4]}: {exc}") from exc

    metrics = tuple(results[(0, 0)])
    rows = tuple((value, seed, tuple(results[(vi, si)][m] for m in metrics))
                 for vi, value in enumerate(config.sweep_values)
                 for si, seed in enumerate(config.seeds))
    return ResultTable(config.sweep_name, metrics, rows)


def write_csv(table: ResultTable, path: Path) -> None:
    """Fixed-format CSV; identical runs produce identical bytes."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([table.sweep_name, "seed", *table.metrics])
    for value, seed, metrics in table.rows:
        writer.writerow([format(value, ".10g"), seed,
                         *(format(m, ".10g") for m in metrics)])
    path.write_text(buf.getvalue())


def write_gnuplot_data(table: ResultTable, out_dir: Path) -> list[Path]:
    """One whitespace-separated series file per metric: value mean std."""
    paths = []
    summary = table.summary()
    for metric in table.metrics:
        lines = [f"# {table.sweep_name} mean std"]
        for value, stats in summary:
            mean, std = stats[metric]
            lines.append(f"{value:.10g} {mean:.10g} {std:.10g}")
        path = out_dir / f"{metric}.dat"
        path.write_text("\n".join(lines) + "\n")
        paths.append(path)
    return paths


def format_summary(table: ResultTable) -> str:
    """Human-readable per-sweep-value means and standard deviations."""
    lines = []
    header = f"{table.sweep_name:>12}  " + "  ".join(
        f"{m:>24}" for m in table.metrics)
    lines.append(header)
    for value, stats in table.summary():
        cells = []
        for metric in table.metrics:
            mean, std = stats[metric]
            cells.append(f"{mean:>14.6g} +-{std:>8.3g}")
        lines.append(f"{value:>12.6g}  " + "  ".join(f"{c:>24}" for c in cells))
    return "\n".join(lines)
