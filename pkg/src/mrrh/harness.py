"""Experiment orchestration and report emission.

One run = one ``(N, seed)``: build the network, route a random workload,
optionally provision the physical layer and evaluate the lower bounds.
Runs are ordered by ``(N, seed)`` in the report regardless of how they
were executed.
"""
from __future__ import annotations

import csv
import dataclasses
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from mrrh import __version__, analysis, phy
from mrrh.errors import InvalidConfigError
from mrrh.rng import stream
from mrrh.router import generate_pairing, route_workload
from mrrh.topology import MIN_NODES, NetworkConfig, build_network

CSV_COLUMNS = (
    "n", "seed", "k_channels", "pairs", "delivered_frac", "mean_hops", "max_hops",
    "p95_hops", "theorem4_bound", "usage_violation_frac", "tdma_max_slots",
    "tdma_budget", "interference_violation_frac", "p_avg_provisioned",
    "b_total_provisioned", "p_lower_bound", "b_lower_bound", "p_ratio", "b_ratio",
    "nnc_mean_hops",
)

CONVENTIONS = ("smallest", "largest")


@dataclass(frozen=True)
class ExperimentConfig:
    n: tuple[int, ...] = (1024,)
    seeds: tuple[int, ...] = (1,)
    radius: float | None = None
    density: float | None = None
    pairs: int | None = None
    lam: float = 1.0
    eta0: float = 1.0
    d: float = 2.0
    hop_limit: int | None = None
    json_path: str | None = None
    csv_path: str | None = None
    run_nnc: bool = True
    run_phy: bool = True
    run_bounds: bool = True
    lemma7_channel_convention: str = "smallest"
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "n", tuple(int(x) for x in self.n))
        object.__setattr__(self, "seeds", tuple(int(x) for x in self.seeds))
        if not self.n:
            raise InvalidConfigError("at least one N is required")
        if not self.seeds:
            raise InvalidConfigError("at least one seed is required")
        if any(x < MIN_NODES for x in self.n):
            raise InvalidConfigError(f"every N must be >= {MIN_NODES}")
        if any(s < 0 for s in self.seeds):
            raise InvalidConfigError("seeds must be non-negative")
        if self.radius is not None and self.density is not None:
            raise InvalidConfigError("radius and density are mutually exclusive")
        if self.radius is not None and not self.radius > 0:
            raise InvalidConfigError("radius must be > 0")
        if self.density is not None and not self.density > 0:
            raise InvalidConfigError("density must be > 0")
        if self.pairs is not None and self.pairs < 0:
            raise InvalidConfigError("pairs must be >= 0")
        if self.lam < 0 or not self.eta0 > 0 or not self.d > 0:
            raise InvalidConfigError("need lam >= 0, eta0 > 0, d > 0")
        if self.hop_limit is not None and self.hop_limit < 1:
            raise InvalidConfigError("hop_limit must be >= 1")
        if self.lemma7_channel_convention not in CONVENTIONS:
            raise InvalidConfigError(
                f"lemma7_channel_convention must be one of {CONVENTIONS}")
        if self.workers < 1:
            raise InvalidConfigError("workers must be >= 1")

    def radius_for(self, n: int) -> float:
        """Sphere radius for ``n`` nodes; constant density 1 when unset."""
        if self.radius is not None:
            return float(self.radius)
        rho = 1.0 if self.density is None else float(self.density)
        return math.sqrt(n / (4.0 * math.pi * rho))

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["n"] = list(self.n)
        out["seeds"] = list(self.seeds)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidConfigError(f"unknown config fields: {sorted(unknown)}")
        data = dict(data)
        for key in ("n", "seeds"):
            if key in data and isinstance(data[key], int):
                data[key] = [data[key]]
        try:
            return cls(**data)
        except TypeError as exc:
            raise InvalidConfigError(str(exc)) from exc

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text())
        except OSError as exc:
            raise InvalidConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise InvalidConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise InvalidConfigError(f"config {path} must hold a JSON object")
        return cls.from_dict(data)


@dataclass
class ExperimentReport:
    config: dict
    runs: list[dict]
    software_version: str = __version__
    wall_clock_s: float = 0.0

    def to_dict(self, include_wall_clock: bool = True) -> dict:
        out = {"config": self.config, "runs": self.runs,
               "software_version": self.software_version}
        if include_wall_clock:
            out["wall_clock_s"] = self.wall_clock_s
        return out


class RunError(RuntimeError):
    """A single ``(N, seed)`` run failed; carries the run's identity."""


def _clean(obj):
    """Convert numpy scalars/arrays and non-finite floats into JSON values."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def run_single(config: ExperimentConfig, n: int, seed: int) -> dict:
    """Full pipeline for one ``(N, seed)``; returns a flat-ish record."""
    radius = config.radius_for(n)
    net = build_network(NetworkConfig(n, radius, seed, config.hop_limit))
    K = net.K
    lg = math.log2(n)
    workload = generate_pairing(n, stream(seed, n, "workload"), config.pairs)
    result = route_workload(net, workload, config.hop_limit)
    rec: dict = {
        "n": n, "seed": seed, "radius": radius, "k_channels": K,
        "theta": list(net.plan.theta), "pairs": len(workload),
        "level_counts": np.bincount(net.levels, minlength=K + 1),
        "theorem4_bound": 2.0 * lg**3,
    }

    if result.n_packets:
        st = analysis.latency_stats(result)
        rec["latency"] = dataclasses.asdict(st)
        rec["distant_pair_frac"] = analysis.distant_pair_fraction(net, workload)
    else:
        st = None
        rec["latency"] = None
        rec["distant_pair_frac"] = None
    rec["delivered_frac"] = result.delivered_fraction
    rec["mean_hops"] = st.mean if st else 0.0
    rec["max_hops"] = st.max if st else 0
    rec["p95_hops"] = st.p95 if st else 0.0
    rec["status_counts"] = {s: sum(t.status.value == s for t in result.traces)
                            for s in ("Delivered", "Stuck", "HopLimitExceeded")}

    usage = {}
    for c in CONVENTIONS:
        u = analysis.usage_check(result, n, c)
        usage[c] = dict(dataclasses.asdict(u), violation_fraction=u.violation_fraction)
    rec["usage"] = usage
    rec["usage_violation_frac"] = usage[config.lemma7_channel_convention]["violation_fraction"]

    checks = analysis.hierarchy_checks(net, result)
    rec["hierarchy"] = {
        "transitions": checks.transitions,
        "monotonicity_violation_frac": checks.monotonicity_violation_fraction,
        "monotonicity_open_violation_frac": checks.monotonicity_open_fraction,
        "exit_violation_frac": checks.exit_violation_fraction,
        "descent_fraction": checks.descent_fraction,
    }

    prov = None
    rec.update({"tdma_max_slots": None, "tdma_budget": phy.slot_budget(n),
                "interference_violation_frac": None, "p_avg_provisioned": None,
                "b_total_provisioned": None})
    if config.run_phy:
        pcfg = phy.PhyConfig(eta0=config.eta0, lam=config.lam, d=config.d)
        prov = phy.provision(net, pcfg)
        rec["provision"] = {"power": prov.power, "bandwidth": prov.bandwidth,
                            "rate": prov.rate, "p_avg": prov.p_avg, "b_total": prov.b_total}
        rec["p_avg_provisioned"] = prov.p_avg
        rec["b_total_provisioned"] = prov.b_total
        rec["p_avg_measured_occupancy"] = phy.measured_average_power(prov, phy.occupancy_duty(net))
        if config.lam > 0:
            rec.update(_phy_checks(net, prov, config, seed))

    rec.update({"p_lower_bound": None, "b_lower_bound": None, "p_ratio": None, "b_ratio": None})
    if config.run_bounds and config.lam > 0 and st is not None:
        inp = analysis.BoundInputs(config.lam, max(1.0, st.mean), n, K, radius,
                                   config.eta0, config.d)
        rec["p_lower_bound"] = analysis.power_lower_bound(inp)
        rec["b_lower_bound"] = analysis.bandwidth_lower_bound(inp)
        rec["p_lower_bound_density_form"] = analysis.power_lower_bound_density_form(
            inp, n / (4.0 * math.pi * radius**2))
        if prov is not None:
            rep = analysis.optimality_ratios(prov, st, inp)
            rec["p_ratio"] = rep.p_ratio
            rec["b_ratio"] = rep.b_ratio

    rec["nnc_mean_hops"] = None
    if config.run_nnc and result.n_packets:
        nnc = route_workload(net, workload, config.hop_limit, nnc=True)
        nst = analysis.latency_stats(nnc)
        rec["nnc"] = dataclasses.asdict(nst)
        rec["nnc_mean_hops"] = nst.mean
    return _clean(rec)


def _phy_checks(net, prov, config: ExperimentConfig, seed: int) -> dict:
    rng = stream(seed, net.n, "sampling")
    schedules = {k: phy.tdma_schedule(net, k) for k in range(net.K + 1)}
    links = []
    within = 0
    for k, sch in schedules.items():
        sampled = phy.sample_links(net, sch, prov.power[k], config.d, rng)
        bound = phy.interference_bound(prov.power[k], k, net.n, net.config.radius, config.d)
        within += sum(ln.interference <= bound for ln in sampled)
        links.extend(sampled)
    suff = phy.verify_rate_sufficiency(links, prov, schedules, config.eta0)
    half = phy.verify_rate_sufficiency(links, prov, schedules, config.eta0, 0.5)
    slots = [schedules[k].n_slots for k in range(net.K + 1)]
    return {
        "tdma_slots": slots,
        "tdma_max_slots": max(slots),
        "tdma_over_budget": sum(s > phy.slot_budget(net.n) for s in slots),
        "interference_samples": len(links),
        "interference_violation_frac": 1.0 - within / len(links) if links else 0.0,
        "rate_power_violation_frac": suff.power_violation_fraction,
        "rate_demand_violation_frac": suff.demand_violation_fraction,
        "rate_power_violation_frac_half_bandwidth": half.power_violation_fraction,
    }


def _run_job(args):
    config, n, seed = args
    try:
        return run_single(config, n, seed)
    except Exception as exc:  # re-raised with context below
        raise RunError(f"run N={n} seed={seed} failed: {exc}") from exc


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    start = time.perf_counter()
    jobs = [(config, n, s) for n in sorted(config.n) for s in sorted(config.seeds)]
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            runs = list(pool.map(_run_job, jobs))
    else:
        runs = [_run_job(j) for j in jobs]
    report = ExperimentReport(_clean(config.to_dict()), runs)
    report.wall_clock_s = time.perf_counter() - start
    return report


def canonical_json(report: ExperimentReport, include_wall_clock: bool = True) -> str:
    """Sorted keys, shortest round-trip floats, trailing newline."""
    return json.dumps(_clean(report.to_dict(include_wall_clock)), sort_keys=True,
                      indent=1, allow_nan=False) + "\n"


def _open_for_write(path):
    path = Path(path)
    try:
        if path.parent and not path.parent.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
        return path.open("w", newline="")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def emit_json(report: ExperimentReport, path) -> None:
    with _open_for_write(path) as fh:
        fh.write(canonical_json(report))


def csv_rows(report: ExperimentReport) -> list[list]:
    rows = []
    for run in report.runs:
        rows.append([run.get(col) for col in CSV_COLUMNS])
    return rows


def emit_csv(report: ExperimentReport, path) -> None:
    with _open_for_write(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in csv_rows(report):
            writer.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v)
                             for v in row])


def load_report(path) -> ExperimentReport:
    data = json.loads(Path(path).read_text())
    return ExperimentReport(data["config"], data["runs"], data.get("software_version", ""),
                            data.get("wall_clock_s", 0.0))
