"""Experiment orchestration: configuration ingestion, runs, sweeps, duality and
counterexample check suites, and persistence of diagnostics.

Config files are JSON with a versioned schema (congestio/v1); unknown keys are
rejected.  Identical config + seed produces byte-identical outputs, including
under parallel sweeps (results are merged by gamma).  Exit codes: 0 all gated
invariants pass, 1 an invariant failed (first failure named on stderr),
2 invalid configuration.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import constitutive as laws
from . import counterexamples as cex
from . import duality as dual
from . import monitors
from .constitutive import Params
from .grid import DomainError, GridField
from .solver import (AdmissibilityError, MonitorError, make_initial, run,
                     validate_initial)
from .testbank import BANK_VERSION

SCHEMA = "congestio/v1"

PARAM_KEYS = {"gamma", "rho_bar", "L", "N", "cfl", "T", "C_mom", "r0", "M0"}
DATUM_KEYS = {"kind", "sigma", "delta", "u_max", "sigma_u", "core_width", "w_width"}
TOP_KEYS = {"schema", "params", "datum", "formulation", "output_times",
            "n_outputs", "gamma_list", "seed", "gates", "tolerances"}
GATE_NAMES = ("mass", "u_range", "V_bound", "W_bound", "rho_floor", "oslc",
              "energy", "density_cap", "momentum", "switching_decrease")
DEFAULT_GATES = ("mass", "u_range", "V_bound", "W_bound", "rho_floor", "oslc",
                 "energy", "density_cap", "momentum")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Validated mirror of a config file."""

    params: Params
    datum: dict
    formulation: str = "velocity"
    output_times: list[float] = field(default_factory=list)
    n_outputs: int = 50
    gamma_list: list[float] = field(default_factory=list)
    seed: int = 0
    gates: tuple[str, ...] = DEFAULT_GATES
    tolerances: dict = field(default_factory=dict)


def _reject_unknown(obj: dict, allowed: set[str], where: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)} in {where}")


def load_config(path: str | Path) -> RunConfig:
    try:
        obj = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(obj, dict):
        raise ConfigError("config root must be an object")
    if obj.get("schema") != SCHEMA:
        raise ConfigError(f"config schema must be {SCHEMA!r}, got {obj.get('schema')!r}")
    _reject_unknown(obj, TOP_KEYS, "config")
    _reject_unknown(obj.get("params", {}), PARAM_KEYS, "params")
    _reject_unknown(obj.get("datum", {}), DATUM_KEYS, "datum")
    try:
        params = Params(**obj.get("params", {}))
    except (TypeError, DomainError) as exc:
        raise ConfigError(f"invalid params: {exc}") from exc
    datum = dict(obj.get("datum", {"kind": "equilibrium"}))
    if "kind" not in datum:
        raise ConfigError("datum.kind is required")
    formulation = obj.get("formulation", "velocity")
    if formulation not in ("velocity", "rw"):
        raise ConfigError(f"unknown formulation {formulation!r}")
    gates = tuple(obj.get("gates", DEFAULT_GATES))
    for g in gates:
        if g not in GATE_NAMES:
            raise ConfigError(f"unknown gate {g!r}; choose from {GATE_NAMES}")
    gamma_list = list(obj.get("gamma_list", []))
    if any(b <= a for a, b in zip(gamma_list, gamma_list[1:])):
        raise ConfigError("gamma_list must be ascending")
    return RunConfig(
        params=params, datum=datum, formulation=formulation,
        output_times=list(obj.get("output_times", [])),
        n_outputs=int(obj.get("n_outputs", 50)),
        gamma_list=gamma_list, seed=int(obj.get("seed", 0)),
        gates=gates, tolerances=dict(obj.get("tolerances", {})),
    )


def _out_dir(args) -> Path:
    out = args.out or os.environ.get("CONGESTIO_OUT", ".")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _output_times(cfg: RunConfig) -> list[float]:
    if cfg.output_times:
        return cfg.output_times
    T = cfg.params.T
    return [T * k / cfg.n_outputs for k in range(cfg.n_outputs + 1)]


def _to_native(o):
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o)}")


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=1, default=_to_native) + "\n")


def write_diagnostics_csv(path: Path, records) -> None:
    lines = [f"# schema: {SCHEMA}", ",".join(monitors.CSV_COLUMNS)]
    lines += [monitors.csv_row(r) for r in records]
    path.write_text("\n".join(lines) + "\n")


def _snapshots_payload(traj, params: Params) -> dict:
    snaps = []
    for t, s in zip(traj.times, traj.states):
        w = laws.desired_velocity(s.rho, s.u, params.gamma)
        pi = laws.potential(s.rho, params.gamma)
        snaps.append({"t": t, "rho": s.rho.values.tolist(), "u": s.u.values.tolist(),
                      "w": w.values.tolist(), "pi": pi.values.tolist()})
    return {"schema": SCHEMA,
            "grid": {"h": params.h, "L": params.L, "N": params.N},
            "params": {"gamma": params.gamma, "rho_bar": params.rho_bar,
                       "T": params.T, "cfl": params.cfl, "C_mom": params.C_mom},
            "snapshots": snaps}


def evaluate_invariants(traj, records, initial, params: Params, tol: dict) -> dict:
    """Measured value + bound + verdict for every run-level invariant."""
    init = monitors.InitialSummary.from_state(initial, params)
    eps_u = tol.get("eps_u", 1e-3)
    eps_W = tol.get("eps_W", 1e-3)
    eps_rho = tol.get("eps_rho", 1e-3)
    eps_V = tol.get("eps_V", 1e-3 * abs(init.V_sup0) + 1e-6)
    tol_energy = tol.get("energy", 0.05)
    tol_mom = tol.get("momentum", 0.05)

    mass_worst = max(r.mass_defect for r in records)
    u_lo = min(r.u_min for r in records)
    u_hi = max(r.u_max for r in records)
    V_sup = max(r.Vn_sup for r in records)
    W_sup = max(r.Wn_sup for r in records)
    floor_margin = min(r.rho_min - r.rho_min_bound for r in records)
    oslc_max = max(r.oslc for r in records)
    c_osl = monitors.oslc_bound(initial, params)
    edef = monitors.energy_defect(records)
    K_pi = max(r.pi_L1_local for r in records) * (params.gamma + 1.0) / params.gamma \
        + max(r.dxpi_L1 for r in records)
    rho_cap = K_pi ** (1.0 / (params.gamma + 1.0))
    rho_max = max(r.rho_max for r in records)
    mom_u_worst = max(r.mom_u_L1 for r in records)
    mom_w_worst = max(r.mom_w_L1 for r in records)
    mom_scale = max(init.mom_u0, init.mom_w0, 1e-14)
    switching = (records[0].switching_L1, records[-1].switching_L1)

    inv = {
        "mass": {"value": mass_worst, "bound": 1e-9 * (1.0 + abs(init.mass0)),
                 "passed": mass_worst <= 1e-9 * (1.0 + abs(init.mass0))},
        "u_range": {"value": [u_lo, u_hi],
                    "bound": [min(0.0, init.u_min0) - eps_u, max(0.0, init.u_max0) + eps_u],
                    "passed": (u_lo >= min(0.0, init.u_min0) - eps_u
                               and u_hi <= max(0.0, init.u_max0) + eps_u)},
        "V_bound": {"value": V_sup, "bound": max(0.0, init.V_sup0) + eps_V,
                    "passed": V_sup <= max(0.0, init.V_sup0) + eps_V},
        "W_bound": {"value": W_sup, "bound": init.W_sup0 + eps_W,
                    "passed": W_sup <= init.W_sup0 + eps_W},
        "rho_floor": {"value": floor_margin, "bound": -eps_rho,
                      "passed": floor_margin >= -eps_rho},
        "oslc": {"value": oslc_max, "bound": c_osl + 1e-3,
                 "passed": oslc_max <= c_osl + 1e-3},
        "energy": {"value": edef, "bound": tol_energy, "passed": edef <= tol_energy},
        "density_cap": {"value": rho_max, "bound": rho_cap, "passed": rho_max <= rho_cap},
        "momentum": {"value": [mom_u_worst, mom_w_worst],
                     "bound": [init.mom_u0 * (1 + tol_mom) + 1e-14,
                               init.mom_w0 * (1 + tol_mom) + 1e-14],
                     "passed": (mom_u_worst <= init.mom_u0 * (1 + tol_mom) + 1e-14
                                and mom_w_worst <= init.mom_w0 * (1 + tol_mom) + 1e-14)},
        "switching_decrease": {"value": list(switching), "bound": switching[0],
                               "passed": switching[1] <= switching[0] * (1 + 1e-9)},
    }
    return inv


def _admissibility_payload(report) -> dict:
    return {"all_passed": report.all_passed,
            "r0_measured": report.r0_measured,
            "M0_measured": report.M0_measured,
            "checks": {c.name: {"passed": c.passed, "measured": c.measured,
                                "bound": c.bound} for c in report.checks}}


def _single_run(cfg: RunConfig):
    params = cfg.params
    datum = dict(cfg.datum)
    kind = datum.pop("kind")
    initial = make_initial(kind, params, **datum)
    traj, records = run(initial, params, output_times=_output_times(cfg),
                        formulation=cfg.formulation)
    return initial, traj, records


def cmd_simulate(args) -> int:
    try:
        cfg = load_config(args.config)
        initial, traj, records = _single_run(cfg)
    except (ConfigError, AdmissibilityError, DomainError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except MonitorError as exc:
        print(f"invariant failure: {exc}", file=sys.stderr)
        return 1
    out = _out_dir(args)
    write_diagnostics_csv(out / "diagnostics.csv", records)
    _write_json(out / "snapshots.json", _snapshots_payload(traj, cfg.params))
    inv = evaluate_invariants(traj, records, initial, cfg.params, cfg.tolerances)
    report = {"schema": SCHEMA,
              "admissibility": _admissibility_payload(validate_initial(initial, cfg.params)),
              "gates": list(cfg.gates),
              "invariants": inv,
              "passed": all(inv[g]["passed"] for g in cfg.gates)}
    _write_json(out / "report.json", report)
    if not report["passed"]:
        first = next(g for g in cfg.gates if not inv[g]["passed"])
        print(f"invariant failure: {first} "
              f"(value {inv[first]['value']}, bound {inv[first]['bound']})",
              file=sys.stderr)
        return 1
    return 0


def _sweep_one(payload: tuple) -> dict:
    cfg_dict, gamma = payload
    cfg = _config_from_dict(cfg_dict)
    params_kw = {k: getattr(cfg.params, k) for k in PARAM_KEYS}
    params_kw["gamma"] = gamma
    cfg.params = Params(**params_kw)
    initial, traj, records = _single_run(cfg)
    return {"gamma": gamma,
            "switching_final": records[-1].switching_L1,
            "switching_initial": records[0].switching_L1,
            "rho_max": max(r.rho_max for r in records),
            "oslc_max": max(r.oslc for r in records),
            "energy_defect": monitors.energy_defect(records)}


def _config_as_dict(cfg: RunConfig) -> dict:
    return {"params": {k: getattr(cfg.params, k) for k in PARAM_KEYS},
            "datum": cfg.datum, "formulation": cfg.formulation,
            "output_times": cfg.output_times, "n_outputs": cfg.n_outputs,
            "gamma_list": cfg.gamma_list, "seed": cfg.seed,
            "gates": list(cfg.gates), "tolerances": cfg.tolerances}


def _config_from_dict(d: dict) -> RunConfig:
    return RunConfig(params=Params(**d["params"]), datum=d["datum"],
                     formulation=d["formulation"], output_times=d["output_times"],
                     n_outputs=d["n_outputs"], gamma_list=d["gamma_list"],
                     seed=d["seed"], gates=tuple(d["gates"]), tolerances=d["tolerances"])


def cmd_sweep(args) -> int:
    try:
        cfg = load_config(args.config)
        if not cfg.gamma_list:
            raise ConfigError("sweep needs a nonempty ascending gamma_list")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    payloads = [(_config_as_dict(cfg), g) for g in cfg.gamma_list]
    try:
        if args.workers > 1:
            with ProcessPoolExecutor(max_workers=args.workers) as pool:
                rows = list(pool.map(_sweep_one, payloads))
        else:
            rows = [_sweep_one(p) for p in payloads]
    except (AdmissibilityError, MonitorError, DomainError) as exc:
        print(f"sweep run failed: {exc}", file=sys.stderr)
        return 1
    rows.sort(key=lambda r: r["gamma"])
    out = _out_dir(args)
    cols = ("gamma", "switching_final", "switching_initial", "rho_max",
            "oslc_max", "energy_defect")
    lines = [f"# schema: {SCHEMA}", ",".join(cols)]
    lines += [",".join(repr(float(row[c])) for c in cols) for row in rows]
    (out / "sweep.csv").write_text("\n".join(lines) + "\n")
    finals = [row["switching_final"] for row in rows]
    monotone = all(b <= a * 1.05 for a, b in zip(finals, finals[1:]))
    _write_json(out / "sweep_report.json",
                {"schema": SCHEMA, "gamma_list": cfg.gamma_list,
                 "switching_final": finals, "monotone_5pct": monotone})
    if not monotone:
        print("invariant failure: switching residual not nonincreasing in gamma "
              f"(finals {finals})", file=sys.stderr)
        return 1
    return 0


def _corpus_velocity_fields(seed: int, grid: GridField, times: np.ndarray,
                            count: int = 10) -> list[dual.VelocityField]:
    """Deterministic compressive velocity fields satisfying the OSL bound."""
    rng = np.random.default_rng(seed)
    fields = []
    for _ in range(count):
        a = rng.uniform(0.3, 0.7)
        s = rng.uniform(0.2, 0.6)
        x0 = rng.uniform(-0.3, 0.3)
        drift = rng.uniform(-0.2, 0.2)
        fields.append(dual.VelocityField.from_callable(
            lambda t, x, a=a, s=s, x0=x0, drift=drift:
                drift - a * np.tanh((x - x0 - drift * t) / s),
            times, grid, osl_bound=0.0, sup_bound=abs(drift) + a + 1e-12))
    return fields


def cmd_duality(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    L, N = 2.0, 800
    h = 2 * L / N
    grid = GridField(np.zeros(N), h)
    times = np.linspace(0.0, 1.0, 21)
    x0 = grid.centers()
    checks: dict[str, dict] = {}

    # sticking-flow oracle u = -sgn(x)
    u_sgn = dual.VelocityField.from_callable(
        lambda t, x: -np.sign(x), times, grid, osl_bound=0.0, sup_bound=1.0)
    flow = dual.filippov_flow(u_sgn, x0)
    substep = min(h, 0.25)
    err = max(float(np.max(np.abs(
        flow.X[k] - np.sign(x0) * np.maximum(np.abs(x0) - t, 0.0))))
        for k, t in enumerate(flow.times))
    checks["flow_oracle"] = {"value": err, "bound": 2 * substep + h,
                             "passed": err <= 2 * substep + h}

    # pushforward of Lebesgue on [-1, 1]: atom of mass 1 at the origin
    mu0 = dual.Measure1D(GridField(np.where(np.abs(x0) <= 1.0, 1.0, 0.0), h))
    mu_half = dual.pushforward(mu0, flow, 0.5)
    atom_mass = sum(m for x, m in mu_half.atoms if abs(x) <= h)
    checks["pushforward_atom"] = {"value": atom_mass, "bound": [0.98, 1.02],
                                  "passed": abs(atom_mass - 1.0) <= 0.02}
    mass_err = abs(mu_half.total_mass - mu0.total_mass)
    checks["pushforward_mass"] = {"value": mass_err, "bound": 1e-10,
                                  "passed": mass_err <= 1e-10}

    # duality constancy across the seeded corpus; the initial measure overlaps
    # every bank profile so the relative residual is well scaled
    K = cfg.tolerances.get("duality_K", 6.0)
    L3, N3 = 3.0, 900
    h3 = 2 * L3 / N3
    grid3 = GridField(np.zeros(N3), h3)
    x3 = grid3.centers()
    worst = 0.0
    support = np.where(np.abs(x3) <= 1.8, 1.0, 0.0) * (1.0 + 0.3 * np.cos(2 * x3))
    for u in _corpus_velocity_fields(cfg.seed, grid3, times):
        fl = dual.filippov_flow(u, x3)
        mus = [dual.pushforward(dual.Measure1D(GridField(support, h3)), fl, t)
               for t in u.times]
        worst = max(worst, dual.duality_residual(mus, u, 1.0))
    sub3 = min(h3, 0.25)
    checks["duality_constancy"] = {"value": worst, "bound": K * (h3 + sub3),
                                   "passed": worst <= K * (h3 + sub3)}

    # a frozen non-solution must fail
    bad = dual.duality_residual([mu0] * len(times), u_sgn, 1.0)
    checks["non_solution_fails"] = {"value": bad, "bound": 0.1, "passed": bad > 0.1}

    out = _out_dir(args)
    payload = {"schema": SCHEMA, "bank_version": BANK_VERSION,
               "checks": checks,
               "measure_example": json.loads(mu_half.to_json()),
               "passed": all(c["passed"] for c in checks.values())}
    _write_json(out / "duality_report.json", payload)
    if not payload["passed"]:
        first = next(k for k, c in checks.items() if not c["passed"])
        print(f"invariant failure: {first} ({checks[first]})", file=sys.stderr)
        return 1
    return 0


def cmd_counterexample(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    T = cfg.params.T if cfg.params.T > 0 else 1.0
    x_half = 1.0
    order = int(cfg.tolerances.get("quadrature_order", 12))
    tol = cfg.tolerances.get("residual", 1e-8)
    sol1, sol2 = cex.concrete_family(T, x_half)
    rem_a, rem_b = cex.pair_remark(T)
    gap_times = [T * k / 10 for k in range(11)]
    gaps = [cex.nonuniqueness_gap(sol1, sol2, t, x_half) for t in gap_times]
    rem_gap = cex.nonuniqueness_gap(rem_a, rem_b, T, x_half)

    checks: dict[str, dict] = {}
    for name, sol in (("moving", sol1), ("static", sol2),
                      ("remark_static", rem_a), ("remark_drifting", rem_b)):
        r = cex.weak_residual(sol, T, x_half, order=order)
        checks[f"residual_{name}"] = {"value": list(r), "bound": tol,
                                      "passed": max(r) <= tol}
    xs = np.linspace(-x_half, x_half, 257)
    shared = max(float(np.max(np.abs(sol1.m(0.0, xs) - sol2.m(0.0, xs)))),
                 float(np.max(np.abs(sol1.pi(0.0, xs) - sol2.pi(0.0, xs)))))
    checks["shared_initial"] = {"value": shared, "bound": 1e-14, "passed": shared <= 1e-14}
    checks["gap_final"] = {"value": gaps[-1], "bound": 0.1, "passed": gaps[-1] > 0.1}
    checks["remark_gap"] = {"value": rem_gap, "bound": 0.0, "passed": rem_gap > 0.0}

    out = _out_dir(args)
    payload = {"schema": SCHEMA, "bank_version": BANK_VERSION,
               "window": {"T": T, "x_half": x_half}, "quadrature_order": order,
               "gap_times": gap_times, "gaps": gaps,
               "validity_horizon": cex.validity_horizon(sol1, T, x_half),
               "checks": checks,
               "passed": all(c["passed"] for c in checks.values())}
    _write_json(out / "counterexample_report.json", payload)
    if not payload["passed"]:
        first = next(k for k, c in checks.items() if not c["passed"])
        print(f"invariant failure: {first} ({checks[first]})", file=sys.stderr)
        return 1
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="congestio",
        description="Hard-congestion limit laboratory for a generalized Aw-Rascle system")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (("simulate", cmd_simulate), ("sweep", cmd_sweep),
                     ("duality", cmd_duality), ("counterexample", cmd_counterexample)):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--out", default=None,
                       help="output directory (default: $CONGESTIO_OUT or cwd)")
        p.add_argument("--workers", type=int, default=1)
        p.set_defaults(fn=fn)
    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
