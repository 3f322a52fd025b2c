"""Command-line harness: ``run``, ``preset`` and ``plots`` subcommands.

Exit status: 0 on success, 1 when a declared gate fails, 2 for an invalid
configuration or unreadable report, 3 when the solver aborts.
"""

from __future__ import annotations

import argparse
import copy
import json
import math
import re
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .io import EXPERIMENT_COLUMNS, PROBE_COLUMNS, read_rows, write_probe_report, write_rows

EXIT_OK, EXIT_GATE, EXIT_CONFIG, EXIT_ABORT = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------- schema

_NUM = (int, float)
SCHEMA = {
    "grid": {"n": int, "L": _NUM, "gamma": _NUM},
    "solver": {"dt": _NUM, "T": _NUM, "dealias": bool, "snapshot_every": int},
    "split": {"J": int, "J_list": list, "s": _NUM},
    "data": {"kind": str, "amplitude": _NUM, "width": _NUM, "truncate": bool},
}
TOP_LEVEL = set(SCHEMA) | {"probes", "gates", "seed", "output_dir"}

PROBE_PARAMS = {
    "recombine": {"convergence": bool, "reference_factor": int},
    "exponents": {},
    "strichartz-slope": {"j": int, "r": _NUM, "h_list": list, "trials": int, "T": _NUM, "dt": _NUM},
    "hls": {"count": int, "p": _NUM},
    "commutator": {"j_list": list, "r": _NUM, "seeds": list},
    "lemma6": {"r1": _NUM, "r2": _NUM},
    "bootstrap-table": {"r1": _NUM, "r2": _NUM, "C": list, "E_s": _NUM},
    "split-bounds": {"sigma": _NUM},
    "energy-growth": {"slack": _NUM},
}

DEFAULTS = {
    "grid": {"n": 32, "L": 2 * math.pi, "gamma": 2.5},
    "solver": {"dt": 1 / 64, "T": 0.5, "dealias": True, "snapshot_every": 0},
    "split": {"J": 3, "s": 0.7},
    "data": {"kind": "power_law", "amplitude": 3.0, "width": 0.6, "truncate": True},
    "probes": [],
    "gates": [],
    "seed": 0,
    "output_dir": "kgh_out",
}


def _type_ok(value, expected) -> bool:
    if isinstance(value, bool) and expected is not bool:
        return False
    return isinstance(value, expected)


def _check_section(name: str, section, allowed: dict):
    if not isinstance(section, dict):
        raise ConfigError(f"{name}: expected an object")
    for key, value in section.items():
        if key not in allowed:
            raise ConfigError(f"{name}.{key}: unknown key (allowed: {', '.join(sorted(allowed)) or 'none'})")
        if not _type_ok(value, allowed[key]):
            raise ConfigError(f"{name}.{key}: bad type {type(value).__name__}")


def _deep_merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def validate_config(raw: dict) -> dict:
    """Check keys and types, fill defaults and re-validate the domain invariants."""
    from .dynamics import SolverConfig
    from .spectral import GridSpec

    if not isinstance(raw, dict):
        raise ConfigError("top level: expected an object")
    for key in raw:
        if key not in TOP_LEVEL:
            raise ConfigError(f"{key}: unknown top-level key")
    for name, allowed in SCHEMA.items():
        if name in raw:
            _check_section(name, raw[name], allowed)
    cfg = _deep_merge(DEFAULTS, raw)
    if not isinstance(cfg["probes"], list):
        raise ConfigError("probes: expected a list")
    for i, p in enumerate(cfg["probes"]):
        if not isinstance(p, dict) or "name" not in p:
            raise ConfigError(f"probes[{i}]: expected an object with a 'name'")
        if p["name"] not in PROBE_PARAMS:
            raise ConfigError(f"probes[{i}].name: unknown probe {p['name']!r}")
        _check_section(f"probes[{i}]", {k: v for k, v in p.items() if k != "name"},
                       PROBE_PARAMS[p["name"]])
    if not isinstance(cfg["gates"], list):
        raise ConfigError("gates: expected a list")
    for i, g in enumerate(cfg["gates"]):
        _check_section(f"gates[{i}]", g, {"quantity": str, "min": _NUM, "max": _NUM})
        if "quantity" not in g:
            raise ConfigError(f"gates[{i}].quantity: missing")
    if not isinstance(cfg["seed"], int) or isinstance(cfg["seed"], bool):
        raise ConfigError("seed: expected an integer")
    if not isinstance(cfg["output_dir"], str):
        raise ConfigError("output_dir: expected a string")
    if cfg["data"]["kind"] not in ("power_law", "gaussian"):
        raise ConfigError(f"data.kind: unknown kind {cfg['data']['kind']!r}")
    try:
        GridSpec(cfg["grid"]["n"], cfg["grid"]["L"], cfg["grid"]["gamma"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"grid: {exc}") from None
    try:
        SolverConfig(cfg["solver"]["dt"], cfg["solver"]["T"], dealias=cfg["solver"]["dealias"])
    except ValueError as exc:
        raise ConfigError(f"solver: {exc}") from None
    if "J_list" in cfg["split"] and not all(isinstance(j, int) for j in cfg["split"]["J_list"]):
        raise ConfigError("split.J_list: expected integers")
    return cfg


def load_config(path) -> dict:
    text = Path(path).read_text(encoding="utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return validate_config(raw)


# ---------------------------------------------------------------- presets

PRESETS = {
    "recombine": {"probes": [{"name": "recombine", "convergence": True}]},
    "exponents": {"grid": {"gamma": 2.4}, "probes": [{"name": "exponents"}]},
    "strichartz-slope": {"probes": [{"name": "strichartz-slope", "j": 5, "r": 4.0,
                                     "h_list": [1 / 16, 1 / 32, 1 / 64], "trials": 8}]},
    "hls": {"probes": [{"name": "hls", "count": 100, "p": 2.0}]},
    "commutator": {"grid": {"n": 128, "L": math.pi / 2},
                   "probes": [{"name": "commutator", "j_list": [3, 4, 5, 6], "r": 4.0,
                               "seeds": [0, 1, 2]}]},
    "lemma6": {"grid": {"n": 64, "L": math.pi, "gamma": 2.4},
               "solver": {"dt": 1 / 32, "T": 0.25},
               "split": {"J_list": [3, 4, 5], "s": 0.65},
               "data": {"amplitude": 1.0},
               "probes": [{"name": "lemma6", "r1": 3.3, "r2": 40.0}]},
    "bootstrap-table": {"grid": {"gamma": 2.4},
                        "split": {"J_list": list(range(1, 21)), "s": 0.65},
                        "probes": [{"name": "bootstrap-table", "r1": 3.3, "r2": 40.0}]},
}


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(cfg: dict, spec: str) -> dict:
    """``section.key=value``; ``probe.key`` addresses the first probe."""
    if "=" not in spec:
        raise ConfigError(f"override {spec!r}: expected key=value")
    path, text = spec.split("=", 1)
    parts = path.strip().split(".")
    value = _parse_value(text)
    cfg = copy.deepcopy(cfg)
    if parts[0] == "probe":
        if not cfg.get("probes"):
            raise ConfigError(f"override {spec!r}: preset has no probe")
        target = cfg["probes"][0]
        parts = parts[1:]
    else:
        target = cfg
    for p in parts[:-1]:
        target = target.setdefault(p, {})
        if not isinstance(target, dict):
            raise ConfigError(f"override {spec!r}: {p} is not a section")
    target[parts[-1]] = value
    return cfg


def preset_config(name: str, overrides=()) -> dict:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r} (choose from {', '.join(PRESETS)})")
    raw = copy.deepcopy(PRESETS[name])
    raw["output_dir"] = f"kgh_out/{name}"
    for o in overrides:
        raw = apply_override(raw, o)
    return validate_config(raw)


# ---------------------------------------------------------------- execution

class Context:
    def __init__(self, cfg: dict):
        from .spectral import GridSpec
        from .dynamics import SolverConfig

        self.cfg = cfg
        g = cfg["grid"]
        self.grid = GridSpec(g["n"], g["L"], g["gamma"])
        s = cfg["solver"]
        self.solver = SolverConfig(s["dt"], s["T"], dealias=s["dealias"])
        self.seed = cfg["seed"]
        self.out = Path(cfg["output_dir"])
        self.files: list[str] = []
        self.quantities: dict[str, float] = {}

    @property
    def s(self) -> float:
        return float(self.cfg["split"]["s"])

    @property
    def J(self) -> int:
        return int(self.cfg["split"]["J"])

    @property
    def J_list(self) -> list[int]:
        return list(self.cfg["split"].get("J_list", [self.J]))

    def data(self):
        from .data import gaussian_bump, power_law_data
        from .spectral import CauchyPair, RealField

        d = self.cfg["data"]
        if d["kind"] == "gaussian":
            return CauchyPair(gaussian_bump(self.grid, d["amplitude"], d["width"]),
                              RealField.zeros(self.grid))
        return power_law_data(self.grid, self.s, self.seed, amplitude=d["amplitude"],
                              truncate=d["truncate"])

    def exp_row(self, experiment, quantity, value, **kw):
        row = {"experiment": experiment, "gamma": self.grid.gamma, "s": self.s, "J": None,
               "dt": self.solver.dt, "T": self.solver.T, "quantity": quantity,
               "value": value, "seed": self.seed}
        row.update(kw)
        return row

    def write(self, name, columns, rows):
        path = write_rows(self.out / name, columns, rows)
        self.files.append(path.name)

    def record(self, probe, **values):
        for k, v in values.items():
            self.quantities[f"{probe}.{k}"] = float(v)


def _run_recombine(ctx: Context, p: dict):
    from .splitting import recombination_convergence, recombine_and_compare

    data = ctx.data()
    rep = recombine_and_compare(data, ctx.J, ctx.solver, keep=True)
    rows = []
    for t, h1, l2 in zip(rep.times, rep.h1_error, rep.l2_error):
        rows.append(ctx.exp_row("recombine", "h1_discrepancy", h1, J=ctx.J, T=float(t)))
        rows.append(ctx.exp_row("recombine", "l2_discrepancy", l2, J=ctx.J, T=float(t)))
    ctx.record("recombine", final_h1=rep.final_h1, max_h1=rep.max_h1)
    if p.get("convergence", False):
        dt = ctx.solver.dt
        conv = recombination_convergence(data, ctx.J, [2 * dt, dt, dt / 2], ctx.solver.T,
                                         reference_factor=p.get("reference_factor", 8))
        for d, e in zip(conv.dts, conv.errors):
            rows.append(ctx.exp_row("recombine", "h1_error_vs_reference", e, J=ctx.J, dt=d))
        for d, o in zip(conv.dts[1:], conv.orders):
            rows.append(ctx.exp_row("recombine", "order", o, J=ctx.J, dt=d))
        ctx.record("recombine", order=conv.mean_order)
    if ctx.cfg["solver"]["snapshot_every"] > 0:
        from .io import export_trajectory

        export_trajectory(ctx.out / "snapshots", rep.phi, every=ctx.cfg["solver"]["snapshot_every"])
        ctx.files.append("snapshots/index.csv")
    ctx.write("recombine.csv", EXPERIMENT_COLUMNS, rows)


def _run_exponents(ctx: Context, p: dict):
    from .splitting import derive_exponents

    e = derive_exponents(ctx.grid.gamma)
    print(f"{'quantity':<20}{'value':>14}")
    for name, value in e.rows():
        print(f"{name:<20}{value:>14.6f}")
    rows = [ctx.exp_row("exponents", k, v) for k, v in e.rows()]
    ctx.record("exponents", **dict(e.rows()))
    ctx.write("exponents.csv", EXPERIMENT_COLUMNS, rows)


def _run_strichartz(ctx: Context, p: dict):
    from .propagator import precise_strichartz_slope

    j, r = int(p.get("j", 5)), float(p.get("r", 4.0))
    h_list = [float(h) for h in p.get("h_list", [1 / 16, 1 / 32, 1 / 64])]
    fit = precise_strichartz_slope(ctx.grid, j, r, h_list, int(p.get("trials", 8)),
                                   horizon=p.get("T"), dt=p.get("dt"), seed=ctx.seed)
    base = {"probe": "strichartz-slope", "j": j, "q": fit.q, "r": r, "theta": 0.0,
            "T": fit.horizon, "dt": fit.dt, "seed": ctx.seed}
    rows = [dict(base, h=h, value=math.exp(m)) for h, m in zip(fit.h_values, fit.mean_log_norms)]
    rows.append(dict(base, probe="strichartz-slope-fit", h=None, value=fit.slope))
    ctx.record("strichartz-slope", slope=fit.slope, residual=fit.residual)
    ctx.write("strichartz_slope.csv", PROBE_COLUMNS, rows)


def _run_hls(ctx: Context, p: dict):
    from .probes import hls_sweep

    rep = hls_sweep(ctx.grid, int(p.get("count", 100)), ctx.seed, float(p.get("p", 2.0)))
    ctx.record("hls", max=rep.max, min=rep.min, maxmin_ratio=rep.maxmin_ratio)
    path = write_probe_report(ctx.out / "hls.csv", rep, ["p", "q", "gamma"])
    ctx.files.append(path.name)


def _run_commutator(ctx: Context, p: dict):
    from .data import power_law_data
    from .probes import ProbeReport, commutator_bound_check, commutator_residual
    from .spectral import RealField
    from .io import probe_report_rows

    j_list = [int(j) for j in p.get("j_list", [3, 4, 5, 6])]
    r = float(p.get("r", 4.0))
    rows, cols, spreads = [], None, []
    for sd in p.get("seeds", [ctx.seed]):
        u = power_law_data(ctx.grid, ctx.s, seed=[int(sd), 1]).position
        v = power_law_data(ctx.grid, ctx.s, seed=[int(sd), 2]).position
        ratios = [commutator_bound_check(v, u, j, r) for j in j_list]
        rep = ProbeReport("commutator", {"r": r}, tuple(ratios), int(sd))
        spreads.append(rep.maxmin_ratio)
        cols, part = probe_report_rows(rep, ["r"])
        for row, j in zip(part, j_list):
            row["j"] = j
        rows.extend(part)
    cols = ["probe", "j", *cols[1:]]
    const = RealField(ctx.grid, np.full(ctx.grid.shape, 1.0))
    zero_res = commutator_residual(v, const, j_list[0]).norm
    ctx.record("commutator", maxmin_ratio=max(spreads), constant_u_residual=zero_res)
    ctx.write("commutator.csv", cols, rows)


def _run_lemma6(ctx: Context, p: dict):
    import warnings

    from .probes import lemma6_bound_check
    from .splitting import data_norm, split_data, split_evolve

    data = ctx.data()
    e_s = data_norm(data, ctx.s)
    rows, first, second = [], [], []
    for J in ctx.J_list:
        _, high = split_data(data, J)
        u, _ = split_evolve(data, J, ctx.solver)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            rep = lemma6_bound_check(u, high, J, ctx.s, ctx.grid.gamma,
                                     float(p.get("r1", 3.3)), float(p.get("r2", 40.0)), e_s)
        first.append(rep.ratio_first)
        second.append(rep.ratio_second)
        for q, v in (("ratio_first", rep.ratio_first), ("ratio_second", rep.ratio_second),
                     ("hypothesis_proxy", rep.hypothesis_proxy), ("E_T", rep.E_T)):
            rows.append(ctx.exp_row("lemma6", q, v, J=J))
    ctx.record("lemma6", max_first=max(first), max_second=max(second),
               spread_first=max(first) / min(first), spread_second=max(second) / min(second))
    ctx.write("lemma6.csv", EXPERIMENT_COLUMNS, rows)


def _run_bootstrap(ctx: Context, p: dict):
    from .splitting import BootstrapConstants, bootstrap_time, exponent_gate

    r1, r2 = float(p.get("r1", 3.3)), float(p.get("r2", 40.0))
    cs = [float(c) for c in p.get("C", [1.0] * 6)]
    if len(cs) != 6:
        raise ConfigError("probes.bootstrap-table.C: expected six constants C, C1..C5")
    consts = BootstrapConstants(*cs, r1=r1, r2=r2)
    gate = exponent_gate(ctx.s, ctx.grid.gamma, r1, r2)
    rows = [ctx.exp_row("bootstrap-table", "gate_margin", gate.margin)]
    ctx.record("bootstrap-table", gate_margin=gate.margin, gate_passed=float(gate.passed))
    if gate.passed:
        times = [bootstrap_time(J, ctx.s, ctx.grid.gamma, consts, float(p.get("E_s", 1.0)))
                 for J in ctx.J_list]
        rows += [ctx.exp_row("bootstrap-table", "bootstrap_time", t, J=J)
                 for J, t in zip(ctx.J_list, times)]
        mono = all(b > a for a, b in zip(times, times[1:]))
        ctx.record("bootstrap-table", monotone=float(mono))
    ctx.write("bootstrap_table.csv", EXPERIMENT_COLUMNS, rows)


def _run_split_bounds(ctx: Context, p: dict):
    from .splitting import derive_exponents, ledger_sweep, verify_split_bounds

    sigma = float(p.get("sigma", derive_exponents(ctx.grid.gamma).s0))
    leds = ledger_sweep(ctx.data(), ctx.J_list, ctx.s, [sigma, 1.0])
    rep = verify_split_bounds(leds, sigma)
    rows = []
    for J, a, b in zip(rep.J, rep.rho_h, rep.rho_l):
        rows.append(ctx.exp_row("split-bounds", "rho_h", a, J=J))
        rows.append(ctx.exp_row("split-bounds", "rho_l", b, J=J))
    ctx.record("split-bounds", rho_h_spread=rep.rho_h_spread, rho_l_spread=rep.rho_l_spread)
    ctx.write("split_bounds.csv", EXPERIMENT_COLUMNS, rows)


def _run_energy_growth(ctx: Context, p: dict):
    from .splitting import energy_growth_sweep

    sw = energy_growth_sweep(ctx.data(), ctx.J_list, ctx.s, ctx.solver,
                             slack=float(p.get("slack", 0.2)))
    rows = [ctx.exp_row("energy-growth", "E_T", r.E_T, J=r.J) for r in sw.reports]
    rows.append(ctx.exp_row("energy-growth", "slope", sw.slope))
    ctx.record("energy-growth", slope=sw.slope, target=sw.target)
    ctx.write("energy_growth.csv", EXPERIMENT_COLUMNS, rows)


RUNNERS = {
    "recombine": _run_recombine,
    "exponents": _run_exponents,
    "strichartz-slope": _run_strichartz,
    "hls": _run_hls,
    "commutator": _run_commutator,
    "lemma6": _run_lemma6,
    "bootstrap-table": _run_bootstrap,
    "split-bounds": _run_split_bounds,
    "energy-growth": _run_energy_growth,
}


def evaluate_gates(gates, quantities) -> list[dict]:
    results = []
    for g in gates:
        q = g["quantity"]
        value = quantities.get(q)
        ok = value is not None and math.isfinite(value)
        if ok and "min" in g:
            ok = value >= g["min"]
        if ok and "max" in g:
            ok = value <= g["max"]
        results.append({"quantity": q, "value": value, "min": g.get("min"), "max": g.get("max"),
                        "passed": bool(ok)})
    return results


def execute(cfg: dict) -> int:
    """Run every probe of a validated config; always writes ``manifest.json``."""
    from .dynamics import SolverAbort

    ctx = Context(cfg)
    ctx.out.mkdir(parents=True, exist_ok=True)
    status, abort, error = EXIT_OK, None, None
    try:
        for p in cfg["probes"]:
            RUNNERS[p["name"]](ctx, {k: v for k, v in p.items() if k != "name"})
    except SolverAbort as exc:
        status, abort = EXIT_ABORT, exc.step
        print(f"solver aborted at step {exc.step}", file=sys.stderr)
    except ValueError as exc:
        # Parameter combinations that pass the schema but violate a module precondition.
        status, error = EXIT_CONFIG, str(exc)
        print(f"invalid configuration: {exc}", file=sys.stderr)
    gates = evaluate_gates(cfg["gates"], ctx.quantities)
    if status == EXIT_OK and not all(g["passed"] for g in gates):
        status = EXIT_GATE
        for g in gates:
            if not g["passed"]:
                print(f"gate failed: {g['quantity']} = {g['value']}", file=sys.stderr)
    manifest = {"version": __version__, "config": cfg, "files": ctx.files,
                "quantities": ctx.quantities, "gates": gates, "status": status,
                "abort_step": abort, "error": error}
    (ctx.out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return status


# ---------------------------------------------------------------- plots

SWEEP_KEYS = ("probe", "experiment")
X_CANDIDATES = ("h", "J", "j", "dt", "T")


def _group_name(row: dict, header) -> str:
    parts = [row[k] for k in SWEEP_KEYS if k in header]
    if "quantity" in header:
        parts.append(row["quantity"])
    return "_".join(p for p in parts if p) or "sweep"


def emit_plots(report_csv, out_dir=None) -> list[Path]:
    """One gnuplot script and data file per sweep in ``report_csv``."""
    report_csv = Path(report_csv)
    header, rows = read_rows(report_csv)
    value_col = next((c for c in ("value", "ratio") if c in header), None)
    if header and value_col is None:
        raise ValueError(f"{report_csv}: no 'value' or 'ratio' column")
    out_dir = Path(out_dir) if out_dir else report_csv.parent
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = report_csv.stem
    if not rows:
        script = out_dir / f"{stem}.gp"
        script.write_text(f"# WARNING: {report_csv.name} holds no data rows; nothing to plot\n"
                          f"set title '{stem}'\n")
        return [script]
    groups: dict[str, list[dict]] = {}
    for row in rows:
        groups.setdefault(_group_name(row, header), []).append(row)
    scripts = []
    for name, grp in groups.items():
        safe = re.sub(r"[^A-Za-z0-9_.-]+", "_", name)
        xcol = next((c for c in X_CANDIDATES if c in header
                     and all(r[c] for r in grp) and len({r[c] for r in grp}) > 1), None)
        pts = []
        for i, r in enumerate(grp):
            try:
                y = float(r[value_col])
                x = float(r[xcol]) if xcol else float(i)
            except ValueError:
                raise ValueError(f"{report_csv}: non-numeric entry in sweep {name!r}") from None
            pts.append((x, y))
        dat = out_dir / f"{stem}_{safe}.dat"
        dat.write_text("".join(f"{x!r} {y!r}\n" for x, y in pts))
        loglog = "slope" in name and all(x > 0 and y > 0 for x, y in pts)
        lines = [f"# sweep {name} from {report_csv.name}",
                 f"set title '{name}'",
                 f"set xlabel '{xcol or 'index'}'",
                 f"set ylabel '{value_col}'"]
        if loglog:
            lines += ["set logscale xy",
                      "f(x) = a * x**b",
                      "a = 1; b = 0.25",
                      f"fit log(f(x)) '{dat.name}' using 1:(log($2)) via a, b",
                      f"plot '{dat.name}' using 1:2 with linespoints title 'measured', "
                      "f(x) with lines title sprintf('fit slope %.3f', b)"]
        else:
            lines.append(f"plot '{dat.name}' using 1:2 with linespoints title '{name}'")
        script = out_dir / f"{stem}_{safe}.gp"
        script.write_text("\n".join(lines) + "\n")
        scripts.append(script)
    return scripts


# ---------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kghsim", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment described by a JSON config")
    r.add_argument("config")
    p = sub.add_parser("preset", help="run a named preset experiment")
    p.add_argument("name", choices=sorted(PRESETS))
    p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--output-dir")
    pl = sub.add_parser("plots", help="emit gnuplot scripts for a report CSV")
    pl.add_argument("report")
    pl.add_argument("--output-dir")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            cfg = load_config(args.config)
            return execute(cfg)
        if args.command == "preset":
            overrides = list(args.override)
            if args.output_dir:
                overrides.append(f"output_dir={json.dumps(args.output_dir)}")
            return execute(preset_config(args.name, overrides))
        scripts = emit_plots(args.report, args.output_dir)
        for s in scripts:
            print(s)
        return EXIT_OK
    except ConfigError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
