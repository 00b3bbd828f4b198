"""Command-line experiment runner.

Every command except ``compare`` reads a TOML config (``--config``), writes its
CSV artifacts plus ``manifest.json`` into ``--out`` and exits with 0 on success,
1 on a numerical failure and 2 on an invalid config.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import logging
import math
import random
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .artifacts import SchemaError, read_csv, write_csv, write_manifest
from .config import ConfigError, ExperimentConfig, load_config, parse_config, require_fields
from .floquet import ConvergenceError, reconstruct, reconstruct_rate, sample_times, solve_limit_cycle
from .lyapunov import IntegrationError, SolverError, default_dt, evolve, steady_state
from .model import assemble_generator, initial_state
from .oracle import (OrthogonalityError, chain_entropy_production_rate, chain_evolve,
                     chain_map, landauer_currents, pauli_evolve)
from .spectral import build_grid, build_lead, effective_spectral, lead_arrays
from .thermo import (ThermoAccumulator, bath_columns, cycle_averages, instantaneous,
                     rectification_coefficient, record_row, system_entropy, system_entropy_rate)

logger = logging.getLogger("mesoleads")

EXIT_OK, EXIT_NUMERICAL, EXIT_CONFIG = 0, 1, 2

_RNG_NAMES = {
    np.random: ("default_rng", "seed", "random", "rand", "randn", "normal", "uniform",
                "integers", "randint", "choice", "shuffle", "permutation", "RandomState"),
    random: ("random", "seed", "uniform", "gauss", "randint", "choice", "shuffle", "sample"),
}


@contextlib.contextmanager
def seedless():
    """Make every common RNG entry point raise while the block runs."""
    def blocked(*args, **kwargs):
        raise RuntimeError("random number generation requested in a --seedless run")

    saved = []
    for module, names in _RNG_NAMES.items():
        for name in names:
            if hasattr(module, name):
                saved.append((module, name, getattr(module, name)))
                setattr(module, name, blocked)
    try:
        yield
    finally:
        for module, name, value in saved:
            setattr(module, name, value)


# ---- commands ------------------------------------------------------------------

def cmd_grid(cfg: ExperimentConfig, out: Path, args):
    outputs, diag = [], {}
    for bath in cfg.baths:
        spec = bath.spec()
        eps, kappa, gamma, spacing, occ = lead_arrays(spec)
        rows = [(k, e, c, g, s, f) for k, (e, c, g, s, f)
                in enumerate(zip(eps, kappa, gamma, spacing, occ))]
        outputs.append(write_csv(out / f"grid_{bath.name}.csv", "grid",
                                 ["k", "energy", "coupling", "damping", "spacing", "occupation"],
                                 rows))
        omega = np.linspace(-spec.spectral.cutoff, spec.spectral.cutoff, 1601)
        j_eff = effective_spectral(build_lead(spec), omega)
        j = spec.spectral(omega)
        outputs.append(write_csv(out / f"jeff_{bath.name}.csv", "jeff",
                                 ["omega", "J", "J_eff"], zip(omega, j, j_eff)))
        energies, _ = build_grid(spec.scheme, spec.spectral)
        diag[bath.name] = {"modes": int(len(eps)), "grid_points": int(len(energies)),
                           "min_spacing": float(spacing.min()), "max_spacing": float(spacing.max())}
    return outputs, diag


def _thermo_rows(gen, records, occupations):
    return [record_row(rec) + list(occ) for rec, occ in zip(records, occupations)]


def _time_grid(cfg, gen):
    dt = cfg.numerics["dt"] or default_dt(gen)
    t_final = cfg.numerics["t_final"]
    n = int(round(t_final / dt))
    if not math.isclose(n * dt, t_final, rel_tol=1e-9):
        raise ConfigError("numerics.t_final", f"must be a multiple of dt={dt}")
    return dt, t_final


def cmd_evolve(cfg: ExperimentConfig, out: Path, args):
    gen = assemble_generator(cfg.model())
    dt, t_final = _time_grid(cfg, gen)
    acc = ThermoAccumulator(gen)
    occupations = []

    def observer(t, C, dC):
        acc(t, C, dC)
        occupations.append(np.diag(C[:gen.n_sys, :gen.n_sys]).real.copy())

    evolve(gen, initial_state(gen, cfg.system_occupation()), t_final, dt, observer=observer,
           stride=cfg.numerics["stride"], check_every=cfg.numerics["eig_check_every"])
    cols = bath_columns(len(gen.leads)) + [f"n_{i}" for i in range(gen.n_sys)]
    path = write_csv(out / "thermo.csv", "thermo", cols, _thermo_rows(gen, acc.records, occupations))
    recs = acc.records
    work_scale = max(1.0, max(abs(r.work) for r in recs))
    diag = {
        "dt": dt,
        "samples": len(recs),
        "first_law_residual": max(abs(r.first_law_residual) for r in recs) / work_scale,
        "min_entropy_production": min(r.entropy_production for r in recs),
    }
    return [path], diag


def cmd_steady(cfg: ExperimentConfig, out: Path, args):
    model = cfg.model()
    if not model.drive.is_static:
        raise ConfigError("drive.amplitude", "steady needs an undriven model (amplitude or frequency 0)")
    gen = assemble_generator(model)
    C = steady_state(gen)
    residual = float(np.abs(gen.W0 @ C + C @ gen.W0.conj().T - gen.F).max())
    dC = np.zeros_like(C)
    rec = instantaneous(gen, 0.0, C, dC)
    rows = [(a, b.particle, b.energy, b.heat, b.external_particle, b.external_energy,
             b.coupling_energy) for a, b in enumerate(rec.baths)]
    path = write_csv(out / "steady.csv", "steady",
                     ["bath", "JP", "JE", "JQ", "IP", "IE", "E_SL"], rows)
    diag = {"residual": residual,
            "system_occupations": np.diag(C[:gen.n_sys, :gen.n_sys]).real.tolist()}
    if cfg.scenario == "resonant_level":
        left, right = cfg.bath_specs()
        jp, je = landauer_currents(cfg.system["energy"], left.spectral, right.spectral,
                                   left.temperature, left.chemical_potential,
                                   right.temperature, right.chemical_potential)
        diag["landauer"] = {"JP": jp, "JE": je,
                            "JP_relative_error": abs(rec.baths[0].particle - jp) / abs(jp)}
    return [path], diag


def _limit_cycle(cfg, gen):
    num = cfg.numerics
    return solve_limit_cycle(gen, n_max=num["n_max"], tol=num["tol"], max_sweeps=num["max_sweeps"])


def cmd_floquet(cfg: ExperimentConfig, out: Path, args):
    gen = assemble_generator(cfg.model())
    sol = _limit_cycle(cfg, gen)
    nb = len(gen.leads)
    cols = ["t"]
    for a in range(nb):
        cols += [f"{name}_{a}" for name in ("JP", "JE", "JQ", "IP", "IE", "E_SL")]
    cols += ["E_S", "S_S", "dS_S", "power", "sigma_dot"] + [f"n_{i}" for i in range(gen.n_sys)]
    rows = []
    for t in sample_times(sol, cfg.numerics["period_samples"]):
        C, dC = reconstruct(sol, t), reconstruct_rate(sol, t)
        rec = instantaneous(gen, float(t), C, dC)
        row = [float(t)]
        for b in rec.baths:
            row += [b.particle, b.energy, b.heat, b.external_particle, b.external_energy,
                    b.coupling_energy]
        row += [rec.system_energy, rec.system_entropy, rec.entropy_rate_system, rec.power,
                rec.entropy_production_rate]
        row += np.diag(C[:gen.n_sys, :gen.n_sys]).real.tolist()
        rows.append(row)
    cycle_path = write_csv(out / "limit_cycle.csv", "limit_cycle", cols, rows)
    avg = cycle_averages(gen, sol)
    avg_rows = [(a, avg.particle[a], avg.energy[a], avg.heat[a], avg.external_particle[a],
                 avg.external_energy[a], avg.power, avg.entropy_production_rate)
                for a in range(nb)]
    avg_path = write_csv(out / "cycle_average.csv", "cycle_average",
                         ["bath", "JP", "JE", "JQ", "IP", "IE", "power", "sigma"], avg_rows)
    norm_path = write_csv(out / "harmonics.csv", "harmonics", ["n", "norm_max"],
                          sorted(sol.harmonic_norms.items()))
    diag = {"residual": sol.residual, "n_max": sol.n_max, "sweeps": sol.sweeps,
            "tail_harmonic": sol.harmonic_norms[sol.n_max],
            "first_law_residual": abs(avg.power + sum(avg.energy))}
    return [cycle_path, avg_path, norm_path], diag


SWEEP_COLUMNS = ["lambda", "omega", "ratio", "R", "sigma_fwd", "sigma_bwd", "J_fwd", "J_bwd"]


def sweep_point(raw: dict, hopping: float, ratio: float):
    """One (lambda, omega/lambda) point: forward and temperature-swapped limit cycles."""
    cfg = parse_config(raw)
    omega = hopping * ratio
    results = []
    for swap in (False, True):
        gen = assemble_generator(cfg.model(swap=swap, hopping=hopping, frequency=omega))
        sol = _limit_cycle(cfg, gen)
        results.append((cycle_averages(gen, sol), sol.residual, sol.n_max))
    (fwd, res_f, n_f), (bwd, res_b, n_b) = results
    jf, jb = fwd.energy[0], bwd.energy[0]
    try:
        r = rectification_coefficient(jf, jb)
    except ValueError:
        r = math.nan
    row = [hopping, omega, ratio, r, fwd.entropy_production_rate,
           bwd.entropy_production_rate, jf, jb]
    return row, {"residual": max(res_f, res_b), "n_max": max(n_f, n_b)}


def cmd_floquet_sweep(cfg: ExperimentConfig, out: Path, args):
    points = cfg.sweep_points()
    workers = max(1, args.workers)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(sweep_point, cfg.raw, lam, r) for lam, r in points]
            results = [f.result() for f in futures]
    else:
        results = [sweep_point(cfg.raw, lam, r) for lam, r in points]
    ordered = sorted(zip(points, results), key=lambda item: item[0])
    rows = [res[0] for _, res in ordered]
    path = write_csv(out / "sweep.csv", "sweep", SWEEP_COLUMNS, rows)
    diag = {"points": len(rows),
            "max_residual": max(res[1]["residual"] for _, res in ordered),
            "max_n_max": max(res[1]["n_max"] for _, res in ordered)}
    return [path], diag


def cmd_chain_oracle(cfg: ExperimentConfig, out: Path, args):
    model = cfg.model()
    chain_cfg = cfg.chain
    cache = {}
    chains = []
    for _, bath in model.couplings:
        key = (bath.spectral.coupling, bath.spectral.cutoff, bath.spectral.kind)
        if key not in cache:
            cache[key] = chain_map(bath.spectral, chain_cfg["length"], chain_cfg["n_star"])
        chains.append(cache[key])
    run = chain_evolve(model, chains, cfg.system_occupation(), cfg.numerics["t_final"],
                       dt=chain_cfg["dt"], stride=chain_cfg["stride"])
    baths = [b for _, b in model.couplings]
    nb = len(baths)
    cols = ["t"]
    for a in range(nb):
        cols += [f"JP_{a}", f"JE_{a}", f"JQ_{a}"]
    cols += ["E_S", "S_S", "dS_S", "sigma_dot"] + [f"n_{i}" for i in range(model.n_sites)] + ["valid"]
    rows = []
    for s in run.samples:
        row = [s.t]
        for b, jp, je in zip(baths, s.particle, s.energy):
            row += [jp, je, je - b.chemical_potential * jp]
        row += [s.system_energy, system_entropy(s.system),
                system_entropy_rate(s.system, s.system_rate),
                chain_entropy_production_rate(run, s, baths)]
        row += np.diag(s.system).real.tolist()
        row.append(int(s.t <= run.valid_until))
        rows.append(row)
    path = write_csv(out / "chain.csv", "chain", cols, rows)
    first = chains[0]
    coef_rows = [(p, e, g) for p, (e, g) in enumerate(zip(first.energies, first.hoppings))]
    coef_path = write_csv(out / "chain_coefficients.csv", "chain_coefficients",
                          ["p", "energy", "hopping"], coef_rows)
    diag = {"horizon": run.horizon, "boundary_time": run.boundary_time,
            "valid_until": run.valid_until, "first_hopping": float(first.hoppings[0]),
            "tail_hopping": first.tail_hopping, "tail_deviation": first.tail_deviation}
    return [path, coef_path], diag


def cmd_pauli_oracle(cfg: ExperimentConfig, out: Path, args):
    gen = assemble_generator(cfg.model())
    dt, t_final = _time_grid(cfg, gen)
    baths = [(b.temperature, b.chemical_potential) for b in cfg.baths]
    couplings = {b.coupling for b in cfg.baths}
    if len(couplings) != 1:
        raise ConfigError("baths.coupling", "pauli-oracle needs equal couplings for all baths")
    t, p, s = pauli_evolve(couplings.pop(), baths, cfg.drive["amplitude"], cfg.drive["frequency"],
                           cfg.system["occupation"], t_final, dt, gen.kind, cfg.system["energy"])
    stride = cfg.numerics["stride"]
    idx = np.arange(0, len(t), stride)
    if idx[-1] != len(t) - 1:
        idx = np.append(idx, len(t) - 1)
    path = write_csv(out / "pauli.csv", "pauli", ["t", "n_0", "S_S"],
                     zip(t[idx], p[idx], s[idx]))
    return [path], {"dt": dt, "samples": len(idx)}


COMMANDS = {
    "grid": cmd_grid,
    "evolve": cmd_evolve,
    "steady": cmd_steady,
    "floquet": cmd_floquet,
    "floquet-sweep": cmd_floquet_sweep,
    "chain-oracle": cmd_chain_oracle,
    "pauli-oracle": cmd_pauli_oracle,
}


# ---- compare -------------------------------------------------------------------

def _column_pairs(spec, cols_a, cols_b):
    if spec:
        pairs = [tuple(c.split(":", 1)) if ":" in c else (c, c) for c in spec]
    else:
        pairs = [(c, c) for c in cols_a if c != "t" and c in cols_b]
    if not pairs:
        raise SchemaError("no common columns to compare")
    for ca, cb in pairs:
        if ca not in cols_a:
            raise SchemaError(f"column {ca!r} missing from first file")
        if cb not in cols_b:
            raise SchemaError(f"column {cb!r} missing from second file")
    return pairs


def compare_files(path_a, path_b=None, columns=(), window=None, norm="abs",
                  max_tol=None, mean_tol=None, mean_diff_tol=None) -> dict:
    """Per-column differences of two CSV artifacts on the first file's time grid."""
    schema_a, cols_a, data_a = read_csv(path_a)
    if path_b is None:
        schema_b, cols_b, data_b = schema_a, cols_a, data_a
    else:
        schema_b, cols_b, data_b = read_csv(path_b)
    if "t" not in cols_a or "t" not in cols_b:
        raise SchemaError("both files need a 't' column")
    pairs = _column_pairs(columns, cols_a, cols_b)
    ta, tb = data_a[:, cols_a.index("t")], data_b[:, cols_b.index("t")]
    lo, hi = (window if window else (max(ta[0], tb[0]), min(ta[-1], tb[-1])))
    if lo < tb[0] - 1e-12 or hi > tb[-1] + 1e-12:
        raise SchemaError(f"window [{lo}, {hi}] not covered by the second file")
    mask = (ta >= lo - 1e-12) & (ta <= hi + 1e-12)
    if not mask.any():
        raise SchemaError(f"no samples of the first file inside [{lo}, {hi}]")
    t = ta[mask]
    report = {"a": str(path_a), "b": str(path_b or path_a), "schema_a": schema_a,
              "schema_b": schema_b, "window": [float(lo), float(hi)], "norm": norm,
              "columns": {}}
    passed = True
    for ca, cb in pairs:
        ya = data_a[mask, cols_a.index(ca)]
        same_grid = tb.shape == ta.shape and np.array_equal(ta, tb)
        yb = data_b[mask, cols_b.index(cb)] if same_grid else np.interp(t, tb, data_b[:, cols_b.index(cb)])
        scale = 1.0
        if norm == "rel":
            scale = float(np.abs(yb).max()) or 1.0
        diff = np.abs(ya - yb) / scale
        entry = {"max_abs": float(diff.max()), "mean_abs": float(diff.mean()),
                 "mean_a": float(ya.mean()), "mean_b": float(yb.mean()),
                 "mean_diff": float(abs(ya.mean() - yb.mean()) / scale)}
        ok = True
        if max_tol is not None:
            ok &= entry["max_abs"] <= max_tol
        if mean_tol is not None:
            ok &= entry["mean_abs"] <= mean_tol
        if mean_diff_tol is not None:
            ok &= entry["mean_diff"] <= mean_diff_tol
        entry["pass"] = bool(ok)
        passed &= ok
        report["columns"][f"{ca}:{cb}" if ca != cb else ca] = entry
    report["pass"] = bool(passed)
    return report


def run_compare(args) -> int:
    report = compare_files(args.a, args.b, args.columns, args.window, args.norm,
                           args.max_tol, args.mean_tol, args.mean_diff_tol)
    text = json.dumps(report, indent=2, sort_keys=True)
    print(text)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "compare.json").write_text(text + "\n")
    return EXIT_OK if report["pass"] else EXIT_NUMERICAL


# ---- entry point ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mesoleads",
                                     description="Driven quantum dots with mesoscopic leads.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="TOML experiment config")
    common.add_argument("--out", default="out", help="output directory (default: out)")
    common.add_argument("--workers", type=int, default=1, help="worker processes for sweeps")
    common.add_argument("--seedless", action="store_true",
                        help="fail if any random number generator is touched")
    common.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override a config field, e.g. baths.left.temperature=2")
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=f"run the {name} command")

    cmp = sub.add_parser("compare", help="compare columns of two CSV artifacts")
    cmp.add_argument("a", help="first CSV")
    cmp.add_argument("b", nargs="?", help="second CSV (default: the first)")
    cmp.add_argument("--columns", nargs="+", default=[], metavar="COL[:COL_B]")
    cmp.add_argument("--window", nargs=2, type=float, metavar=("T0", "T1"))
    cmp.add_argument("--norm", choices=("abs", "rel"), default="abs",
                     help="'rel' divides by the max magnitude of the second column")
    cmp.add_argument("--max-tol", type=float)
    cmp.add_argument("--mean-tol", type=float)
    cmp.add_argument("--mean-diff-tol", type=float)
    cmp.add_argument("--out", help="directory for compare.json")
    cmp.add_argument("--seedless", action="store_true")
    return parser


def _run(args) -> int:
    if args.command == "compare":
        return run_compare(args)
    cfg = load_config(args.config, args.overrides)
    require_fields(cfg, args.command)
    out = Path(args.out)
    outputs, diagnostics = COMMANDS[args.command](cfg, out, args)
    params = cfg.resolved()
    params["config_file"] = cfg.source
    params["overrides"] = list(args.overrides)
    write_manifest(out, args.command, params, diagnostics, outputs)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    guard = seedless() if args.seedless else contextlib.nullcontext()
    try:
        with guard:
            return _run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, ConvergenceError) as exc:
        print(f"numerical failure: {exc} (residual {exc.residual:.3e})", file=sys.stderr)
        return EXIT_NUMERICAL
    except (IntegrationError, OrthogonalityError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
