"""Command-line entry point: run experiments from a config file.

Subcommands:
  run           execute an experiment config (simulate | hydro | asymptotics
                | cluster | validate) and write CSV/JSON artifacts
  validate      run the built-in invariant suite without a config
  list-catalog  print the built-in kernels, intensities, potentials and
                test functions with their parameter schemas

Every run writes results.csv, verdict.json and manifest.json into --out.
Identical configs and seeds give byte-identical results.csv/verdict.json;
the manifest holds the volatile metadata.  Exit codes: 0 success, 2 for a
failed assertion-style check, 1 for errors.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import catalog
from .errors import ConfigInvalid, JumpFieldError
from .io import config_hash, environment_versions, write_configuration, \
    write_csv, write_json
from .observables import laplace_functional, \
    poisson_laplace_reference, jackknife_mean
from .sampler import EnsembleRun, JumpSampler, TorusBox, sample_poisson, \
    evolve_configuration
from .spectral import SemigroupOperator, SpectralGrid, evolve_intensity

_ENV_PREFIX = "JUMPFIELD_"

_KIND_KEYS = {
    "simulate": {"required": ["kind", "master_seed", "kernel", "intensity",
                              "grid", "test_function", "replicas",
                              "snapshot_times", "windows"],
                 "optional": ["threads", "output_dir"]},
    "hydro": {"required": ["kind", "master_seed", "kernel", "intensity",
                           "test_function", "scaling"],
              "optional": ["threads", "replicas", "output_dir"]},
    "asymptotics": {"required": ["kind", "master_seed", "kernel",
                                 "intensity", "test_function", "grid",
                                 "times"],
                    "optional": ["threads", "radii", "output_dir"]},
    "cluster": {"required": ["kind", "master_seed", "gibbs"],
                "optional": ["threads", "output_dir"]},
    "validate": {"required": ["kind", "master_seed"],
                 "optional": ["threads", "output_dir"]},
}


def validate_config(cfg):
    if not isinstance(cfg, dict):
        raise ConfigInvalid("config root must be an object")
    kind = cfg.get("kind")
    if kind not in _KIND_KEYS:
        raise ConfigInvalid(f"kind: must be one of {sorted(_KIND_KEYS)}")
    keys = _KIND_KEYS[kind]
    for key in keys["required"]:
        if key not in cfg:
            raise ConfigInvalid(f"{key}: required for kind '{kind}'")
    allowed = set(keys["required"]) | set(keys["optional"])
    for key in cfg:
        if key not in allowed:
            raise ConfigInvalid(f"{key}: unknown key for kind '{kind}'")
    if not isinstance(cfg["master_seed"], int):
        raise ConfigInvalid("master_seed: must be an integer")
    for block_name, allowed_keys in (
            ("kernel", {"name", "params", "dimension", "alpha",
                        "tail_constant"}),
            ("intensity", {"name", "params"}),
            ("test_function", {"name", "params"})):
        if block_name in cfg:
            block = cfg[block_name]
            if not isinstance(block, dict) or "name" not in block:
                raise ConfigInvalid(f"{block_name}: needs a 'name'")
            extra = set(block) - allowed_keys
            if extra:
                raise ConfigInvalid(
                    f"{block_name}.{sorted(extra)[0]}: unknown key")
    if "grid" in cfg:
        g = cfg["grid"]
        for key in ("dimension", "side", "points"):
            if key not in g:
                raise ConfigInvalid(f"grid.{key}: required")
        if set(g) - {"dimension", "side", "points"}:
            raise ConfigInvalid("grid: unknown keys present")
    if "scaling" in cfg:
        s = cfg["scaling"]
        for key in ("kappa", "eps_ladder", "t", "weak", "L_macro", "dx"):
            if key not in s:
                raise ConfigInvalid(f"scaling.{key}: required")
    if "gibbs" in cfg:
        gb = cfg["gibbs"]
        for key in ("potential", "beta", "activity", "order"):
            if key not in gb:
                raise ConfigInvalid(f"gibbs.{key}: required")


def _build_kernel(cfg):
    block = cfg["kernel"]
    kernel = catalog.build_from_block(
        "kernels", block, extra={"dimension": block.get("dimension", 1)})
    if "alpha" in block or "tail_constant" in block:
        # declared tail bound overrides the builder's derived one; the
        # constructor re-validates it on probe points
        from .kernel import JumpKernel
        kernel = JumpKernel(
            kernel.dimension, kernel.evaluate,
            float(block.get("alpha", kernel.alpha)),
            float(block.get("tail_constant", kernel.tail_constant)),
            name=kernel.name, params=kernel.params,
            centers=kernel.centers,
            support_radius=kernel.support_radius)
    return kernel


def _build_intensity(cfg):
    return catalog.build_from_block("intensities", cfg["intensity"])


def _build_phi(cfg):
    return catalog.build_from_block("test_functions", cfg["test_function"])


def _grid(cfg):
    g = cfg["grid"]
    return SpectralGrid(g["dimension"], float(g["side"]), int(g["points"]))


# -- experiment drivers --------------------------------------------------------


def run_simulate(cfg, out, threads=1):
    kernel = _build_kernel(cfg)
    z = _build_intensity(cfg)
    phi = _build_phi(cfg)
    grid = _grid(cfg)
    box = TorusBox(grid.dimension, grid.side)
    sampler = JumpSampler(kernel)
    times = sorted(float(t) for t in cfg["snapshot_times"])
    windows = [tuple(w) for w in cfg["windows"]]
    run = EnsembleRun(int(cfg["replicas"]), int(cfg["master_seed"]),
                      tuple(times))

    streams = run.streams()

    def one_replica(rng):
        cfg_r = sample_poisson(z, box, rng)
        out_rows = {}
        prev = 0.0
        for t in times:
            cfg_r = evolve_configuration(cfg_r, sampler, t - prev, rng)
            prev = t
            out_rows[t] = cfg_r
        return out_rows

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            evolved = list(pool.map(one_replica, streams))
    else:
        evolved = [one_replica(rng) for rng in streams]

    z_field = grid.sample(z.evaluate)
    rows = []
    profile_rows = []
    checks = []
    bin_edges = np.linspace(-0.5 * grid.side, 0.5 * grid.side, 41)
    bin_vol = np.diff(bin_edges)
    centers = 0.5 * (bin_edges[:-1] + bin_edges[1:])
    for t in times:
        configs = [e[t] for e in evolved]
        zt = evolve_intensity(kernel, t, z_field)
        for w_lo, w_hi in windows:
            mask = (grid.axis_nodes >= w_lo) & (grid.axis_nodes < w_hi)
            expected = float(zt.values[mask].sum()) * grid.cell_volume
            counts = [c.count_in([w_lo], [w_hi]) for c in configs]
            est, se = jackknife_mean(counts)
            rows.append({"observable": f"count[{w_lo},{w_hi})", "time": t,
                         "estimate": est, "stderr": se,
                         "replicas": len(configs), "reference": expected,
                         "deviation": abs(est - expected)})
        lap = laplace_functional(configs, phi)
        ref = poisson_laplace_reference(kernel, grid, t, z, phi)
        rows.append({"observable": "laplace", "time": t,
                     "estimate": lap.value, "stderr": lap.stderr,
                     "replicas": lap.replicas, "reference": ref,
                     "deviation": abs(lap.value - ref)})
        checks.append({"check": f"laplace@t={t}",
                       "pass": bool(abs(lap.value - ref)
                                    <= 3.0 * lap.stderr)})
        write_configuration(out / f"snapshot_t{t}", configs[0],
                            {"time": t, "replica": 0})
        hists = np.stack([
            np.histogram(c.points[:, 0], bins=bin_edges)[0] / bin_vol
            for c in configs])
        rho = hists.mean(axis=0)
        rho_se = hists.std(axis=0, ddof=1) / math.sqrt(len(configs))
        cum = np.concatenate([[0.0], np.cumsum(
            0.5 * (zt.values[1:] + zt.values[:-1]) * grid.dx)])
        ref_bins = np.diff(np.interp(bin_edges, grid.axis_nodes, cum)) \
            / bin_vol
        for c, r, se, rb in zip(centers, rho, rho_se, ref_bins):
            profile_rows.append({"time": t, "bin_center": c, "rho_hat": r,
                                 "stderr": se, "reference": rb,
                                 "deviation": abs(r - rb)})
    write_csv(out / "results.csv",
              ["observable", "time", "estimate", "stderr", "replicas",
               "reference", "deviation"], rows)
    write_csv(out / "profile.csv",
              ["time", "bin_center", "rho_hat", "stderr", "reference",
               "deviation"], profile_rows)
    return checks


def run_hydro(cfg, out, threads=1):
    from .hydro import ScalingSpec, hydro_ladder
    kernel = _build_kernel(cfg)
    z = _build_intensity(cfg)
    phi = _build_phi(cfg)
    s = cfg["scaling"]
    spec = ScalingSpec(int(s["kappa"]), tuple(s["eps_ladder"]),
                       float(s["t"]), bool(s["weak"]))
    rows, order = hydro_ladder(kernel, z, phi, spec,
                               L_macro=float(s["L_macro"]),
                               dx=float(s["dx"]),
                               mc_replicas=int(cfg.get("replicas", 0)),
                               master_seed=int(cfg["master_seed"]))
    devs = [r["deviation"] for r in rows]
    monotone = all(b < a for a, b in zip(devs, devs[1:]))
    write_csv(out / "results.csv",
              ["eps", "exponent", "mc_mean", "mc_var", "reference",
               "deviation"], rows)
    return [{"check": "deviation_monotone", "pass": bool(monotone)},
            {"check": "fitted_order", "value": order,
             "pass": bool(order >= 0.8)}]


def run_asymptotics(cfg, out, threads=1):
    from .asymptotics import arithmetic_mean, large_time_trajectory
    kernel = _build_kernel(cfg)
    z = _build_intensity(cfg)
    phi = _build_phi(cfg)
    grid = _grid(cfg)
    times = [float(t) for t in cfg["times"]]
    traj = large_time_trajectory(kernel, z, phi, times, grid)
    rows = []
    for i, t in enumerate(times):
        row = {"t": t, "value": traj["values"][i]}
        if "reference" in traj:
            row["reference"] = traj["reference"]
            row["deviation"] = traj["deviations"][i]
        rows.append(row)
    write_csv(out / "results.csv",
              ["t", "value", "reference", "deviation"], rows)
    checks = []
    if "reference" in traj:
        checks.append({"check": "final_deviation",
                       "value": float(traj["deviations"][-1]),
                       "pass": bool(traj["deviations"][-1]
                                    <= traj["deviations"][0] + 1e-12)})
    if "radii" in cfg:
        averages, verdict = arithmetic_mean(z, [float(r)
                                                for r in cfg["radii"]])
        write_csv(out / "ball_averages.csv", ["radius", "average"],
                  [{"radius": r, "average": a}
                   for r, a in zip(cfg["radii"], averages)])
        checks.append({"check": "mean_verdict", "kind": verdict.kind,
                       "value": verdict.value,
                       "envelope": verdict.envelope, "pass": True})
    return checks


def run_cluster(cfg, out, threads=1):
    from .gibbs import graph_set, high_temp_check, rho_equi, \
        tree_bound_check
    gb = cfg["gibbs"]
    potential = catalog.build_from_block("potentials", gb["potential"])
    beta = float(gb["beta"])
    activity = float(gb["activity"])
    order = int(gb["order"])
    value, regime_ok = high_temp_check(activity, beta, potential)
    rows = []
    for n in range(order + 1):
        v, budget = rho_equi(activity, beta, potential, order=n)
        rows.append({"order": n, "eta": "{0}", "value": v, "budget": budget,
                     "deviation": budget})
    write_csv(out / "results.csv",
              ["order", "eta", "value", "budget", "deviation"], rows)
    counts = {n: len(graph_set(n).connected) for n in (1, 2, 3, 4)}
    trees = {n: len(graph_set(n).trees) for n in (1, 2, 3, 4)}
    rng = np.random.default_rng(int(cfg["master_seed"]))
    bound_ok = True
    for _ in range(200):
        pts = rng.uniform(-1.0, 1.0, size=(3, potential.dimension))
        _, _, ok = tree_bound_check(pts, beta, potential)
        bound_ok = bound_ok and ok
    write_json(out / "regime.json",
               {"high_temp_value": value, "pass": bool(regime_ok),
                "connected_counts": counts, "tree_counts": trees})
    return [
        {"check": "graph_counts",
         "pass": counts == {1: 1, 2: 1, 3: 4, 4: 38}},
        {"check": "tree_counts", "pass": trees == {1: 1, 2: 1, 3: 3, 4: 16}},
        {"check": "tree_bound_sample", "pass": bool(bound_ok)},
        {"check": "high_temp_regime", "value": value,
         "pass": bool(regime_ok)},
    ]


def run_validate(cfg, out, threads=1):
    """Fast invariant sweep over the spectral and kernel layers."""
    from .kernel import fourier_symbol, gaussian_kernel
    from .spectral import chi_bound_check, series_semigroup
    checks = []
    g = gaussian_kernel(1)
    checks.append({"check": "gaussian_mass",
                   "pass": bool(abs(g.a0 - math.sqrt(math.pi)) < 1e-9)})
    rng = np.random.default_rng(int(cfg["master_seed"]))
    ks = rng.uniform(-20, 20, size=50)
    sym_ok = all(fourier_symbol(g, k).real <= 0 for k in ks)
    checks.append({"check": "symbol_nonpositive", "pass": bool(sym_ok)})
    grid = SpectralGrid(1, 40.0, 1 << 10)
    one = grid.field(np.ones(grid.shape()))
    op = SemigroupOperator(g, grid, 1.0)
    checks.append({"check": "markov_exact",
                   "pass": bool(np.abs(op.apply(one).values - 1).max()
                                < 1e-12)})
    f = grid.sample(lambda p: np.exp(-2 * p[:, 0] ** 2))
    spec_v = op.apply(f)
    ser_v = series_semigroup(g, 1.0, f)
    checks.append({"check": "series_cross_check",
                   "pass": bool(np.abs(spec_v.values - ser_v.values).max()
                                < 1e-8)})
    try:
        chi_bound_check(g)
        checks.append({"check": "chi_bound", "pass": True})
    except JumpFieldError:
        checks.append({"check": "chi_bound", "pass": False})
    from .gibbs import connected_graphs, spanning_trees
    checks.append({"check": "graph_counts",
                   "pass": [len(connected_graphs(n)) for n in (1, 2, 3, 4)]
                   == [1, 1, 4, 38]
                   and [len(spanning_trees(n)) for n in (1, 2, 3, 4)]
                   == [1, 1, 3, 16]})
    write_csv(out / "results.csv", ["check", "pass"],
              [{"check": c["check"], "pass": c["pass"]} for c in checks])
    return checks


_RUNNERS = {
    "simulate": run_simulate,
    "hydro": run_hydro,
    "asymptotics": run_asymptotics,
    "cluster": run_cluster,
    "validate": run_validate,
}


def run_config(config, out_dir, threads=None, seed_override=None):
    """Validate and execute a config dict; returns the exit code."""
    validate_config(config)
    config = dict(config)
    if seed_override is not None:
        config["master_seed"] = int(seed_override)
    if threads is None:
        threads = int(config.get(
            "threads", os.environ.get(_ENV_PREFIX + "THREADS", 1)))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = time.time()
    checks = _RUNNERS[config["kind"]](config, out, threads=threads)
    ok = all(c.get("pass", True) for c in checks)
    write_json(out / "verdict.json", {"checks": checks, "pass": bool(ok)})
    write_json(out / "manifest.json", {
        "config_sha256": config_hash(config),
        "master_seed": config["master_seed"],
        "kind": config["kind"],
        "versions": environment_versions(),
        "wall_time_s": time.time() - started,
    })
    return 0 if ok else 2


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="jumpfield",
        description="independent-jump particle dynamics laboratory")
    sub = parser.add_subparsers(dest="command")
    p_run = sub.add_parser("run", help="execute an experiment config")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", default=None)
    p_run.add_argument("--threads", type=int, default=None)
    p_run.add_argument("--seed-override", type=int, default=None)
    p_val = sub.add_parser("validate", help="run the invariant suite")
    p_val.add_argument("--out", default="validate-out")
    p_val.add_argument("--seed", type=int, default=7)
    p_cat = sub.add_parser("list-catalog", help="show built-in objects")
    p_cat.add_argument("--machine", action="store_true")

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse prints the usage text itself; fold its exit codes to 1
        return 0 if exc.code in (0, None) else 1
    if args.command is None:
        parser.print_usage()
        return 1
    try:
        if args.command == "list-catalog":
            if args.machine:
                print(json.dumps(catalog.describe(machine=True),
                                 indent=2, sort_keys=True))
            else:
                print(catalog.describe())
            return 0
        if args.command == "validate":
            return run_config({"kind": "validate", "master_seed": args.seed},
                              args.out)
        config = json.loads(Path(args.config).read_text())
        out = args.out or config.get("output_dir")
        if out is None:
            print("error: pass --out or set output_dir in the config",
                  file=sys.stderr)
            return 1
        return run_config(config, out, threads=args.threads,
                          seed_override=args.seed_override)
    except (ConfigInvalid, KeyError, FileNotFoundError,
            json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except JumpFieldError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
