"""Command-line entry point: subcommand dispatch, run orchestration, file output.

Subcommands: validate-kernel, assemble, simulate, verify, convergence,
sweep.  Every run writes a manifest (config hash, resolved config,
package version, wall time, artifact list) so an output directory is
fully reconstructible from its manifest plus the package.
"""

import argparse
import itertools
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, config_from_dict, parse_config
from .kernels import kernel_report
from .monitor import (
    VerificationReport,
    norms,
    verify_cutoff_inactive,
    verify_derivative_identity,
    verify_energy,
    verify_weak_residual,
)
from .operators import assemble_operators
from .simulate import (
    Discretization,
    admissible_horizon,
    admissible_scale,
    default_dt,
    estimate_constants,
    initial_state,
    integrate,
    state_norms_for_constants,
)

_FMT = "%.17g"
_SNAP_GRID = 256


def _say(args, msg):
    if not args.quiet:
        print(msg)


def _outdir(args, cfg):
    out = Path(args.out) if args.out else Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(outdir, cfg, command, artifacts, wall):
    manifest = {
        "command": command,
        "config_sha256": cfg.config_hash(),
        "config": cfg.raw,
        "package_version": __version__,
        "wall_time_s": wall,
        "artifacts": sorted(artifacts),
    }
    path = outdir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return path


def _write_matrix_csv(path, name, mat):
    mat = np.atleast_2d(mat)
    header = f"{name} rows={mat.shape[0]} cols={mat.shape[1]} layout=row-major"
    np.savetxt(path, mat, fmt=_FMT, delimiter=",", header=header)


def _setup(cfg):
    disc = Discretization.create(
        cfg.m, cfg.L, include_constant=cfg.include_constant, panels=cfg.panels, order=cfg.order
    )
    ops = assemble_operators(
        cfg.kernel,
        disc.plant,
        disc.water,
        disc.derivw,
        disc.quad,
        cfg.model.nu,
        require_hypothesis=not cfg.allow_inadmissible_kernel,
    )
    return disc, ops


def _horizon(cfg):
    if cfg.T is not None:
        return cfg.T
    return admissible_horizon(cfg.model, cfg.T_max)


def _prepared_run(cfg, disc, ops):
    """Initial state (optionally rescaled to admissibility), horizon, constants."""
    T = _horizon(cfg)
    u0 = cfg.profile("u", disc)
    w0 = cfg.profile("w", disc)
    state0 = initial_state(u0, w0, disc)
    ic = state_norms_for_constants(state0, disc)
    constants = estimate_constants(cfg.model, T, ic, ops)
    if cfg.scale_to_admissible:
        s = admissible_scale(ic, constants, fraction=cfg.admissible_fraction)
        state0 = initial_state(u0.scaled(s), w0.scaled(s), disc)
        ic = state_norms_for_constants(state0, disc)
        constants = estimate_constants(cfg.model, T, ic, ops)
    return state0, T, constants


def _snapshot_grid(L):
    return np.linspace(-L, L, _SNAP_GRID)


def _trajectory_rows(traj, disc):
    grid = _snapshot_grid(disc.L)
    phi = np.vstack([np.asarray(_eval_row(disc.plant, j, grid)) for j in range(disc.plant.dim)])
    psi = np.vstack([np.asarray(_eval_row(disc.water, j, grid)) for j in range(disc.m)])
    rho = np.vstack([np.asarray(_eval_row(disc.derivw, j, grid)) for j in range(disc.m)])
    rows = []
    for t, state in zip(traj.times, traj.states):
        rows.append(
            np.concatenate(
                [
                    [t],
                    state.coef_u,
                    state.coef_w,
                    state.coef_v,
                    state.coef_z,
                    state.coef_u @ phi,
                    state.coef_w @ psi,
                    state.coef_v @ phi,
                    state.coef_z @ rho,
                ]
            )
        )
    return np.vstack(rows)


def _eval_row(basis, j, x):
    from .basis import eval_basis

    return eval_basis(basis, j, x)


def _trajectory_header(disc):
    cols = ["t"]
    cols += [f"coef_u_{j}" for j in range(disc.plant.dim)]
    cols += [f"coef_w_{j}" for j in range(disc.m)]
    cols += [f"coef_v_{j}" for j in range(disc.plant.dim)]
    cols += [f"coef_z_{j}" for j in range(disc.m)]
    for name in ("u", "w", "v", "z"):
        cols += [f"snap_{name}_{i:03d}" for i in range(_SNAP_GRID)]
    return ",".join(cols)


def _write_trajectory(outdir, traj, disc):
    rows = _trajectory_rows(traj, disc)
    path = outdir / "trajectory.csv"
    np.savetxt(path, rows, fmt=_FMT, delimiter=",", header=_trajectory_header(disc), comments="")
    gpath = outdir / "snapshot_grid.csv"
    np.savetxt(gpath, _snapshot_grid(disc.L), fmt=_FMT, delimiter=",", header="x", comments="")
    return [path.name, gpath.name]


def cmd_validate_kernel(args, cfg):
    report = kernel_report(cfg.kernel)
    payload = json.dumps(report.as_dict(), indent=2)
    print(payload)
    artifacts = []
    if args.out:
        outdir = _outdir(args, cfg)
        (outdir / "kernel_report.json").write_text(payload)
        artifacts.append("kernel_report.json")
        _write_manifest(outdir, cfg, "validate-kernel", artifacts, 0.0)
    return 0 if report.hypothesis_satisfied else 1


def cmd_assemble(args, cfg):
    start = time.perf_counter()
    disc, ops = _setup(cfg)
    outdir = _outdir(args, cfg)
    artifacts = []
    for name, mat in (
        ("B_hat", ops.B_hat),
        ("J_hat", ops.J_hat),
        ("G_hat", ops.G_hat),
        ("M_hat", ops.M_hat),
    ):
        path = outdir / f"{name}.csv"
        _write_matrix_csv(path, name, mat)
        artifacts.append(path.name)
    (outdir / "scalars.json").write_text(json.dumps(ops.scalar_report(), indent=2))
    artifacts.append("scalars.json")
    _write_manifest(outdir, cfg, "assemble", artifacts, time.perf_counter() - start)
    _say(args, f"assembled operators for m={cfg.m} into {outdir}")
    return 0


def _run_simulation(cfg, disc, ops):
    state0, T, constants = _prepared_run(cfg, disc, ops)
    dt = cfg.dt if cfg.dt is not None else default_dt(cfg.model, ops)
    traj = integrate(
        state0, cfg.model, ops, disc, T, dt=dt, record_stride=cfg.record_stride
    )
    return traj, constants


def cmd_simulate(args, cfg):
    start = time.perf_counter()
    disc, ops = _setup(cfg)
    traj, constants = _run_simulation(cfg, disc, ops)
    outdir = _outdir(args, cfg)
    artifacts = _write_trajectory(outdir, traj, disc)
    (outdir / "constants.json").write_text(json.dumps(constants.as_dict(), indent=2))
    artifacts.append("constants.json")
    _write_manifest(outdir, cfg, "simulate", artifacts, time.perf_counter() - start)
    if traj.aborted:
        _say(args, f"integration aborted: {traj.aborted}")
        return 1
    final = norms(traj.final, disc)
    _say(
        args,
        f"simulated to T={traj.times[-1]:.6g} ({len(traj)} records); "
        f"||u||={final['l2_u']:.3e}, ||w||={final['l2_w']:.3e}",
    )
    return 0


def cmd_verify(args, cfg):
    start = time.perf_counter()
    disc, ops = _setup(cfg)
    traj, constants = _run_simulation(cfg, disc, ops)
    report = VerificationReport()
    if traj.aborted:
        print(f"integration aborted: {traj.aborted}", file=sys.stderr)
        return 1
    report.extend(verify_energy(traj, constants, disc))
    identity = verify_derivative_identity(traj, disc)
    report.add(identity[0])
    if cfg.model.a == 0 and cfg.model.nu == 0:
        # the z-identity only holds discretely without rainfall forcing
        # and advection boundary terms; elsewhere it is reported by the
        # monitor API but not gated here
        report.add(identity[1])
    report.add(verify_cutoff_inactive(traj, cfg.model.M, disc))
    mid = traj.states[len(traj.states) // 2]
    for state in (mid, traj.final):
        report.add(verify_weak_residual(state, ops, cfg.model, disc))
    outdir = _outdir(args, cfg)
    (outdir / "report.json").write_text(report.to_json())
    artifacts = ["report.json"]
    (outdir / "constants.json").write_text(json.dumps(constants.as_dict(), indent=2))
    artifacts.append("constants.json")
    _write_manifest(outdir, cfg, "verify", artifacts, time.perf_counter() - start)
    _say(args, report.render_table())
    return 0 if report.passed else 1


def _pad(coeffs, dim):
    out = np.zeros(dim)
    out[: len(coeffs)] = coeffs
    return out


_trapezoid = getattr(np, "trapezoid", None) or np.trapz


def _l2_0T(times, diffs):
    # sqrt of the trapezoid rule applied to ||difference||^2 over [0, T]
    return float(np.sqrt(_trapezoid(np.asarray(diffs) ** 2, np.asarray(times))))


def cmd_convergence(args, cfg):
    start = time.perf_counter()
    levels = args.levels
    if sorted(levels) != levels or len(set(levels)) != len(levels):
        print("convergence levels must be strictly increasing", file=sys.stderr)
        return 2
    runs = {}
    dts = []
    T = _horizon(cfg)
    for m in levels:
        sub = _with_m(cfg, m)
        disc, ops = _setup(sub)
        dts.append(cfg.dt if cfg.dt is not None else default_dt(cfg.model, ops))
        runs[m] = (sub, disc, ops)
    dt = min(dts)  # one step size across levels so records align in time
    results = {}
    for m, (sub, disc, ops) in runs.items():
        state0, _, _ = _prepared_run(sub, disc, ops)
        traj = integrate(
            state0, cfg.model, ops, disc, T, dt=dt, record_stride=cfg.record_stride
        )
        results[m] = (disc, traj)
    table = []
    for m_lo, m_hi in zip(levels[:-1], levels[1:]):
        disc_lo, traj_lo = results[m_lo]
        disc_hi, traj_hi = results[m_hi]
        diffs = {"u": [], "w": [], "v": [], "z": []}
        for s_lo, s_hi in zip(traj_lo.states, traj_hi.states):
            diffs["u"].append(np.linalg.norm(_pad(s_lo.coef_u, disc_hi.plant.dim) - s_hi.coef_u))
            diffs["w"].append(np.linalg.norm(_pad(s_lo.coef_w, disc_hi.m) - s_hi.coef_w))
            diffs["v"].append(np.linalg.norm(_pad(s_lo.coef_v, disc_hi.plant.dim) - s_hi.coef_v))
            diffs["z"].append(np.linalg.norm(_pad(s_lo.coef_z, disc_hi.m) - s_hi.coef_z))
        entry = {"m": m_lo, "m_next": m_hi}
        for name, vals in diffs.items():
            entry[f"l2_0T_{name}"] = _l2_0T(traj_lo.times, vals)
        table.append(entry)
    for prev, cur in zip(table[:-1], table[1:]):
        cur["ratio_u"] = cur["l2_0T_u"] / prev["l2_0T_u"] if prev["l2_0T_u"] else float("nan")
    outdir = _outdir(args, cfg)
    (outdir / "convergence.json").write_text(json.dumps(table, indent=2))
    header = sorted({k for row in table for k in row})
    lines = [",".join(header)]
    for row in table:
        lines.append(",".join(_FMT % row[k] if k in row else "" for k in header))
    (outdir / "convergence.csv").write_text("\n".join(lines) + "\n")
    _write_manifest(
        outdir, cfg, "convergence", ["convergence.json", "convergence.csv"],
        time.perf_counter() - start,
    )
    for row in table:
        _say(args, json.dumps(row))
    return 0


def _with_m(cfg, m):
    import dataclasses

    raw = json.loads(json.dumps(cfg.raw))
    raw.setdefault("discretization", {})["m"] = m
    return dataclasses.replace(cfg, m=m, panels=None, order=None, raw=raw)


def _apply_override(raw, dotted, value):
    parts = dotted.split(".")
    node = raw
    for part in parts[:-1]:
        node = node.setdefault(part, {})
    node[parts[-1]] = value
    return raw


def _sweep_cell(payload):
    """Worker for one sweep cell; must stay importable for process pools."""
    raw, base_dir, overrides, outdir = payload
    raw = json.loads(json.dumps(raw))
    for dotted, value in overrides:
        _apply_override(raw, dotted, value)
    cfg = config_from_dict(raw, base_dir=base_dir)
    ns = argparse.Namespace(out=outdir, quiet=True)
    return cmd_simulate(ns, cfg)


def cmd_sweep(args, cfg, config_path):
    start = time.perf_counter()
    grids = []
    for spec in args.param:
        if "=" not in spec:
            print(f"bad --param {spec!r}; expected section.key=v1,v2,...", file=sys.stderr)
            return 2
        dotted, _, values = spec.partition("=")
        vals = []
        for tok in values.split(","):
            try:
                vals.append(float(tok) if "." in tok or "e" in tok.lower() else int(tok))
            except ValueError:
                vals.append(tok)
        grids.append((dotted.strip(), vals))
    outdir = _outdir(args, cfg)
    base_dir = str(Path(config_path).parent)
    cells = []
    for combo in itertools.product(*(vals for _, vals in grids)):
        overrides = list(zip((d for d, _ in grids), combo))
        tag = "_".join(f"{d.split('.')[-1]}={v}" for d, v in overrides)
        cell_dir = outdir / f"cell_{tag}"
        cell_dir.mkdir(parents=True, exist_ok=True)
        cells.append((cfg.raw, base_dir, overrides, str(cell_dir)))
    if args.threads > 1:
        with ProcessPoolExecutor(max_workers=args.threads) as pool:
            codes = list(pool.map(_sweep_cell, cells))
    else:
        codes = [_sweep_cell(cell) for cell in cells]
    _write_manifest(
        outdir, cfg, "sweep", [Path(c[3]).name for c in cells], time.perf_counter() - start
    )
    _say(args, f"swept {len(cells)} cells into {outdir}")
    return 0 if all(code == 0 for code in codes) else 1


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="nlklausmeier",
        description="Spectral-Galerkin solver and inequality monitor for the "
        "nonlocal plant-water model",
    )
    parser.add_argument("--config", required=True, help="TOML configuration file")
    parser.add_argument("--out", default=None, help="output directory (overrides config)")
    parser.add_argument("--threads", type=int, default=1, help="parallel workers for sweeps")
    parser.add_argument("--quiet", action="store_true", help="suppress progress output")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("validate-kernel", help="print the kernel admissibility report as JSON")
    sub.add_parser("assemble", help="write the Galerkin matrices and scalar bounds")
    sub.add_parser("simulate", help="integrate the four-field system and write the trajectory")
    sub.add_parser("verify", help="simulate, then check every inequality along the trajectory")
    conv = sub.add_parser("convergence", help="refinement study across truncation levels")
    conv.add_argument("--levels", type=int, nargs="+", default=[4, 8, 16])
    swp = sub.add_parser("sweep", help="grid of runs over parameter overrides")
    swp.add_argument(
        "--param", action="append", default=[], help="section.key=v1,v2,... (repeatable)"
    )
    args = parser.parse_args(argv)

    try:
        cfg = parse_config(args.config)
    except ConfigError as err:
        print(err, file=sys.stderr)
        return 2
    try:
        if args.command == "validate-kernel":
            return cmd_validate_kernel(args, cfg)
        if args.command == "assemble":
            return cmd_assemble(args, cfg)
        if args.command == "simulate":
            return cmd_simulate(args, cfg)
        if args.command == "verify":
            return cmd_verify(args, cfg)
        if args.command == "convergence":
            return cmd_convergence(args, cfg)
        if args.command == "sweep":
            return cmd_sweep(args, cfg, args.config)
    except OSError as err:
        print(f"I/O failure: {err}", file=sys.stderr)
        return 1
    return 2


if __name__ == "__main__":
    sys.exit(main())
