"""Command-line orchestration: check | simulate | limit | compare | diagnostics.

Every output file starts with a comment line carrying the config hash and
seed; CSV floats are written with 17 significant digits so doubles round-trip.
Exit codes: 0 success (and comparison PASS), 1 comparison FAIL, 2 bad
configuration, 3 runtime failure (reported as a JSON record on stdout).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import os
import sys
from typing import List, Optional

import numpy as np

from . import brw, limit_laws, stats
from .config import ExperimentConfig, config_hash, load_config
from .errors import BrwreError, ConfigError
from .limit_laws import EnvStream, QSample

_FMT = "%.17g"


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "nan"
    return _FMT % value


def _write_csv(path: str, header: List[str], rows, meta: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(meta + "\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _meta_line(cfg: ExperimentConfig) -> str:
    return f"# config_hash={config_hash(cfg)} seed={cfg.seed}"


def _outdir(cfg: ExperimentConfig) -> str:
    os.makedirs(cfg.output_dir, exist_ok=True)
    return cfg.output_dir


def cmd_check(cfg: ExperimentConfig) -> int:
    from .environment import check_assumptions

    report = check_assumptions(cfg.environment)
    doc = dataclasses.asdict(report)
    print(f"verdict:            {report.verdict}")
    if report.reason:
        print(f"reason:             {report.reason}")
    print(f"E log E(xi|Y):      {report.e_log_mean:.6g}")
    print(f"E |log P(xi>1|Y)|:  {report.e_abs_log_p_gt1:.6g}")
    print(f"x log x moment:     {report.kesten_stigum_term:.6g}")
    out = _outdir(cfg)
    with open(os.path.join(out, "check.json"), "w") as fh:
        json.dump({"meta": _meta_line(cfg)[2:], **doc}, fh, indent=2)
    return 0


def _simulate_one_n(cfg: ExperimentConfig, n: int, reps: int, threads: int):
    sim = cfg.sim_config(n)
    return brw.run_replications(sim, reps, threads)


def _write_simulation(cfg: ExperimentConfig, n: int, outcomes) -> None:
    out = _outdir(cfg)
    meta = _meta_line(cfg)
    k = cfg.simulation.top_k
    header = (
        ["rep", "n", "Z_n", "pi_n", "B_n"]
        + [f"M{i + 1}" for i in range(k)]
        + [f"min{i + 1}" for i in range(k)]
        + ["W_n", "two_big_jump_flag", "restarts"]
    )
    rows = []
    for rep, o in enumerate(outcomes):
        tops = [o.top[i] if i < o.top.size else float("nan") for i in range(k)]
        bots = [o.bottom[i] if i < o.bottom.size else float("nan") for i in range(k)]
        rows.append(
            [rep, n, int(o.z[-1]), o.env_seq.pi[-1], o.b_n]
            + tops
            + bots
            + [o.w_n, o.diagnostics.paths_with_two_big_jumps > 0, o.restarts]
        )
    _write_csv(os.path.join(out, f"summary_n{n}.csv"), header, rows, meta)
    atom_rows = []
    for rep, o in enumerate(outcomes):
        for loc, mult in zip(o.atoms.locations, o.atoms.multiplicities):
            atom_rows.append([rep, loc, int(mult)])
    _write_csv(
        os.path.join(out, f"atoms_n{n}.csv"),
        ["rep", "location", "multiplicity"],
        atom_rows,
        meta,
    )


def cmd_simulate(cfg: ExperimentConfig, reps: Optional[int], threads: int) -> int:
    reps = reps or cfg.simulation.replications
    for n in cfg.simulation.n:
        outcomes = _simulate_one_n(cfg, n, reps, threads)
        _write_simulation(cfg, n, outcomes)
        survived = sum(not o.extinct for o in outcomes)
        print(f"n={n}: {len(outcomes)} replications written ({survived} surviving)")
    return 0


# Stream ids far above any replication index, so limit draws never share a
# stream with the finite-n simulations.
_Q_STREAM = 0xA5A50001
_PP_STREAM = 0xA5A50002


def _limit_rng(cfg: ExperimentConfig):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((cfg.seed, _Q_STREAM))))


def _draw_q_samples(cfg: ExperimentConfig, size: int) -> List[QSample]:
    rng = _limit_rng(cfg)
    return [
        limit_laws.sample_q(cfg.displacement, cfg.environment, cfg.limit, rng)
        for _ in range(size)
    ]


def _draw_pp(cfg: ExperimentConfig, size: int):
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((cfg.seed, _PP_STREAM))))
    draws, scales = [], np.empty(size)
    for i in range(size):
        m, s = limit_laws.sample_limit_point_process(
            cfg.displacement, cfg.environment, cfg.limit, rng
        )
        draws.append(m)
        scales[i] = s
    return draws, scales


def cmd_limit(cfg: ExperimentConfig, reps: Optional[int]) -> int:
    out = _outdir(cfg)
    meta = _meta_line(cfg)
    size = reps or cfg.limit.n_limit_samples

    q_samples = _draw_q_samples(cfg, size)
    _write_csv(
        os.path.join(out, "q_samples.csv"),
        ["sample", "q", "w", "c_value"],
        [[i, s.q, s.w, s.c_value] for i, s in enumerate(q_samples)],
        meta,
    )

    alpha = cfg.displacement.alpha
    _write_csv(
        os.path.join(out, "limit_cdf.csv"),
        ["x", "cdf"],
        [[x, limit_laws.limit_max_cdf(q_samples, x, alpha)] for x in cfg.comparison.grid],
        meta,
    )

    draws, _ = _draw_pp(cfg, size)
    pp_rows = []
    for i, m in enumerate(draws):
        for loc, mult in zip(m.locations, m.multiplicities):
            pp_rows.append([i, loc, int(mult)])
    _write_csv(
        os.path.join(out, "limit_pp.csv"), ["draw", "location", "multiplicity"], pp_rows, meta
    )

    stream = EnvStream(cfg.environment, _limit_rng(cfg), cfg.limit.degree_cap)
    constants = {}
    for kind in limit_laws.SERIES_KINDS:
        sv = limit_laws.cluster_norm_series(kind, stream, cfg.limit)
        constants[kind] = dataclasses.asdict(sv)
    with open(os.path.join(out, "constants.json"), "w") as fh:
        json.dump(
            {
                "meta": meta[2:],
                "note": "quenched values for one realized environment draw",
                "constants": constants,
            },
            fh,
            indent=2,
        )
    for kind, doc in constants.items():
        print(f"{kind}: {doc['value']:.12g} (tail <= {doc['tail_bound']:.3g}, {doc['terms_used']} terms)")
    return 0


def cmd_compare(cfg: ExperimentConfig, reps: Optional[int], threads: int) -> int:
    out = _outdir(cfg)
    alpha = cfg.displacement.alpha
    grid = np.asarray(cfg.comparison.grid)
    report = {"meta": _meta_line(cfg)[2:], "n": {}, "pass": True}

    q_samples = _draw_q_samples(cfg, cfg.limit.n_limit_samples)
    pp_draws, pp_scales = _draw_pp(cfg, min(cfg.limit.n_limit_samples, 4000))
    pp_floor = float(pp_scales.max()) * cfg.limit.u_min if pp_scales.size else 0.0
    limit_counts = np.array([m.count_above(cfg.comparison.count_x) for m in pp_draws])

    reps = reps or cfg.simulation.replications
    all_pass = True
    for n in cfg.simulation.n:
        outcomes = _simulate_one_n(cfg, n, reps, threads)
        _write_simulation(cfg, n, outcomes)
        alive = [o for o in outcomes if not o.extinct]
        ecdf = stats.Ecdf.from_samples([o.top[0] / o.b_n for o in alive])
        rows = []
        for x in grid:
            limit_val = limit_laws.limit_max_cdf(q_samples, float(x), alpha)
            emp = float(ecdf.eval(x))
            rows.append({"x": float(x), "ecdf": emp, "limit_cdf": limit_val, "abs_diff": abs(emp - limit_val)})
        ks = max(r["abs_diff"] for r in rows)

        finite_counts = np.array([o.atoms.count_above(cfg.comparison.count_x) for o in alive])
        tv = stats.count_distribution_tv(finite_counts, limit_counts)

        laplace_rows = []
        floor = max(cfg.simulation.retain_delta, pp_floor)
        for x in grid:
            if x <= floor:
                continue
            f = stats.TestFunction("indicator_above", float(x))
            fin = stats.laplace_estimate([o.atoms for o in alive], f, cfg.simulation.retain_delta)
            lim = stats.laplace_estimate(pp_draws, f)
            laplace_rows.append(
                {"x": float(x), "finite": fin, "limit": lim, "abs_diff": abs(fin - lim)}
            )
        lap_diff = max((r["abs_diff"] for r in laplace_rows), default=0.0)

        diag = brw.diagnostics_report(outcomes, cfg.simulation.early_rho)
        ok = (
            ks <= cfg.comparison.ks_tolerance
            and tv <= cfg.comparison.count_tv_tolerance
            and lap_diff <= cfg.comparison.laplace_tolerance
        )
        all_pass = all_pass and ok
        report["n"][str(n)] = {
            "grid": rows,
            "ks": ks,
            "count_tv": {"x": cfg.comparison.count_x, "tv": tv},
            "laplace": laplace_rows,
            "diagnostics": diag,
            "pass": ok,
        }
        verdict = "PASS" if ok else "FAIL"
        print(f"n={n}  KS={ks:.4f} (tol {cfg.comparison.ks_tolerance})  "
              f"TV={tv:.4f} (tol {cfg.comparison.count_tv_tolerance})  "
              f"Laplace={lap_diff:.4f} (tol {cfg.comparison.laplace_tolerance})  [{verdict}]")
        print(f"      x     ECDF   limit  |diff|")
        for r in rows:
            print(f"   {r['x']:6.2f}  {r['ecdf']:.4f}  {r['limit_cdf']:.4f}  {r['abs_diff']:.4f}")

    report["pass"] = bool(all_pass)
    with open(os.path.join(out, "compare.json"), "w") as fh:
        json.dump(report, fh, indent=2)
    print("overall:", "PASS" if all_pass else "FAIL")
    return 0 if all_pass else 1


def cmd_diagnostics(cfg: ExperimentConfig, reps: Optional[int], threads: int) -> int:
    out = _outdir(cfg)
    reps = reps or cfg.simulation.replications
    rho = cfg.simulation.early_rho
    doc = {"meta": _meta_line(cfg)[2:], "rho": rho, "n": {}}
    for n in cfg.simulation.n:
        outcomes = _simulate_one_n(cfg, n, reps, threads)
        diag = brw.diagnostics_report(outcomes, rho)
        doc["n"][str(n)] = diag
        print(
            f"n={n}: two_jump_fraction={diag['two_jump_fraction']:.4f}  "
            f"early_jump_fraction(rho={rho})={diag['early_jump_fraction']:.4f}"
        )
    with open(os.path.join(out, "diagnostics.json"), "w") as fh:
        json.dump(doc, fh, indent=2)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="brwre",
        description="Branching random walk in random environment: simulation and limit laws",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("check", "simulate", "limit", "compare", "diagnostics"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="experiment configuration (YAML)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="override the output directory")
        p.add_argument("--reps", type=int, default=None, help="override replication counts")
        p.add_argument(
            "--threads",
            type=int,
            default=int(os.environ.get("BRWRE_THREADS", "1")),
            help="worker processes for replication batches (default $BRWRE_THREADS or 1)",
        )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, seed=args.seed, output_dir=args.out)
        if args.command == "check":
            return cmd_check(cfg)
        if args.command == "simulate":
            return cmd_simulate(cfg, args.reps, args.threads)
        if args.command == "limit":
            return cmd_limit(cfg, args.reps)
        if args.command == "compare":
            return cmd_compare(cfg, args.reps, args.threads)
        return cmd_diagnostics(cfg, args.reps, args.threads)
    except ConfigError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}))
        return 2
    except BrwreError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}))
        return 3


if __name__ == "__main__":
    sys.exit(main())
