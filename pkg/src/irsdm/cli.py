"""Command-line entry points.

Subcommands mirror the pipeline stages: ``min-power`` and ``position`` run
single stages, ``optimize`` runs a full method pipeline with the evaluation
suite, and ``beammap``/``ber-sweep``/``rate-sweep``/``dof-check`` produce the
experiment artifacts. All outputs are CSV plus a JSON manifest under --out.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ensure_seed, linear_to_dbm, load_config, scene_from_config, budget_from_config
from .errors import ConfigError, InfeasibleError
from .pipeline import (
    METHODS,
    _meta,
    _rng,
    _STREAM_EVE,
    _STREAM_UAV,
    dof_report,
    run_pipeline,
    solve_joint,
    sweep_ber,
    sweep_rate,
    write_csv,
)
from .phase_opt import PhaseCodebook, zero_config
from .precoding import ConstellationSpec


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="irsdm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=str, default=None, help="JSON configuration file")
        p.add_argument("--seed", type=int, default=None, help="unsigned 64-bit run seed")
        p.add_argument("--out", type=str, default="out", help="output directory")
        p.add_argument("--profile", choices=("desk", "paper"), default=None)

    p = sub.add_parser("min-power", help="minimum transmit power at the entry geometry")
    common(p)

    p = sub.add_parser("position", help="placement stage only; writes the iterate trace")
    common(p)

    p = sub.add_parser("optimize", help="full pipeline for one phase method")
    p.add_argument("method", choices=METHODS)
    common(p)

    p = sub.add_parser("beammap", help="spatial received-power map for one method")
    p.add_argument("--method", choices=METHODS, default="ce-vt")
    common(p)

    p = sub.add_parser("ber-sweep", help="bit-error rates across the N0 grid")
    p.add_argument("--method", choices=METHODS, default="ce-vt")
    common(p)

    p = sub.add_parser("rate-sweep", help="sum rate across transmit-power budgets")
    p.add_argument("--methods", nargs="+", choices=METHODS, default=list(METHODS))
    p.add_argument(
        "--values", nargs="+", type=float, default=[20.0, 25.0, 30.0, 35.0, 40.0],
        help="P_max grid in dBm",
    )
    common(p)

    p = sub.add_parser("dof-check", help="channel-rank bounds over random panel phases")
    p.add_argument("--draws", type=int, default=20)
    common(p)

    return parser


def _load(args) -> tuple:
    cfg = load_config(args.config, profile=args.profile, seed=args.seed)
    cfg = ensure_seed(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return cfg, out


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg, out = _load(args)
        if args.command == "min-power":
            budget = budget_from_config(cfg)
            constellation = ConstellationSpec.psk(
                cfg.constellation_order, _rng(cfg.seed, _STREAM_EVE), cfg.eve_amplitude
            )
            scene = scene_from_config(cfg, _rng(cfg.seed, _STREAM_UAV))
            phases = zero_config(PhaseCodebook(cfg.phase_bits), cfg.m)
            sol = solve_joint(scene, cfg, budget, constellation, phases)
            print(f"P_min = {sol.p_min:.6g} mW ({linear_to_dbm(sol.p_min):.2f} dBm)")
            print(f"position = ({sol.scene.uav.x:.3f}, {sol.scene.uav.y:.3f}, {sol.scene.uav.z:.3f})")
            write_csv(
                out / "min_power.csv",
                _meta(cfg),
                ("iter", "x_A", "y_A", "J2", "P_min"),
                sol.position_trace,
            )
        elif args.command == "position":
            budget = budget_from_config(cfg)
            constellation = ConstellationSpec.psk(
                cfg.constellation_order, _rng(cfg.seed, _STREAM_EVE), cfg.eve_amplitude
            )
            scene = scene_from_config(cfg, _rng(cfg.seed, _STREAM_UAV))
            phases = zero_config(PhaseCodebook(cfg.phase_bits), cfg.m)
            sol = solve_joint(scene, cfg, budget, constellation, phases)
            path = write_csv(
                out / "position_trace.csv",
                _meta(cfg),
                ("iter", "x_A", "y_A", "J2", "P_min"),
                sol.position_trace,
            )
            print(f"wrote {path}")
        elif args.command == "optimize":
            report = run_pipeline(cfg, args.method, out_dir=out)
            print(
                f"method={report.method} seed={report.seed} sum_rate={report.sum_rate:.4f} "
                f"P_min={report.p_min_dbm:.2f} dBm position=({report.position[0]:.2f}, "
                f"{report.position[1]:.2f})"
            )
            for name, path in report.artifacts.items():
                print(f"  {name}: {path}")
        elif args.command == "beammap":
            report = run_pipeline(cfg, args.method, out_dir=out)
            print(f"wrote {report.artifacts['beammap']}")
        elif args.command == "ber-sweep":
            path = out / f"ber_sweep_{args.method}.csv"
            sweep_ber(cfg, method=args.method, out_path=path)
            print(f"wrote {path}")
        elif args.command == "rate-sweep":
            path = out / "rate_sweep.csv"
            sweep_rate(cfg, args.values, methods=tuple(args.methods), out_path=path)
            print(f"wrote {path}")
        elif args.command == "dof-check":
            reports = dof_report(cfg, draws=args.draws)
            rows = [
                (i, r.eve_rank, r.eve_limit, r.users_rank, r.users_limit,
                 "ok" if (r.eve_bound_ok and r.users_bound_ok) else "violated")
                for i, r in enumerate(reports)
            ]
            path = write_csv(
                out / "dof_check.csv",
                _meta(cfg),
                ("draw", "eve_rank", "eve_limit", "users_rank", "users_limit", "status"),
                rows,
            )
            violations = sum(1 for r in rows if r[5] != "ok")
            print(f"wrote {path} ({violations} violations over {len(rows)} draws)")
    except (ConfigError, InfeasibleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
