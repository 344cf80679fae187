"""Command-line entry point: ``vibroforce <command> --config FILE [--out DIR] [--seed N] [--quiet]``."""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, load_config
from .scenario import (ScenarioError, run_akf_comparison, run_l_curve, run_noise_sweep, run_scenario,
                       validate_model)

log = logging.getLogger("vibroforce")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vibroforce",
                                description="Inverse force identification on coupled structural-acoustic models.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, type=Path, help="YAML experiment file")
    common.add_argument("--out", type=Path, default=None, help="output directory (overrides out_dir)")
    common.add_argument("--seed", type=int, default=None, help="noise seed (overrides noise.seed)")
    common.add_argument("--quiet", action="store_true", help="print nothing but errors")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="simulate, pollute, identify and score one scenario")
    sw = sub.add_parser("noise-sweep", parents=[common], help="repeat-averaged error versus noise level")
    sw.add_argument("--taus", type=float, nargs="+", default=None)
    sw.add_argument("--repeats", type=int, default=None)
    ak = sub.add_parser("akf-compare", parents=[common], help="proposed method against the AKF baseline")
    ak.add_argument("--proposed-dt", type=float, default=None)
    ak.add_argument("--akf-dts", type=float, nargs="+", default=None)
    vm = sub.add_parser("validate-model", parents=[common], help="ROM eigenvalue errors")
    vm.add_argument("-k", type=int, default=None, help="number of lowest modes to compare")
    sub.add_parser("l-curve", parents=[common], help="regularization parameter by the L-curve corner")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO, format="%(levelname)s %(message)s")
    say = (lambda *a: None) if args.quiet else print
    if args.seed is not None and args.seed < 0:
        print("error: --seed must be a non-negative integer", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        if args.out is not None:
            cfg = replace(cfg, out_dir=args.out)
        out = cfg.out_dir

        if args.command == "run":
            rep = run_scenario(cfg, out)
            for method, chans in rep.geers.items():
                for ch, e in chans.items():
                    say(f"{method:8s} {ch:10s} " + ("not scored (zero reference)" if e is None else
                                                   f"mag={e.mag:+.4e} phase={e.phase:.4e} comp={e.comp:.4e}"))
                say(f"{method:8s} wall={rep.wall_time[method]:.4f}s rtf={rep.real_time_factor[method]:.4f}")
            for n in rep.notes:
                say(f"note: {n}")
        elif args.command == "noise-sweep":
            rep = run_noise_sweep(cfg, args.taus, args.repeats, out)
            for tau, c, se in zip(rep.taus, rep.comp, rep.stderr):
                say(f"tau={tau:.4f} eps_comp={c:.4e} +/- {se:.1e}")
        elif args.command == "akf-compare":
            rep = run_akf_comparison(cfg, args.proposed_dt, args.akf_dts, out)
            for c in rep.cases:
                say(f"{c.method:8s} dt={c.dt:.1e} eps_comp={c.geers.comp:.4e} wall={c.wall_time:.4f}s")
            for n in rep.notices:
                say(f"notice: {n}")
        elif args.command == "validate-model":
            rep = validate_model(cfg, args.k, out)
            say(f"max relative eigenvalue error over {rep['k']} modes: {rep['max_error']:.3e}")
        elif args.command == "l-curve":
            lc = run_l_curve(cfg, out)
            say(f"alpha={lc.alpha:.4e}" + (" (degenerate curve: minimum residual)" if lc.degenerate else ""))
        say(f"outputs in {Path(out)}")
    except (ConfigError, ScenarioError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
