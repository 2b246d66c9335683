"""Command line: ``sep classify|embed|verify|qtable <config>``.

Exit codes: 0 success, 2 validation error (bad config, impossible target),
3 numerical failure. ``SEP_THREADS`` caps the number of simulation workers.
"""

import argparse
import sys

import numpy as np

from . import feller
from .bass import tabulate
from .classifier import check_bounded_necessary, classify, eta_envelope, probe_points
from .config import MODES, parse_config, parse_range
from .engine import prepare, run_monte_carlo
from .errors import NumericalError, ValidationError
from .report import emit_report, format_report

DUMP_T = (0.0, 0.25, 0.5, 0.75, 0.9, 0.99)


def build_parser():
    p = argparse.ArgumentParser(prog="sep", description="Bass-type Skorokhod embeddings "
                                "into one-dimensional diffusions.")
    p.add_argument("mode", choices=MODES)
    p.add_argument("config", help="configuration file (section.key = value lines)")
    p.add_argument("--range", dest="qrange", help="q-table grid a:b:n in natural scale")
    p.add_argument("--seed", type=int, help="override engine.seed")
    p.add_argument("--out-dir", help="override output.dir")
    p.add_argument("--dump-maps", action="store_true", help="also write maps.csv")
    p.add_argument("--quiet", action="store_true", help="do not echo the report")
    return p


def _horizon_rows(verdict, prob, T):
    """Extra rows answering "is there an embedding with tau <= T"."""
    b = verdict.bounded
    if b.kind == "bounded_by" and b.T <= T:
        answer = "yes"
    elif b.kind == "impossible":
        answer = "no"
    else:
        viol = check_bounded_necessary(eta_envelope(prob.model), prob.nu.cdf, T,
                                       probe_points(prob.nu))
        answer = "no" if viol else "unknown"
    return [("bounded_T", T), ("bounded_within_T", answer)]


def run(args):
    with open(args.config) as fh:
        cfg = parse_config(fh.read())
    out_dir = args.out_dir or cfg.out_dir
    overrides = {} if args.seed is None else {"seed": args.seed}
    ecfg = cfg.engine_config(**overrides)
    spec, preset = cfg.build_spec()
    rho = cfg.build_target(preset)
    prob = prepare(spec, rho)

    qtable = None
    if args.mode == "qtable":
        text = args.qrange or cfg.qtable_range
        if text is None:
            raise ValidationError("qtable needs --range a:b:n or qtable.range")
        q = feller.make_q(prob.model)
        qtable = feller.q_table(q, parse_range(text))
        verdict, mc = None, None
    else:
        verdict = classify(spec, rho, {"scale": prob.scale, "preset": preset})
        mc = None
        if args.mode in ("embed", "verify"):
            if verdict.exists != "yes":
                raise ValidationError("no embedding exists for this target; nothing to simulate")
            mc = run_monte_carlo(prob, ecfg)
    extra = []
    if cfg.T is not None and verdict is not None:
        extra = _horizon_rows(verdict, prob, cfg.T)
    maps_table = None
    if args.dump_maps or cfg.dump_maps:
        # b(t, .) acts on Gaussian coordinates, where [-4, 4] carries almost all mass
        maps_table = tabulate(prob.maps, DUMP_T, np.linspace(-4.0, 4.0, 81))
    written = emit_report(verdict, mc, True, out_dir, args.mode, rho, qtable, maps_table, extra)
    if not args.quiet:
        sys.stdout.write(format_report(verdict, mc, args.mode, extra))
        for kind, path in sorted(written.items()):
            sys.stdout.write(f"# wrote {kind}: {path}\n")
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return run(args)
    except ValidationError as exc:
        sys.stderr.write(f"sep: validation error: {exc}\n")
        return 2
    except NumericalError as exc:
        sys.stderr.write(f"sep: numerical failure: {exc}\n")
        return 3
    except OSError as exc:
        sys.stderr.write(f"sep: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
