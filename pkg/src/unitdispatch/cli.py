"""Command line interface.

Exit codes: 0 success, 1 infeasible request or failed verification,
2 usage or parse error.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys

from .allocator import allocate_best, min_input_for_output, shared_marginal
from .commitment import best_commitment, sweep, switching_schedule, verify_theorem2
from .curves import peak_point
from .errors import DispatchError, DomainError, InfeasibleError, UnsupportedError
from .fleetfile import FleetFileError, load_fleet
from .oracle import MAX_ORACLE_UNITS, oracle_commitment

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
ORACLE_RTOL = 1e-4


def fmt(x) -> str:
    return format(float(x), ".9g")


def _join(ids) -> str:
    return "+".join(ids) if ids else "-"


class _Usage(Exception):
    pass


def _print_allocation(out, fleet, subset, alloc, units=None):
    units = units if units is not None else fleet
    print(f"active set: {_join(subset)}", file=out)
    for u in units:
        print(f"  p_{u.id}: {fmt(alloc.load_of(u.id))}", file=out)
    print(f"p_t: {fmt(alloc.p_t)}", file=out)
    print(f"w_t: {fmt(alloc.w_t)}", file=out)
    print(f"eta_t: {fmt(alloc.eta_t)}", file=out)
    if subset:
        lam = shared_marginal(fleet.subset(alloc.unit_ids), alloc)
        if lam is not None:
            print(f"shared marginal output: {fmt(lam)}", file=out)


def cmd_validate(args, out):
    ff = load_fleet(args.fleet)
    bad = ff.fleet.problems()
    for u in ff.fleet:
        c = u.curve
        if u.id in bad:
            print(f"unit {u.id}: INVALID: {'; '.join(bad[u.id])}", file=out)
        else:
            p_e, eta_e = peak_point(c)
            print(f"unit {u.id}: ok (a={fmt(c.a)} b={fmt(c.b)} p_max={fmt(c.p_max)} "
                  f"peak {fmt(eta_e)} at {fmt(p_e)})", file=out)
    return EXIT_FAIL if bad else EXIT_OK


def cmd_allocate(args, out):
    ff = load_fleet(args.fleet)
    fleet = ff.fleet.check()
    if args.pt < 0:
        raise _Usage(f"--pt must be >= 0, got {args.pt}")
    if args.units:
        ids = [s.strip() for s in args.units.split(",") if s.strip()]
        unknown = [i for i in ids if i not in fleet.ids]
        if unknown:
            raise _Usage(f"unknown unit id(s): {', '.join(unknown)}")
        units = fleet.subset(ids)
        alloc = allocate_best(units, args.pt)
        subset = units.ids if args.pt else ()
        _print_allocation(out, fleet, subset, alloc, units)
    else:
        subset, alloc = best_commitment(fleet, args.pt)
        _print_allocation(out, fleet, subset, alloc)
    return EXIT_OK


def cmd_schedule(args, out):
    ff = load_fleet(args.fleet)
    fleet = ff.fleet.check()
    sched = switching_schedule(fleet, args.pt_min, args.pt_max, args.scan_step)
    report = verify_theorem2(sched, fleet)
    n_r, n_b = len(sched.regimes), len(sched.breakpoints)
    print(f"{n_r} regime{'s' if n_r != 1 else ''}, "
          f"{n_b} breakpoint{'s' if n_b != 1 else ''}", file=out)
    for k, r in enumerate(sched.regimes, 1):
        print(f"regime {k}: [{fmt(r.p_lo)}, {fmt(r.p_hi)}) active {_join(r.active_set)} "
              f"({r.rule})", file=out)
    for k, chk in enumerate(report, 1):
        status = "ok" if chk.ok else "FAIL"
        extra = f" capped {_join(chk.capped_units)}" if chk.capped_units else ""
        print(f"breakpoint {k}: {fmt(chk.p)} {_join(chk.left)} -> {_join(chk.right)} "
              f"eta_t {fmt(chk.eta_left)} | {fmt(chk.eta_right)} {chk.reason}{extra} {status}",
              file=out)
    if ff.reference_breakpoints:
        print("reference breakpoints: " + " ".join(fmt(b) for b in ff.reference_breakpoints),
              file=out)
        for k, (got, ref) in enumerate(zip(sched.breakpoints, ff.reference_breakpoints), 1):
            dev = (got - ref) / ref
            if abs(got - ref) > 0.01:
                print(f"note: breakpoint {k} at {fmt(got)} deviates from reference "
                      f"{fmt(ref)} ({dev:+.2%})", file=out)
        if len(sched.breakpoints) != len(ff.reference_breakpoints):
            print(f"note: found {n_b} breakpoints, reference lists "
                  f"{len(ff.reference_breakpoints)}", file=out)
    return EXIT_OK if all(c.ok for c in report) else EXIT_FAIL


def cmd_sweep(args, out):
    ff = load_fleet(args.fleet)
    fleet = ff.fleet.check()
    rows = sweep(fleet, args.pt_min, args.pt_max, args.step)

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["pt", "active_set"] + [f"p_{i}" for i in fleet.ids] + ["w_t", "eta_t"])
    for row in rows:
        writer.writerow([fmt(row.p_t), "+".join(row.active_set)]
                        + [fmt(row.allocation.load_of(i)) for i in fleet.ids]
                        + [fmt(row.w_t), fmt(row.eta_t)])
    summary = out
    if args.out in (None, "-"):
        out.write(buf.getvalue())
        summary = sys.stderr
    else:
        try:
            with open(args.out, "w", encoding="ascii", newline="") as fh:
                fh.write(buf.getvalue())
        except OSError as exc:
            raise _Usage(f"cannot write {args.out}: {exc.strerror}")
    print(f"{len(rows)} rows", file=summary)
    for prev, cur in zip(rows[:-1], rows[1:]):
        if prev.active_set != cur.active_set:
            print(f"active set changes between pt={fmt(prev.p_t)} and pt={fmt(cur.p_t)}: "
                  f"{_join(prev.active_set)} -> {_join(cur.active_set)}", file=summary)
    return EXIT_OK


def cmd_min_input(args, out):
    ff = load_fleet(args.fleet)
    fleet = ff.fleet.check()
    p_t, subset, alloc = min_input_for_output(fleet, args.wt)
    print(f"minimum input: {fmt(p_t)}", file=out)
    _print_allocation(out, fleet, subset, alloc)
    return EXIT_OK


def cmd_oracle_check(args, out):
    ff = load_fleet(args.fleet)
    fleet = ff.fleet.check()
    if len(fleet) > MAX_ORACLE_UNITS:
        raise _Usage(f"oracle supports <= {MAX_ORACLE_UNITS} units, fleet has {len(fleet)}")
    if args.pt < 0:
        raise _Usage(f"--pt must be >= 0, got {args.pt}")
    step = args.step if args.step is not None else (args.pt / 1000.0 if args.pt > 0 else 1.0)
    subset, alloc = best_commitment(fleet, args.pt)
    o_subset, o_res = oracle_commitment(fleet, args.pt, step)
    o_alloc = o_res.allocation
    print(f"{'':12}{'solver':>16}{'oracle':>16}", file=out)
    print(f"{'active set':12}{_join(subset):>16}{_join(o_subset):>16}", file=out)
    for u in fleet:
        print(f"{'p_' + u.id:12}{fmt(alloc.load_of(u.id)):>16}"
              f"{fmt(o_alloc.load_of(u.id)):>16}", file=out)
    print(f"{'w_t':12}{fmt(alloc.w_t):>16}{fmt(o_alloc.w_t):>16}", file=out)
    print(f"{'eta_t':12}{fmt(alloc.eta_t):>16}{fmt(o_alloc.eta_t):>16}", file=out)
    print(f"oracle step {fmt(step)}, refinement depth {o_res.depth}", file=out)
    for ref in ff.reference_allocations:
        if abs(ref.p_t - args.pt) <= 1e-9 * max(1.0, abs(ref.p_t)):
            ref_loads = " ".join(f"p_{k}={fmt(v)}" for k, v in ref.loads.items())
            ref_w = sum(fleet[k].curve.output(min(v, fleet[k].curve.p_max))
                        for k, v in ref.loads.items())
            dev = max(abs(alloc.load_of(k) - v) for k, v in ref.loads.items())
            print(f"reference split: {ref_loads} (w_t {fmt(ref_w)}); "
                  f"max load deviation from solver {fmt(dev)}", file=out)
    scale = max(abs(o_alloc.w_t), 1e-300)
    gap = abs(alloc.w_t - o_alloc.w_t) / scale if o_alloc.w_t else abs(alloc.w_t)
    agree = gap <= ORACLE_RTOL
    print(f"relative output gap {gap:.3e}: {'agree' if agree else 'DISAGREE'}", file=out)
    return EXIT_OK if agree else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="unitdispatch",
        description="Efficiency-optimal load split and unit switching for multi-unit systems.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check every unit's efficiency curve")
    p.add_argument("fleet")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("allocate", help="best split of a total input")
    p.add_argument("fleet")
    p.add_argument("--pt", type=float, required=True, help="total input")
    p.add_argument("--units", help="comma-separated ids; run exactly this subset")
    p.set_defaults(func=cmd_allocate)

    p = sub.add_parser("schedule", help="switching points over an input range")
    p.add_argument("fleet")
    p.add_argument("--pt-min", type=float, required=True)
    p.add_argument("--pt-max", type=float, required=True)
    p.add_argument("--scan-step", type=float, default=None,
                   help="scan grid spacing (default: range/1000)")
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("sweep", help="CSV table of the optimal operation over a range")
    p.add_argument("fleet")
    p.add_argument("--pt-min", type=float, required=True)
    p.add_argument("--pt-max", type=float, required=True)
    p.add_argument("--step", type=float, required=True)
    p.add_argument("--out", default=None, help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("min-input", help="smallest input delivering an output")
    p.add_argument("fleet")
    p.add_argument("--wt", type=float, required=True, help="required total output")
    p.set_defaults(func=cmd_min_input)

    p = sub.add_parser("oracle-check", help="compare the solver against brute force")
    p.add_argument("fleet")
    p.add_argument("--pt", type=float, required=True)
    p.add_argument("--step", type=float, default=None, help="oracle grid step (default pt/1000)")
    p.set_defaults(func=cmd_oracle_check)
    return parser


def main(argv=None, out=None) -> int:
    out = out if out is not None else sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return args.func(args, out)
    except (FleetFileError, _Usage, UnsupportedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DispatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
