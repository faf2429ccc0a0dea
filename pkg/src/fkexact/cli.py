"""Command-line driver: builds fixtures, runs verification suites, writes artifacts.

Exit codes: 0 success, 1 usage error, 2 budget refusal, 3 numerical failure
(zero denominator / zero Xi / tilt mismatch / pole proximity / coalescence cap).

Determinism contract: identical invocations produce byte-identical output
files.  All randomness is seeded explicitly; nothing reads the clock.  Every
artifact carries {tool_version, config_echo}; for CSV these are comment lines.
"""

from __future__ import annotations

import argparse
import json
import re
import sys

from . import __version__
from .enumeration import DEFAULT_ENUM_BUDGET
from .errors import BudgetExceededError, GeometryError, NumericalError
from . import exactfk, expansion, lattice, observables, polymer, resummation, sampler


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# scalar formats

_COMPLEX_RE = re.compile(
    r"^\s*(?P<re>[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)?"
    r"(?P<im>[+-](?:\d+\.?\d*|\.\d+)?(?:[eE][+-]?\d+)?)?i?\s*$"
)


def parse_complex(text: str) -> complex:
    """Parse 'a+bi' / 'a-bi' / 'a' / 'bi' into a complex number."""
    t = text.strip().replace(" ", "")
    if t.endswith("i"):
        body = t[:-1]
        # split into real and imaginary parts at the last sign not in an exponent
        for pos in range(len(body) - 1, 0, -1):
            if body[pos] in "+-" and body[pos - 1] not in "eE":
                re_part, im_part = body[:pos], body[pos:]
                break
        else:
            re_part, im_part = "", body
        if im_part in ("", "+"):
            im = 1.0
        elif im_part == "-":
            im = -1.0
        else:
            im = float(im_part)
        return complex(float(re_part) if re_part else 0.0, im)
    return complex(float(t), 0.0)


def format_complex(z: complex) -> str:
    sign = "+" if z.imag >= 0 else "-"
    return f"{z.real!r}{sign}{abs(z.imag)!r}i"


def complex_json(z: complex) -> dict:
    return {"re": z.real, "im": z.imag}


def parse_event(spec: str) -> exactfk.LocalFunction:
    """Event grammar: edge:IDX | cylinder:IDX=B,IDX=B | const:VALUE."""
    kind, _, rest = spec.partition(":")
    if kind == "edge":
        return exactfk.LocalFunction.edge_open(int(rest))
    if kind == "cylinder":
        assign = {}
        for item in rest.split(","):
            e, _, b = item.partition("=")
            assign[int(e)] = int(b)
        return exactfk.LocalFunction.cylinder(assign)
    if kind == "const":
        return exactfk.LocalFunction.constant(float(rest))
    raise UsageError(f"unknown event spec {spec!r}")


# ---------------------------------------------------------------------------
# artifact writers


def _config_echo(args) -> dict:
    skip = {"func", "out", "config"}
    out = {}
    for k, v in sorted(vars(args).items()):
        if k in skip or v is None:
            continue
        out[k] = v if isinstance(v, (int, float, str, bool)) else str(v)
    return out


def write_json(path: str, args, payload: dict):
    doc = {"tool_version": __version__, "config_echo": _config_echo(args)}
    doc.update(payload)
    text = json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def write_csv(path: str, args, columns, rows, extra_comments=()):
    lines = [f"# tool_version={__version__}"]
    echo = ",".join(f"{k}={v}" for k, v in _config_echo(args).items())
    lines.append(f"# config={echo}")
    for c in extra_comments:
        lines.append(f"# {c}")
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(repr(x) if isinstance(x, float) else str(x) for x in row))
    text = "\n".join(lines) + "\n"
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


# ---------------------------------------------------------------------------
# subcommands


def cmd_partition(args):
    g = lattice.build_torus(args.d, args.N)
    region = None
    if args.region_radius is not None:
        region = lattice.build_box(g, (0,) * args.d, args.region_radius)
    table = exactfk.build_partition_table(g, boundary=args.boundary, region=region,
                                          budget=args.budget)
    rows = [[m, k, str(c)] for (m, k), c in sorted(table.counts.items())]
    write_json(args.out, args, {
        "graph_hash": table.graph_hash,
        "boundary": table.boundary,
        "counts": rows,
        "total": str(table.total()),
    })
    return 0


def cmd_expect(args):
    g = lattice.build_torus(args.d, args.N)
    F = parse_event(args.event)
    refined = exactfk.build_refined_table(g, F.support, budget=args.budget)
    z = parse_complex(args.z)
    val = exactfk.expectation_exact(refined, F, exactfk.FKParams(args.p, args.q, z))
    write_json(args.out, args, {"expectation": complex_json(val)})
    return 0


def cmd_zscan(args):
    g = lattice.build_torus(args.d, args.N)
    table = exactfk.build_partition_table(g, budget=args.budget)
    rep = exactfk.zero_free_scan(table, args.p, args.q, args.radius,
                                 n_radii=args.n_radii, n_angles=args.n_angles)
    write_csv(args.out, args,
              ["re_z", "im_z", "re_val", "im_val", "abs_val"],
              rep.rows,
              extra_comments=[f"min_abs={rep.min_abs!r}",
                              f"argmin={format_complex(rep.argmin)}",
                              f"delta_hat={rep.delta_hat!r}"])
    return 0


def cmd_ratio_fit(args):
    g = lattice.build_torus(args.d, args.N)
    F = parse_event(args.event)
    refined = exactfk.build_refined_table(g, F.support, budget=args.budget)
    eps_grid = [float(e) for e in args.eps.split(",")]
    rep = exactfk.ratio_bound_fit(refined, F, args.p, args.q, eps_grid,
                                  n_angles=args.n_angles)
    write_json(args.out, args, {
        "support_size": rep.support_size,
        "rows": [[e, c, r] for e, c, r in rep.rows],
        "monotone": rep.monotone,
    })
    return 0


def cmd_polymers(args):
    g = lattice.build_torus(args.d, args.N)
    ct = lattice.build_coarse(g, args.L)
    polys = polymer.enumerate_polymers(ct, args.max_size)
    write_json(args.out, args, {
        "n_polymers": len(polys),
        "polymers": json.loads(polymer.polymers_to_json(ct, polys)),
    })
    return 0


def _load_tuple(path: str):
    with open(path) as fh:
        data = json.load(fh)
    return tuple(frozenset(tuple(c) for c in sites) for sites in data)


def cmd_ursell(args):
    tup = _load_tuple(args.tuple)
    val = expansion.ursell(tup, allow_six=args.allow_six)
    write_json(args.out, args, {"value": str(val), "order": len(tup)})
    print(str(val))
    return 0


def _activity_from_args(args, ct, polys):
    if args.activity_file:
        with open(args.activity_file) as fh:
            data = json.load(fh)
        weights = {}
        for item in data:
            gamma = frozenset(ct.site_index(tuple(c)) for c in item["sites"])
            weights[gamma] = complex(item["re"], item["im"])
        return expansion.Activity(weights, tag="file")
    return expansion.synthetic_activity(polys, parse_complex(args.activity_base))


def cmd_xi(args):
    g = lattice.build_torus(args.d, args.N)
    ct = lattice.build_coarse(g, args.L)
    polys = polymer.enumerate_polymers(ct, args.max_size)
    act = _activity_from_args(args, ct, polys)
    both = expansion.xi_both_modes(ct, polys, act)
    write_json(args.out, args, {
        "xi_independent": complex_json(both["independent"]),
        "xi_disjoint": complex_json(both["disjoint"]),
        "n_polymers": len(polys),
    })
    return 0


def cmd_kp_check(args):
    g = lattice.build_torus(args.d, args.N)
    ct = lattice.build_coarse(g, args.L)
    polys = polymer.enumerate_polymers(ct, args.max_size)
    act = expansion.synthetic_activity(polys, parse_complex(args.activity_base))
    rep = expansion.kp_criterion_check(polys, act)
    write_json(args.out, args, rep.to_dict())
    return 0


def cmd_resum_verify(args):
    g = lattice.build_torus(args.d, args.N)
    ct = lattice.build_coarse(g, args.L)
    enc = resummation.BernoulliEncoding(g, ct, args.p)
    F = parse_event(args.event)
    rep = resummation.verify_resummation_identity(enc, F, parse_complex(args.z))
    write_json(args.out, args, rep.to_dict())
    return 0


def cmd_sample(args):
    g = lattice.build_torus(args.d, args.N)
    system = sampler.make_sampler_system(g, args.boundary)
    samples = []
    steps = []
    for i in range(args.n_samples):
        bits, T = sampler.cftp_sample(g, args.p, args.q, seed=args.seed, stream=i,
                                      system=system)
        width = (len(system.edge_ids) + 3) // 4
        samples.append(f"{bits:0{width}x}")
        steps.append(T)
    write_json(args.out, args, {"samples": samples, "horizons": steps})
    return 0


def cmd_events(args):
    g = lattice.build_torus(args.d, args.N)
    if args.event == "c0hist":
        hist = sampler.estimate_c0_histogram(g, args.p, args.q, args.n_samples, args.seed)
        write_csv(args.out, args, ["size", "count"], sorted(hist.items()))
        return 0
    if args.event == "badbox":
        ct = lattice.build_coarse(g, args.L)
        freq = sampler.estimate_bad_component_sizes(
            g, ct, args.p, args.q, args.n_samples, args.seed, args.threshold)
        write_csv(args.out, args, ["size", "count"], sorted(freq.items()))
        return 0
    est = sampler.estimate_event(g, args.p, args.q, args.event, args.n_samples,
                                 args.seed, region_radius=args.region_radius,
                                 threshold=args.threshold)
    write_json(args.out, args, est.to_dict())
    return 0


def cmd_chi_series(args):
    rep = observables.chi_series(args.p, args.q, parse_complex(args.z), args.n_max,
                                 d=args.d, c_hat_eps=args.c_hat)
    write_csv(args.out, args,
              ["n", "re_term", "im_term", "abs_bound", "fv_flag"],
              rep.csv_rows(),
              extra_comments=[f"partial_sum={format_complex(rep.partial_sum)}"])
    return 0


def cmd_convert(args):
    val = observables.potts_convert(args.tag, args.value, args.q)
    write_json(args.out, args, {"value": val})
    print(repr(val))
    return 0


# ---------------------------------------------------------------------------
# parser assembly


def build_parser() -> _Parser:
    parser = _Parser(prog="fkexact", description=__doc__)
    parser.add_argument("--config", help="flat key=value file of default options")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, **kw):
        p = sub.add_parser(name, **kw)
        p.set_defaults(func=fn)
        p.add_argument("--out", default="-", help="output path ('-' for stdout)")
        return p

    p = add("partition", cmd_partition, help="exact partition table")
    _graph_flags(p)
    p.add_argument("--boundary", default="periodic", choices=["periodic", "free", "wired"])
    p.add_argument("--region-radius", type=int, default=None)
    _budget_flag(p)

    p = add("expect", cmd_expect, help="exact expectation of a local function")
    _graph_flags(p)
    _param_flags(p)
    p.add_argument("--event", required=True)
    _budget_flag(p)

    p = add("zscan", cmd_zscan, help="scan the tilted normalisation on a disk")
    _graph_flags(p)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--radius", type=float, required=True)
    p.add_argument("--n-radii", type=int, default=8)
    p.add_argument("--n-angles", type=int, default=32)
    _budget_flag(p)

    p = add("ratio-fit", cmd_ratio_fit, help="growth-constant fit for expectation ratios")
    _graph_flags(p)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--eps", required=True, help="comma-separated radii")
    p.add_argument("--event", required=True)
    p.add_argument("--n-angles", type=int, default=16)
    _budget_flag(p)

    p = add("polymers", cmd_polymers, help="enumerate coarse-torus polymers")
    _graph_flags(p)
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--max-size", type=int, required=True)

    p = add("ursell", cmd_ursell, help="exact Ursell coefficient of a polymer tuple")
    p.add_argument("--tuple", required=True, help="JSON file: list of site-coordinate lists")
    p.add_argument("--allow-six", action="store_true")

    p = add("xi", cmd_xi, help="polymer partition function, both compatibility modes")
    _polyflags(p)

    p = add("kp-check", cmd_kp_check, help="convergence criterion check")
    _polyflags(p)

    p = add("resum-verify", cmd_resum_verify, help="residual of the box-expansion identity (q=1)")
    _graph_flags(p)
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--z", default="0", help="complex shift a+bi")
    p.add_argument("--event", required=True)

    p = add("sample", cmd_sample, help="exact samples by coupling from the past")
    _graph_flags(p)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--boundary", default="periodic")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-samples", type=int, default=1)

    p = add("events", cmd_events, help="Monte Carlo event probabilities")
    _graph_flags(p)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--event", required=True,
                   choices=["Un", "An", "DN", "theta", "c0hist", "badbox"])
    p.add_argument("--n-samples", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--region-radius", type=int, default=None)
    p.add_argument("--threshold", type=int, default=None)
    p.add_argument("--L", type=int, default=None, help="coarse scale for badbox")

    p = add("chi-series", cmd_chi_series, help="truncated susceptibility series")
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--z", default="0")
    p.add_argument("--n-max", type=int, required=True)
    p.add_argument("--c-hat", type=float, default=0.0)

    p = add("convert", cmd_convert, help="Potts / FK conversions")
    p.add_argument("--tag", required=True)
    p.add_argument("--value", type=float, required=True)
    p.add_argument("--q", type=float, required=True)

    return parser


def _graph_flags(p):
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--N", type=int, required=True)


def _param_flags(p):
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--z", default="0", help="complex shift a+bi")


def _budget_flag(p):
    p.add_argument("--budget", type=int, default=DEFAULT_ENUM_BUDGET)


def _polyflags(p):
    _graph_flags(p)
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--max-size", type=int, required=True)
    p.add_argument("--activity-base", default="0.01")
    p.add_argument("--activity-file", default=None)


def _apply_config_file(argv):
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    path = argv[i + 1]
    extra = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            flag = "--" + key.strip()
            if flag not in argv:
                extra.extend([flag, value.strip()])
    return argv + extra


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _apply_config_file(argv)
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except (ValueError, GeometryError, FileNotFoundError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except BudgetExceededError as exc:
        print(f"budget refusal: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
