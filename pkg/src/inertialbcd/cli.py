"""Command-line interface.

Subcommands::

    gen           write a synthetic matrix or tensor to a text file
    run           run one algorithm and write its trace CSV
    bench         run a benchmark from flags and/or a config file
    check-params  report the parameter conditions for the default constants

Exit status is 0 on success, 1 on usage errors and 2 on runtime errors.
"""
import argparse
import sys
import warnings

from . import bench
from .core.conditions import (check_ibp_condition, check_ibpg_condition,
                              constant_params, max_feasible_ibp_alpha)
from .nmf import NmfOptions
from .textio import write_matrix, write_tensor
from .trace import write_trace_csv

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _add_data_flags(p, with_kind=True):
    if with_kind:
        p.add_argument("--kind", choices=bench.KINDS)
    for d in ("m", "n", "I", "J", "K"):
        p.add_argument(f"--{d}", type=int)
    p.add_argument("--rank", type=int)


def _add_run_flags(p):
    p.add_argument("--data", help="matrix (NMF kinds) or tensor (ncpd) text file")
    p.add_argument("--time-budget", type=float)
    p.add_argument("--max-iter", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--order", choices=("cyclic", "random"))
    p.add_argument("--out")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="schedule override, e.g. gamma_tilde=0.9999")


def build_parser():
    parser = _Parser(prog="inertialbcd", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    g = sub.add_parser("gen", help="write synthetic data")
    _add_data_flags(g)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)

    r = sub.add_parser("run", help="run one algorithm")
    _add_data_flags(r)
    _add_run_flags(r)
    r.add_argument("--algo", required=True)
    r.add_argument("--seed", type=int, default=0)

    b = sub.add_parser("bench", help="run a benchmark")
    _add_data_flags(b)
    _add_run_flags(b)
    b.add_argument("--algo", help="comma-separated algorithm list")
    b.add_argument("--seeds", help="N, a-b or a,b,c")
    b.add_argument("--e-min", choices=("auto",) + bench.E_MIN_POLICIES)
    b.add_argument("--workers", type=int)
    b.add_argument("--config", help="flat 'key = value' file; flags take precedence")

    c = sub.add_parser("check-params", help="parameter condition reports")
    d = NmfOptions()
    c.add_argument("--gamma-tilde", type=float, default=d.gamma_tilde)
    c.add_argument("--alpha-breve", type=float, default=d.alpha_breve)
    c.add_argument("--ibpg-nu", type=float, default=d.nu)
    c.add_argument("--ibpg-delta", type=float, default=d.delta)
    c.add_argument("--nu", type=float, default=d.ibp_nu, help="IBP nu")
    c.add_argument("--delta", type=float, default=d.ibp_delta, help="IBP delta")
    c.add_argument("--csv", action="store_true", help="also print the margin rows")
    return parser


def _mapping(args, names):
    out = {}
    for name in names:
        v = getattr(args, name, None)
        if v is not None:
            out[name] = v if isinstance(v, str) else repr(v) if isinstance(v, float) else str(v)
    for item in getattr(args, "set", []) or []:
        if "=" not in item:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


_DATA_KEYS = ("kind", "m", "n", "I", "J", "K", "rank")
_RUN_KEYS = ("data", "time_budget", "max_iter", "tol", "order", "out")


def _config(mapping):
    try:
        return bench.RunConfig.from_mapping(mapping)
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from exc


def _cmd_gen(args):
    kind = args.kind or "low-rank"
    if args.rank is None:
        raise UsageError("gen needs --rank")
    try:
        if kind == "ncpd":
            if None in (args.I, args.J, args.K):
                raise UsageError("ncpd data needs --I, --J and --K")
            inst = bench.gen_synthetic_ncpd(args.I, args.J, args.K, args.rank, args.seed)
        else:
            if None in (args.m, args.n):
                raise UsageError("matrix data needs --m and --n")
            inst = bench.gen_synthetic_nmf(kind, args.m, args.n, args.rank, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if kind == "ncpd":
        write_tensor(args.out, inst.T)
    else:
        write_matrix(args.out, inst.X)
    return EXIT_OK


def _cmd_run(args):
    mapping = _mapping(args, _DATA_KEYS + _RUN_KEYS)
    mapping.pop("out", None)
    mapping["algos"] = args.algo
    mapping["seeds"] = str(args.seed) + ","
    if "time_budget" not in mapping and "max_iter" not in mapping:
        raise UsageError("run needs --time-budget or --max-iter")
    config = _config(mapping)
    result = bench.run_benchmark(config)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            write_trace_csv(fh, result.runs)
    else:
        write_trace_csv(sys.stdout, result.runs)
    return EXIT_OK


def _cmd_bench(args):
    mapping = {}
    if args.config:
        try:
            mapping.update(bench.read_config(args.config))
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from exc
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    flags = _mapping(args, _DATA_KEYS + _RUN_KEYS + ("seeds", "e_min", "workers"))
    if args.algo is not None:
        flags["algos"] = args.algo
    # flag spellings win over config spellings of the same setting
    for k in flags:
        mapping.pop(k.replace("_", "-"), None)
        if k == "algos":
            mapping.pop("algo", None)
        if k == "data":
            mapping.pop("data_file", None)
    mapping.update(flags)
    if "algos" not in mapping and "algo" not in mapping:
        raise UsageError("bench needs at least one algorithm (--algo)")
    if "out" not in mapping:
        raise UsageError("bench needs --out")
    config = _config(mapping)
    result = bench.run_benchmark(config)
    sys.stdout.write(result.ranking.to_csv())
    for name, path in result.paths.items():
        print(f"# {name}: {path}")
    return EXIT_OK


def _cmd_check_params(args):
    g, ab = args.gamma_tilde, args.alpha_breve
    try:
        rep = check_ibpg_condition(constant_params(2, 2, ab * g, 1.0, g, 1.0),
                                   args.ibpg_nu, args.ibpg_delta, variant="block-convex")
        alpha_base = max_feasible_ibp_alpha(args.nu, args.delta, variant="base")
        alpha_bc = max_feasible_ibp_alpha(args.nu, args.delta, variant="block-convex")
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    row = rep.rows[0]
    print(f"IBPG block-convex condition: gamma_tilde={g!r} alpha_breve={ab!r} "
          f"nu={args.ibpg_nu!r} delta={args.ibpg_delta!r}")
    print(f"  worst case gamma={g!r} alpha={ab * g!r} (L cancels, L=1)")
    print(f"  lhs={row.lhs:.17g} rhs={row.rhs:.17g} margin={rep.min_margin:.17g}")
    print(f"  feasible: {'yes' if rep.feasible else 'no'}")
    print(f"IBP max feasible alpha: nu={args.nu!r} delta={args.delta!r}")
    print(f"  base: {alpha_base:.17g}")
    print(f"  block-convex: {alpha_bc:.17g}")
    cap = NmfOptions().ibp_alpha_cap
    ibp = check_ibp_condition(constant_params(1, 1, cap, 1.0), args.nu, args.delta,
                              variant="block-convex")
    print(f"  default alpha cap {cap!r}: {'feasible' if ibp.feasible else 'infeasible'}")
    if args.csv:
        sys.stdout.write(rep.to_csv())
    return EXIT_OK


_COMMANDS = {"gen": _cmd_gen, "run": _cmd_run, "bench": _cmd_bench,
             "check-params": _cmd_check_params}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("missing subcommand; see --help")
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    except Exception as exc:  # noqa: BLE001
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
