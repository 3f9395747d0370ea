"""Command-line benchmark harness.

Subcommands: example1, example2, contraction, weights-dump.  Options may also
come from a ``--config`` file of key=value lines (one per line, ``#`` starts
a comment).  List values: ``alpha`` and ``N`` entries are separated by commas
or spaces; ``schedule`` entries by spaces (specs like log:3,6 contain
commas).  Explicit flags win over the file.

Exit codes: 0 success, 2 configuration error, 3 numeric/divergence failure.
"""

import argparse
import sys

from .bench import (ExperimentConfig, emit_table, run_contraction_sweep,
                    run_example1, run_example2, weight_table_csv)
from .errors import ConfigurationError, NumericsError

_LIST_KEYS = {"alpha", "N", "schedule"}


def _add_common(p):
    p.add_argument("--alpha", action="append", type=float,
                   help="fractional order; repeatable (default 0.2 0.5 0.8)")
    p.add_argument("--N", action="append", type=int, dest="N",
                   help="time step count; repeatable (default 10..320 doubling)")
    p.add_argument("--K", type=int, help="subdivisions per side (default 64)")
    p.add_argument("--cA", type=float, help="diffusivity c in A = -c*Laplacian (default 5)")
    p.add_argument("--smoother", choices=("jacobi", "gs"), help="V-cycle smoother (default gs)")
    p.add_argument("--omega", type=float, help="Jacobi damping (default 2/3)")
    p.add_argument("--nu1", type=int, help="pre-smoothing sweeps (default 1)")
    p.add_argument("--nu2", type=int, help="post-smoothing sweeps (default 1)")
    p.add_argument("--schedule", action="append",
                   help="row schedule: exact | fixed:m | log:a,b | "
                        "theory-smooth:delta | theory-nonsmooth:delta; repeatable")
    p.add_argument("--startup-exact", type=int, dest="startup_exact",
                   help="steps solved exactly before iterating (default 2)")
    p.add_argument("--ref-N", type=int, dest="ref_N",
                   help="steps of the fine reference run (default 5120)")
    p.add_argument("--ref-file", dest="ref_file",
                   help=".npy file holding the final-time reference vector")
    p.add_argument("--paper-scale", action="store_true", dest="paper_scale",
                   help="use K=128 (desk-scale default is K=64)")
    p.add_argument("--K0", type=int, dest="K0", help="coarsest hierarchy level (default 4)")
    p.add_argument("--seed", type=int, help="random seed for contraction probes (default 0)")
    p.add_argument("--out", help="output path (default stdout)")
    p.add_argument("--format", choices=("csv", "md"), dest="fmt",
                   help="output format (default csv)")
    p.add_argument("--config", help="key=value config file; flags override it")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="subdiff-bench",
        description="Convergence and contraction benchmarks for the "
                    "subdiffusion solver.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, doc in (("example1", "smooth-solution convergence table"),
                      ("example2", "nonsmooth-data convergence table"),
                      ("contraction", "multigrid contraction sweep")):
        _add_common(sub.add_parser(name, help=doc))
    wd = sub.add_parser("weights-dump", help="dump CQ weights with their bound")
    wd.add_argument("--gamma", type=float, required=True)
    wd.add_argument("--n-max", type=int, dest="n_max", required=True)
    wd.add_argument("--out", help="output path (default stdout)")
    return p


def _read_config_file(path: str) -> dict:
    values = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigurationError(
                        f"{path}:{lineno}: expected key=value, got {raw.rstrip()!r}")
                key, _, val = line.partition("=")
                values[key.strip()] = val.strip()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file {path}: {exc}") from exc
    return values


def _merge(args: argparse.Namespace) -> dict:
    """Combine flags over config-file values over defaults."""
    file_vals = _read_config_file(args.config) if args.config else {}

    def pick(flag, key, cast, default):
        val = getattr(args, flag, None)
        if val is not None and val is not False:
            return val
        if key in file_vals:
            raw = file_vals[key]
            if key in _LIST_KEYS:
                # schedules split on whitespace only: 'log:3,6' contains a comma
                if key != "schedule":
                    raw = raw.replace(",", " ")
                return tuple(cast(v) for v in raw.split())
            if cast is bool:
                return raw.lower() in ("1", "true", "yes")
            return cast(raw)
        return default

    try:
        merged = dict(
            alphas=pick("alpha", "alpha", float, None),
            Ns=pick("N", "N", int, None),
            K=pick("K", "K", int, None),
            c_A=pick("cA", "cA", float, 5.0),
            smoother=pick("smoother", "smoother", str, "gs"),
            omega=pick("omega", "omega", float, 2.0 / 3.0),
            nu1=pick("nu1", "nu1", int, 1),
            nu2=pick("nu2", "nu2", int, 1),
            schedules=pick("schedule", "schedule", str, ()),
            startup_exact=pick("startup_exact", "startup-exact", int, 2),
            ref_N=pick("ref_N", "ref-N", int, 5120),
            ref_file=pick("ref_file", "ref-file", str, None),
            K0=pick("K0", "K0", int, 4),
            seed=pick("seed", "seed", int, 0),
            paper_scale=pick("paper_scale", "paper-scale", bool, False),
            fmt=pick("fmt", "format", str, "csv"),
            out=pick("out", "out", str, None),
        )
    except ValueError as exc:
        raise ConfigurationError(f"bad config value: {exc}") from exc
    if merged["K"] is None:
        merged["K"] = 128 if merged["paper_scale"] else 64
    elif merged["paper_scale"]:
        merged["K"] = 128
    if merged["alphas"] is None:
        merged["alphas"] = (0.2, 0.5, 0.8)
    if merged["Ns"] is None:
        merged["Ns"] = (10, 20, 40, 80, 160, 320)
    return merged


def _make_config(merged: dict) -> ExperimentConfig:
    return ExperimentConfig(
        alphas=tuple(merged["alphas"]), Ns=tuple(merged["Ns"]), K=merged["K"],
        c_A=merged["c_A"], smoother=merged["smoother"], omega=merged["omega"],
        nu1=merged["nu1"], nu2=merged["nu2"],
        schedules=tuple(merged["schedules"]),
        startup_exact=merged["startup_exact"], ref_N=merged["ref_N"],
        ref_file=merged["ref_file"], K0=merged["K0"], seed=merged["seed"])


def _write(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _print_timings(table) -> None:
    timings = getattr(table, "timings", None)
    if not timings:
        return
    total = sum(timings.values())
    print(f"# wall time: {total:.2f}s over {len(timings)} cells; slowest:",
          file=sys.stderr)
    worst = sorted(timings.items(), key=lambda kv: -kv[1])[:5]
    for (alpha, label, N), seconds in worst:
        print(f"#   alpha={alpha:g} {label} N={N}: {seconds:.2f}s", file=sys.stderr)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "weights-dump":
            _write(weight_table_csv(args.gamma, args.n_max), args.out)
            return 0
        merged = _merge(args)
        cfg = _make_config(merged)
        runner = {"example1": run_example1, "example2": run_example2,
                  "contraction": run_contraction_sweep}[args.command]
        table = runner(cfg)
        _write(emit_table(table, merged["fmt"]), merged["out"])
        _print_timings(table)
        return 0
    except ValueError as exc:  # ConfigurationError and plain domain errors
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericsError as exc:
        print(f"numerics error: {exc}", file=sys.stderr)
        return 3


def console_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_entry()
