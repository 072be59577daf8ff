"""Command line entry point ``helmpinn``.

Exit codes: 0 success, 1 configuration error, 2 a run diverged or a check
failed, 3 input/output failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import yaml

from . import checks
from .harness import (ConfigError, GridSpec, RunConfig, _cache_dir, cached_reference,
                      format_table, oracle_key, preset, run_grid, run_single)
from .oracle import export_field

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_IO = 0, 1, 2, 3


def _parse_value(text: str):
    return yaml.safe_load(text)


def _overrides(pairs) -> dict:
    out = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise ConfigError(f"override {pair!r} is not of the form key=value")
        key, value = pair.split("=", 1)
        out[key.strip()] = _parse_value(value)
    return out


def _load_run_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    over = _overrides(args.set)
    if args.output_dir:
        over["output_dir"] = args.output_dir
    return cfg.with_overrides(**over) if over else cfg


def cmd_run(args) -> int:
    cfg = _load_run_config(args)
    if args.print_config:
        sys.stdout.write(cfg.resolved().to_yaml())
        return EXIT_OK
    row = run_single(cfg)
    print(format_table([row]), end="")
    return EXIT_DIVERGED if row.status != "ok" else EXIT_OK


def _load_grid(args) -> GridSpec:
    if args.preset and args.config:
        raise ConfigError("give either --preset or a grid file, not both")
    if args.config:
        data = yaml.safe_load(Path(args.config).read_text()) or {}
        if not isinstance(data, dict):
            raise ConfigError("grid file must be a mapping")
        return GridSpec.from_dict(data)
    return preset(args.preset or "paper-tables")


def cmd_grid(args) -> int:
    spec = _load_grid(args)
    over = _overrides(args.set)
    if over:
        spec = GridSpec(spec.base.with_overrides(**over), spec.methods, spec.optimizers,
                        spec.ks, spec.widths, spec.seeds, spec.epochs)
    if args.list:
        for c in spec.configs():
            print(c.run_name)
        return EXIT_OK
    rows = run_grid(spec, args.output_dir, workers=args.workers)
    print(format_table(rows), end="")
    return EXIT_DIVERGED if any(r.status != "ok" for r in rows) else EXIT_OK


def cmd_plot(args) -> int:
    from .plots import emit_plots

    root = Path(args.result_dir)
    if not root.is_dir():
        print(f"error: {root} is not a directory", file=sys.stderr)
        return EXIT_IO
    for path in emit_plots(root, args.plot_dir):
        print(path)
    return EXIT_OK


def cmd_oracle(args) -> int:
    cfg = _load_run_config(args)
    cache = Path(args.cache_dir) if args.cache_dir else _cache_dir(cfg, Path(cfg.output_dir))
    field = cached_reference(cfg, cache)
    print(f"reference {oracle_key(cfg)} cached in {cache}")
    if args.export:
        export_field(field, args.export)
        print(f"wrote {args.export}")
    return EXIT_OK


def cmd_check(args) -> int:
    names = args.only or list(checks.ALL_CHECKS)
    unknown = set(names) - set(checks.ALL_CHECKS)
    if unknown:
        raise ConfigError(f"unknown check(s) {sorted(unknown)}; "
                          f"choose from {list(checks.ALL_CHECKS)}")
    ok = True
    for name in names:
        for result in checks.ALL_CHECKS[name]():
            print(result.line(), flush=True)
            ok &= result.passed
    return EXIT_OK if ok else EXIT_DIVERGED


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="helmpinn",
                                description="PINN / FBPINN Helmholtz experiments with PML")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = p.add_subparsers(dest="command", required=True)

    def run_args(sp):
        sp.add_argument("config", nargs="?", help="run configuration (YAML)")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config entry, e.g. problem.k=1.59")
        sp.add_argument("--output-dir")

    sp = sub.add_parser("run", help="train and evaluate a single configuration")
    run_args(sp)
    sp.add_argument("--print-config", action="store_true",
                    help="print the resolved configuration and exit")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("grid", help="run a preset or an explicit grid")
    sp.add_argument("config", nargs="?", help="grid file (YAML)")
    sp.add_argument("--preset", help="paper-tables or smoke")
    sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                    help="override an entry of the base configuration")
    sp.add_argument("--output-dir", default="runs")
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--list", action="store_true", help="list run names and exit")
    sp.set_defaults(func=cmd_grid)

    sp = sub.add_parser("plot", help="emit loss and field figures for a result directory")
    sp.add_argument("result_dir")
    sp.add_argument("--plot-dir")
    sp.set_defaults(func=cmd_plot)

    sp = sub.add_parser("oracle", help="precompute and cache a reference field")
    run_args(sp)
    sp.add_argument("--cache-dir")
    sp.add_argument("--export", help="also write the field as x,y,re,im CSV")
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("check", help="run the invariant and property checks")
    sp.add_argument("--only", nargs="*", help="subset of check names")
    sp.set_defaults(func=cmd_check)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
