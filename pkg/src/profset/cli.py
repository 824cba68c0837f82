"""profset command line: generate, mine, allocate, optimize, report, run.

Every stage reads and writes plain files, so stages can be run one at a time
or chained with ``run``.  Exit status: 0 ok, 1 usage, 2 data error,
3 infeasible constraints, 4 budget exceeded.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from pathlib import Path

from . import allocation, basket, mining, optimizer, reporting, synth
from .errors import DataError, ProfsetError

log = logging.getLogger("profset")

ITEMSETS = "itemsets.jsonl"
ALLOCATION = "allocation.jsonl"
MODEL = "model.json"
SOLUTION = "solution.json"
REPORT_JSON = "report.json"
REPORT_TEXT = "report.txt"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _open_text(path, what):
    try:
        return open(path, encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {what} {os.fspath(path)}: {exc.strerror}") from exc


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _render(dump, obj) -> str:
    buf = io.StringIO()
    dump(obj, buf)
    return buf.getvalue()


def _load_inputs(args):
    catalog = basket.load_catalog(args.catalog)
    db = basket.load_transactions(args.baskets, catalog)
    return catalog, db


def _read_overrides(path) -> tuple[dict, dict]:
    mins, caps = {}, {}
    with _open_text(path, "item-min file") as fh:
        rows = [(n, line) for n, line in enumerate(fh, start=1) if line.strip() and not line.startswith("#")]
    if not rows:
        raise DataError(f"{path}: empty item-min file")
    reader = csv.reader(line for _, line in rows)
    header = [h.strip() for h in next(reader)]
    if header not in (["category_id", "item_min"], ["category_id", "item_min", "item_cap"]):
        raise DataError(f"{path} line {rows[0][0]}: expected header category_id,item_min[,item_cap]")
    for (n, _), fields in zip(rows[1:], reader):
        fields = [f.strip() for f in fields]
        if len(fields) not in (2, 3):
            raise DataError(f"{path} line {n}: expected 2 or 3 columns")
        try:
            mins[fields[0]] = int(fields[1])
            if len(fields) == 3 and fields[2]:
                caps[fields[0]] = int(fields[2])
        except ValueError:
            raise DataError(f"{path} line {n}: non-integer bound") from None
    return mins, caps


def constraints_from_args(args, catalog: basket.Catalog) -> optimizer.ConstraintConfig:
    cats = sorted(catalog.categories)
    item_max = args.item_max if args.item_max is not None else len(cats)
    item_min = {c: args.item_min_default for c in cats}
    item_cap = {}
    if args.item_min_file:
        mins, caps = _read_overrides(args.item_min_file)
        unknown = sorted((set(mins) | set(caps)) - set(cats))
        if unknown:
            raise DataError(f"{args.item_min_file}: unknown categories {unknown}")
        item_min.update(mins)
        item_cap.update(caps)
    return optimizer.ConstraintConfig(item_max, {c: v for c, v in item_min.items() if v}, item_cap)


# ---------------------------------------------------------------- stages

def stage_mine(catalog, db, args) -> mining.FrequentSetIndex:
    index = mining.mine_frequent(db, args.minsup, max_size=args.max_size, threads=args.threads)
    log.info("mined %d frequent itemsets at minsup %d", len(index), args.minsup)
    return index


def stage_allocate(catalog, db, index, args) -> allocation.AllocationResult:
    result = allocation.allocate_all(db, index, catalog, seed=args.seed, mode=args.mode,
                                     threads=args.threads, state_budget=args.state_budget)
    log.info("allocated %d of %d minor units to %d sets", result.total_allocated,
             result.total_input, len(result.set_margins))
    return result


def stage_optimize(catalog, alloc, args):
    cfg = constraints_from_args(args, catalog)
    model = optimizer.build_model(alloc, catalog, cfg)
    solution = optimizer.solve_exact(model, node_budget=args.node_budget)
    solution = reporting.prefer_own_profit(model, solution, alloc)
    log.info("objective %d after %d nodes", solution.objective, solution.nodes)
    return model, solution


def stage_report(catalog, alloc, model, solution, out_dir: Path, fmt: str) -> None:
    report = reporting.build_report(catalog, alloc, model, solution)
    machine = _render(reporting.dump_report_json, report)
    text = reporting.render_text(report)
    _write(out_dir / REPORT_JSON, machine)
    _write(out_dir / REPORT_TEXT, text)
    sys.stdout.write(machine if fmt == "json" else text)


def _solution_json(solution) -> str:
    return json.dumps(solution.to_dict(), indent=1, sort_keys=True) + "\n"


# -------------------------------------------------------------- commands

def cmd_generate(args):
    with _open_text(args.config, "synth config") as fh:
        cfg = synth.SynthConfig.from_json(fh.read())
    catalog, db = synth.generate_synthetic(cfg, args.seed)
    out = Path(args.out_dir)
    _write(out / "catalog.csv", basket.catalog_to_csv(catalog))
    _write(out / "baskets.csv", basket.transactions_to_csv(db))


def cmd_mine(args):
    catalog, db = _load_inputs(args)
    index = stage_mine(catalog, db, args)
    _write(Path(args.out), _render(mining.dump_index, index))


def cmd_allocate(args):
    catalog, db = _load_inputs(args)
    with _open_text(args.itemsets, "itemset dump") as fh:
        index = mining.load_index(fh)
    result = stage_allocate(catalog, db, index, args)
    _write(Path(args.out), _render(allocation.dump_allocation, result))


def cmd_optimize(args):
    catalog = basket.load_catalog(args.catalog)
    with _open_text(args.allocation, "allocation dump") as fh:
        alloc = allocation.load_allocation(fh)
    model, solution = stage_optimize(catalog, alloc, args)
    _write(Path(args.out), _solution_json(solution))
    if args.model_out:
        _write(Path(args.model_out), _render(optimizer.dump_model, model))


def cmd_report(args):
    catalog = basket.load_catalog(args.catalog)
    with _open_text(args.allocation, "allocation dump") as fh:
        alloc = allocation.load_allocation(fh)
    with _open_text(args.model, "model file") as fh:
        model = optimizer.load_model(fh)
    with _open_text(args.solution, "solution file") as fh:
        try:
            solution = optimizer.Solution.from_dict(json.load(fh))
        except (KeyError, ValueError) as exc:
            raise DataError(f"malformed solution file {args.solution}: {exc}") from exc
    stage_report(catalog, alloc, model, solution, Path(args.out_dir), args.format)


def cmd_run(args):
    out = Path(args.out_dir)
    catalog, db = _load_inputs(args)
    index = stage_mine(catalog, db, args)
    _write(out / ITEMSETS, _render(mining.dump_index, index))
    alloc = stage_allocate(catalog, db, index, args)
    _write(out / ALLOCATION, _render(allocation.dump_allocation, alloc))
    model, solution = stage_optimize(catalog, alloc, args)
    _write(out / MODEL, _render(optimizer.dump_model, model))
    _write(out / SOLUTION, _solution_json(solution))
    stage_report(catalog, alloc, model, solution, out, args.format)


# ---------------------------------------------------------------- parser

def _positive(value):
    n = int(value)
    if n < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {n}")
    return n


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="profset", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def data(p, baskets=True):
        p.add_argument("--catalog", required=True, help="catalog CSV")
        if baskets:
            p.add_argument("--baskets", required=True, help="basket CSV")

    def mine_opts(p):
        p.add_argument("--minsup", type=_positive, default=30, help="absolute support threshold")
        p.add_argument("--max-size", type=_positive, default=None, help="cap on itemset size")

    def alloc_opts(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--mode", choices=allocation.MODES, default=allocation.SAMPLED)
        p.add_argument("--state-budget", type=_positive, default=allocation.DEFAULT_STATE_BUDGET,
                       help="expected-mode state limit per transaction")

    def opt_opts(p):
        p.add_argument("--item-max", type=_positive, default=None,
                       help="products to select (default: number of categories)")
        p.add_argument("--item-min-default", type=int, default=1, help="minimum products per category")
        p.add_argument("--item-min-file", default=None,
                       help="CSV category_id,item_min[,item_cap] overriding per-category bounds")
        p.add_argument("--node-budget", type=_positive, default=optimizer.DEFAULT_NODE_BUDGET)

    def threads(p):
        p.add_argument("--threads", type=_positive, default=1, help="worker threads (speed only)")

    p = sub.add_parser("generate", help="write a synthetic catalog and basket file")
    p.add_argument("--config", required=True, help="SynthConfig JSON")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("mine", help="mine frequent itemsets")
    data(p)
    mine_opts(p)
    threads(p)
    p.add_argument("--out", required=True, help="itemset dump (JSON lines)")
    p.set_defaults(func=cmd_mine)

    p = sub.add_parser("allocate", help="allocate transaction margins to itemsets")
    data(p)
    p.add_argument("--itemsets", required=True)
    alloc_opts(p)
    threads(p)
    p.add_argument("--out", required=True, help="allocation dump (JSON lines)")
    p.set_defaults(func=cmd_allocate)

    p = sub.add_parser("optimize", help="select the product set")
    data(p, baskets=False)
    p.add_argument("--allocation", required=True)
    opt_opts(p)
    p.add_argument("--out", required=True, help="solution JSON")
    p.add_argument("--model-out", default=None, help="also write the model JSON")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("report", help="baseline comparison and profit tables")
    data(p, baskets=False)
    p.add_argument("--allocation", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--solution", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--format", choices=("text", "json"), default="text", help="what to print")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("run", help="mine, allocate, optimize and report in one go")
    data(p)
    mine_opts(p)
    alloc_opts(p)
    opt_opts(p)
    threads(p)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--format", choices=("text", "json"), default="text", help="what to print")
    p.set_defaults(func=cmd_run)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        args.func(args)
    except ProfsetError as exc:
        print(f"profset: error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
