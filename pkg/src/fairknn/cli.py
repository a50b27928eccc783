"""Command-line surface.

Subcommands: build (index a dataset), query (ad-hoc query, locally or
against a running server), bench (experiment from a config file), gen
(synthetic / 3dm / queries), verify (re-check a report against its
dataset), serve (host the HTTP service). All heavy lifting lives in the
library; this module only parses arguments and prints results.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .bench import ExperimentConfig, format_config, load_config, run_experiment
from .core import DistanceKind, FairnessSpec, Query, distances
from .datasets import Dataset, ingest, query_from_dict, save, save_queries
from .generators import gen_3dm, gen_queries, gen_synthetic
from .index_io import build_index, load_index, save_index
from .lsh import DEFAULT_ELL_MAX, LshParams
from .pipeline import answer_query
from .service.schemas import response_payload


def _add_lsh_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--radius", type=float, default=1.0, help="near distance threshold R")
    p.add_argument("--cfactor", type=float, default=2.0, help="far threshold multiplier c")
    p.add_argument("--width", type=float, default=4.0, help="p-stable bucket width w")
    p.add_argument("--delta", type=float, default=0.1, help="miss / false-positive rate")
    p.add_argument("--max-near", type=int, default=10, help="near-neighbor count bound K")
    p.add_argument("--mu", type=int, default=0, help="compound hash length (0 = derive)")
    p.add_argument("--ell", type=int, default=0, help="table count (0 = derive)")
    p.add_argument("--ell-max", type=int, default=DEFAULT_ELL_MAX, help="table count cap")
    p.add_argument("--family", default="auto", choices=("auto", "pstable", "angular"))
    p.add_argument("--seed", type=int, default=0)


def _lsh_params(args: argparse.Namespace) -> LshParams:
    return LshParams(radius=args.radius, cfactor=args.cfactor, width=args.width,
                     delta=args.delta, max_near=args.max_near, mu=args.mu or None,
                     ell=args.ell or None, ell_max=args.ell_max, family=args.family,
                     seed=args.seed)


def _load_dataset(args: argparse.Namespace) -> Dataset:
    kind = DistanceKind.parse(args.distance)
    return ingest(args.data, fmt=args.format, kind=kind)


def cmd_build(args: argparse.Namespace) -> int:
    ds = _load_dataset(args)
    index = build_index(ds, _lsh_params(args))
    save_index(index, args.out)
    clamped = sum(1 for p in index.partitions.values() if p.clamped)
    print(f"indexed n={ds.n} d={ds.d} into {len(index.partitions)} partitions "
          f"(ell clamped in {clamped}); wrote {args.out}")
    return 0


def _parse_constraint_flags(flags: list[str]) -> dict[str, dict[str, int]]:
    """--constraint 'Gender=Male:2,Female:3' per constrained attribute."""
    out: dict[str, dict[str, int]] = {}
    for flag in flags:
        attr, _, body = flag.partition("=")
        if not body:
            raise ValueError(f"constraint {flag!r}: expected attr=value:count,...")
        counts = {}
        for part in body.split(","):
            value, _, count = part.partition(":")
            if not count:
                raise ValueError(f"constraint {flag!r}: expected value:count, got {part!r}")
            counts[value.strip()] = int(count)
        out[attr.strip()] = counts
    return out


def _read_vector(args: argparse.Namespace, d: int) -> np.ndarray:
    if args.vector is not None:
        vec = np.array([float(x) for x in args.vector.split(",")])
    elif args.vector_file is not None:
        text = Path(args.vector_file).read_text().strip()
        raw = json.loads(text) if text.startswith("[") else [float(x) for x in text.replace(",", " ").split()]
        vec = np.asarray(raw, dtype=np.float64)
    else:
        raise ValueError("provide --vector, --vector-file or --query-json")
    if vec.shape != (d,):
        raise ValueError(f"vector must have dimension {d}, got {vec.shape[0]}")
    return vec


def cmd_query(args: argparse.Namespace) -> int:
    if args.server:
        if args.query_json:
            body = json.loads(Path(args.query_json).read_text())
        else:
            if args.k is None:
                raise ValueError("--k is required without --query-json")
            body = {
                "vector": [float(x) for x in args.vector.split(",")] if args.vector
                else json.loads(Path(args.vector_file).read_text()),
                "k": args.k,
                "constraints": _parse_constraint_flags(args.constraint or []),
            }
        body["force_ilp"] = args.force_ilp
        body["quota_boost"] = args.quota_boost
        import httpx

        resp = httpx.post(f"{args.server.rstrip('/')}/datasets/{args.name}/query",
                          json=body, timeout=args.timeout)
        print(json.dumps(resp.json(), indent=2))
        return 0 if resp.status_code == 200 else 1

    if not args.data or not args.index:
        raise ValueError("local mode needs --data and --index (or use --server)")
    ds = _load_dataset(args)
    index = load_index(args.index)
    index.check_dataset(ds)
    if args.query_json:
        query = query_from_dict(json.loads(Path(args.query_json).read_text()), ds.schema)
    else:
        if args.k is None:
            raise ValueError("--k is required without --query-json")
        spec = FairnessSpec.from_names(ds.schema, args.k, _parse_constraint_flags(args.constraint or []))
        query = Query(_read_vector(args, ds.d), spec)
    res = answer_query(ds, index, query, force_ilp=args.force_ilp, quota_boost=args.quota_boost)
    print(json.dumps(response_payload(res, ds.schema), indent=2))
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    ds = _load_dataset(args)
    config = load_config(args.config) if args.config else ExperimentConfig()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    metrics = run_experiment(ds, config, report_path=out / "report.jsonl",
                             summary_path=out / "summary.txt")
    print((out / "summary.txt").read_text(), end="")
    return 0


def cmd_gen(args: argparse.Namespace) -> int:
    if args.what == "synthetic":
        sizes = tuple(int(s) for s in args.attr_sizes.split(","))
        ds = gen_synthetic(args.n, args.d, args.tight_size, args.tight_radius,
                           args.far_offset, args.seed, attr_sizes=sizes,
                           far_radius=args.far_radius,
                           kind=DistanceKind.parse(args.distance))
        save(ds, args.out)
        print(f"wrote {args.out}: n={ds.n} d={ds.d} m={ds.schema.m}")
        return 0
    if args.what == "3dm":
        ds, spec = gen_3dm(args.k_elements, args.extra, args.planted, args.seed)
        save(ds, args.out)
        if args.spec_out:
            Path(args.spec_out).write_text(json.dumps(
                {"k": spec.k, "constraints": spec.to_names(ds.schema)}, indent=2) + "\n")
        print(f"wrote {args.out}: n={ds.n} triples over domain {args.k_elements}")
        return 0
    # queries
    ds = _load_dataset(args)
    cons = tuple(ds.schema.attr_index(a) for a in args.attrs.split(",")) if args.attrs else None
    queries = gen_queries(ds, args.k, args.n, args.seed, args.noise,
                          constrained=cons, anchor=args.anchor)
    save_queries(queries, ds.schema, args.out)
    print(f"wrote {args.out}: {len(queries)} feasible queries (k={args.k})")
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    ds = _load_dataset(args)
    problems = 0
    rows = 0
    with open(args.report) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            rows += 1
            row = json.loads(line)
            if row["status"] != "feasible":
                continue
            spec = FairnessSpec.from_names(ds.schema, row["k"], row["constraints"])
            sel = np.asarray(row["selected"], dtype=np.int64)
            if sel.size != spec.k or len(np.unique(sel)) != sel.size:
                print(f"line {lineno}: selected set size {sel.size} != k={spec.k} or has duplicates")
                problems += 1
                continue
            sel_rows = ds.rows_for_ids(sel)
            for j in spec.constrained():
                col = ds.attrs[sel_rows, j]
                for v in sorted(set(int(x) for x in col) | set(spec.constraints[j])):
                    got = int(np.count_nonzero(col == v))
                    expected = spec.count(j, v)
                    if got != expected:
                        name = ds.schema.names()[j]
                        vname = ds.schema.values(j)[v]
                        print(f"line {lineno}: {name}={vname}: expected {expected}, got {got}")
                        problems += 1
            cost = float(distances(ds.embeddings[sel_rows], np.asarray(row["vector"]), ds.kind).sum())
            if abs(cost - row["cost"]) > args.tol:
                print(f"line {lineno}: cost {row['cost']!r} != recomputed {cost!r}")
                problems += 1
    print(f"verified {rows} rows: {problems} problem(s)")
    return 0 if problems == 0 else 1


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import IndexStore, create_app

    store = IndexStore()
    store.load(args.name, args.data, args.index)
    uvicorn.run(create_app(store), host=args.host, port=args.port, log_level="info")
    return 0


def cmd_config(args: argparse.Namespace) -> int:
    print(format_config(ExperimentConfig()), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    root = argparse.ArgumentParser(prog="fairknn",
                                   description="fairness-constrained k-NN over vector datasets")
    sub = root.add_subparsers(dest="command", required=True)

    def dataset_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--data", required=True, help="dataset file (csv or packed binary)")
        p.add_argument("--format", default="auto", choices=("auto", "csv", "binary"))
        p.add_argument("--distance", default="euclidean",
                       help="euclidean | manhattan | cosine | minkowski:<p> (csv only; binary stores it)")

    p = sub.add_parser("build", help="build and persist an index")
    dataset_flags(p)
    p.add_argument("--out", required=True, help="index output path")
    _add_lsh_flags(p)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("query", help="answer one query locally or via a server")
    p.add_argument("--data", help="dataset file (local mode)")
    p.add_argument("--format", default="auto", choices=("auto", "csv", "binary"))
    p.add_argument("--distance", default="euclidean")
    p.add_argument("--index", help="index file (local mode)")
    p.add_argument("--server", help="base URL of a running service (client mode)")
    p.add_argument("--name", default="default", help="dataset name on the server")
    p.add_argument("--timeout", type=float, default=30.0)
    p.add_argument("--k", type=int)
    p.add_argument("--vector", help="comma-separated floats")
    p.add_argument("--vector-file", help="file with a JSON array or whitespace floats")
    p.add_argument("--constraint", action="append",
                   help="attr=value:count,value:count (repeat per attribute)")
    p.add_argument("--query-json", help="file with {vector, k, constraints}")
    p.add_argument("--force-ilp", action="store_true")
    p.add_argument("--quota-boost", type=int, default=1)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("bench", help="run an experiment from a config file")
    dataset_flags(p)
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--out", required=True, help="output directory for report.jsonl and summary.txt")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("gen", help="generate datasets or queries")
    gson = p.add_subparsers(dest="what", required=True)

    g = gson.add_parser("synthetic", help="two-cluster adversarial dataset")
    g.add_argument("--out", required=True)
    g.add_argument("--n", type=int, required=True, help="total points")
    g.add_argument("--d", type=int, required=True)
    g.add_argument("--tight-size", type=int, required=True)
    g.add_argument("--tight-radius", type=float, default=1.0)
    g.add_argument("--far-offset", type=float, default=100.0)
    g.add_argument("--far-radius", type=float, default=None)
    g.add_argument("--attr-sizes", default="3,6,3")
    g.add_argument("--distance", default="euclidean")
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(func=cmd_gen)

    g = gson.add_parser("3dm", help="matching-style stress instance")
    g.add_argument("--out", required=True)
    g.add_argument("--k-elements", type=int, required=True)
    g.add_argument("--extra", type=int, default=0, help="decoy triples")
    g.add_argument("--planted", action=argparse.BooleanOptionalAction, default=True)
    g.add_argument("--spec-out", help="write the all-ones constraint spec as JSON")
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(func=cmd_gen)

    g = gson.add_parser("queries", help="feasible queries for a dataset")
    g.add_argument("--data", required=True)
    g.add_argument("--format", default="auto", choices=("auto", "csv", "binary"))
    g.add_argument("--distance", default="euclidean")
    g.add_argument("--out", required=True)
    g.add_argument("--k", type=int, default=10)
    g.add_argument("--n", type=int, default=100)
    g.add_argument("--noise", type=float, default=0.25)
    g.add_argument("--attrs", help="comma-separated constrained attribute names (default all)")
    g.add_argument("--anchor", default="data", choices=("data", "origin"))
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(func=cmd_gen)

    p = sub.add_parser("verify", help="re-check a report's selections against the dataset")
    dataset_flags(p)
    p.add_argument("--report", required=True, help="report.jsonl produced by bench")
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("serve", help="host the HTTP query service")
    p.add_argument("--data", required=True)
    p.add_argument("--index", required=True)
    p.add_argument("--name", default="default")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("config", help="print a default experiment config")
    p.set_defaults(func=cmd_config)

    return root


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, FileNotFoundError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
