"""Command-line entry point.

Subcommands mirror the library layers: geometry generation, RIA
statistics, simulation runs (optionally partitioned), benchmarking,
model prediction, and partition reporting. Reports are JSON by default
and CSV with --format csv; exit codes are 0 on success, 1 on usage
errors, 2 on runtime failures.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import statistics
import sys

import numpy as np

from . import __version__
from .enumeration import order_hilbert, order_lexicographic
from .errors import SlbmError
from .kernels import VARIANTS, TrtParams, run
from .model import (
    D3Q19,
    fluid_count,
    load_geometry,
    make_channel,
    make_fixed_bed,
    save_geometry,
)
from .partition import (
    comm_stats,
    make_partition,
    partition_run_lengths,
    renumber_partitions,
    run_partitioned,
)
from .perfmodel import (
    ECM_CASES,
    MachineModel,
    ecm_predict,
    in_cache_loop_balance,
    loop_balance,
    roofline,
)
from .sparse import SparseLattice, build_adjacency, build_block_vector, ria_stats


def _default_workers() -> int:
    env = os.environ.get("SLBM_WORKERS", "")
    try:
        return max(1, int(env))
    except ValueError:
        return 1


def _parse_order(text: str):
    if text == "hilbert":
        return ("hilbert", None)
    if text == "ls":
        return ("ls", 1)
    if text.startswith("ls:"):
        try:
            block = int(text[3:])
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad ordering {text!r}")
        if block < 1:
            raise argparse.ArgumentTypeError("ordering block must be >= 1")
        return ("ls", block)
    raise argparse.ArgumentTypeError(
        f"bad ordering {text!r}, expected ls, ls:B or hilbert"
    )


def _parse_force(text: str):
    parts = [float(x) for x in text.split(",")]
    if len(parts) == 1:
        return (parts[0], 0.0, 0.0)
    if len(parts) == 3:
        return tuple(parts)
    raise argparse.ArgumentTypeError("force needs 1 or 3 comma-separated values")


def _build_lattice(geometry, order_arg, renumber_parts=None):
    kind, block = order_arg
    if renumber_parts:
        ordering, pmap = renumber_partitions(geometry, D3Q19, renumber_parts)
    else:
        pmap = None
        if kind == "hilbert":
            ordering = order_hilbert(geometry)
        else:
            ordering = order_lexicographic(geometry, block=block)
    adjacency = build_adjacency(geometry, ordering, D3Q19)
    lattice = SparseLattice(
        geometry=geometry, model=D3Q19, ordering=ordering,
        adjacency=adjacency, block=build_block_vector(adjacency),
    )
    return lattice, pmap


def _emit(report, fmt: str, out_path: str | None, csv_rows=None):
    """Write the report. csv_rows: (fieldnames, list-of-dicts) for csv."""
    if fmt == "json":
        text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    else:
        if csv_rows is None:
            rows = [{"key": k, "value": v} for k, v in sorted(_flatten(report))]
            fieldnames = ["key", "value"]
        else:
            fieldnames, rows = csv_rows
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=fieldnames)
        writer.writeheader()
        writer.writerows(rows)
        text = buf.getvalue()
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _flatten(obj, prefix=""):
    items = []
    if isinstance(obj, dict):
        for k, v in obj.items():
            items.extend(_flatten(v, f"{prefix}{k}." if prefix else f"{k}."))
    elif isinstance(obj, (list, tuple)):
        for i, v in enumerate(obj):
            items.extend(_flatten(v, f"{prefix}{i}."))
    else:
        items.append((prefix[:-1], obj))
    return items


def _counters_dict(counters):
    out = {}
    for label, c in (("even", counters.even), ("odd", counters.odd),
                     ("total", counters.total())):
        out[label] = {
            "flups": c.flups,
            "pdf_loads": c.pdf_loads,
            "pdf_stores": c.pdf_stores,
            "index_loads": c.index_loads,
            "block_loads": c.block_loads,
        }
    return out


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _cmd_geometry(args) -> int:
    if args.kind == "channel":
        geo = make_channel(args.nx, args.ny, args.nz)
    else:
        geo = make_fixed_bed(
            args.nx, args.ny, args.nz,
            diameter=args.diameter,
            target_porosity=args.porosity,
            seed=args.seed,
        )
    save_geometry(geo, args.output)
    report = {
        "kind": args.kind,
        "dims": list(geo.dims),
        "fluid_nodes": int(fluid_count(geo)),
        "periodic": list(geo.periodic),
        "output": args.output,
    }
    report.update({
        k: v for k, v in geo.meta.items()
        if k != "kind" and isinstance(v, (int, float, str, bool))
    })
    _emit(report, args.format, None)
    return 0


def _cmd_ria_stats(args) -> int:
    geo = load_geometry(args.geometry)
    lattice, _ = _build_lattice(geo, args.order)
    stats = ria_stats(lattice.block, v=args.v)
    report = {
        "geometry": geo.name,
        "ordering": lattice.ordering.label,
        "nodes": stats.nodes,
        "runs": stats.runs,
        "run_density": stats.r,
        "mean_run_length": stats.mean_run_length,
        "vectorizable_fraction": stats.vectorizable_fraction,
        "v": stats.v,
        "loop_balance_os_nt_r": loop_balance("os-nt-r", stats.r).b_l,
        "loop_balance_aa_r": loop_balance("aa-r", stats.r).b_l,
    }
    _emit(report, args.format, args.output)
    return 0


def _cmd_run(args) -> int:
    geo = load_geometry(args.geometry)
    params = TrtParams(omega_even=args.omega, magic=args.magic,
                       body_force=args.force)
    lattice, _ = _build_lattice(geo, args.order)
    if args.parts > 1:
        res = run_partitioned(
            geo, D3Q19, params, args.variant, args.parts,
            workers=args.workers, n_steps=args.steps, v=args.v,
            lattice=lattice,
        )
        extra = {
            "partitions": res.partitions,
            "workers": res.workers,
            "total_ghost_bytes": int(res.comm.total_ghost_bytes),
            "mean_exchanged_bytes_per_step": res.mean_exchanged_bytes_per_step,
        }
    else:
        res = run(lattice, args.variant, params, args.steps, v=args.v)
        extra = {}
        if res.batched_fraction is not None:
            extra["batched_fraction"] = res.batched_fraction
    report = {
        "variant": res.variant,
        "steps": res.steps,
        "mflups": res.mflups,
        "mass": res.mass,
        "max_velocity": res.max_velocity,
        "counters": _counters_dict(res.counters),
        "in_cache_loop_balance": in_cache_loop_balance(res.counters),
        **extra,
    }
    _emit(report, args.format, args.output)
    return 0


def _cmd_bench(args) -> int:
    geo = load_geometry(args.geometry)
    params = TrtParams(omega_even=args.omega, magic=args.magic,
                       body_force=args.force)
    lattice, _ = _build_lattice(geo, args.order)
    variants = args.variants.split(",") if args.variants else list(VARIANTS)
    workers_list = [int(x) for x in args.workers_list.split(",")]
    rows = []
    for variant in variants:
        for wk in workers_list:
            rates = []
            counters = None
            for _rep in range(args.repeat):
                if wk == 1 and args.parts == 1:
                    res = run(lattice, variant, params, args.steps, v=args.v)
                else:
                    res = run_partitioned(
                        geo, D3Q19, params, variant,
                        max(args.parts, wk), workers=wk,
                        n_steps=args.steps, v=args.v, lattice=lattice,
                    )
                rates.append(res.mflups)
                counters = res.counters
            rows.append({
                "variant": variant,
                "workers": wk,
                "steps": args.steps,
                "mflups_min": min(rates),
                "mflups_median": statistics.median(rates),
                "mflups_max": max(rates),
                "pdf_loads": counters.total().pdf_loads,
                "index_loads": counters.total().index_loads,
            })
    fieldnames = list(rows[0].keys()) if rows else []
    _emit({"bench": rows}, args.format, args.output, csv_rows=(fieldnames, rows))
    return 0


def _cmd_predict(args) -> int:
    machine = MachineModel.from_json(args.machine)
    variants = args.variant.split(",") if args.variant != "all" else list(VARIANTS)
    freqs = (
        [float(f) for f in args.frequency.split(",")]
        if args.frequency != "all"
        else list(machine.frequencies_ghz)
    )
    r = args.r
    if r is None and args.geometry:
        geo = load_geometry(args.geometry)
        lattice, _ = _build_lattice(geo, args.order)
        r = ria_stats(lattice.block).r
    rows = []
    for variant in variants:
        needs_r = variant.endswith("-r") or variant.endswith("-rp")
        if needs_r and r is None:
            raise SlbmError(
                f"{variant} needs a run density: pass --r or --geometry"
            )
        lb = loop_balance(variant, r if needs_r else None)
        for f in freqs:
            rows.append({
                "variant": variant,
                "frequency_ghz": f,
                "loop_balance": lb.b_l,
                "roofline_mflups": roofline(machine, variant, lb.b_l, f),
            })
    report = {"machine": machine.name, "roofline": rows}
    if args.ecm:
        ecm_rows = []
        for case in ECM_CASES:
            for f in freqs:
                e = ecm_predict(machine, case, f)
                ecm_rows.append({
                    "case": case,
                    "frequency_ghz": f,
                    "t_core": e.t_core,
                    "t_total": e.t_total,
                    "single_core_mflups": e.p1_mflups,
                    "bandwidth_mflups": e.p_bw_mflups,
                    "saturation_cores": e.saturation_cores,
                })
        report["ecm"] = ecm_rows
    fieldnames = list(rows[0].keys()) if rows else []
    _emit(report, args.format, args.output, csv_rows=(fieldnames, rows))
    return 0


def _cmd_partition_report(args) -> int:
    geo = load_geometry(args.geometry)
    lattice, pmap = _build_lattice(
        geo, args.order, renumber_parts=args.parts if args.renumber else None
    )
    if pmap is None:
        pmap = make_partition(lattice.ordering, args.parts)
    report_stats = comm_stats(lattice, pmap)
    mrl = partition_run_lengths(lattice, pmap)
    rows = [
        {
            "partition": k,
            "size": int(report_stats.sizes[k]),
            "ghost_pdfs": int(report_stats.incoming_pdfs[k]),
            "ghost_bytes": int(8 * report_stats.incoming_pdfs[k]),
            "neighbors": int(report_stats.neighbor_counts[k]),
            "mean_run_length": float(mrl[k]),
        }
        for k in range(pmap.p)
    ]
    report = {
        "geometry": geo.name,
        "ordering": lattice.ordering.label,
        "partitions": pmap.p,
        "total_ghost_pdfs": report_stats.total_ghost_pdfs,
        "total_ghost_bytes": report_stats.total_ghost_bytes,
        "max_ghost_bytes": report_stats.max_ghost_bytes,
        "mean_ghost_bytes": report_stats.mean_ghost_bytes,
        "per_partition": rows,
    }
    fieldnames = list(rows[0].keys()) if rows else []
    _emit(report, args.format, args.output, csv_rows=(fieldnames, rows))
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the contract wants 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _add_common(p, geometry=True):
    if geometry:
        p.add_argument("--geometry", required=True, help="geometry file")
        p.add_argument("--order", type=_parse_order, default=("ls", 1),
                       help="ls, ls:B or hilbert (default ls:1)")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("-o", "--output", default=None, help="write report here")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="slbm", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("geometry", help="generate a geometry file")
    g.add_argument("kind", choices=("channel", "fixed-bed"))
    g.add_argument("nx", type=int)
    g.add_argument("ny", type=int)
    g.add_argument("nz", type=int)
    g.add_argument("-o", "--output", required=True)
    g.add_argument("--diameter", type=float, default=20.0)
    g.add_argument("--porosity", type=float, default=0.44)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--format", choices=("json", "csv"), default="json")
    g.set_defaults(func=_cmd_geometry)

    rs = sub.add_parser("ria-stats", help="run-length statistics of an ordering")
    _add_common(rs)
    rs.add_argument("--v", type=int, default=4, help="batch width")
    rs.set_defaults(func=_cmd_ria_stats)

    r = sub.add_parser("run", help="run a simulation")
    _add_common(r)
    r.add_argument("--variant", choices=VARIANTS, default="aa-rp")
    r.add_argument("--steps", type=int, default=100)
    r.add_argument("--omega", type=float, default=1.0)
    r.add_argument("--magic", type=float, default=0.25)
    r.add_argument("--force", type=_parse_force, default=(0.0, 0.0, 0.0),
                   help="FX or FX,FY,FZ")
    r.add_argument("--v", type=int, default=4)
    r.add_argument("--parts", type=int, default=1)
    r.add_argument("--workers", type=int, default=_default_workers())
    r.set_defaults(func=_cmd_run)

    b = sub.add_parser("bench", help="throughput benchmark")
    _add_common(b)
    b.add_argument("--variants", default=None,
                   help="comma-separated, default all")
    b.add_argument("--steps", type=int, default=50)
    b.add_argument("--omega", type=float, default=1.0)
    b.add_argument("--magic", type=float, default=0.25)
    b.add_argument("--force", type=_parse_force, default=(0.0, 0.0, 0.0))
    b.add_argument("--v", type=int, default=4)
    b.add_argument("--parts", type=int, default=1)
    b.add_argument("--workers-list", default="1",
                   help="comma-separated worker counts")
    b.add_argument("--repeat", type=int, default=3)
    b.set_defaults(func=_cmd_bench)

    pr = sub.add_parser("predict", help="roofline / ECM model predictions")
    pr.add_argument("--machine", default=None,
                    help="machine model JSON (default: shipped Haswell)")
    pr.add_argument("--variant", default="all")
    pr.add_argument("--frequency", default="all")
    pr.add_argument("--r", type=float, default=None, help="run density")
    pr.add_argument("--geometry", default=None,
                    help="compute run density from this geometry")
    pr.add_argument("--order", type=_parse_order, default=("ls", 1))
    pr.add_argument("--ecm", action="store_true")
    pr.add_argument("--format", choices=("json", "csv"), default="json")
    pr.add_argument("-o", "--output", default=None)
    pr.set_defaults(func=_cmd_predict)

    pp = sub.add_parser("partition-report", help="communication statistics")
    _add_common(pp)
    pp.add_argument("--parts", type=int, required=True)
    pp.add_argument("--renumber", action="store_true",
                    help="space-filling-curve chunks, re-sorted inside")
    pp.set_defaults(func=_cmd_partition_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except SlbmError as exc:
        print(f"slbm: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, OSError) as exc:
        print(f"slbm: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
