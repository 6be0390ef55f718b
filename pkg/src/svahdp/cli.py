"""Command-line entry point: ``svahdp --task TASK ...``.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import asymptotics, combinatorics, kernels
from .hdp_means import INITS, FitOptions, fit_hdp_means
from .io import SCHEMA_VERSION, ParseError, emit, ingest
from .objectives import (GroupedDataset, Hyperparams, SequenceDataset, hdp_mixture_objective,
                         local_cluster_counts)
from .sva_hmm import fit_hmm_combinatorial, fit_hmm_direct_sweep
from .synth import ClusterSpec, HmmSpec, planted_clusters, planted_hmm

log = logging.getLogger("svahdp")

TASKS = ("hdp-means", "hmm-comb", "hmm-direct", "verify-crp", "verify-limits", "synth")
FIT_TASKS = ("hdp-means", "hmm-comb", "hmm-direct")


class UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="svahdp", description=__doc__.splitlines()[0])
    p.add_argument("--task", required=True, choices=TASKS)
    p.add_argument("--input", help="dataset file (.csv or .json)")
    p.add_argument("--output", required=True, help="result JSON (a .trace.csv is written next to it)")
    p.add_argument("--lambda1", type=float)
    p.add_argument("--lambda2", type=float)
    p.add_argument("--lambda3", type=float)
    p.add_argument("--zeta", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-sweeps", type=int, default=200)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--restarts", type=int, default=1)
    p.add_argument("--init", choices=INITS, default="single", help="hdp-means initialisation")
    p.add_argument("--k-min", type=int, default=1)
    p.add_argument("--k-max", type=int, default=10)
    p.add_argument("--grid", help="comma-separated precision scales for verify-limits")
    p.add_argument("--n", type=int, default=6, help="customers for verify-crp (1..9)")
    g = p.add_argument_group("synth")
    g.add_argument("--generator", choices=("clusters", "hmm"), default="clusters")
    g.add_argument("--n-groups", type=int, default=2)
    g.add_argument("--n-clusters", type=int, default=3)
    g.add_argument("--points", type=int, default=30, help="points per group")
    g.add_argument("--length", type=int, default=90)
    g.add_argument("--dim", type=int, default=2)
    g.add_argument("--separation", type=float, default=10.0)
    g.add_argument("--spread", type=float, default=1.0)
    g.add_argument("--stickiness", type=float, default=0.9)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _hyperparams(args) -> Hyperparams:
    needed = ["lambda1", "lambda2", "lambda3"] + (["zeta"] if args.task == "hmm-direct" else [])
    missing = [f"--{n}" for n in needed if getattr(args, n) is None]
    if missing:
        raise UsageError(f"task {args.task} requires {', '.join(missing)}")
    try:
        return Hyperparams(args.lambda1, args.lambda2, args.lambda3, args.zeta if args.zeta is not None else 1.0)
    except ValueError as e:
        raise UsageError(str(e)) from None


def _options(args) -> FitOptions:
    try:
        return FitOptions(args.max_sweeps, args.tol, args.seed, args.restarts, args.init)
    except ValueError as e:
        raise UsageError(str(e)) from None


def _load(args, kind):
    if not args.input:
        raise UsageError(f"task {args.task} requires --input")
    data = ingest(args.input)
    if kind is GroupedDataset and isinstance(data, SequenceDataset):
        data = GroupedDataset([data.observations])
    if kind is SequenceDataset and not isinstance(data, SequenceDataset):
        raise ParseError(f"{args.input}: task {args.task} needs a sequence dataset, got grouped data")
    return data


def _trace_path(output) -> Path:
    out = Path(output)
    return out.with_name(out.stem + ".trace.csv")


def _write_trace(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    return x


def _run_fit(args):
    hp = _hyperparams(args)
    opts = _options(args)
    if args.task == "hdp-means":
        data = _load(args, GroupedDataset)
        clustering, trace = fit_hdp_means(data, hp, opts)
        result = {
            "K": clustering.K,
            "assignments": [z.tolist() for z in clustering.assignments],
            "means": clustering.means,
            "localClusterCounts": local_cluster_counts(clustering),
            "objective": hdp_mixture_objective(data, clustering, hp),
        }
    elif args.task == "hmm-comb":
        data = _load(args, SequenceDataset)
        sol, trace = fit_hmm_combinatorial(data, hp, opts)
        result = {"K": sol.K, "states": sol.states, "means": sol.means, "objective": trace[-1]}
    else:
        data = _load(args, SequenceDataset)
        if not 1 <= args.k_min <= args.k_max:
            raise UsageError("need 1 <= --k-min <= --k-max")
        sol, trace, scores = fit_hmm_direct_sweep(data, hp, args.k_min, args.k_max, opts)
        result = {"K": sol.K, "states": sol.states, "means": sol.means,
                  "transitionRows": sol.transition_rows, "sharedWeights": sol.shared_weights,
                  "objective": trace[-1], "objectiveByK": scores}
    result["trace"] = trace
    _write_trace(_trace_path(args.output), ["step", "objective"], [[i + 1, repr(float(v))] for i, v in enumerate(trace)])
    return result


def _run_verify_crp(args):
    n = args.n
    if not 1 <= n <= 9:
        raise UsageError("--n must lie in 1..9")
    rows, out = [], {"n": n, "partitionSums": {}, "stirlingIdentity": {}, "crfMarginal": {}}
    sizes = [[len(b) for b in p] for p in combinatorics.set_partitions(n)]
    for kappa in (0.1, 1.0, 10.0):
        total = math.fsum(math.exp(combinatorics.crp_partition_log_prob(s, kappa)) for s in sizes)
        printed = math.fsum(math.exp(combinatorics.crp_log_prob(s, kappa)) for s in sizes)
        out["partitionSums"][str(kappa)] = {"partitionLaw": total, "error": abs(total - 1.0), "printedFormulaSum": printed}
        rows.append(["partition_sum", kappa, repr(abs(total - 1.0))])
    for a in (0.5, 1.0, 3.0):
        lhs = float(np.logaddexp.reduce([combinatorics.log_stirling1u(n, k) + k * math.log(a) for k in range(n + 1)]))
        rhs = combinatorics.log_rising_factorial(a, n)
        out["stirlingIdentity"][str(a)] = {"logSum": lhs, "logRising": rhs, "relError": abs(lhs - rhs) / abs(rhs) if rhs else abs(lhs)}
        rows.append(["stirling_identity", a, repr(abs(lhs - rhs))])
    counts = combinatorics.CrfCounts([[1, 1], [0, 2]], [[2, 1], [0, 3]])
    conc = combinatorics.Concentrations.of(0.7, 1.3)
    a, b = combinatorics.crf_log_prob_counts(counts, conc), combinatorics.crf_marginal_by_enumeration(counts, conc)
    out["crfMarginal"] = {"counts": a, "enumerated": b, "error": abs(a - b)}
    rows.append(["crf_marginal", "", repr(abs(a - b))])
    _write_trace(_trace_path(args.output), ["check", "parameter", "error"], rows)
    return out


def _run_verify_limits(args):
    try:
        grid = [float(v) for v in args.grid.split(",")] if args.grid else list(asymptotics.DEFAULT_GRID)
        asymptotics.check_grid(grid)
    except ValueError as e:
        raise UsageError(f"bad --grid: {e}") from None
    pick = lambda v, default: default if v is None else v
    try:
        hp = Hyperparams(pick(args.lambda1, 1.0), pick(args.lambda2, 0.5), pick(args.lambda3, 0.3))
    except ValueError as e:
        raise UsageError(str(e)) from None
    mdata, mclust = asymptotics.toy_mixture_instance()
    hdata, hsol = asymptotics.toy_hmm_instance()
    reports = {
        "crf": asymptotics.crf_limit_report(asymptotics.mixture_customer_counts(mclust), hp, grid),
        "mixture": asymptotics.limit_report(mdata, mclust, hp, grid),
        "hmm": asymptotics.limit_report(hdata, hsol, hp, grid),
        "direct": asymptotics.direct_limit_check(asymptotics.toy_direct_instance(), hp, grid),
    }
    header = ["precision_scale"] + [f"{k}_{col}" for k in reports for col in ("gap", "adjusted_gap")]
    rows = []
    for i, b in enumerate(grid):
        row = [repr(b)]
        for r in reports.values():
            row += [repr(r.gaps[i]), repr(r.adjusted_gaps[i])]
        rows.append(row)
    _write_trace(_trace_path(args.output), header, rows)
    out = {k: r.to_dict() for k, r in reports.items()}
    out["logGamma"] = [asdict(c) for c in asymptotics.log_gamma_expansion_check([1e-6, 1e-3, 1e3, 1e6])]
    out["hyperparams"] = asdict(hp)
    return out


def _run_synth(args):
    if args.generator == "clusters":
        data, labels, centers = planted_clusters(ClusterSpec(args.n_groups, args.n_clusters, args.points, args.dim,
                                                             args.separation, args.spread, args.seed))
        truth = {"labels": [z.tolist() for z in labels], "centers": centers}
    else:
        data, states, means = planted_hmm(HmmSpec(args.n_clusters, args.length, args.dim, args.separation,
                                                  args.spread, args.stickiness, args.seed))
        truth = {"labels": states, "centers": means}
    out = Path(args.output)
    emit(data, out)
    labels_path = out.with_name(out.stem + ".labels.json")
    labels_path.write_text(json.dumps(_jsonable({"schemaVersion": SCHEMA_VERSION, **truth})))
    return None


def run(args) -> int:
    start = time.perf_counter()
    if args.task == "synth":
        _run_synth(args)
        return 0
    if args.task in FIT_TASKS:
        result = _run_fit(args)
    elif args.task == "verify-crp":
        result = _run_verify_crp(args)
    else:
        result = _run_verify_limits(args)
    doc = {
        "schemaVersion": SCHEMA_VERSION,
        "task": args.task,
        "config": {k: v for k, v in vars(args).items() if k != "verbose"},
        "backend": kernels.BACKEND,
        "result": result,
        "wallTime": time.perf_counter() - start,
    }
    Path(args.output).write_text(json.dumps(_jsonable(doc), indent=1))
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return run(args)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"svahdp: error: {e}", file=sys.stderr)
        return 2
    except (ParseError, ValueError, OSError) as e:
        print(f"svahdp: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
