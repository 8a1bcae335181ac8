"""Command line front end: signedpsd check-met|complete|classify|rigidity|minors|crosscheck."""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import dataclass
from typing import Dict, Hashable, Optional

import numpy as np

from . import classify as cl
from . import oracle
from .complete import RANK_TOL, solve
from .metpoly import CYCLE_CAP, TOL_X, met_membership, to_c, to_x
from .sgraph import ODD_K32, ODD_K4, Edge, SignedGraph, has_minor

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NEGATIVE = 2


class InstanceError(ValueError):
    pass


@dataclass
class Instance:
    graph: SignedGraph
    weights: Optional[Dict[Hashable, float]]
    space: Optional[str]
    config: Optional[np.ndarray] = None

    @property
    def x(self):
        if self.weights is None:
            return None
        return dict(self.weights) if self.space == "x" else to_x(self.weights)

    @property
    def c(self):
        if self.weights is None:
            return None
        return dict(self.weights) if self.space == "c" else to_c(self.weights)


def parse_instance(text: str) -> Instance:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceError(f"bad JSON: {exc}") from exc
    if not isinstance(data, dict) or "n" not in data or "edges" not in data:
        raise InstanceError("instance needs 'n' and 'edges'")
    n = data["n"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 0:
        raise InstanceError("'n' must be a non-negative integer")
    edges = []
    weights = {}
    spaces = set()
    for k, item in enumerate(data["edges"]):
        try:
            eid = str(item.get("id", f"e{k}"))
            u, v = item["u"], item["v"]
            sign = item["sign"]
        except (AttributeError, KeyError, TypeError) as exc:
            raise InstanceError(f"edge {k} is malformed") from exc
        if sign not in ("even", "odd"):
            raise InstanceError(f"edge {eid}: sign must be 'even' or 'odd'")
        if not all(isinstance(w, int) and not isinstance(w, bool) and 0 <= w < n for w in (u, v)):
            raise InstanceError(f"edge {eid}: endpoints must be vertices 0..{n - 1}")
        has = [key for key in ("c", "x") if key in item]
        if len(has) > 1:
            raise InstanceError(f"edge {eid}: give c or x, not both")
        if has:
            spaces.add(has[0])
            val = item[has[0]]
            if not isinstance(val, (int, float)) or isinstance(val, bool):
                raise InstanceError(f"edge {eid}: weight must be a number")
            weights[eid] = float(val)
        else:
            spaces.add(None)
        edges.append(Edge(eid, u, v, sign == "odd"))
    if len({e.id for e in edges}) != len(edges):
        raise InstanceError("edge ids must be unique")
    if len(spaces) > 1:
        raise InstanceError("every edge must carry the same kind of weight (all c, all x, or none)")
    space = spaces.pop() if spaces else "c"
    try:
        g = SignedGraph(n, tuple(edges))
    except ValueError as exc:
        raise InstanceError(str(exc)) from exc
    config = None
    if "config" in data and data["config"] is not None:
        try:
            rows = np.asarray(data["config"]["p"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise InstanceError("config must be {'p': [[...], ...]}") from exc
        if rows.ndim != 2 or rows.shape[0] != n:
            raise InstanceError("config p needs one vector per vertex")
        if np.max(np.abs(np.linalg.norm(rows, axis=1) - 1.0), initial=0.0) > 1e-8:
            raise InstanceError("config vectors must be unit")
        config = rows.T
    if space is None:
        weights = None
    try:
        if weights is not None:
            (to_x if space == "c" else to_c)(weights)
    except ValueError as exc:
        raise InstanceError(str(exc)) from exc
    return Instance(g, weights, space, config)


def dump_instance(inst: Instance) -> str:
    edges = []
    for e in inst.graph.edges:
        item = {"id": e.id, "u": e.u, "v": e.v, "sign": e.parity}
        if inst.weights is not None:
            item[inst.space] = inst.weights[e.id]
        edges.append(item)
    data = {"n": inst.graph.n, "edges": edges}
    if inst.config is not None:
        data["config"] = {"p": inst.config.T.tolist()}
    return json.dumps(data)


def instance_from(g: SignedGraph, x) -> Instance:
    return Instance(g, {e.id: float(x[e.id]) for e in g.edges}, "x")


# ---------------------------------------------------------------- reports

def _cycle_json(cyc):
    if cyc is None:
        return None
    return {"vertices": list(cyc.vertices), "edges": [str(k) for k in cyc.edges], "value": cyc.value}


def _weights_json(g, x):
    c = to_c(x)
    return {str(e.id): {"x": x[e.id], "c": c[e.id]} for e in g.edges}


def _plain(v):
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    return v


def solve_report(res) -> dict:
    out = {"status": res.status, "weights": _weights_json(res.graph, res.x)}
    if not res.solved:
        out["witness"] = _cycle_json(res.witness)
        return out
    out.update({
        "low_rank": {"rank": res.low_rank.rank, "P": res.low_rank.P.tolist(), "X": res.low_rank.X.tolist()},
        "max_rank": {"rank": res.max_rank.rank, "P": res.max_rank.P.tolist(), "X": res.max_rank.X.tolist()},
        "dual": {
            "vertex_weights": res.dual.vertex_weights.tolist(),
            "edge_weights": {str(k): float(w) for k, w in res.dual.edge_weights.items()},
            "Omega": res.dual.Omega.tolist(),
            "rank": res.dual.rank,
        },
        "strict_complementarity": res.strict_complementarity,
        "checks": {k: _plain(v) for k, v in res.checks.items()},
    })
    return out


def _emit(obj):
    print(json.dumps(obj, indent=2))


def _read(path: str) -> Instance:
    if path == "-":
        return parse_instance(sys.stdin.read())
    with open(path) as fh:
        return parse_instance(fh.read())


def _need_weights(inst: Instance):
    if inst.weights is None:
        raise InstanceError("edges need c or x weights")


# ---------------------------------------------------------------- commands

def cmd_check_met(args) -> int:
    inst = _read(args.file)
    _need_weights(inst)
    g, x = inst.graph, inst.x
    verdict = met_membership(g, x, args.tol)
    report = {"inside": verdict.inside, "margin": verdict.margin,
              "witness": None if verdict.inside else _cycle_json(verdict.witness)}
    if args.mode in ("walk", "path", "both") and g.n >= 2:
        from .metpoly import lambda_even, lambda_odd
        report["lambda"] = {f"{u}-{v}": {"even": lambda_even(g, x, u, v, args.mode, args.tol),
                                         "odd": lambda_odd(g, x, u, v, args.mode, args.tol)}
                            for u in range(g.n) for v in range(u + 1, g.n)}
    _emit(report)
    return EXIT_OK if verdict.inside else EXIT_NEGATIVE


def cmd_complete(args) -> int:
    inst = _read(args.file)
    _need_weights(inst)
    res = solve(inst.graph, x=inst.x, seed=args.seed, tol=args.tol, cap=args.max_cycles, mode=args.mode,
                rank_tol=args.rank_tol)
    if args.emit == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf)
        if res.solved:
            p = res.max_rank.P
            writer.writerow(["vertex"] + [f"p{k}" for k in range(p.shape[0])])
            for i in range(p.shape[1]):
                writer.writerow([i] + [repr(float(v)) for v in p[:, i]])
        else:
            writer.writerow(["witness_edge"])
            for k in res.witness.edges:
                writer.writerow([k])
        sys.stdout.write(buf.getvalue())
    else:
        _emit(solve_report(res))
    return EXIT_OK if res.solved else EXIT_NEGATIVE


def _hypergraph_json(h):
    if h is None:
        return None
    return {"n": h.n, "hyperedges": [sorted(e) for e in h.hyperedges]}


def _verdict_report(v) -> dict:
    from .tightstruct import classify_hypergraph
    out = {"verdict": v.cls, "hypergraph": _hypergraph_json(v.hypergraph),
           "hypergraph_kind": classify_hypergraph(v.hypergraph) if v.hypergraph is not None else None}
    if v.witness is not None:
        out["witness"] = v.witness.tolist()
    if v.dimension_ok is not None:
        out["dimension_ok"] = v.dimension_ok
    return out


def cmd_classify(args) -> int:
    inst = _read(args.file)
    _need_weights(inst)
    v = cl.classify_unique(inst.graph, x=inst.x, seed=args.seed, tol=args.tol, cap=args.max_cycles)
    _emit(_verdict_report(v))
    return EXIT_OK if v.unique else EXIT_NEGATIVE


def cmd_rigidity(args) -> int:
    inst = _read(args.file)
    if inst.config is None:
        raise InstanceError("rigidity needs a 'config' block")
    t = cl.Tensegrity(inst.graph, inst.config)
    v = cl.classify_rigidity(t, seed=args.seed, tol=args.tol)
    report = _verdict_report(v)
    report["universally_rigid"] = v.unique
    if v.cls != cl.INFEASIBLE:
        res = solve(inst.graph, c=t.weights(), seed=args.seed, tol=args.tol)
        ss = cl.super_stable_check(t, res.dual, args.rank_tol)
        report["super_stable"] = ss.ok
        if not ss.ok:
            report["super_stable_failure"] = ss.reason
    _emit(report)
    return EXIT_OK if v.unique else EXIT_NEGATIVE


def cmd_minors(args) -> int:
    inst = _read(args.file)
    pattern = {"odd-k4": ODD_K4, "odd-k32": ODD_K32}[args.pattern]
    found = has_minor(inst.graph, pattern)
    _emit({"pattern": args.pattern, "has_minor": found})
    return EXIT_OK if found else EXIT_NEGATIVE


def crosscheck_rows(g: SignedGraph, x, seed: int = 0, tol: float = TOL_X):
    """Library answer, oracle answer and agreement for membership, feasibility and uniqueness."""
    rows = []
    inside = met_membership(g, x, tol).inside
    rows.append(("membership", inside, oracle.met_oracle(g, x, tol)))
    res = solve(g, x=x, seed=seed, tol=tol)
    feas = oracle.feasibility_oracle(g, to_c(x), seed=seed)
    rows.append(("feasibility", res.solved, feas.found))
    if res.solved:
        rows.append(("strict_complementarity", res.strict_complementarity, True))
        verdict = cl.classify_unique(g, x=x, seed=seed, tol=tol)
        probe = oracle.uniqueness_oracle(g, to_c(x), seed=seed)
        rows.append(("uniqueness", verdict.unique, probe.unique))
    return [(name, lib, orc, lib == orc) for name, lib, orc in rows]


def cmd_crosscheck(args) -> int:
    if args.generate:
        seed = int(args.generate[0])
        kind = args.generate[1] if len(args.generate) > 1 else oracle.K32_FREE
        size = int(args.generate[2]) if len(args.generate) > 2 else 6
        if kind not in (oracle.K32_FREE, oracle.WITH_K32_LEAVES, oracle.WITH_SPLITS):
            raise InstanceError(f"unknown kind {kind!r}")
        g, x = oracle.generate_instance(seed, size, kind)
    elif args.file:
        inst = _read(args.file)
        _need_weights(inst)
        g, x = inst.graph, inst.x
    else:
        raise InstanceError("give a file or --generate SEED [KIND [SIZE]]")
    rows = crosscheck_rows(g, x, args.seed, args.tol)
    if args.emit == "json":
        _emit([{"check": n, "library": a, "oracle": b, "agree": ok} for n, a, b, ok in rows])
    else:
        print(f"{'check':<24}{'library':<10}{'oracle':<10}result")
        for name, lib, orc, ok in rows:
            print(f"{name:<24}{str(lib):<10}{str(orc):<10}{'agree' if ok else 'DISAGREE'}")
    return EXIT_OK if all(r[3] for r in rows) else EXIT_NEGATIVE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="signedpsd", description="Signed PSD completion on odd-K4 minor free graphs")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--tol", type=float, default=TOL_X)
        p.add_argument("--rank-tol", type=float, default=RANK_TOL)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--max-cycles", type=int, default=CYCLE_CAP)
        p.add_argument("--mode", choices=("auto", "walk", "path", "both"), default="auto")

    p = sub.add_parser("check-met", help="metric polytope membership")
    p.add_argument("file")
    common(p)
    p.set_defaults(func=cmd_check_met)

    p = sub.add_parser("complete", help="solve the completion problem")
    p.add_argument("file")
    p.add_argument("--emit", choices=("json", "csv"), default="json")
    common(p)
    p.set_defaults(func=cmd_complete)

    p = sub.add_parser("classify", help="unique solvability")
    p.add_argument("file")
    common(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("rigidity", help="universal rigidity and super stability of a tensegrity")
    p.add_argument("file")
    common(p)
    p.set_defaults(func=cmd_rigidity)

    p = sub.add_parser("minors", help="odd-K4 / odd-K3^2 minor test")
    p.add_argument("file")
    p.add_argument("--pattern", choices=("odd-k4", "odd-k32"), default="odd-k4")
    p.set_defaults(func=cmd_minors)

    p = sub.add_parser("crosscheck", help="compare library answers with brute-force oracles")
    p.add_argument("file", nargs="?")
    p.add_argument("--generate", nargs="+", metavar="ARG", help="SEED [KIND [SIZE]]")
    p.add_argument("--emit", choices=("table", "json"), default="table")
    common(p)
    p.set_defaults(func=cmd_crosscheck)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_ERROR if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (InstanceError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
