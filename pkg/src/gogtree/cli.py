"""Command-line front end.

Every subcommand loads a graph of groups (bundled name, graph JSON, or an
experiment JSON with a ``graph`` entry and a ``params`` table), runs one
experiment and writes ``<out>/<command>.json`` holding the result, the
constants ledger snapshot and the exact config used.  Reports contain no
timings, so identical inputs give identical bytes.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from fractions import Fraction
from pathlib import Path as FsPath

from . import stallings
from .bass_serre import build_tree_ball, tree_ball_dot, tree_ball_json
from .graph_of_groups import EXAMPLES, GraphOfGroups, InvalidGraphOfGroups, load
from .ladder import (build_ladder, ladder_ball, measure_quasiconvexity,
                     measure_retraction)
from .ledger import ConstantsLedger, record_vertex_deltas
from .limit_lab import (attach_subgroup, axis_pairs, default_dconfig, defect_csv,
                        extract_witnesses, intersection_defect, pair_ball)
from .tree_of_spaces import (TreeOfSpaces, build_metric_ball, build_space_ball,
                             QILift, SpacePoint, compute_D0, flare_probe, qi_lift,
                             space_ball_dot)

COMMANDS = ("validate", "presentation", "tree", "space", "ladder", "flare",
            "limitset", "witness", "attach")

DEFAULTS = {
    "tree": {"radius": 2, "budget": 4},
    "space": {"radius": 1, "budget": 4},
    "ladder": {"radius": 3, "depth": 2, "samples": 200, "seed": 0},
    "flare": {"n": 2, "offset": 3},
    "limitset": {"radii": [4, 6, 8, 10]},
    "witness": {"count": 12},
    "attach": {},
}

# flags that feed params; None means "not given"
PARAM_FLAGS = ("seed", "radius", "budget", "d0", "d1", "dconfig", "depth", "samples",
               "segment", "vertex", "subgroup", "count", "radii")


class BudgetError(RuntimeError):
    pass


def _num(text: str):
    f = Fraction(text)
    return int(f) if f.denominator == 1 else f


def _jsonable(x):
    if isinstance(x, Fraction):
        return int(x) if x.denominator == 1 else str(x)
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def write_atomic(path: FsPath, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps(doc) -> str:
    return json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n"


# -- config -------------------------------------------------------------------------------
def load_experiment(ref: str | None) -> tuple[GraphOfGroups, dict]:
    """(graph of groups, params) from a bundled name or a JSON file."""
    if ref is None:
        ref = "double_f2"
    if ref in EXAMPLES or not os.path.exists(ref):
        if ref not in EXAMPLES:
            raise FileNotFoundError(f"no such config or bundled example: {ref}")
        return load(ref), {}
    doc = json.loads(FsPath(ref).read_text())
    if "graph" in doc:
        g = doc["graph"]
        gog = (load(g) if isinstance(g, str)
               else GraphOfGroups.from_config(g))
        return gog, dict(doc.get("params", {}))
    return GraphOfGroups.from_config(doc), {}


def merge_params(command: str, file_params: dict, args) -> dict:
    p = dict(DEFAULTS.get(command, {}))
    p.update(file_params)
    for k in PARAM_FLAGS:
        v = getattr(args, k, None)
        if v is not None:
            p[k] = v
    for k in ("radius", "budget", "depth", "samples", "count"):
        if k in p and int(p[k]) < 0:
            raise ValueError(f"{k} must be nonnegative")
    return p


def _D0(space, ledger, p):
    if p.get("d0") is not None:
        return ledger.record("D0", Fraction(p["d0"]), "configured", "command-line D0")
    return compute_D0(space, ledger)


def _adjacent_pair(space):
    tree = space.tree
    w1 = tree.base_vertex()
    inc, _ = tree.incident_edges(w1, 0)
    if not inc:
        raise ValueError("base vertex has no incident edges")
    return w1, inc[0][2]


# -- commands -------------------------------------------------------------------------------
def cmd_validate(gog, p, ledger, args):
    rep = gog.report.to_json()
    return rep, (0 if rep["ok"] else 1)


def cmd_presentation(gog, p, ledger, args):
    pres = gog.fundamental_presentation()
    ledger.record("relator_count", len(pres.relators), "computed", "fundamental presentation")
    return {"presentation": pres.to_json(), "text": pres.to_text(),
            "expected_relator_count": gog.expected_relator_count()}, 0


def cmd_tree(gog, p, ledger, args):
    space = TreeOfSpaces(gog)
    tree = space.tree
    ball = build_tree_ball(tree, tree.base_vertex(), int(p["radius"]), int(p["budget"]))
    if not ball.is_tree():
        raise BudgetError("explored tree ball contains a cycle")
    ledger.record("tree_radius", int(p["radius"]), "configured")
    ledger.record("coset_budget", int(p["budget"]), "configured")
    if args.dot:
        write_atomic(args.out / "tree.dot", tree_ball_dot(tree, ball))
    return tree_ball_json(tree, ball), 0


def cmd_space(gog, p, ledger, args):
    space = TreeOfSpaces(gog)
    record_vertex_deltas(ledger, gog)
    D0 = _D0(space, ledger, p)
    ball = build_space_ball(space, space.base_point(), int(p["radius"]), int(p["budget"]))
    ledger.record("tree_radius", int(p["radius"]), "configured")
    ledger.record("word_budget", int(p["budget"]), "configured")
    if args.dot:
        write_atomic(args.out / "space.dot", space_ball_dot(ball))
    return {"stats": ball.stats(), "D0": ledger.cite("D0"), "D0_value": D0}, 0


def _parse_segment(V, text):
    if not text:
        return None
    a, _, b = text.partition(",")
    return V.parse(a.strip() or "1"), V.parse(b.strip() or "1")


def cmd_ladder(gog, p, ledger, args):
    space = TreeOfSpaces(gog)
    D0 = _D0(space, ledger, p)
    D1 = p.get("d1")
    if D1 is None:
        ledger.record("D1", 2 * Fraction(D0), "configured", "default D1 = 2 D0")
    else:
        ledger.record("D1", Fraction(D1), "configured", "command-line D1")
    origin = space.tree.base_vertex()
    V = gog.group(origin.vtype)
    seg = _parse_segment(V, p.get("segment"))
    if seg is None:
        # default lambda: the square of the first incident edge image
        eid = gog.edges_at(origin.vtype)[0]
        c = gog.edge_group(eid).gen_elements()[0]
        img = gog.origin_map(eid).image(c)
        seg = (V.identity, V.mul(img, img))
    seed = int(p["seed"])
    L = build_ladder(space, origin, seg[0], seg[1], ledger, int(p["depth"]))
    ball = ladder_ball(L, int(p["radius"]))
    ret = measure_retraction(L, ball, int(p["samples"]), seed, ledger)
    qc = measure_quasiconvexity(L, ball, int(p["samples"]), seed, ledger)
    ledger.record("ball_radius", int(p["radius"]), "configured", "measurement ball")
    return {"ladder": L.to_json(), "retraction": ret.to_json(),
            "replay_ok": ret.covers(), "quasiconvexity": qc,
            "ball": ball.stats(), "citations": [ledger.cite(k) for k in ("A", "B", "C")]}, 0


def _walk(space, path, length, avoid=()):
    """Extend ``path`` by ``length`` tree steps, preferring short coset reps."""
    tree = space.tree
    path = list(path)
    avoid = set(avoid)
    for _ in range(length):
        inc, _ = tree.incident_edges(path[-1], 1)
        nxt = [far for _, _, far, _ in inc if far not in path and far not in avoid]
        if not nxt:
            raise BudgetError("could not extend the tree geodesic")
        path.append(nxt[0])
    return path


def _centered_lift(space, left, right, start):
    """Nearest-point lift over reversed(left) + right, both starting at ``start``."""
    l = qi_lift(space, left, start)
    r = qi_lift(space, right, start)
    return QILift(left[::-1] + right[1:], l.points[::-1] + r.points[1:],
                  l.jumps[::-1] + r.jumps, "nearest")


def cmd_flare(gog, p, ledger, args):
    space = TreeOfSpaces(gog)
    n = int(p["n"])
    center = space.tree.base_vertex()
    right = _walk(space, [center], n)
    left = _walk(space, [center], n, avoid=right[1:2])
    V = gog.group(center.vtype)
    # offset along the first edge image so the lifts stay apart across that edge
    eid = next((e for e in gog.edges_at(center.vtype)
                if gog.edge_group(e).gen_elements()), None)
    step = (gog.origin_map(eid).image(gog.edge_group(eid).gen_elements()[0])
            if eid is not None else V.gen_elements()[0])
    off = V.identity
    for _ in range(int(p["offset"])):
        off = V.mul(off, step)
    start1 = space.base_point()
    start2 = SpacePoint(center, off)
    l1 = _centered_lift(space, left, right, start1)
    l2 = _centered_lift(space, left, right, start2)
    ledger.record("K_lift", max(l1.K, l2.K), "measured", "nearest-point lift jumps")
    rep = flare_probe(space, l1, l2, ledger)
    rep["path"] = [gog.format_path(x.rep) for x in l1.path]
    return rep, 0


def cmd_limitset(gog, p, ledger, args):
    space = TreeOfSpaces(gog)
    D0 = _D0(space, ledger, p)
    if p.get("dconfig") is not None:
        D = ledger.record("D_config", Fraction(p["dconfig"]), "configured", "command-line")
    else:
        D = ledger.record("D_config", default_dconfig(D0), "computed", "2 (1 + D0)")
    w1, w2 = _adjacent_pair(space)
    stab = space.tree.path_stabilizer(w1, w2)
    reports = []
    for R in [int(r) for r in p["radii"]]:
        ball = pair_ball(space, w1, w2, R, D)
        reports.append(intersection_defect(space, w1, w2, R, D=D, ball=ball, I=stab.local))
    rows = [r.to_json(gog) for r in reports]
    ledger.record("max_defect", max((r["max_defect"] for r in rows
                                     if r["max_defect"] is not None), default=0),
                  "measured", "over all radii")
    if args.csv:
        write_atomic(args.out / "defect.csv", defect_csv(reports))
    return {"w1": gog.format_path(w1.rep), "w2": gog.format_path(w2.rep),
            "I": stab.describe(), "rows": rows}, 0


def cmd_witness(gog, p, ledger, args):
    space = TreeOfSpaces(gog)
    w1, w2 = _adjacent_pair(space)
    pairs = axis_pairs(space, w1, w2, int(p["count"]))
    ball = build_metric_ball(space, [q for pq in pairs for q in pq], 2)
    rep = extract_witnesses(space, pairs, ball, w1, w2)
    ledger.record("bucket_size", len(rep.bucket), "measured", "largest label bucket")
    out = rep.to_json(gog.group(w1.vtype))
    out["all_verified"] = rep.all_verified
    return out, (0 if rep.all_verified else 1)


def cmd_attach(gog, p, ledger, args):
    v = p.get("vertex") or gog.vertices[gog.base]
    V = gog.group(gog.vindex[v])
    gens = p.get("subgroup")
    if gens:
        words = [V.parse(s.strip()) for s in gens.split(";")]
    else:
        vid = gog.vindex[v]
        words = [gog.origin_map(e).image(c) for e in gog.edges_at(vid)[:1]
                 for c in gog.edge_group(e).gen_elements()]
    K = stallings.fold(words, V.rank)
    new = attach_subgroup(gog, v, K)
    write_atomic(args.out / "attached_graph.json", new.dumps())
    return {"vertex": v, "K": [V.format(w) for w in K.basis],
            "validation": new.report.to_json(), "graph": new.to_config()}, \
        (0 if new.report.ok else 1)


HANDLERS = {c: globals()[f"cmd_{c}"] for c in COMMANDS}


# -- driver -------------------------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gogtree", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="bundled example name or JSON path")
    ap.add_argument("--out", default="gogtree-out", type=FsPath, help="report directory")
    ap.add_argument("--seed", type=int, help="sampling seed (ladder)")
    ap.add_argument("--radius", type=int, help="tree radius, fiber radius or measurement ball radius")
    ap.add_argument("--budget", type=int, help="coset word-length budget")
    ap.add_argument("--d0", type=_num, help="override the computed D0")
    ap.add_argument("--d1", type=_num, help="ladder admission threshold (default 2 D0)")
    ap.add_argument("--dconfig", type=_num, help="fellow-traveling threshold (default 2 (1 + D0))")
    ap.add_argument("--depth", type=int, help="ladder depth in tree edges")
    ap.add_argument("--samples", type=int, help="sampled pairs for measurements")
    ap.add_argument("--count", type=int, help="axis pairs for witness extraction")
    ap.add_argument("--radii", type=lambda s: [int(x) for x in s.split(",")],
                    help="comma-separated radii for limitset")
    ap.add_argument("--segment", help="ladder segment 'x,y' in the base fiber")
    ap.add_argument("--vertex", help="vertex for attach")
    ap.add_argument("--subgroup", help="';'-separated generators for attach")
    ap.add_argument("--sweep", help="KEY=V1,V2,... reruns the command per value")
    ap.add_argument("--dot", action="store_true", help="also write a Graphviz file")
    ap.add_argument("--csv", action="store_true", help="also write defect.csv (limitset)")
    return ap


def _parse_sweep(text):
    key, sep, vals = text.partition("=")
    if not sep or not vals:
        raise ValueError(f"bad --sweep {text!r}, expected KEY=V1,V2,...")
    return key.strip(), [_num(v) for v in vals.split(",")]


def run(args) -> int:
    try:
        gog, file_params = load_experiment(args.config)
    except InvalidGraphOfGroups as exc:
        if args.command != "validate":
            raise
        # a failed validation is this command's answer, not an error
        doc = {"command": "validate", "result": exc.report.to_json(), "status": 1}
        write_atomic(args.out / "validate.json", dumps(doc))
        print(f"validate: status 1, report {args.out / 'validate.json'}")
        return 1
    params = merge_params(args.command, file_params, args)
    handler = HANDLERS[args.command]
    ledger = ConstantsLedger()
    if args.sweep:
        key, values = _parse_sweep(args.sweep)
        runs, status = [], 0
        for v in values:
            ledger = ConstantsLedger()
            res, st = handler(gog, {**params, key: v}, ledger, args)
            runs.append({key: v, "result": res, "ledger": ledger.snapshot()})
            status = max(status, st)
        doc = {"command": args.command, "sweep": {"key": key, "values": values},
               "runs": runs, "config": {"graph": gog.to_config(), "params": params}}
    else:
        res, status = handler(gog, params, ledger, args)
        doc = {"command": args.command, "result": res, "ledger": ledger.snapshot(),
               "config": {"graph": gog.to_config(), "params": params}}
    doc["status"] = status
    path = args.out / f"{args.command}.json"
    write_atomic(path, dumps(doc))
    print(f"{args.command}: status {status}, report {path}")
    return status


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run(args)
    except (InvalidGraphOfGroups, ValueError, KeyError, FileNotFoundError,
            BudgetError, stallings.NotInjective) as exc:
        err = {"command": args.command, "error": type(exc).__name__, "message": str(exc)}
        if isinstance(exc, InvalidGraphOfGroups):
            err["validation"] = exc.report.to_json()
        text = dumps(err)
        sys.stdout.write(text)
        try:
            write_atomic(args.out / "error.json", text)
        except OSError:
            pass
        return 3 if isinstance(exc, BudgetError) else 2
