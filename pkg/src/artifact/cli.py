"""Command-line front door: one binary, one subcommand per module.

Every subcommand takes ``--seed``, ``--budget`` and ``--format``; all
randomness flows from ``--seed``.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
from collections import Counter
from pathlib import Path

from . import suite as suite_mod
from .agents import (agent_from_document, cooperative_from_document,
                     machine_from_document, noncooperative, run_cooperative, run_pebble_machine,
                     run_single)
from .corpus import corpus_descriptor, exhaustive_corpus, manifest, sampled_corpus
from .graph import (GraphError, PortLabeledGraph, from_document, generate, koucky_regularize,
                    parse, regular_extension, serialize, to_document, to_dot, validate)
from .pebblesim import TapeLayout, build_simulator, explore_loglog, simulate
from .reductions import check_pebbles_to_agents, check_states_to_pebbles
from .sequences import (closed_walk_sequence_3regular, find_uxs_bruteforce, follow,
                        general_graph_sequence, generator_walk, verify_universal)
from .traps import (Barrier, alternator, as_cooperative, barrier_document, build_rbarrier, build_trap,
                    cautious_pair, oscillator, rotor, trap_structure_audit, verify_barrier,
                    verify_trap)

ZOO = {
    "oscillator": lambda: oscillator(0),
    "rotor1": lambda: rotor(1),
    "rotor2": lambda: rotor(2),
    "alternator": alternator,
    "cautious_pair": cautious_pair,
    "rotor_oscillator": lambda: noncooperative([rotor(1), oscillator(0)]),
}


class InputError(Exception):
    """A malformed input file; the message carries the file name and position."""


# --- input -----------------------------------------------------------------------

def _read_json(path: str) -> object:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc


def load_graph(path: str) -> PortLabeledGraph:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from exc
    try:
        return parse(text)
    except GraphError as exc:
        raise InputError(f"{path}: {exc}") from exc


def load_agents(ref: str):
    """A zoo name (``zoo:NAME``) or an agent / cooperative / noncooperative document."""
    if ref.startswith("zoo:"):
        name = ref[4:]
        if name not in ZOO:
            raise InputError(f"unknown zoo agent {name!r}; known: {', '.join(sorted(ZOO))}")
        return as_cooperative(ZOO[name]())
    doc = _read_json(ref)
    if not isinstance(doc, dict):
        raise InputError(f"{ref}: agent document must be an object")
    kind = doc.get("kind", "agent")
    try:
        if kind == "agent":
            return as_cooperative(agent_from_document(doc))
        if kind == "cooperative":
            return cooperative_from_document(doc)
        if kind == "noncooperative":
            return noncooperative([agent_from_document(a) for a in doc["agents"]])
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{ref}: bad agent document: {exc}") from exc
    raise InputError(f"{ref}: unknown agent document kind {kind!r}")


def load_single_agent(path: str):
    if path.startswith("zoo:"):
        spec = load_agents(path)
        if spec.k != 1:
            raise InputError(f"{path} is a set of {spec.k} agents; use `run agents`")
        return ZOO[path[4:]]()
    doc = _read_json(path)
    try:
        return agent_from_document(doc)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{path}: bad agent document: {exc}") from exc


# --- output ----------------------------------------------------------------------

def emit(args, doc, *, rows: list[dict] | None = None, graph: PortLabeledGraph | None = None) -> None:
    """Write ``doc`` in the requested format to ``--out`` or stdout."""
    fmt = args.format
    if fmt == "dot":
        if graph is None:
            raise InputError("--format dot is only available for commands that output a graph")
        text = to_dot(graph)
    elif fmt == "csv":
        if rows is None:
            rows = [doc] if isinstance(doc, dict) else list(doc)
        buf = io.StringIO()
        cols: list[str] = []
        for r in rows:
            cols += [c for c in r if c not in cols]
        w = csv.DictWriter(buf, cols, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: json.dumps(v) if isinstance(v, (list, dict)) else v for k, v in r.items()})
        text = buf.getvalue()
    else:
        text = json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n"
    out = getattr(args, "out", None)
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# --- graph -------------------------------------------------------------------------

def cmd_graph(args) -> int:
    if args.action == "generate":
        params = {"n": args.n} if args.n is not None else {}
        g = generate(args.kind, params, seed=args.seed)
    else:
        g = load_graph(args.file)
    if args.action == "validate":
        rep = validate(g)
        emit(args, {"ok": rep.ok, "violations": rep.messages()})
        return 0 if rep.ok else 1
    if args.action == "regularize":
        g, _ = koucky_regularize(g)
    elif args.action == "extend":
        g, _ = regular_extension(g)
    if args.format == "json":
        text = serialize(g).decode()
        if args.out:
            Path(args.out).write_text(text)
        else:
            sys.stdout.write(text)
    else:
        emit(args, to_document(g), rows=to_document(g)["edges"], graph=g)
    return 0


# --- seq ---------------------------------------------------------------------------

def cmd_seq(args) -> int:
    if args.action == "certify":
        entries = exhaustive_corpus(args.n, all_labelings=True)
        entries = [e for e in entries if e.graph.vertex_count <= args.n]
        cert = find_uxs_bruteforce(args.n, 3, [e.graph for e in entries], corpus_descriptor(entries),
                                   node_budget=args.budget or 5_000_000)
        emit(args, cert.to_document())
        return 0
    if args.action == "walk":
        w = generator_walk(args.z, args.seed)
        emit(args, {"z": w.z, "length": len(w), "offsets": list(w.offsets)})
        return 0
    offsets = [int(x) for x in args.offsets.split(",")] if args.offsets else list(generator_walk(args.z, args.seed).offsets)
    if args.closed:
        offsets = list(closed_walk_sequence_3regular(offsets).offsets)
    if args.lift:
        offsets = list(general_graph_sequence(offsets).offsets)
    g = load_graph(args.graph)
    if args.action == "follow":
        w = follow(g, args.start, offsets)
        emit(args, {"vertices": list(w.vertices), "distinct": w.distinct, "closed": w.closed})
        return 0
    rep = verify_universal(offsets, [g], target=args.target, require_closed=args.closed)
    emit(args, {"ok": rep.ok, "checked": rep.checked, "failure": rep.failure})
    return 0 if rep.ok else 1


# --- run ---------------------------------------------------------------------------

def cmd_run(args) -> int:
    g = load_graph(args.graph)
    steps = args.budget or 10_000
    if args.kind == "agent":
        a = load_single_agent(args.agent)
        tr = run_single(a, g, args.start, steps)
    elif args.kind == "agents":
        tr = run_cooperative(load_agents(args.agent), g, args.start, steps)
    else:
        doc = _read_json(args.agent)
        T = machine_from_document(doc)
        if args.m is not None:
            layout = TapeLayout.desk_layout(args.m, args.m1)
            run = simulate(build_simulator(T, layout, seed=args.seed), g, args.start, budget=args.budget)
            emit(args, run.report.to_document())
            return 0
        tr = run_pebble_machine(T, g, args.start, steps)
    if args.format == "csv":
        text = tr.to_csv()
        (Path(args.out).write_text(text) if args.out else sys.stdout.write(text))
        return 0
    emit(args, {"steps": tr.steps, "traversals": tr.traversals, "halted": tr.halted,
                "visited": len(tr.visited()), "walks": {str(k): v for k, v in tr.walks.items()}})
    return 0


# --- compile -------------------------------------------------------------------------

def cmd_compile(args) -> int:
    a = load_single_agent(args.agent)
    g = load_graph(args.graph)
    steps = args.budget or 200
    if args.reduction == "states-to-pebbles":
        res = check_states_to_pebbles(a, g, args.start, steps)
        ok = res["reproduced"] and res["ratio_ok"]
        res["witness"] = str(res["witness"])
    else:
        res = check_pebbles_to_agents(a, g, args.start, steps, port_aware=args.port_aware)
        inv = res.pop("invariant")
        res["invariant_ok"] = inv.ok
        res["invariant_first_violation"] = None if inv.ok else {
            "step": inv.first_violation["step"], "problems": inv.first_violation["problems"]}
        res["agent_traversals"] = {str(k): v for k, v in res["agent_traversals"].items()}
        ok = res["reproduced"] and res["ratio_ok"] and inv.ok
    emit(args, res)
    return 0 if ok else 1


# --- explore -------------------------------------------------------------------------

def cmd_explore(args) -> int:
    if args.graph:
        rep = explore_loglog(load_graph(args.graph), args.start, seed=args.seed, mode=args.mode,
                             budget=args.budget)
        doc = rep.to_document()
        emit(args, doc, rows=[{k: v for k, v in doc.items() if k not in ("iterations", "constants")}])
        return 0 if rep.visited_all and rep.final_vertex == rep.start else 1
    rows = suite_mod.explore_sweep(args.seed, args.max_n)
    if args.format == "csv":
        text = suite_mod.sweep_csv(rows)
        (Path(args.out).write_text(text) if args.out else sys.stdout.write(text))
    else:
        emit(args, rows)
    return 0 if all(r["visited_all"] and r["returned"] for r in rows) else 1


# --- barrier and trap --------------------------------------------------------------

def _barrier_from_document(doc: dict) -> Barrier:
    g = from_document(doc["graph"])
    (u, v), (u2, v2) = doc["distinguished"]
    return Barrier(g, int(doc["rank"]), u, v, u2, v2, doc.get("evidence", {}), doc.get("structure", {}))


def cmd_barrier(args) -> int:
    spec = load_agents(args.agents)
    if args.action == "build":
        b = build_rbarrier(spec, args.rank, cap=args.max_alpha, seed=args.seed,
                           max_steps=args.budget or 2_000_000, debug=False)
        doc = barrier_document(b)
        doc["evidence"] = b.evidence
        doc["graph"] = to_document(b.graph)
        emit(args, doc, graph=b.graph)
        return 0 if b.evidence.get("verdict") != "counterexample" else 1
    doc = _read_json(args.barrier)
    try:
        b = _barrier_from_document(doc)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{args.barrier}: bad barrier document: {exc}") from exc
    ev = verify_barrier(b, spec, args.rank or b.rank, max_steps=args.budget or 2_000_000)
    emit(args, ev.to_document())
    return 0 if ev.verdict == "verified" else 1


def cmd_trap(args) -> int:
    spec = load_agents(args.agents)
    if args.action == "build":
        t = build_trap(spec, cap=args.max_alpha, seed=args.seed, verify_barriers=args.verify_barriers,
                       max_steps=args.budget or 2_000_000)
        doc = to_document(t.graph)
        doc["start"] = t.start
        doc["audit"] = trap_structure_audit(t)
        doc["barrier"] = barrier_document(t.barrier)
        emit(args, doc, graph=t.graph)
        return 0
    g = load_graph(args.graph)
    start = args.start
    if start is None:
        raw = _read_json(args.graph)
        start = raw.get("start", 0) if isinstance(raw, dict) else 0
    ev = verify_trap(g, spec, start, max_steps=args.budget or 2_000_000)
    emit(args, ev.to_document())
    return 0 if ev.verdict == "trapped" else 1


# --- suite ---------------------------------------------------------------------------

def cmd_suite(args) -> int:
    only = [int(x) for x in args.only.split(",")] if args.only else None
    core = [k for k in (only or range(1, 11)) if k != 10]
    results, sweep = suite_mod.run_suite(args.seed, core)
    files = suite_mod.bundle_files(results, sweep, seed=args.seed)
    if not args.no_rerun and (only is None or 10 in only):
        results.append(suite_mod.crit10(args.seed, files=files, only=core if only else None))
        files = suite_mod.bundle_files(results, sweep, seed=args.seed)
    if args.out:
        suite_mod.write_bundle(args.out, files)
    for r in results:
        print(r.line())
    return 0 if all(r.passed for r in results) else 1


# --- corpus --------------------------------------------------------------------------

def _entry_hash(entry: dict) -> str:
    blob = json.dumps({"vertex_count": entry["vertex_count"], "edges": entry["edges"]},
                      separators=(",", ":"), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def _manifest_hash(entries: list[dict]) -> str:
    return hashlib.sha256("".join(e["hash"] for e in entries).encode()).hexdigest()


def cmd_corpus(args) -> int:
    if args.action == "make":
        entries = exhaustive_corpus(min(args.max_n, 12), all_labelings=args.all_labelings)
        if args.samples:
            entries += [e for e in sampled_corpus(args.samples, seed=args.seed or 20240601)
                        if e.graph.vertex_count <= args.max_n]
        docs = manifest(entries)
        for d in docs:
            d["hash"] = _entry_hash(d)
        counts = Counter(d["vertex_count"] for d in docs)
        emit(args, {"entries": docs, "counts": {str(n): counts[n] for n in sorted(counts)},
                    "hash": _manifest_hash(docs)})
        return 0
    doc = _read_json(args.manifest)
    entries = doc.get("entries", []) if isinstance(doc, dict) else []
    if args.action == "list":
        rows = [{"name": e["name"], "source": e["source"], "vertex_count": e["vertex_count"],
                 "hash": e["hash"]} for e in entries]
        emit(args, {"counts": doc.get("counts", {}), "entries": rows}, rows=rows)
        return 0
    bad = [e["name"] for e in entries if _entry_hash(e) != e.get("hash")]
    total_ok = _manifest_hash(entries) == doc.get("hash")
    emit(args, {"ok": not bad and total_ok, "mismatched_entries": bad, "manifest_hash_ok": total_ok})
    return 0 if not bad and total_ok else 1


# --- parser --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--budget", type=int, default=argparse.SUPPRESS,
                        help="step budget for runs and searches")
    common.add_argument("--format", choices=("json", "csv", "dot"), default=argparse.SUPPRESS)
    common.add_argument("--out", default=argparse.SUPPRESS, help="write output here instead of stdout")

    p = argparse.ArgumentParser(prog="artifact", parents=[common],
                                description="Graph exploration with pebbles, agents and traps.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("graph", parents=[common], help="generate, validate and transform graphs")
    g.add_argument("action", choices=("generate", "validate", "regularize", "extend", "show"))
    g.add_argument("file", nargs="?", help="graph file (all actions but generate)")
    g.add_argument("--kind", default="k4")
    g.add_argument("--n", type=int)
    g.set_defaults(func=cmd_graph)

    s = sub.add_parser("seq", parents=[common], help="exploration sequences")
    s.add_argument("action", choices=("certify", "walk", "follow", "verify"))
    s.add_argument("--n", type=int, default=6, help="certify: largest cubic corpus size")
    s.add_argument("--z", type=int, default=4)
    s.add_argument("--graph")
    s.add_argument("--start", type=int, default=0)
    s.add_argument("--offsets", help="comma-separated offsets (default: the generator walk for --z)")
    s.add_argument("--closed", action="store_true", help="apply the closed-walk construction first")
    s.add_argument("--lift", action="store_true", help="lift to general graphs")
    s.add_argument("--target", type=int)
    s.set_defaults(func=cmd_seq)

    r = sub.add_parser("run", parents=[common], help="run an agent, agent set or pebble machine")
    r.add_argument("kind", choices=("agent", "agents", "machine"))
    r.add_argument("--agent", required=True, help="agent, agent set or machine document")
    r.add_argument("--graph", required=True)
    r.add_argument("--start", type=int, default=0)
    r.add_argument("--m", type=int, help="machine: simulate with desk layout (m, m1)")
    r.add_argument("--m1", type=int)
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("compile", parents=[common], help="run a reduction and check the reproduction")
    c.add_argument("reduction", choices=("states-to-pebbles", "pebbles-to-agents"))
    c.add_argument("--agent", required=True)
    c.add_argument("--graph", required=True)
    c.add_argument("--start", type=int, default=0)
    c.add_argument("--port-aware", action="store_true")
    c.set_defaults(func=cmd_compile)

    e = sub.add_parser("explore", parents=[common], help="log log explorer on a graph or the corpus")
    e.add_argument("--graph")
    e.add_argument("--start", type=int, default=0)
    e.add_argument("--mode", choices=("collapsed", "literal"), default="collapsed")
    e.add_argument("--max-n", type=int, default=200)
    e.set_defaults(func=cmd_explore)

    b = sub.add_parser("barrier", parents=[common], help="build or verify r-barriers")
    b.add_argument("action", choices=("build", "verify"))
    b.add_argument("--agents", required=True, help="agent document or zoo:NAME")
    b.add_argument("--rank", type=int, default=1)
    b.add_argument("--barrier", help="verify: barrier document")
    b.add_argument("--max-alpha", type=int, default=4096)
    b.set_defaults(func=cmd_barrier)

    t = sub.add_parser("trap", parents=[common], help="build or verify traps")
    t.add_argument("action", choices=("build", "verify"))
    t.add_argument("--agents", required=True, help="agent document or zoo:NAME")
    t.add_argument("--graph", help="verify: graph document (may carry a start vertex)")
    t.add_argument("--start", type=int)
    t.add_argument("--max-alpha", type=int, default=4096)
    t.add_argument("--verify-barriers", action="store_true")
    t.set_defaults(func=cmd_trap)

    u = sub.add_parser("suite", parents=[common], help="run the acceptance suite")
    u.add_argument("--only", help="comma-separated criterion numbers")
    u.add_argument("--no-rerun", action="store_true", help="skip the determinism rerun")
    u.set_defaults(func=cmd_suite)

    k = sub.add_parser("corpus", parents=[common], help="corpus manifests with content hashes")
    k.add_argument("action", choices=("make", "list", "hash"))
    k.add_argument("--max-n", type=int, default=10)
    k.add_argument("--all-labelings", action="store_true")
    k.add_argument("--samples", type=int, default=0)
    k.add_argument("--manifest")
    k.set_defaults(func=cmd_corpus)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    # argparse binds an optional positional before later options are seen,
    # so `graph show --format dot FILE` leaves FILE over; put it back
    if len(extra) == 1 and not extra[0].startswith("-") and getattr(args, "file", "") is None:
        args.file = extra[0]
    elif extra:
        parser.error("unrecognized arguments: " + " ".join(extra))
    for name, default in (("seed", 0), ("budget", None), ("format", "json"), ("out", None)):
        if not hasattr(args, name):
            setattr(args, name, default)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"artifact: error: {exc}", file=sys.stderr)
        return 2
