"""Command-line entry point ``spinal-lab``.

Exit codes: 0 success, 1 a validation or check failed, 2 usage error.
Every run writes a manifest (argv, parameters, digests, timing) next to its
output file, or to stderr when there is no output file.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import random
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .analysis import (
    beta_from_nu,
    certify_dimensions,
    critical_p,
    lemma4_bounds_check,
    nash_curve,
    volume_lower_bound_check,
)
from .generators import PlateSpec, plates, random_glued, vicsek
from .graph import GraphError, ball_intersection_min_ratio, build_graph, safe_radii, volume_table
from .io import (
    FormatError,
    dumps_report,
    dumps_spinal,
    edges_csv,
    nash_csv,
    read_document,
    to_dot,
    volumes_csv,
    walk_csv,
)
from .spinal import (
    SpinalError,
    SpinalGraph,
    canonical_form,
    check_fiber_geodesics,
    decompose,
    glue,
    spinal_volume_table,
    validate_bruteforce,
    validate_structural,
)
from .walk import return_probabilities_exact, return_probabilities_mc


class UsageError(Exception):
    pass


# -- manifest ---------------------------------------------------------------------------


@dataclass
class RunManifest:
    argv: list[str]
    command: str
    parameters: dict
    seed: int | None
    version: str = __version__
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    wall_seconds: float = 0.0
    exit_code: int = 0


def sha256_file(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


class Run:
    """Collects inputs/outputs of one command for the manifest."""

    def __init__(self, argv: list[str], args: argparse.Namespace):
        params = {k: v for k, v in vars(args).items() if k not in ("func",) and not callable(v)}
        self.manifest = RunManifest(list(argv), args.command, params, getattr(args, "seed", None))
        self.out_path: Path | None = Path(args.out) if getattr(args, "out", None) else None
        self.start = time.perf_counter()

    def read(self, path: str) -> dict:
        try:
            doc = read_document(path)
        except OSError as exc:
            raise UsageError(f"cannot read {path}: {exc}") from exc
        self.manifest.inputs[str(path)] = sha256_file(path)
        return doc

    def write(self, text: str, path: str | Path | None = None) -> None:
        target = Path(path) if path is not None else self.out_path
        if target is None:
            sys.stdout.write(text)
            return
        target.write_text(text)
        self.manifest.outputs[str(target)] = hashlib.sha256(text.encode()).hexdigest()

    def finish(self, code: int) -> None:
        self.manifest.wall_seconds = time.perf_counter() - self.start
        self.manifest.exit_code = code
        text = json.dumps(asdict(self.manifest), sort_keys=True, default=str) + "\n"
        if self.out_path is not None:
            Path(str(self.out_path) + ".manifest.json").write_text(text)
        else:
            sys.stderr.write(text)


# -- helpers -----------------------------------------------------------------------------


def parse_seq(text: str) -> list[int]:
    """``geometric:base=B,count=K[,start=S]`` -> S*B^k for k = 0..K-1 (rounded, deduplicated)."""
    kind, _, rest = text.partition(":")
    if kind != "geometric":
        raise UsageError(f"unknown sequence kind {kind!r}")
    try:
        params = dict(item.split("=", 1) for item in rest.split(",") if item)
        base = float(params.pop("base"))
        count = int(params.pop("count"))
        start = float(params.pop("start", 1))
    except (KeyError, ValueError) as exc:
        raise UsageError(f"bad sequence {text!r}: expected geometric:base=B,count=K") from exc
    if params:
        raise UsageError(f"unknown sequence parameters {sorted(params)}")
    if base <= 1 or count < 1 or start < 1:
        raise UsageError("need base > 1, count >= 1, start >= 1")
    seq = sorted({int(round(start * base**k)) for k in range(count)})
    return seq


def load_spinal_doc(run: Run, path: str, validate: bool = True) -> tuple[SpinalGraph, dict]:
    doc = run.read(path)
    try:
        g = build_graph(doc["edges"], vertex_count=doc["vertex_count"], boundary=doc.get("boundary", ()))
        if "spine" in doc:
            sg = SpinalGraph(g, doc["spine"], doc["pi"], validate=validate)
        else:
            sg = SpinalGraph(g, range(g.vertex_count), range(g.vertex_count))
    except (KeyError, TypeError, GraphError, SpinalError) as exc:
        raise UsageError(f"{path}: not a valid spinal graph document ({exc})") from exc
    return sg, doc


def default_center(doc: dict, given: int | None) -> int:
    if given is not None:
        return given
    return int(doc.get("provenance", {}).get("center", 0))


# -- generate ----------------------------------------------------------------------------


def cmd_generate(args, run: Run) -> int:
    if args.family == "vicsek":
        v = vicsek(args.dim, args.level, size_budget=args.budget)
        prov = {"generator": "vicsek", "dim": args.dim, "level": args.level, "center": v.center}
        run.write(dumps_spinal(v.spinal, prov))
    elif args.family == "plates":
        spec = PlateSpec(args.D, int(args.delta), args.length, args.provider, args.seed)
        pg = plates(spec)
        prov = {"generator": "plates", "D": args.D, "delta": int(args.delta), "length": args.length,
                "provider": args.provider, "seed": args.seed, "center": 0}
        run.write(dumps_spinal(pg.spinal, prov))
    elif args.family == "random":
        sg = random_glued(args.seed, args.length, args.max_fiber_size)
        prov = {"generator": "random", "skeleton_size": args.length,
                "max_fiber_size": args.max_fiber_size, "seed": args.seed, "center": 0}
        run.write(dumps_spinal(sg, prov))
    elif args.family == "glue":
        sdoc = run.read(args.skeleton)
        skel = build_graph(sdoc["edges"], vertex_count=sdoc["vertex_count"])
        fibers = []
        for path in args.fiber:
            doc = run.read(path)
            fibers.append(build_graph(doc["edges"], vertex_count=doc["vertex_count"]))
        if len(fibers) == 1:
            fibers = fibers * skel.vertex_count
        z = args.z if args.z else [0] * skel.vertex_count
        if len(z) == 1:
            z = z * skel.vertex_count
        sg = glue(skel, fibers, z)
        prov = {"generator": "glue", "skeleton": args.skeleton, "fibers": list(args.fiber), "z": list(z)}
        run.write(dumps_spinal(sg, prov))
    return 0


# -- validate ------------------------------------------------------------------------------


def cmd_validate(args, run: Run) -> int:
    doc = run.read(args.file)
    try:
        g = build_graph(doc["edges"], vertex_count=doc["vertex_count"], boundary=doc.get("boundary", ()))
    except (KeyError, TypeError, GraphError) as exc:
        report = {"ok": False, "violations": [{"kind": "malformed", "detail": str(exc)}]}
        run.write(dumps_report(report))
        return 1
    report = validate_structural(g, doc.get("spine", []), doc.get("pi", []))
    out = report.to_json()
    if args.bruteforce and report.ok:
        out["bruteforce"] = validate_bruteforce(g, doc["spine"], doc["pi"], node_budget=args.budget)
    run.write(dumps_report(out))
    return 0 if report.ok and out.get("bruteforce", True) else 1


# -- analyze ---------------------------------------------------------------------------------


def cmd_analyze(args, run: Run) -> int:
    sg, doc = load_spinal_doc(run, args.file)
    center = default_center(doc, getattr(args, "center", None))
    if args.what == "volumes":
        if args.spinal:
            vols = spinal_volume_table(sg, center, args.rmax).tolist()
        else:
            vols = list(volume_table(sg.graph, center, args.rmax).volumes)
        run.write(volumes_csv(vols))
        return 0
    if args.what == "dims":
        cert = certify_dimensions(sg, center, parse_seq(args.seq), args.delta_sigma, args.delta_g,
                                  args.threshold, args.threshold, args.threshold)
        run.write(dumps_report(cert.to_json()))
        return 0 if cert.passed else 1
    if args.what == "nash":
        beta = args.beta if args.beta is not None else beta_from_nu(args.nu if args.nu is not None else args.delta_g)
        curve = nash_curve(sg, center, args.p, beta, parse_seq(args.seq), args.delta_sigma, args.delta_g)
        run.write(nash_csv(curve))
        summary = {"slope": curve.slope, "max_residual": curve.fit.max_residual,
                   "predicted_slope": curve.predicted_slope, "beta": beta}
        sys.stderr.write(dumps_report(summary))
        if curve.predicted_slope is not None:
            return 0 if curve.slope_law_holds(args.tolerance) else 1
        return 0
    if args.what == "vlb":
        rng = random.Random(args.seed)
        pool = np.flatnonzero(safe_radii(sg.graph) >= args.rmax).tolist()
        if not pool:
            raise UsageError(f"no vertex has safe radius >= {args.rmax}")
        centers = sorted(rng.sample(pool, min(args.samples, len(pool))))
        res = volume_lower_bound_check(sg.graph, args.D, centers, range(1, args.rmax + 1))
        run.write(dumps_report({"D": res.D, "min_constant": res.min_constant, "argmin": list(res.argmin),
                                "samples": res.samples}))
        return 0 if res.min_constant > 0 else 1
    raise UsageError(args.what)


# -- check -------------------------------------------------------------------------------------


def cmd_check(args, run: Run) -> int:
    if args.what == "equivalence":
        doc = run.read(args.file)
        g = build_graph(doc["edges"], vertex_count=doc["vertex_count"])
        structural = validate_structural(g, doc["spine"], doc["pi"]).ok
        brute = validate_bruteforce(g, doc["spine"], doc["pi"], node_budget=args.budget)
        run.write(dumps_report({"structural": structural, "bruteforce": brute, "agree": structural == brute}))
        return 0 if structural == brute else 1
    sg, doc = load_spinal_doc(run, args.file)
    center = default_center(doc, args.center)
    if args.what == "lemma2":
        rep = check_fiber_geodesics(sg)
        run.write(dumps_report({"ok": rep.ok, "pairs_checked": rep.pairs_checked,
                                "violations": [list(v) for v in rep.violations]}))
        return 0 if rep.ok else 1
    if args.what == "roundtrip":
        before = canonical_form(sg)
        after = canonical_form(decompose(sg).glue())
        ok = before == after
        run.write(dumps_report({"ok": ok, "vertices": sg.vertex_count}))
        return 0 if ok else 1
    if args.what == "ball-intersection":
        ys = sg.spine.tolist() if args.spine_only else list(range(sg.vertex_count))
        safe = safe_radii(sg.graph)
        ys = [y for y in ys if safe[y] >= 3 * args.rmax]
        rep = ball_intersection_min_ratio(sg.graph, ys, range(1, args.rmax + 1),
                                          budget=args.budget, seed=args.seed)
        ok = rep.min_ratio > 0 and rep.case1_count > 0 and rep.case2_count > 0
        run.write(dumps_report({"ok": ok, "min_ratio": rep.min_ratio, "argmin": list(rep.argmin),
                                "case1_count": rep.case1_count, "case2_count": rep.case2_count,
                                "tuples": rep.tuples, "exhaustive": rep.exhaustive}))
        return 0 if ok else 1
    if args.what == "lemma4":
        reports = [lemma4_bounds_check(sg, center, n, args.p) for n in parse_seq(args.seq)]
        ok = all(r.ok for r in reports)
        rows = [{"n": r.n, "ok": r.ok, "norm1_ok": r.norm1_ok, "normp_ok": r.normp_ok, "grad_ok": r.grad_ok,
                 "support_ok": r.support_ok, "grad_support_ok": r.grad_support_ok, "constants": r.constants}
                for r in reports]
        run.write(dumps_report({"ok": ok, "p": args.p, "center": center, "results": rows}))
        return 0 if ok else 1
    raise UsageError(args.what)


# -- pc / walk / export -----------------------------------------------------------------------------


def cmd_pc(args, run: Run) -> int:
    value = critical_p(args.delta_sigma, args.delta_g, args.nu)
    if run.out_path is not None:
        run.write(dumps_report({"p_c": value}))
    print(repr(value))
    return 0


def cmd_walk(args, run: Run) -> int:
    sg, doc = load_spinal_doc(run, args.file, validate=False)
    center = default_center(doc, args.center)
    if args.mode == "exact":
        series = return_probabilities_exact(sg.graph, center, args.tmax)
    else:
        series = return_probabilities_mc(sg.graph, center, args.tmax, args.walkers, args.seed)
    run.write(walk_csv(series))
    return 0


def cmd_export(args, run: Run) -> int:
    sg, _ = load_spinal_doc(run, args.file, validate=False)
    if args.what == "dot":
        run.write(to_dot(sg.graph, sg.spine))
    else:
        run.write(edges_csv(sg.graph))
    return 0


# -- parser ---------------------------------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spinal-lab", allow_abbrev=False,
                                description="Spinal graphs: generation, validation and analysis.")
    p.add_argument("--version", action="version", version=f"spinal-lab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out=True, seed=False):
        if out:
            sp.add_argument("--out", metavar="PATH", help="output file (stdout if omitted)")
        if seed:
            sp.add_argument("--seed", type=int, default=0, metavar="U64")

    gen = sub.add_parser("generate", help="build a graph family", allow_abbrev=False)
    gsub = gen.add_subparsers(dest="family", required=True)
    g = gsub.add_parser("vicsek", allow_abbrev=False,
                        help="Vicsek graph V^dim_level with its diagonal spine")
    g.add_argument("--dim", type=int, required=True, metavar="N")
    g.add_argument("--level", type=int, required=True, metavar="M")
    g.add_argument("--budget", type=int, default=20_000_000, metavar="N", help="maximum vertex count")
    common(g)
    g = gsub.add_parser("plates", allow_abbrev=False,
                        help="plate construction: a ray with ℓ¹-ball fibres of radius floor(n^alpha)")
    g.add_argument("--D", type=float, required=True, metavar="REAL")
    g.add_argument("--delta", type=float, required=True, metavar="REAL")
    g.add_argument("--length", type=int, required=True, metavar="N")
    g.add_argument("--provider", default="lattice", help="fibre provider (lattice, king, mixed)")
    common(g, seed=True)
    g = gsub.add_parser("glue", allow_abbrev=False,
                        help="glue fibre graphs to a skeleton along distinguished vertices")
    g.add_argument("--skeleton", required=True, metavar="PATH")
    g.add_argument("--fiber", action="append", required=True, metavar="PATH",
                   help="one per skeleton vertex, or a single fibre used everywhere")
    g.add_argument("--z", type=int, action="append", metavar="ID", help="distinguished vertex per fibre")
    common(g)
    g = gsub.add_parser("random", allow_abbrev=False, help="seeded random glued spinal graph")
    g.add_argument("--length", type=int, default=8, metavar="N", help="skeleton size")
    g.add_argument("--max-fiber-size", type=int, default=4, metavar="N")
    common(g, seed=True)
    gen.set_defaults(func=cmd_generate)

    v = sub.add_parser("validate", allow_abbrev=False,
                       help="check the spinal structure (π fixes Σ, connected fibres, cross edges on Σ)")
    v.add_argument("file")
    v.add_argument("--bruteforce", action="store_true", help="also enumerate simple paths (small graphs)")
    v.add_argument("--budget", type=int, default=5_000_000, metavar="N")
    common(v)
    v.set_defaults(func=cmd_validate)

    an = sub.add_parser("analyze", help="volumes, dimensions, Nash curves, volume lower bounds",
                        allow_abbrev=False)
    asub = an.add_subparsers(dest="what", required=True)
    a = asub.add_parser("volumes", allow_abbrev=False, help="ball (or spinal-set) volume table, CSV r,volume")
    a.add_argument("file")
    a.add_argument("--center", type=int, metavar="ID")
    a.add_argument("--rmax", type=int, required=True, metavar="N")
    a.add_argument("--spinal", action="store_true", help="tabulate |D(x, r)| instead of |B(x, r)|")
    common(a)
    a = asub.add_parser("dims", allow_abbrev=False,
                        help="certificate for the dimension pair (delta_sigma, delta_g) along a sequence")
    a.add_argument("file")
    a.add_argument("--center", type=int, metavar="ID")
    a.add_argument("--seq", required=True)
    a.add_argument("--delta-sigma", type=float, required=True, metavar="REAL")
    a.add_argument("--delta-g", type=float, required=True, metavar="REAL")
    a.add_argument("--threshold", type=float, default=8.0, metavar="REAL")
    common(a)
    a = asub.add_parser("nash", allow_abbrev=False,
                        help="Nash ratio along the test functions g_2n, CSV n,norm1,normp,gradp,ratio")
    a.add_argument("file")
    a.add_argument("--center", type=int, metavar="ID")
    a.add_argument("--p", type=float, required=True, metavar="REAL")
    a.add_argument("--beta", type=float, metavar="REAL")
    a.add_argument("--nu", type=float, metavar="REAL", help="use beta = 2 nu / (nu + 1)")
    a.add_argument("--seq", required=True)
    a.add_argument("--delta-sigma", type=float, metavar="REAL")
    a.add_argument("--delta-g", type=float, metavar="REAL")
    a.add_argument("--tolerance", type=float, default=0.15, metavar="REAL")
    common(a)
    a = asub.add_parser("vlb", allow_abbrev=False, help="volume lower bound min |B(x,r)|/r^D over sampled x")
    a.add_argument("file")
    a.add_argument("--D", type=float, required=True, metavar="REAL")
    a.add_argument("--rmax", type=int, required=True, metavar="N")
    a.add_argument("--samples", type=int, default=50, metavar="N")
    common(a, seed=True)
    an.set_defaults(func=cmd_analyze)

    ch = sub.add_parser("check", help="executable versions of the structural lemmas", allow_abbrev=False)
    csub = ch.add_subparsers(dest="what", required=True)
    c = csub.add_parser("lemma2", allow_abbrev=False, help="geodesics between points of one fibre stay in it")
    c.add_argument("file")
    c.add_argument("--center", type=int, metavar="ID")
    common(c)
    c = csub.add_parser("roundtrip", allow_abbrev=False, help="glue(decompose(G)) equals G after renumbering")
    c.add_argument("file")
    c.add_argument("--center", type=int, metavar="ID")
    common(c)
    c = csub.add_parser("ball-intersection", allow_abbrev=False,
                        help="min |B(x,r) ∩ B(y,R)| / |B(x,r)|, counting r > 2d(x,y) and r <= 2d(x,y) separately")
    c.add_argument("file")
    c.add_argument("--center", type=int, metavar="ID")
    c.add_argument("--rmax", type=int, required=True, metavar="N", help="largest R")
    c.add_argument("--budget", type=int, default=2_000_000, metavar="N")
    c.add_argument("--spine-only", action="store_true", help="sample centres y on the spine only")
    common(c, seed=True)
    c = csub.add_parser("lemma4", allow_abbrev=False, help="norm and gradient bounds for the test functions")
    c.add_argument("file")
    c.add_argument("--center", type=int, metavar="ID")
    c.add_argument("--seq", required=True)
    c.add_argument("--p", type=float, required=True, metavar="REAL")
    common(c)
    c = csub.add_parser("equivalence", allow_abbrev=False,
                        help="structural validator versus simple-path enumeration (small graphs)")
    c.add_argument("file")
    c.add_argument("--budget", type=int, default=5_000_000, metavar="N")
    common(c)
    ch.set_defaults(func=cmd_check)

    pc = sub.add_parser("pc", allow_abbrev=False,
                        help="critical exponent 2(δG-δΣ)/(δG/ν' - 2δΣ + 2) for the Riesz transform")
    pc.add_argument("--delta-sigma", type=float, required=True, metavar="REAL")
    pc.add_argument("--delta-g", type=float, required=True, metavar="REAL")
    pc.add_argument("--nu", type=float, required=True, metavar="REAL")
    common(pc)
    pc.set_defaults(func=cmd_pc)

    w = sub.add_parser("walk", allow_abbrev=False,
                       help="return probabilities p_t(x,x) of the simple random walk, CSV t,p_return")
    w.add_argument("file")
    w.add_argument("--center", type=int, metavar="ID")
    w.add_argument("--tmax", type=int, default=200, metavar="N")
    w.add_argument("--mode", choices=("exact", "mc"), default="exact")
    w.add_argument("--walkers", type=int, default=100_000, metavar="N")
    common(w, seed=True)
    w.set_defaults(func=cmd_walk)

    ex = sub.add_parser("export", help="DOT or CSV edge list", allow_abbrev=False)
    esub = ex.add_subparsers(dest="what", required=True)
    for fmt in ("dot", "csv"):
        e = esub.add_parser(fmt, allow_abbrev=False)
        e.add_argument("file")
        common(e)
    ex.set_defaults(func=cmd_export)
    return p


def run(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    job = Run(argv, args)
    try:
        code = args.func(args, job)
    except (UsageError, FormatError, ValueError) as exc:
        # preconditions and malformed inputs are usage errors
        print(f"spinal-lab: error: {exc}", file=sys.stderr)
        code = 2
    job.finish(code)
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
