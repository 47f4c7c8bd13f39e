"""Command-line front end.

Every command emits one JSON report on stdout. Reports are deterministic
for a given input except for the ``timing`` subtree; numeric fields carry
an exact decimal (or fraction) string alongside a double. A nonzero exit
code comes with a machine-readable error object instead of a report.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from fractions import Fraction
from pathlib import Path

from . import __version__
from .abstraction import build_component_model, build_symbolic_model, complexity_counts, save_model
from .bisim import LevelRelation, check_relation, compose, compose_explicit, explicit_system
from .bundled import EXAMPLE_NETWORK_TOML, toy_autonomous_pair, toy_pair, toy_single
from .design import design_rho_slope, monolithic_quantization
from .graph import leaves, peel_post_inverse
from .netspec import parse_network_text
from .numbers import decimal_string, to_fraction
from .pipeline import (
    analyze_network,
    component_gain_analysis,
    design_pipeline,
    monolithic_certificate,
)

TCOMPLEX_CONVENTION_WARNING = (
    "time-complexity totals are sensitive to the label-space convention; "
    "the restricted convention counts in-neighbour slots at the neighbours' "
    "own steps and drops inputs the dynamics never read"
)


def _num(x) -> dict:
    if isinstance(x, Fraction):
        return {"decimal": decimal_string(x), "float": float(x)}
    if isinstance(x, int):
        return {"decimal": str(x), "float": float(x)}
    return {"decimal": repr(float(x)), "float": float(x)}


def _jsonable(obj):
    if isinstance(obj, Fraction):
        return _num(obj)
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        items = sorted(obj) if isinstance(obj, (set, frozenset)) else obj
        return [_jsonable(v) for v in items]
    return obj


class _Stages:
    """Collects per-stage results and wall-clock seconds."""

    def __init__(self):
        self.stages: dict[str, dict] = {}
        self.timing: dict[str, float] = {}
        self.warnings: list[str] = []

    def run(self, name: str, fn):
        start = time.perf_counter()
        self.stages[name] = fn()
        self.timing[name] = time.perf_counter() - start


def _load(path: str):
    data = Path(path).read_bytes()
    net = parse_network_text(data.decode("utf-8"))
    return net, {"source": str(path), "sha256": hashlib.sha256(data).hexdigest()}


def _analyze_stages(net, collector: _Stages):
    analysis = analyze_network(net)

    def graph_stage():
        return {
            "vertices": net.n,
            "edges": [list(e) for e in sorted(analysis.graph.edges)],
        }

    def scc_stage():
        return {
            "components": [
                {"index": c.index, "members": list(c.members)}
                for c in analysis.partition.components
            ]
        }

    def condensation_stage():
        cond = analysis.condensation
        full = set(range(1, cond.n_components + 1))
        return {
            "edges": [list(e) for e in sorted(cond.edges)],
            "peel_edges": [list(e) for e in sorted(cond.peel_edges)],
            "leaves": sorted(leaves(cond, full)),
        }

    collector.run("graph", graph_stage)
    collector.run("scc", scc_stage)
    collector.run("condensation", condensation_stage)
    return analysis


def _gain_stages(analysis, collector: _Stages):
    gains = component_gain_analysis(analysis)

    def small_gain_stage():
        out = {}
        for k, g in gains.items():
            entry = {"radius": g.small_gain.radius, "ok": g.small_gain.ok}
            if g.small_gain.warning:
                entry["warning"] = g.small_gain.warning
                collector.warnings.append(f"component {k}: {g.small_gain.warning}")
            out[str(k)] = entry
        return out

    def lambda_stage():
        return {
            str(k): {
                "entries": [_num(v) for v in g.lam.entries],
                "provenance": g.lam.provenance,
            }
            for k, g in gains.items()
        }

    def aggregates_stage():
        out = {}
        for k, g in gains.items():
            agg = g.aggregate
            out[str(k)] = {
                "members": list(agg.members),
                "lipschitz": _num(agg.lipschitz),
                "alpha_lower": _num(agg.alpha_lower.slope),
                "alpha_upper": _num(agg.alpha_upper.slope),
                "rho": _num(agg.rho.slope),
                "rho_design": _num(design_rho_slope(agg)),
                "sigma_self": _num(agg.sigma_self.slope),
                "sigma_in": {str(j): _num(v.slope) for j, v in agg.sigma_in.items()},
            }
        return out

    collector.run("small_gain", small_gain_stage)
    collector.run("lambda", lambda_stage)
    collector.run("aggregates", aggregates_stage)
    return gains


def _plan_stage(net, analysis, gains, eps, collector: _Stages):
    from .design import design_network_quantization

    plan = design_network_quantization(
        net,
        analysis.condensation,
        analysis.partition,
        {k: g.aggregate for k, g in gains.items()},
        eps,
    )

    def plan_stage():
        return {
            "epsilon": _num(plan.epsilon),
            "components": {
                str(k): {
                    "eps": _num(plan.eps_k[k]),
                    "eta_bar_raw": _num(plan.eta_bar_raw[k]),
                    "eta_bar": _num(plan.eta_bar[k]),
                    "recheck_recorded": plan.recheck_recorded[k],
                    "recheck_truncated": plan.recheck_truncated[k],
                }
                for k in sorted(plan.eta_bar)
            },
            "eta": {str(i): _num(plan.eta[i]) for i in sorted(plan.eta)},
            "audit": [_jsonable(event) for event in plan.audit],
        }

    collector.run("plan", plan_stage)
    return plan


def cmd_analyze(args) -> tuple[dict, dict, list[str]]:
    net, digest = _load(args.network)
    collector = _Stages()
    _analyze_stages(net, collector)
    return collector.stages, {"input": digest, "timing": collector.timing}, collector.warnings


def cmd_design(args):
    net, digest = _load(args.network)
    collector = _Stages()
    analysis = _analyze_stages(net, collector)
    gains = _gain_stages(analysis, collector)
    _plan_stage(net, analysis, gains, to_fraction(args.epsilon), collector)
    return collector.stages, {"input": digest, "timing": collector.timing}, collector.warnings


def cmd_build(args):
    net, digest = _load(args.network)
    collector = _Stages()
    analysis = _analyze_stages(net, collector)
    gains = _gain_stages(analysis, collector)
    plan = _plan_stage(net, analysis, gains, to_fraction(args.epsilon), collector)

    ids = [args.subsystem] if args.subsystem else [s.id for s in net.subsystems]
    mode = "explicit" if args.explicit else "lazy"

    def models_stage():
        out = {}
        for i in ids:
            model = build_symbolic_model(
                net, i, plan, mode=mode, convention=args.convention, dep_graph=analysis.graph
            )
            entry = {
                "mode": model.mode,
                "states": _num(model.state_lattice.cardinality),
                "labels": _num(model.label_count),
                "scomplex": _num(model.scomplex),
                "tcomplex": _num(model.tcomplex),
                "neighbors": list(model.neighbor_ids),
            }
            if model.table is not None:
                entry["out_of_domain"] = int((model.table < 0).sum())
                entry["boundary_flags"] = model.boundary_flags
                if model.boundary_flags:
                    collector.warnings.append(
                        f"subsystem {i}: {model.boundary_flags} successors within "
                        "tolerance of a cell boundary"
                    )
                if args.out:
                    target = Path(args.out) / f"subsystem-{i}.table"
                    target.parent.mkdir(parents=True, exist_ok=True)
                    save_model(model, target)
                    entry["table_file"] = str(target)
            out[str(i)] = entry
        return out

    collector.run("models", models_stage)
    return collector.stages, {"input": digest, "timing": collector.timing}, collector.warnings


def _toy_checks(eps: Fraction, refine: int, collector: _Stages):
    def single_stage():
        net = toy_single()
        cert = monolithic_certificate(net, lam=(1,))
        eta_raw, eta = monolithic_quantization(cert, eps)
        abs_model = build_symbolic_model(net, 1, {1: eta}, mode="explicit")
        ref_model = build_symbolic_model(net, 1, {1: eta / refine}, mode="explicit")
        rel = LevelRelation(weights=(Fraction(1),), bound=cert.alpha_lower(eps))
        report = check_relation(explicit_system(ref_model), explicit_system(abs_model), eps, rel)
        return {
            "network": "toy-single",
            "eta": _num(eta),
            "refine": refine,
            **report.as_dict(),
        }

    def identity_stage():
        net = toy_pair()
        eta = Fraction(1, 10)
        block = build_component_model(net, (1, 2), eta, mode="explicit")
        members = [
            build_symbolic_model(net, i, {1: eta, 2: eta}, mode="explicit") for i in (1, 2)
        ]
        composed = compose_explicit(compose(members))
        direct = explicit_system(block)
        agree = bool((composed.table == direct.table).all())
        return {
            "network": "toy-pair",
            "eta": _num(eta),
            "joint_states": direct.n_states,
            "joint_labels": direct.n_labels,
            "verdict": "pass" if agree else "fail",
        }

    def block_stage():
        net = toy_autonomous_pair()
        block_eps = Fraction(2, 5)
        analysis, gains, plan = design_pipeline(net, block_eps)
        k = 1
        agg = gains[k].aggregate
        eta_bar = plan.eta_bar[k]
        abs_model = build_component_model(net, agg.members, eta_bar, mode="explicit")
        ref_model = build_component_model(net, agg.members, eta_bar / refine, mode="explicit")
        rel = LevelRelation(weights=agg.lam.entries, bound=agg.alpha_lower(plan.eps_k[k]))
        report = check_relation(
            explicit_system(ref_model), explicit_system(abs_model), plan.eps_k[k], rel
        )
        return {
            "network": "toy-autonomous-pair",
            "eps": _num(block_eps),
            "eta_bar": _num(eta_bar),
            "refine": refine,
            **report.as_dict(),
        }

    collector.run("single_subsystem_precision", single_stage)
    collector.run("pair_composition_identity", identity_stage)
    collector.run("pair_block_relation", block_stage)


def _network_checks(net, eps: Fraction, refine: int, collector: _Stages):
    analysis, gains, plan = design_pipeline(net, eps)

    def checks_stage():
        out = {}
        for comp in analysis.partition.components:
            agg = gains[comp.index].aggregate
            eta_bar = plan.eta_bar[comp.index]
            externals = {j: plan.eta[j] for j in range(1, net.n + 1) if j not in comp.members}
            abs_model = build_component_model(
                net, comp.members, eta_bar, external_etas=externals, mode="explicit"
            )
            ref_ext = {j: v / refine for j, v in externals.items()}
            ref_model = build_component_model(
                net, comp.members, eta_bar / refine, external_etas=ref_ext, mode="explicit"
            )
            rel = LevelRelation(
                weights=agg.lam.entries, bound=agg.alpha_lower(plan.eps_k[comp.index])
            )
            report = check_relation(
                explicit_system(ref_model),
                explicit_system(abs_model),
                plan.eps_k[comp.index],
                rel,
            )
            out[str(comp.index)] = {
                "members": list(comp.members),
                "eta_bar": _num(eta_bar),
                **report.as_dict(),
            }
        return out

    collector.run("component_checks", checks_stage)


def cmd_verify(args):
    collector = _Stages()
    refine = args.refine
    eps = to_fraction(args.epsilon)
    if args.toy:
        digest = None
        _toy_checks(eps, refine, collector)
    else:
        net, digest = _load(args.network)
        _network_checks(net, eps, refine, collector)
    failed = [
        name
        for name, stage in collector.stages.items()
        if stage.get("verdict") == "fail"
        or any(isinstance(v, dict) and v.get("verdict") == "fail" for v in stage.values())
    ]
    if failed:
        collector.warnings.append(f"failing checks: {', '.join(sorted(failed))}")
    return (
        collector.stages,
        {"input": digest, "timing": collector.timing, "failed": bool(failed)},
        collector.warnings,
    )


def cmd_complexity(args):
    net, digest = _load(args.network)
    collector = _Stages()
    analysis = _analyze_stages(net, collector)
    gains = _gain_stages(analysis, collector)
    plan = _plan_stage(net, analysis, gains, to_fraction(args.epsilon), collector)

    def complexity_stage():
        counts = complexity_counts(
            net,
            plan,
            convention=args.convention,
            monolithic_eta=args.monolithic_eta,
            dep_graph=analysis.graph,
        )
        out = {
            "convention": counts["convention"],
            "per_subsystem": {
                str(i): {key: _num(value) for key, value in entry.items()}
                for i, entry in counts["per_subsystem"].items()
            },
            "total_scomplex": _num(counts["total_scomplex"]),
            "total_tcomplex": _num(counts["total_tcomplex"]),
        }
        if "monolithic" in counts:
            out["monolithic"] = {k: _num(v) for k, v in counts["monolithic"].items()}
        collector.warnings.append(TCOMPLEX_CONVENTION_WARNING)
        return out

    collector.run("complexity", complexity_stage)
    return collector.stages, {"input": digest, "timing": collector.timing}, collector.warnings


def cmd_example(args):
    collector = _Stages()

    def write_stage():
        Path(args.out).write_text(EXAMPLE_NETWORK_TOML, encoding="utf-8")
        return {
            "written": str(args.out),
            "sha256": hashlib.sha256(EXAMPLE_NETWORK_TOML.encode("utf-8")).hexdigest(),
        }

    collector.run("example", write_stage)
    return collector.stages, {"input": None, "timing": collector.timing}, collector.warnings


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="symnet",
        description="Compositional symbolic abstractions for networks of control systems",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="dependency graph, components, component DAG")
    p.add_argument("network")

    p = sub.add_parser("design", help="small-gain analysis and quantization design")
    p.add_argument("network")
    p.add_argument("--epsilon", required=True)

    p = sub.add_parser("build", help="construct symbolic models at the designed steps")
    p.add_argument("network")
    p.add_argument("--epsilon", required=True)
    p.add_argument("--explicit", action="store_true")
    p.add_argument("--subsystem", type=int)
    p.add_argument("--convention", choices=["restricted", "full"], default="restricted")
    p.add_argument("--out")

    p = sub.add_parser("verify", help="desk-scale approximate-bisimulation checks")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--toy", action="store_true")
    group.add_argument("--network")
    p.add_argument("--epsilon", required=True)
    p.add_argument("--refine", type=int, default=8)

    p = sub.add_parser("complexity", help="space/time cost counters")
    p.add_argument("network")
    p.add_argument("--epsilon", required=True)
    p.add_argument("--convention", choices=["restricted", "full"], default="restricted")
    p.add_argument("--monolithic-eta")

    p = sub.add_parser("example", help="write the bundled benchmark network")
    p.add_argument("--out", required=True)

    return parser


_COMMANDS = {
    "analyze": cmd_analyze,
    "design": cmd_design,
    "build": cmd_build,
    "verify": cmd_verify,
    "complexity": cmd_complexity,
    "example": cmd_example,
}


def run(argv) -> tuple[int, dict]:
    """Execute one command; returns (exit code, report or error object)."""
    args = build_parser().parse_args(argv)
    try:
        stages, extra, warnings = _COMMANDS[args.command](args)
    except Exception as err:  # noqa: BLE001  (reported as machine-readable JSON)
        return 1, {
            "error": {
                "command": args.command,
                "type": type(err).__name__,
                "message": str(err),
            }
        }
    report = {
        "tool": {"name": "symnet", "version": __version__},
        "command": args.command,
        "input": extra.get("input"),
        "stages": stages,
        "warnings": warnings,
        "timing": extra.get("timing", {}),
    }
    code = 1 if extra.get("failed") else 0
    return code, report


def main(argv=None) -> int:
    code, report = run(sys.argv[1:] if argv is None else argv)
    json.dump(report, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
