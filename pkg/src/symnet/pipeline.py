"""High-level pipeline: graph analysis, per-component gain analysis,
network quantization design and the monolithic baseline."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .design import QuantizationPlan, design_network_quantization, monolithic_quantization
from .gains import (
    AggregateCert,
    GainMatrices,
    GainsError,
    LambdaVector,
    SmallGainResult,
    aggregate_certificate,
    assemble_gain_matrices,
    check_small_gain,
    find_lambda,
)
from .graph import (
    Condensation,
    DepGraph,
    SccComponent,
    SccPartition,
    build_dependency_graph,
    condense,
    strongly_connected_components,
)
from .netspec import NetworkSpec

__all__ = [
    "NetworkAnalysis",
    "ComponentGains",
    "analyze_network",
    "component_gain_analysis",
    "design_pipeline",
    "monolithic_certificate",
    "monolithic_baseline",
]


@dataclass(frozen=True)
class NetworkAnalysis:
    net: NetworkSpec
    graph: DepGraph
    partition: SccPartition
    condensation: Condensation


def analyze_network(net: NetworkSpec) -> NetworkAnalysis:
    graph = build_dependency_graph(net)
    partition = strongly_connected_components(graph, net)
    return NetworkAnalysis(
        net=net,
        graph=graph,
        partition=partition,
        condensation=condense(graph, partition),
    )


@dataclass(frozen=True)
class ComponentGains:
    matrices: GainMatrices
    small_gain: SmallGainResult
    lam: LambdaVector
    aggregate: AggregateCert


def component_gain_analysis(
    analysis: NetworkAnalysis,
    lambda_overrides: Mapping[int, tuple] | None = None,
) -> dict[int, ComponentGains]:
    """Small-gain test, weight vector and aggregate certificate per
    component. Overrides default to the ones in the network file."""
    net = analysis.net
    overrides = net.lambda_overrides if lambda_overrides is None else lambda_overrides
    out = {}
    for comp in analysis.partition.components:
        gm = assemble_gain_matrices(comp, net)
        sg = check_small_gain(gm)
        user = overrides.get(comp.index)
        if user is None and not sg.ok:
            raise GainsError(
                f"component {comp.index} (subsystems {list(comp.members)}) fails the "
                f"small-gain test with radius {sg.radius}"
            )
        lam = find_lambda(gm, user=user)
        agg = aggregate_certificate(comp, lam, net, analysis.partition)
        out[comp.index] = ComponentGains(matrices=gm, small_gain=sg, lam=lam, aggregate=agg)
    return out


def design_pipeline(net: NetworkSpec, eps) -> tuple[NetworkAnalysis, dict[int, ComponentGains], QuantizationPlan]:
    analysis = analyze_network(net)
    gains = component_gain_analysis(analysis)
    plan = design_network_quantization(
        net,
        analysis.condensation,
        analysis.partition,
        {k: g.aggregate for k, g in gains.items()},
        eps,
    )
    return analysis, gains, plan


def monolithic_certificate(net: NetworkSpec, lam=None) -> AggregateCert:
    """Certificate for the whole network treated as one block: the
    weighted sum over all subsystems with every cross coupling internal.
    The weights come from the network file unless given explicitly."""
    members = tuple(s.id for s in net.subsystems)
    state_box = tuple(iv for m in members for iv in net.subsystem(m).state_box)
    input_box = tuple(iv for m in members for iv in net.subsystem(m).input_box)
    comp = SccComponent(index=1, members=members, state_box=state_box, input_box=input_box)
    partition = SccPartition(components=(comp,))
    gm = assemble_gain_matrices(comp, net)
    if lam is None:
        lam = net.monolithic_lambda
    lam_vec = find_lambda(gm, user=lam)
    return aggregate_certificate(comp, lam_vec, net, partition)


def monolithic_baseline(net: NetworkSpec, eps, lam=None):
    """(exact eta, truncated eta) for the single-block design."""
    return monolithic_quantization(monolithic_certificate(net, lam), eps)
