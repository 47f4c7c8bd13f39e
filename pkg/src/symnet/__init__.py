"""Compositional symbolic abstractions for networks of discrete-time
nonlinear control systems: dependency analysis, small-gain aggregation,
quantization design and desk-scale approximate-bisimulation checks."""

from .abstraction import (
    OUT_OF_DOMAIN,
    Lattice,
    SymbolicModel,
    build_component_model,
    build_symbolic_model,
    complexity_counts,
    lattice_of_box,
    load_model,
    quantize_point,
    save_model,
)
from .bisim import (
    BisimReport,
    ComposedSystem,
    ExplicitSystem,
    LevelRelation,
    MetricRelation,
    Relation,
    check_relation,
    compose,
    compose_explicit,
    composed_successor,
    explicit_system,
    greatest_bisimulation,
    reference_model,
)
from .bundled import example_network, toy_autonomous_pair, toy_pair, toy_single
from .design import (
    QuantizationPlan,
    check_subsystem_inequalities,
    design_network_quantization,
    monolithic_quantization,
    solve_equal_value,
)
from .expr import eval_expr, free_variables, parse_expression
from .gains import (
    AggregateCert,
    GainMatrices,
    LambdaVector,
    aggregate_certificate,
    assemble_gain_matrices,
    check_small_gain,
    find_lambda,
    sample_decrease_inequality,
    spectral_radius,
)
from .graph import (
    Condensation,
    DepGraph,
    SccPartition,
    build_dependency_graph,
    condense,
    leaves,
    post,
    post_inverse,
    strongly_connected_components,
)
from .netspec import LinearGain, LyapunovCert, NetworkSpec, Subsystem, load_network
from .pipeline import (
    analyze_network,
    component_gain_analysis,
    design_pipeline,
    monolithic_baseline,
    monolithic_certificate,
)

__version__ = "0.1.0"
