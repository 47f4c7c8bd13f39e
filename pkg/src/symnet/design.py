"""Quantization-parameter design.

The network-level design peels the component DAG from its terminal
components inward. Each component k receives a precision eps_k (the
requested network precision for the first peel, otherwise the smallest
quantization parameter already chosen among its peel successors) and
then picks one value x for its own quantization parameter and for the
caps imposed on its predecessors:

    x = min(alpha_cap, budget / (L + sigma_self + sum of predecessor slopes))

with budget = rho(alpha_lower(eps_k)) and alpha_cap the largest step
compatible with alpha_upper(x) <= alpha_lower(eps_k). This equal-value
maximal rule makes both design inequalities tight or slack at once.

All arithmetic is exact rational; two deliberate roundings are applied:

* budgets consume the aggregate decay slope rounded half-up to 4
  decimal places (RHO_BUDGET_DECIMALS), the precision used in the
  reference hand calculations for the bundled example;
* reported quantization parameters are truncated (rounded down) to 3
  significant digits, so the published figures remain valid choices.

Downstream consumption (the eps_k of later components) uses the exact
untruncated values.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

from .gains import AggregateCert, GainsError
from .graph import Condensation, SccPartition, leaves, peel_post, peel_post_inverse
from .netspec import LinearGain, LyapunovCert, NetworkSpec
from .numbers import round_decimals_half_up, to_fraction, truncate_significant

__all__ = [
    "DesignError",
    "QuantizationPlan",
    "RHO_BUDGET_DECIMALS",
    "REPORT_SIGNIFICANT_DIGITS",
    "design_rho_slope",
    "check_subsystem_inequalities",
    "solve_equal_value",
    "design_network_quantization",
    "monolithic_quantization",
]

RHO_BUDGET_DECIMALS = 4
REPORT_SIGNIFICANT_DIGITS = 3


class DesignError(ValueError):
    """Quantization design failure."""


def design_rho_slope(cert: AggregateCert | LyapunovCert) -> Fraction:
    """Decay slope as consumed by budgets: rounded half-up to 4 decimal
    places, falling back to the exact slope when rounding would reach 0."""
    rounded = round_decimals_half_up(cert.rho.slope, RHO_BUDGET_DECIMALS)
    return rounded if rounded > 0 else cert.rho.slope


def check_subsystem_inequalities(
    cert: LyapunovCert,
    own_id: int,
    eps_i,
    eta: Mapping[int, Fraction],
) -> bool:
    """Exact check of the two per-subsystem design inequalities:

    L * eta(i) + sum_j sigma_in[j](eta(j)) + sigma_self(eta(i)) <= rho(alpha_lower(eps))
    alpha_upper(eta(i)) <= alpha_lower(eps)
    """
    eps_i = to_fraction(eps_i)
    if eps_i <= 0:
        raise DesignError("precision must be positive")
    eta = {k: to_fraction(v) for k, v in eta.items()}
    if any(v <= 0 for v in eta.values()):
        raise DesignError("quantization parameters must be positive")
    own = eta[own_id]
    lhs = cert.lipschitz * own + cert.sigma_self(own)
    for j, gain in cert.sigma_in.items():
        if not gain.absent:
            lhs += gain(eta[j])
    bound = cert.rho(cert.alpha_lower(eps_i))
    return lhs <= bound and cert.alpha_upper(own) <= cert.alpha_lower(eps_i)


def solve_equal_value(
    lipschitz,
    sigma_self: LinearGain,
    pred_slopes: Sequence[Fraction],
    budget,
    alpha_cap,
) -> tuple[Fraction, Fraction]:
    """Equal-value maximal rule: the component's own parameter and every
    predecessor cap are set to the same x, maximised against the budget.

    Returns (exact x, x truncated to 3 significant digits).
    """
    lipschitz = to_fraction(lipschitz)
    budget = to_fraction(budget)
    alpha_cap = to_fraction(alpha_cap)
    if budget <= 0:
        raise DesignError("budget must be positive")
    denom = lipschitz + sigma_self.slope + sum(to_fraction(s) for s in pred_slopes)
    if denom == 0:
        raise DesignError("degenerate certificate: no term consumes the budget")
    x = min(alpha_cap, budget / denom)
    if x <= 0:
        raise DesignError("no positive quantization parameter exists")
    return x, truncate_significant(x, REPORT_SIGNIFICANT_DIGITS)


@dataclass(frozen=True)
class QuantizationPlan:
    """Designed quantization parameters plus the audit trail.

    ``eta_bar_raw`` holds the exact values consumed during the run;
    ``eta_bar`` and ``eta`` are the truncated reported figures. The
    recheck maps record, per component, whether the design inequalities
    hold at the final values using the recorded exact precisions and
    using precisions recomputed from the truncated figures.
    """

    epsilon: Fraction
    eps_k: Mapping[int, Fraction]
    eta_bar_raw: Mapping[int, Fraction]
    eta_bar: Mapping[int, Fraction]
    eta_raw: Mapping[int, Fraction]
    eta: Mapping[int, Fraction]
    audit: tuple[dict, ...]
    recheck_recorded: Mapping[int, bool]
    recheck_truncated: Mapping[int, bool]

    def __post_init__(self):
        for name in ("eps_k", "eta_bar_raw", "eta_bar", "eta_raw", "eta",
                     "recheck_recorded", "recheck_truncated"):
            object.__setattr__(self, name, dict(getattr(self, name)))
        if any(v <= 0 for v in self.eta_bar.values()):
            raise DesignError("every designed parameter must be positive")


def _component_inequalities(
    agg: AggregateCert,
    cond: Condensation,
    eps_k: Fraction,
    eta_bar: Mapping[int, Fraction],
) -> bool:
    k = agg.component
    own = eta_bar[k]
    lhs = agg.lipschitz * own + agg.sigma_self(own)
    for j in peel_post_inverse(cond, k):
        gain = agg.sigma_in.get(j)
        if gain is not None and not gain.absent:
            lhs += gain(eta_bar[j])
    bound = design_rho_slope(agg) * agg.alpha_lower(eps_k)
    return lhs <= bound and agg.alpha_upper(own) <= agg.alpha_lower(eps_k)


def design_network_quantization(
    net: NetworkSpec,
    condensation: Condensation,
    partition: SccPartition,
    aggregates: Mapping[int, AggregateCert],
    eps,
    batch_order: Callable[[Sequence[int]], Sequence[int]] = sorted,
) -> QuantizationPlan:
    """Peel the component DAG and choose all quantization parameters.

    ``batch_order`` fixes the processing order inside one peel sweep
    (ascending component index by default); the outcome is order
    independent because caps combine by minimum.
    """
    eps = to_fraction(eps)
    if eps <= 0:
        raise DesignError("network precision must be positive")
    n_comp = condensation.n_components
    if set(aggregates) != set(range(1, n_comp + 1)):
        raise DesignError("need one aggregate certificate per component")

    remaining = set(range(1, n_comp + 1))
    first_sweep = True
    first_batch: set[int] = set()
    eps_k: dict[int, Fraction] = {}
    chosen: dict[int, Fraction] = {}
    caps: dict[int, list[Fraction]] = {k: [] for k in remaining}
    audit: list[dict] = []

    while remaining:
        batch = list(batch_order(leaves(condensation, remaining)))
        if not batch:
            raise AssertionError("peel stalled; condensation must be acyclic")
        for k in batch:
            agg = aggregates[k]
            if first_sweep:
                eps_value = eps
                eps_source = "network precision"
            else:
                successors = peel_post(condensation, k)
                eps_value = min(
                    min(chosen[j], *caps[j]) if caps[j] else chosen[j] for j in successors
                )
                eps_source = f"min over successors {sorted(successors)}"
            eps_k[k] = eps_value

            rho = design_rho_slope(agg)
            budget = rho * agg.alpha_lower(eps_value)
            alpha_cap = agg.alpha_lower(eps_value) / agg.alpha_upper.slope
            preds = sorted(peel_post_inverse(condensation, k))
            pred_slopes = [
                aggregates[k].sigma_in.get(j, LinearGain(0)).slope for j in preds
            ]
            try:
                x, x_trunc = solve_equal_value(
                    agg.lipschitz, agg.sigma_self, pred_slopes, budget, alpha_cap
                )
            except DesignError as err:
                raise DesignError(f"component {k}: {err}") from None
            chosen[k] = x
            for j in preds:
                caps[j].append(x)
            audit.append(
                {
                    "event": "component processed",
                    "component": k,
                    "eps": eps_value,
                    "eps_source": eps_source,
                    "budget": budget,
                    "alpha_cap": alpha_cap,
                    "chosen": x,
                    "chosen_truncated": x_trunc,
                    "caps_imposed_on": preds,
                }
            )
        if first_sweep:
            first_batch = set(batch)
            first_sweep = False
        remaining -= set(batch)

    eta_bar_raw = {
        k: min(chosen[k], *caps[k]) if caps[k] else chosen[k] for k in chosen
    }
    eta_bar = {k: truncate_significant(v, REPORT_SIGNIFICANT_DIGITS) for k, v in eta_bar_raw.items()}
    for k in sorted(eta_bar_raw):
        if caps[k]:
            audit.append(
                {
                    "event": "caps applied",
                    "component": k,
                    "chosen": chosen[k],
                    "caps": sorted(caps[k]),
                    "final": eta_bar_raw[k],
                }
            )

    eta_raw = {}
    eta = {}
    for comp in partition.components:
        for m in comp.members:
            eta_raw[m] = eta_bar_raw[comp.index]
            eta[m] = eta_bar[comp.index]

    recheck_recorded = {}
    recheck_truncated = {}
    for k in sorted(eta_bar_raw):
        agg = aggregates[k]
        recheck_recorded[k] = _component_inequalities(agg, condensation, eps_k[k], eta_bar_raw)
        if k in first_batch:
            eps_trunc = eps
        else:
            eps_trunc = min(eta_bar[j] for j in peel_post(condensation, k))
        recheck_truncated[k] = _component_inequalities(agg, condensation, eps_trunc, eta_bar)
        if not recheck_recorded[k]:
            raise DesignError(
                f"component {k}: design inequalities fail at the recorded precision"
            )

    return QuantizationPlan(
        epsilon=eps,
        eps_k=eps_k,
        eta_bar_raw=eta_bar_raw,
        eta_bar=eta_bar,
        eta_raw=eta_raw,
        eta=eta,
        audit=tuple(audit),
        recheck_recorded=recheck_recorded,
        recheck_truncated=recheck_truncated,
    )


def monolithic_quantization(cert_star, eps) -> tuple[Fraction, Fraction]:
    """Largest uniform quantization parameter for the whole network
    treated as one block: eta = min(alpha_cap, budget / (L + sigma_self)),
    no external coupling terms. Returns (exact, truncated)."""
    eps = to_fraction(eps)
    if eps <= 0:
        raise DesignError("precision must be positive")
    if cert_star.rho.slope <= 0:
        raise DesignError("infeasible certificate: decay slope is not positive")
    rho = design_rho_slope(cert_star)
    budget = rho * cert_star.alpha_lower(eps)
    alpha_cap = cert_star.alpha_lower(eps) / cert_star.alpha_upper.slope
    return solve_equal_value(cert_star.lipschitz, cert_star.sigma_self, (), budget, alpha_cap)
