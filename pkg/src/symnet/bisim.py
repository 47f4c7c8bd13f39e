"""Composition of symbolic models and approximate-bisimulation checking.

The composition of per-subsystem models is a lazy product: a joint
transition exists exactly when every member has a transition whose label
is formed from the other members' current states plus its own input.

Relation checking works over explicit finite systems whose outputs are
exact lattice values, so membership and the output metric are decided
with integer arithmetic; only the dynamics behind the tables are ever
floating point. The metric is the infinity norm over all dimensions,
i.e. the max over member distances for composed systems.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .abstraction import (
    OUT_OF_DOMAIN,
    Lattice,
    SymbolicModel,
    build_symbolic_model,
)
from .netspec import NetworkSpec
from .numbers import to_fraction

__all__ = [
    "BisimError",
    "ComposedSystem",
    "ExplicitSystem",
    "Relation",
    "MetricRelation",
    "LevelRelation",
    "ExplicitRelation",
    "BisimReport",
    "compose",
    "composed_successor",
    "reference_model",
    "explicit_system",
    "compose_explicit",
    "check_relation",
    "greatest_bisimulation",
]

PAIR_CAP = 50_000_000


class BisimError(ValueError):
    """Composition or checking failure."""


# --------------------------------------------------------------------------
# composition


@dataclass(frozen=True)
class ComposedSystem:
    """Lazy product of per-subsystem models covering the whole network."""

    models: Mapping[int, SymbolicModel]

    def __post_init__(self):
        object.__setattr__(self, "models", dict(self.models))
        for sid, model in self.models.items():
            for slot, j in enumerate(model.neighbor_ids):
                peer = self.models.get(j)
                if peer is None:
                    raise BisimError(
                        f"model {sid} needs neighbour {j}, which is not part of the composition"
                    )
                if peer.state_lattice != model.neighbor_lattices[slot]:
                    raise BisimError(
                        f"model {sid}: neighbour slot {j} lattice differs from "
                        f"model {j}'s state lattice"
                    )

    @property
    def member_ids(self) -> tuple[int, ...]:
        return tuple(sorted(self.models))

    def successor(
        self,
        states: Mapping[int, Sequence[int]],
        inputs: Mapping[int, Sequence[int]],
    ):
        """Componentwise step; OUT_OF_DOMAIN if any member escapes."""
        out = {}
        for sid in self.member_ids:
            model = self.models[sid]
            nbr = {j: tuple(states[j]) for j in model.neighbor_ids}
            nxt = model.successor(tuple(states[sid]), nbr, tuple(inputs.get(sid, ())))
            if nxt is OUT_OF_DOMAIN:
                return OUT_OF_DOMAIN
            out[sid] = nxt
        return out


def compose(models: Sequence[SymbolicModel]) -> ComposedSystem:
    """Compose per-subsystem models; every in-neighbour of every member
    must itself be a member with an identical lattice."""
    by_id = {}
    for model in models:
        if len(model.members) != 1:
            raise BisimError("compose expects per-subsystem models")
        by_id[model.members[0]] = model
    return ComposedSystem(models=by_id)


def composed_successor(c: ComposedSystem, joint_state, joint_input):
    return c.successor(joint_state, joint_input)


def reference_model(
    net: NetworkSpec,
    eta_ref: Mapping[int, Fraction],
    mode: str = "lazy",
    convention: str = "restricted",
    cap: int = 10**8,
) -> dict[int, SymbolicModel]:
    """Fine-grained models standing in for the continuous network at desk
    scale: the same construction at a refined step (typically a quarter
    of the designed step or finer; a factor of 1 reproduces the
    abstraction itself)."""
    return {
        sub.id: build_symbolic_model(net, sub.id, eta_ref, mode=mode, convention=convention, cap=cap)
        for sub in net.subsystems
    }


# --------------------------------------------------------------------------
# explicit finite systems


@dataclass(frozen=True)
class ExplicitSystem:
    """Finite transition system with exact lattice outputs.

    ``state_axes`` / ``label_axes`` hold (eta, lo, hi) per dimension;
    outputs are eta * index per state dimension. ``table`` maps
    (state, label) to a flat successor state or -1.
    """

    state_axes: tuple[tuple[Fraction, int, int], ...]
    label_axes: tuple[tuple[Fraction, int, int], ...]
    table: np.ndarray

    @property
    def n_states(self) -> int:
        return self.table.shape[0]

    @property
    def n_labels(self) -> int:
        return self.table.shape[1]

    @property
    def dim(self) -> int:
        return len(self.state_axes)

    def state_indices(self) -> np.ndarray:
        """(n_states, dim) int64 index vectors in enumeration order."""
        cards = [hi - lo + 1 for _, lo, hi in self.state_axes]
        flat = np.arange(self.n_states, dtype=np.int64)
        cols = []
        rest = flat.copy()
        for (_, lo, hi), card in zip(reversed(self.state_axes), reversed(cards)):
            cols.append(lo + rest % card)
            rest //= card
        cols.reverse()
        return np.stack(cols, axis=1) if cols else np.zeros((self.n_states, 0), dtype=np.int64)

    def label_indices(self) -> np.ndarray:
        cards = [hi - lo + 1 for _, lo, hi in self.label_axes]
        flat = np.arange(self.n_labels, dtype=np.int64)
        cols = []
        rest = flat.copy()
        for (_, lo, hi), card in zip(reversed(self.label_axes), reversed(cards)):
            cols.append(lo + rest % card)
            rest //= card
        cols.reverse()
        return np.stack(cols, axis=1) if cols else np.zeros((self.n_labels, 0), dtype=np.int64)

    def successor_sets(self) -> np.ndarray:
        """Boolean (n_states, n_states): reachable successors per state."""
        t = np.zeros((self.n_states, self.n_states), dtype=bool)
        for a in range(self.n_states):
            row = self.table[a]
            t[a, row[row >= 0]] = True
        return t


def explicit_system(model: SymbolicModel) -> ExplicitSystem:
    """Adapter from an explicit symbolic model."""
    if model.table is None:
        raise BisimError("explicit checking needs a materialised model")
    state_axes = tuple(
        (model.state_lattice.eta, lo, hi)
        for lo, hi in zip(model.state_lattice.lo, model.state_lattice.hi)
    )
    label_axes = []
    for lat, d in model.label_dims:
        label_axes.append((lat.eta, lat.lo[d], lat.hi[d]))
    return ExplicitSystem(
        state_axes=state_axes, label_axes=tuple(label_axes), table=model.table
    )


def compose_explicit(c: ComposedSystem, cap: int = 10**7) -> ExplicitSystem:
    """Materialise a (small) composition into one explicit system whose
    labels are the joint inputs in ascending member order."""
    ids = c.member_ids
    models = [c.models[i] for i in ids]
    if any(m.table is None for m in models):
        raise BisimError("materialising a composition needs explicit member models")
    state_cards = [m.state_lattice.cardinality for m in models]
    input_cards = [m.input_lattice.cardinality for m in models]
    n_states = math.prod(state_cards)
    n_labels = math.prod(input_cards)
    if n_states * n_labels > cap:
        raise BisimError(f"composition table of {n_states * n_labels} cells exceeds the cap")

    state_axes = []
    label_axes = []
    for m in models:
        state_axes.extend(
            (m.state_lattice.eta, lo, hi)
            for lo, hi in zip(m.state_lattice.lo, m.state_lattice.hi)
        )
        label_axes.extend(
            (m.input_lattice.eta, lo, hi)
            for lo, hi in zip(m.input_lattice.lo, m.input_lattice.hi)
        )

    table = np.empty((n_states, n_labels), dtype=np.int64)
    state_tuples = []

    def tuples_of(card_list):
        return list(np.ndindex(*card_list)) if card_list else [()]

    state_enum = tuples_of(state_cards)
    input_enum = tuples_of(input_cards)
    for sflat, soff in enumerate(state_enum):
        states = {
            sid: models[pos].state_lattice.unflatten(int(soff[pos]))
            for pos, sid in enumerate(ids)
        }
        for lflat, ioff in enumerate(input_enum):
            inputs = {
                sid: models[pos].input_lattice.unflatten(int(ioff[pos]))
                for pos, sid in enumerate(ids)
            }
            nxt = c.successor(states, inputs)
            if nxt is OUT_OF_DOMAIN:
                table[sflat, lflat] = -1
            else:
                flat = 0
                for pos, sid in enumerate(ids):
                    lat = models[pos].state_lattice
                    flat = flat * lat.cardinality + lat.flatten(nxt[sid])
                table[sflat, lflat] = flat
    return ExplicitSystem(
        state_axes=tuple(state_axes), label_axes=tuple(label_axes), table=table
    )


# --------------------------------------------------------------------------
# relations


def _scaled_diff_bound(axes1, axes2, bound: Fraction):
    """Integer scaling for exact |i1*eta1 - i2*eta2| <= bound tests."""
    den = bound.denominator
    for (eta1, _, _), (eta2, _, _) in zip(axes1, axes2):
        den = den * eta1.denominator // math.gcd(den, eta1.denominator)
        den = den * eta2.denominator // math.gcd(den, eta2.denominator)
    scale = Fraction(den)
    p1 = [int(eta1 * scale) for (eta1, _, _) in axes1]
    p2 = [int(eta2 * scale) for (eta2, _, _) in axes2]
    return p1, p2, int(bound * scale)


class Relation:
    """Predicate over state pairs of two explicit systems."""

    def matrix(self, s1: ExplicitSystem, s2: ExplicitSystem) -> np.ndarray:
        raise NotImplementedError

    def inverse(self) -> "Relation":
        return _InverseRelation(self)


class _InverseRelation(Relation):
    def __init__(self, base: Relation):
        self.base = base

    def matrix(self, s1, s2):
        return self.base.matrix(s2, s1).T

    def inverse(self):
        return self.base


@dataclass
class MetricRelation(Relation):
    """Pairs whose outputs are within eps in the infinity norm."""

    eps: Fraction

    def __post_init__(self):
        self.eps = to_fraction(self.eps)

    def matrix(self, s1, s2):
        if s1.dim != s2.dim:
            raise BisimError("systems live in different output spaces")
        p1, p2, bound = _scaled_diff_bound(s1.state_axes, s2.state_axes, self.eps)
        i1 = s1.state_indices()
        i2 = s2.state_indices()
        big = max([bound, 1] + [abs(p) for p in p1 + p2]) * (1 + int(np.abs(np.concatenate([i1.ravel(), i2.ravel(), np.zeros(1, np.int64)])).max()))
        cast = (lambda a: a.astype(object)) if big > 2**62 else (lambda a: a)
        out = np.ones((s1.n_states, s2.n_states), dtype=bool)
        for d in range(s1.dim):
            diff = np.abs(cast(i1[:, d, None]) * p1[d] - cast(i2[None, :, d]) * p2[d])
            out &= diff <= bound
        return out


@dataclass
class LevelRelation(Relation):
    """Pairs with a weighted sum of coordinate distances below a bound,
    the certificate level set sum_d w_d |y1_d - y2_d| <= bound."""

    weights: tuple[Fraction, ...]
    bound: Fraction

    def __post_init__(self):
        self.weights = tuple(to_fraction(w) for w in self.weights)
        self.bound = to_fraction(self.bound)

    def matrix(self, s1, s2):
        if s1.dim != s2.dim or len(self.weights) != s1.dim:
            raise BisimError("weight vector does not match the output dimension")
        terms = []
        for d in range(s1.dim):
            terms.append(
                (self.weights[d] * s1.state_axes[d][0], self.weights[d] * s2.state_axes[d][0])
            )
        den = self.bound.denominator
        for q1, q2 in terms:
            den = den * q1.denominator // math.gcd(den, q1.denominator)
            den = den * q2.denominator // math.gcd(den, q2.denominator)
        scale = Fraction(den)
        i1 = s1.state_indices()
        i2 = s2.state_indices()
        coefs = [(int(q1 * scale), int(q2 * scale)) for q1, q2 in terms]
        max_idx = 1 + int(np.abs(np.concatenate([i1.ravel(), i2.ravel(), np.zeros(1, np.int64)])).max())
        big = max([1] + [abs(c) for pair in coefs for c in pair]) * max_idx * max(1, s1.dim)
        if big > 2**62:
            total = np.zeros((s1.n_states, s2.n_states), dtype=object)
            cast = lambda a: a.astype(object)  # noqa: E731
        else:
            total = np.zeros((s1.n_states, s2.n_states), dtype=np.int64)
            cast = lambda a: a  # noqa: E731
        for d in range(s1.dim):
            c1, c2 = coefs[d]
            total += np.abs(cast(i1[:, d, None]) * c1 - cast(i2[None, :, d]) * c2)
        return total <= int(self.bound * scale)


@dataclass
class ExplicitRelation(Relation):
    pairs: np.ndarray  # boolean (n1, n2)

    def matrix(self, s1, s2):
        if self.pairs.shape != (s1.n_states, s2.n_states):
            raise BisimError("relation matrix shape does not match the systems")
        return self.pairs

    @property
    def is_empty(self) -> bool:
        return not self.pairs.any()

    def contains(self, other: "ExplicitRelation") -> bool:
        return bool((self.pairs | other.pairs == self.pairs).all())


# --------------------------------------------------------------------------
# checking


@dataclass
class BisimReport:
    verdict: bool
    eps: Fraction
    counterexample: dict | None
    stats: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "verdict": "pass" if self.verdict else "fail",
            "eps": float(self.eps),
            "counterexample": self.counterexample,
            "stats": self.stats,
        }


def _canonical_label_map(src: ExplicitSystem, dst: ExplicitSystem) -> np.ndarray | None:
    """Per-label map from src label space to the dst label quantizing each
    coordinate value onto the dst axis (the proofs' witness); -1 where a
    coordinate leaves the dst range. None when the spaces do not pair up
    dimension by dimension."""
    if len(src.label_axes) != len(dst.label_axes):
        return None
    per_dim = []
    for (eta_s, lo_s, hi_s), (eta_d, lo_d, hi_d) in zip(src.label_axes, dst.label_axes):
        lut = np.empty(hi_s - lo_s + 1, dtype=np.int64)
        for offset, i in enumerate(range(lo_s, hi_s + 1)):
            j = math.ceil(i * eta_s / eta_d)
            lut[offset] = j - lo_d if lo_d <= j <= hi_d else -1
        per_dim.append(lut)
    labels = src.label_indices()
    flat = np.zeros(src.n_labels, dtype=np.int64)
    ok = np.ones(src.n_labels, dtype=bool)
    for d, lut in enumerate(per_dim):
        _, lo_s, _ = src.label_axes[d]
        _, lo_d, hi_d = dst.label_axes[d]
        mapped = lut[labels[:, d] - lo_s]
        ok &= mapped >= 0
        flat = flat * (hi_d - lo_d + 1) + np.clip(mapped, 0, None)
    flat[~ok] = -1
    return flat


def _match_direction(
    s_from: ExplicitSystem,
    s_to: ExplicitSystem,
    rel: np.ndarray,  # oriented (n_from, n_to)
    pairs: np.ndarray,
    canon: np.ndarray | None,
    stats: dict,
    direction: str,
):
    """Every transition of s_from at a related pair must be matched by
    some transition of s_to with successors still related. Returns a
    counterexample dict or None. Vectorised over pair chunks; only pairs
    the canonical witness misses fall back to the exhaustive search."""
    n_labels = s_from.n_labels
    table_from = s_from.table
    table_to = s_to.table
    chunk = max(1, (1 << 21) // max(1, n_labels))
    succ_sets: dict[int, np.ndarray] = {}
    for start in range(0, len(pairs), chunk):
        pp = np.ascontiguousarray(pairs[start : start + chunk])
        a_plus = table_from[pp[:, 0]]  # (P, L)
        valid = a_plus >= 0
        stats["transitions_checked"] += int(valid.sum())
        matched = np.zeros_like(valid)
        if canon is not None:
            c_ok = canon >= 0
            b_plus = table_to[pp[:, 1][:, None], np.where(c_ok, canon, 0)[None, :]]
            cand = valid & c_ok[None, :] & (b_plus >= 0)
            if cand.any():
                hits = np.zeros_like(cand)
                hits[cand] = rel[a_plus[cand], b_plus[cand]]
                stats["canonical_hits"] += int(hits.sum())
                matched = hits
        need = valid & ~matched
        for r in np.nonzero(need.any(axis=1))[0]:
            b = int(pp[r, 1])
            if b not in succ_sets:
                row_b = table_to[b]
                succ_sets[b] = np.unique(row_b[row_b >= 0])
            b_set = succ_sets[b]
            miss = np.nonzero(need[r])[0]
            if b_set.size == 0:
                fallback = np.zeros(miss.shape, dtype=bool)
            else:
                fallback = rel[a_plus[r, miss][:, None], b_set[None, :]].any(axis=1)
            stats["fallback_hits"] += int(fallback.sum())
            if not fallback.all():
                return {
                    "direction": direction,
                    "state_pair": [int(pp[r, 0]), b],
                    "unmatched_label": int(miss[np.nonzero(~fallback)[0][0]]),
                }
    return None


def check_relation(
    s1: ExplicitSystem,
    s2: ExplicitSystem,
    eps,
    rel: Relation,
) -> BisimReport:
    """Exhaustive verification that ``rel`` is an eps-approximate
    bisimulation relation between two finite systems and that it covers
    both state sets.

    Out-of-domain transitions impose no matching obligation on either
    side. Transition matching tries the canonical quantized label first
    and falls back to an exhaustive search over the opposite label space;
    the stats record which route succeeded how often.
    """
    eps = to_fraction(eps)
    if s1.n_states * s2.n_states > PAIR_CAP:
        raise BisimError("state-pair space exceeds the checking cap")
    r = rel.matrix(s1, s2)
    stats = {
        "pairs": int(r.sum()),
        "transitions_checked": 0,
        "canonical_hits": 0,
        "fallback_hits": 0,
        "surjective_forward": bool(r.any(axis=1).all()),
        "surjective_backward": bool(r.any(axis=0).all()),
    }

    within = MetricRelation(eps).matrix(s1, s2)
    bad = r & ~within
    if bad.any():
        a, b = np.argwhere(bad)[0]
        return BisimReport(
            verdict=False,
            eps=eps,
            counterexample={"condition": "output distance", "state_pair": [int(a), int(b)]},
            stats=stats,
        )

    pairs = np.argwhere(r)
    cx = _match_direction(s1, s2, r, pairs, _canonical_label_map(s1, s2), stats, "forward")
    if cx is None:
        cx = _match_direction(
            s2, s1, r.T, pairs[:, ::-1], _canonical_label_map(s2, s1), stats, "backward"
        )
        if cx is not None:
            cx["state_pair"] = cx["state_pair"][::-1]
    if cx is not None:
        cx["condition"] = "transition matching"
        return BisimReport(verdict=False, eps=eps, counterexample=cx, stats=stats)

    if not stats["surjective_forward"] or not stats["surjective_backward"]:
        side = "forward" if not stats["surjective_forward"] else "backward"
        hole = (
            int(np.nonzero(~r.any(axis=1))[0][0])
            if side == "forward"
            else int(np.nonzero(~r.any(axis=0))[0][0])
        )
        return BisimReport(
            verdict=False,
            eps=eps,
            counterexample={"condition": f"coverage {side}", "state": hole},
            stats=stats,
        )
    return BisimReport(verdict=True, eps=eps, counterexample=None, stats=stats)


def greatest_bisimulation(
    s1: ExplicitSystem,
    s2: ExplicitSystem,
    eps,
    cap: int = PAIR_CAP,
) -> ExplicitRelation:
    """Greatest eps-approximate bisimulation relation by pair refinement
    from the output-distance relation; an empty result means the systems
    are not bisimilar at eps. Any relation accepted by check_relation is
    contained in the result."""
    eps = to_fraction(eps)
    if s1.n_states * s2.n_states > cap:
        raise BisimError("state-pair space exceeds the fixpoint cap")
    r = MetricRelation(eps).matrix(s1, s2)
    t1f = s1.successor_sets().astype(np.float32)
    t2f = s2.successor_sets().astype(np.float32)
    while True:
        rf = r.astype(np.float32)
        # exists2[b, x1+] : some successor of b is related to x1+
        exists2 = (t2f @ rf.T) > 0
        fwd_bad = (t1f @ (~exists2).T.astype(np.float32)) > 0
        # exists1[a, y2+] : some successor of a is related to y2+
        exists1 = (t1f @ rf) > 0
        bwd_bad = ((~exists1).astype(np.float32) @ t2f.T) > 0
        r_new = r & ~fwd_bad & ~bwd_bad
        if (r_new == r).all():
            return ExplicitRelation(pairs=r_new)
        r = r_new
