"""Quantized state lattices and finite symbolic models.

States are canonical integer index vectors on a lattice eta * Z^n
intersected with a box; eta is an exact rational, real values are
derived on demand. The quantizer maps x to the ceiling index per
coordinate, which keeps every point within eta of its image.

A symbolic model of a subsystem has one deterministic successor per
(state, label) pair, where a label is the tuple of in-neighbour states
plus the subsystem's own quantized input. Successors that leave the
state box are flagged out of domain rather than wrapped or clamped.
"""

from __future__ import annotations

import json
import math
import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .expr import eval_expr
from .graph import DepGraph, build_dependency_graph
from .netspec import NetworkSpec
from .numbers import decimal_string, to_fraction

__all__ = [
    "AbstractionError",
    "OUT_OF_DOMAIN",
    "Lattice",
    "SymbolicModel",
    "quantize_point",
    "lattice_of_box",
    "build_symbolic_model",
    "build_component_model",
    "complexity_counts",
    "save_model",
    "load_model",
    "worker_count",
]

EXPLICIT_TRANSITION_CAP = 10**8
BOUNDARY_REL_TOL = Fraction(1, 10**12)  # successor this close to a cell edge is flagged


class AbstractionError(ValueError):
    """Lattice or model construction failure."""


class _OutOfDomain:
    __slots__ = ()

    def __repr__(self):
        return "OUT_OF_DOMAIN"

    def __bool__(self):
        return False


OUT_OF_DOMAIN = _OutOfDomain()


def worker_count() -> int:
    """Worker cap for explicit construction, from SYMNET_THREADS."""
    raw = os.environ.get("SYMNET_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


@dataclass(frozen=True)
class Lattice:
    """Integer index ranges of (eta Z^n) intersected with a box."""

    eta: Fraction
    lo: tuple[int, ...]
    hi: tuple[int, ...]
    box: tuple[tuple[Fraction, Fraction], ...]

    def __post_init__(self):
        if self.eta <= 0:
            raise AbstractionError("lattice step must be positive")
        for lo_d, hi_d in zip(self.lo, self.hi):
            if lo_d > hi_d:
                raise AbstractionError(
                    f"empty lattice: step {self.eta} too coarse for the box"
                )

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def axis_cards(self) -> tuple[int, ...]:
        return tuple(h - l + 1 for l, h in zip(self.lo, self.hi))

    @property
    def cardinality(self) -> int:
        return math.prod(self.axis_cards)

    def contains(self, idx: Sequence[int]) -> bool:
        return all(l <= i <= h for i, l, h in zip(idx, self.lo, self.hi))

    def value_exact(self, idx: Sequence[int]) -> tuple[Fraction, ...]:
        return tuple(self.eta * i for i in idx)

    def value_float(self, idx: Sequence[int]) -> tuple[float, ...]:
        return tuple(float(self.eta * i) for i in idx)

    def axis_value_table(self, d: int) -> np.ndarray:
        """Doubles of every lattice point on axis d (index lo..hi)."""
        return np.array(
            [float(self.eta * i) for i in range(self.lo[d], self.hi[d] + 1)], dtype=float
        )

    def flatten(self, idx: Sequence[int]) -> int:
        flat = 0
        for i, l, c in zip(idx, self.lo, self.axis_cards):
            flat = flat * c + (i - l)
        return flat

    def unflatten(self, flat: int) -> tuple[int, ...]:
        idx = []
        for l, c in zip(reversed(self.lo), reversed(self.axis_cards)):
            idx.append(l + flat % c)
            flat //= c
        return tuple(reversed(idx))


def lattice_of_box(box: Sequence[tuple], eta) -> Lattice:
    """Lattice over a box with exact rational index ranges."""
    eta = to_fraction(eta)
    box = tuple((to_fraction(lo), to_fraction(hi)) for lo, hi in box)
    lo = tuple(math.ceil(l / eta) for l, _ in box)
    hi = tuple(math.floor(h / eta) for _, h in box)
    return Lattice(eta=eta, lo=lo, hi=hi, box=box)


def quantize_point(x: Sequence[float], eta) -> tuple[int, ...]:
    """Ceiling quantizer index per coordinate, exact: the image value
    eta * index is within eta of x in the infinity norm."""
    eta = to_fraction(eta)
    return tuple(math.ceil(Fraction(float(v)) / eta) for v in x)


def _quantize_array(values, eta: Fraction) -> tuple[np.ndarray, int]:
    """Vectorised ceiling quantizer with an exact fix-up near integers.

    Returns (int64 indices, count of values within BOUNDARY_REL_TOL * eta
    of a lattice point, where double rounding could differ by one cell).
    """
    arr = np.asarray(values, dtype=float)
    flat_vals = arr.reshape(-1)
    num, den = eta.numerator, eta.denominator
    t = flat_vals * den / num
    idx = np.ceil(t).astype(np.int64)
    suspect = np.nonzero(np.abs(t - np.rint(t)) <= 1e-6)[0]
    near = 0
    for pos in suspect:
        q = Fraction(float(flat_vals[pos])) / eta
        exact = math.ceil(q)
        idx[pos] = exact
        frac = exact - q  # in [0, 1)
        if frac <= BOUNDARY_REL_TOL or 1 - frac <= BOUNDARY_REL_TOL:
            near += 1
    return idx.reshape(arr.shape), near


class SymbolicModel:
    """Finite transition system of one subsystem (or one component block).

    ``members`` lists the subsystem ids whose states form the model state
    (a single id for per-subsystem models). Labels are the states of the
    external in-neighbour slots followed by the model's own input block.
    Explicit mode materialises the successor table; lazy mode evaluates
    on demand; both share one evaluation path.
    """

    def __init__(
        self,
        members: tuple[int, ...],
        state_lattice: Lattice,
        neighbor_ids: tuple[int, ...],
        neighbor_lattices: tuple[Lattice, ...],
        input_lattice: Lattice,
        evaluator,
        convention: str,
        member_state_slices: tuple[tuple[int, int], ...],
    ):
        self.members = members
        self.state_lattice = state_lattice
        self.neighbor_ids = neighbor_ids
        self.neighbor_lattices = neighbor_lattices
        self.input_lattice = input_lattice
        self.convention = convention
        self.member_state_slices = member_state_slices
        self._evaluator = evaluator
        self.table: np.ndarray | None = None
        self.boundary_flags = 0

    # --- label space -------------------------------------------------

    @property
    def label_dims(self) -> tuple[tuple[Lattice, int], ...]:
        """(lattice, axis) per label dimension, neighbours then input."""
        dims = []
        for lat in self.neighbor_lattices:
            dims.extend((lat, d) for d in range(lat.dim))
        dims.extend((self.input_lattice, d) for d in range(self.input_lattice.dim))
        return tuple(dims)

    @property
    def label_count(self) -> int:
        count = self.input_lattice.cardinality
        for lat in self.neighbor_lattices:
            count *= lat.cardinality
        return count

    @property
    def scomplex(self) -> int:
        return self.state_lattice.cardinality**2 * self.label_count

    @property
    def tcomplex(self) -> int:
        return self.state_lattice.cardinality * self.label_count

    @property
    def mode(self) -> str:
        return "explicit" if self.table is not None else "lazy"

    def label_flat(self, neighbor_states: Mapping[int, Sequence[int]], input_idx: Sequence[int]) -> int:
        flat = 0
        for j, lat in zip(self.neighbor_ids, self.neighbor_lattices):
            idx = neighbor_states[j]
            if not lat.contains(idx):
                raise AbstractionError(f"neighbour {j} state {idx} outside its lattice")
            flat = flat * lat.cardinality + lat.flatten(idx)
        flat = flat * self.input_lattice.cardinality + self.input_lattice.flatten(input_idx)
        return flat

    # --- transitions ---------------------------------------------------

    def successor(
        self,
        state: Sequence[int],
        neighbor_states: Mapping[int, Sequence[int]] | None = None,
        input_idx: Sequence[int] = (),
    ):
        """One transition; OUT_OF_DOMAIN if the quantized image leaves
        the state lattice."""
        neighbor_states = neighbor_states or {}
        if not self.state_lattice.contains(state):
            raise AbstractionError(f"state {state} outside the lattice")
        if self.table is not None:
            flat = self.table[self.state_lattice.flatten(tuple(state)), self.label_flat(neighbor_states, tuple(input_idx))]
            if flat < 0:
                return OUT_OF_DOMAIN
            return self.state_lattice.unflatten(int(flat))
        values = self._evaluator(
            self.state_lattice.value_float(state),
            {j: self.neighbor_lattices[s].value_float(neighbor_states[j]) for s, j in enumerate(self.neighbor_ids)},
            self.input_lattice.value_float(input_idx),
        )
        idx = quantize_point(values, self.state_lattice.eta)
        return idx if self.state_lattice.contains(idx) else OUT_OF_DOMAIN

    # --- explicit construction ----------------------------------------

    def materialize(self, cap: int = EXPLICIT_TRANSITION_CAP) -> "SymbolicModel":
        n_states = self.state_lattice.cardinality
        n_labels = self.label_count
        if n_states * n_labels > cap:
            raise AbstractionError(
                f"explicit table would hold {n_states * n_labels} transitions, "
                f"above the cap of {cap}"
            )
        table = np.empty(n_states * n_labels, dtype=np.int64)

        state_dims = [(self.state_lattice, d) for d in range(self.state_lattice.dim)]
        all_dims = state_dims + list(self.label_dims)
        cards = [lat.axis_cards[d] for lat, d in all_dims]
        luts = [lat.axis_value_table(d) for lat, d in all_dims]

        chunk = max(1, min(n_states * n_labels, 1 << 18))
        spans = [(start, min(start + chunk, n_states * n_labels)) for start in range(0, n_states * n_labels, chunk)]

        def run(span):
            start, stop = span
            cells = np.arange(start, stop, dtype=np.int64)
            coords = []
            rest = cells.copy()
            for card in reversed(cards):
                coords.append(rest % card)
                rest //= card
            coords.reverse()
            dim_values = [lut[c] for lut, c in zip(luts, coords)]
            n_state_dims = self.state_lattice.dim
            neighbor_values: dict[int, list[np.ndarray]] = {}
            at = n_state_dims
            for s, j in enumerate(self.neighbor_ids):
                lat = self.neighbor_lattices[s]
                neighbor_values[j] = dim_values[at : at + lat.dim]
                at += lat.dim
            input_values = dim_values[at:]
            next_values = self._evaluator(dim_values[:n_state_dims], neighbor_values, input_values)
            flat = np.zeros(stop - start, dtype=np.int64)
            ok = np.ones(stop - start, dtype=bool)
            near = 0
            for d in range(n_state_dims):
                idx_d, near_d = _quantize_array(np.asarray(next_values[d], dtype=float), self.state_lattice.eta)
                near += near_d
                lo, hi = self.state_lattice.lo[d], self.state_lattice.hi[d]
                ok &= (idx_d >= lo) & (idx_d <= hi)
                flat = flat * (hi - lo + 1) + np.clip(idx_d - lo, 0, hi - lo)
            flat[~ok] = -1
            return start, stop, flat, near

        workers = worker_count()
        if workers > 1 and len(spans) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(run, spans))
        else:
            results = [run(span) for span in spans]
        near_total = 0
        for start, stop, flat, near in results:
            table[start:stop] = flat
            near_total += near

        built = SymbolicModel(
            members=self.members,
            state_lattice=self.state_lattice,
            neighbor_ids=self.neighbor_ids,
            neighbor_lattices=self.neighbor_lattices,
            input_lattice=self.input_lattice,
            evaluator=self._evaluator,
            convention=self.convention,
            member_state_slices=self.member_state_slices,
        )
        built.table = table.reshape(n_states, n_labels)
        built.boundary_flags = near_total
        return built


def _etas_of(plan_or_etas) -> Mapping[int, Fraction]:
    if hasattr(plan_or_etas, "eta"):
        return {k: to_fraction(v) for k, v in plan_or_etas.eta.items()}
    return {k: to_fraction(v) for k, v in plan_or_etas.items()}


def _member_evaluator(net: NetworkSpec, members: tuple[int, ...], input_layout: tuple[tuple[int, int], ...]):
    """Evaluator over per-dimension value vectors for a member block.

    Binds each referenced 1-d subsystem state and each member input by
    name and evaluates every member dynamics coordinate. ``input_layout``
    gives (member id, dim count) per block of the model's input tuple;
    blocks of dropped inputs have zero dims.
    """
    subsystems = [net.subsystem(m) for m in members]

    def evaluate(state_values, neighbor_values, input_values):
        bindings = {}
        at = 0
        for sub in subsystems:
            if sub.state_dim == 1:
                bindings[f"x{sub.id}"] = state_values[at]
            at += sub.state_dim
        for j, vals in neighbor_values.items():
            if len(vals) == 1:
                bindings[f"x{j}"] = vals[0]
        at = 0
        for owner, width in input_layout:
            if width == 1:
                bindings[f"u{owner}"] = input_values[at]
            at += width
        out = []
        for sub in subsystems:
            for e in sub.dynamics:
                out.append(eval_expr(e, bindings))
        return out

    return evaluate


def _input_lattice(sub, eta: Fraction, convention: str) -> Lattice:
    if convention == "restricted" and not sub.reads_input():
        return lattice_of_box((), eta)
    return lattice_of_box(sub.input_box, eta)


def build_symbolic_model(
    net: NetworkSpec,
    subsystem_id: int,
    plan,
    mode: str = "lazy",
    convention: str = "restricted",
    cap: int = EXPLICIT_TRANSITION_CAP,
    dep_graph: DepGraph | None = None,
) -> SymbolicModel:
    """Symbolic model of one subsystem at the planned quantization.

    ``plan`` is a QuantizationPlan or a mapping id -> step. Restricted
    label convention: only in-neighbour slots, input slot only when the
    dynamics read it. Full convention: every other subsystem plus the
    declared input box.
    """
    if convention not in ("restricted", "full"):
        raise AbstractionError(f"unknown label convention {convention!r}")
    etas = _etas_of(plan)
    sub = net.subsystem(subsystem_id)
    if dep_graph is None:
        dep_graph = build_dependency_graph(net)
    if convention == "restricted":
        neighbor_ids = tuple(sorted(dep_graph.predecessors(subsystem_id)))
    else:
        neighbor_ids = tuple(i for i in range(1, net.n + 1) if i != subsystem_id)
    input_lattice = _input_lattice(sub, etas[subsystem_id], convention)
    model = SymbolicModel(
        members=(subsystem_id,),
        state_lattice=lattice_of_box(sub.state_box, etas[subsystem_id]),
        neighbor_ids=neighbor_ids,
        neighbor_lattices=tuple(
            lattice_of_box(net.subsystem(j).state_box, etas[j]) for j in neighbor_ids
        ),
        input_lattice=input_lattice,
        evaluator=_member_evaluator(
            net, (subsystem_id,), ((subsystem_id, input_lattice.dim),)
        ),
        convention=convention,
        member_state_slices=((0, sub.state_dim),),
    )
    if mode == "explicit":
        return model.materialize(cap)
    if mode != "lazy":
        raise AbstractionError(f"unknown mode {mode!r}")
    return model


def build_component_model(
    net: NetworkSpec,
    members: Iterable[int],
    eta_bar,
    external_etas: Mapping[int, Fraction] | None = None,
    mode: str = "lazy",
    convention: str = "restricted",
    cap: int = EXPLICIT_TRANSITION_CAP,
    dep_graph: DepGraph | None = None,
) -> SymbolicModel:
    """Block model of several subsystems at one shared step: the joint
    state is quantized coordinatewise, so this equals the composition of
    the per-member models built at the same step."""
    members = tuple(sorted(members))
    eta_bar = to_fraction(eta_bar)
    if dep_graph is None:
        dep_graph = build_dependency_graph(net)
    external = sorted(
        {i for m in members for i in dep_graph.predecessors(m)} - set(members)
    )
    if external and external_etas is None:
        raise AbstractionError("component has external neighbours; their steps are required")
    state_box = tuple(iv for m in members for iv in net.subsystem(m).state_box)
    input_parts = []
    input_layout = []
    slices = []
    at = 0
    for m in members:
        sub = net.subsystem(m)
        part = _input_lattice(sub, eta_bar, convention)
        input_parts.extend(part.box)
        input_layout.append((m, part.dim))
        slices.append((at, at + sub.state_dim))
        at += sub.state_dim
    model = SymbolicModel(
        members=members,
        state_lattice=lattice_of_box(state_box, eta_bar),
        neighbor_ids=tuple(external),
        neighbor_lattices=tuple(
            lattice_of_box(net.subsystem(j).state_box, to_fraction(external_etas[j]))
            for j in external
        ),
        input_lattice=lattice_of_box(tuple(input_parts), eta_bar),
        evaluator=_member_evaluator(net, members, tuple(input_layout)),
        convention=convention,
        member_state_slices=tuple(slices),
    )
    if mode == "explicit":
        return model.materialize(cap)
    return model


def complexity_counts(
    net: NetworkSpec,
    plan,
    convention: str = "restricted",
    monolithic_eta=None,
    dep_graph: DepGraph | None = None,
) -> dict:
    """Exact space/time cost counters, computed from lattice cardinalities
    without building any table.

    Per subsystem: scomplex = card(states)^2 * card(labels) and
    tcomplex = card(states) * card(labels). With ``monolithic_eta`` the
    whole-network single-model counters are included as well.
    """
    if convention not in ("restricted", "full"):
        raise AbstractionError(f"unknown label convention {convention!r}")
    etas = _etas_of(plan)
    if dep_graph is None:
        dep_graph = build_dependency_graph(net)

    per_subsystem = {}
    total_s = 0
    total_t = 0
    for sub in net.subsystems:
        states = lattice_of_box(sub.state_box, etas[sub.id]).cardinality
        if convention == "restricted":
            neighbor_ids = sorted(dep_graph.predecessors(sub.id))
        else:
            neighbor_ids = [i for i in range(1, net.n + 1) if i != sub.id]
        labels = _input_lattice(sub, etas[sub.id], convention).cardinality
        for j in neighbor_ids:
            labels *= lattice_of_box(net.subsystem(j).state_box, etas[j]).cardinality
        entry = {
            "states": states,
            "labels": labels,
            "scomplex": states * states * labels,
            "tcomplex": states * labels,
        }
        per_subsystem[sub.id] = entry
        total_s += entry["scomplex"]
        total_t += entry["tcomplex"]

    report = {
        "convention": convention,
        "per_subsystem": per_subsystem,
        "total_scomplex": total_s,
        "total_tcomplex": total_t,
    }
    if monolithic_eta is not None:
        eta_star = to_fraction(monolithic_eta)
        card_x = 1
        card_u = 1
        for sub in net.subsystems:
            card_x *= lattice_of_box(sub.state_box, eta_star).cardinality
            card_u *= lattice_of_box(sub.input_box, eta_star).cardinality
        report["monolithic"] = {
            "eta": eta_star,
            "card_states": card_x,
            "card_inputs": card_u,
            "scomplex": card_x * card_x * card_u,
            "tcomplex": card_x * card_u,
        }
    return report


_MAGIC = b"SYMNETTB1\n"


def save_model(model: SymbolicModel, path) -> None:
    """Serialise an explicit model: a JSON header, then the successor
    table row-major as little-endian int64 (-1 marks out-of-domain), and
    a JSON sidecar with the cost counters next to it."""
    if model.table is None:
        raise AbstractionError("only explicit models can be serialised")

    def lattice_header(lat: Lattice) -> dict:
        return {
            "eta": decimal_string(lat.eta),
            "lo": list(lat.lo),
            "hi": list(lat.hi),
            "box": [[decimal_string(a), decimal_string(b)] for a, b in lat.box],
        }

    header = {
        "members": list(model.members),
        "convention": model.convention,
        "state": lattice_header(model.state_lattice),
        "neighbors": [
            {"id": j, **lattice_header(lat)}
            for j, lat in zip(model.neighbor_ids, model.neighbor_lattices)
        ],
        "input": lattice_header(model.input_lattice),
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        fh.write(model.table.astype("<i8").tobytes())
    sidecar = {
        "states": model.state_lattice.cardinality,
        "labels": model.label_count,
        "scomplex": str(model.scomplex),
        "tcomplex": str(model.tcomplex),
        "out_of_domain": int(np.count_nonzero(model.table < 0)),
        "boundary_flags": model.boundary_flags,
    }
    with open(f"{path}.counts.json", "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)


def _lattice_from_header(raw: dict) -> Lattice:
    return Lattice(
        eta=to_fraction(raw["eta"]),
        lo=tuple(raw["lo"]),
        hi=tuple(raw["hi"]),
        box=tuple((to_fraction(a), to_fraction(b)) for a, b in raw["box"]),
    )


def load_model(path) -> SymbolicModel:
    """Load a serialised explicit model; the successor oracle replays the
    stored table."""
    with open(path, "rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise AbstractionError(f"{path} is not a model table file")
        (length,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(length).decode("utf-8"))
        data = np.frombuffer(fh.read(), dtype="<i8")
    state = _lattice_from_header(header["state"])
    neighbors = [(_lattice_from_header(raw), raw["id"]) for raw in header["neighbors"]]
    model = SymbolicModel(
        members=tuple(header["members"]),
        state_lattice=state,
        neighbor_ids=tuple(j for _, j in neighbors),
        neighbor_lattices=tuple(lat for lat, _ in neighbors),
        input_lattice=_lattice_from_header(header["input"]),
        evaluator=None,
        convention=header["convention"],
        member_state_slices=(),
    )
    n_states = state.cardinality
    model.table = data.reshape(n_states, len(data) // n_states).astype(np.int64)
    return model
