"""Network descriptions: subsystems, boxes, dynamics and Lyapunov data.

A network is a collection of discrete-time subsystems, each with a state
box, an input box, one dynamics expression per state coordinate, and an
incremental-stability certificate (linear gains only: every comparison
function is ``slope * s``, slope 0 meaning the term is absent).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .expr import Expr, eval_expr, free_variables, parse_expression
from .numbers import to_fraction

__all__ = [
    "LinearGain",
    "LyapunovCert",
    "Subsystem",
    "NetworkSpec",
    "NetworkError",
    "load_network",
    "parse_network_text",
]


class NetworkError(ValueError):
    """Schema or invariant violation in a network description."""


@dataclass(frozen=True)
class LinearGain:
    """Comparison function restricted to the linear class slope * s."""

    slope: Fraction

    def __post_init__(self):
        object.__setattr__(self, "slope", to_fraction(self.slope))
        if self.slope < 0:
            raise NetworkError(f"gain slope must be nonnegative, got {self.slope}")

    def __call__(self, s: Fraction) -> Fraction:
        return self.slope * s

    @property
    def absent(self) -> bool:
        return self.slope == 0


@dataclass(frozen=True)
class LyapunovCert:
    """Incremental-stability certificate data for one subsystem.

    ``sigma_in[j]`` is the gain on the distance of neighbour j's states,
    ``sigma_self`` the gain on the subsystem's own input distance,
    ``lipschitz`` a Lipschitz constant of the certificate function on the
    state box (in its second argument).
    """

    lipschitz: Fraction
    alpha_lower: LinearGain
    alpha_upper: LinearGain
    rho: LinearGain
    sigma_self: LinearGain
    sigma_in: Mapping[int, LinearGain] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "lipschitz", to_fraction(self.lipschitz))
        object.__setattr__(self, "sigma_in", dict(self.sigma_in))
        if self.lipschitz < 0:
            raise NetworkError("lipschitz constant must be nonnegative")
        if self.alpha_lower.slope <= 0:
            raise NetworkError("alpha_lower slope must be positive")
        if self.alpha_lower.slope > self.alpha_upper.slope:
            raise NetworkError("alpha_lower slope must not exceed alpha_upper slope")
        if not 0 < self.rho.slope <= 1:
            raise NetworkError(f"rho slope must lie in (0, 1], got {self.rho.slope}")


@dataclass(frozen=True)
class Subsystem:
    id: int
    state_box: tuple[tuple[Fraction, Fraction], ...]
    input_box: tuple[tuple[Fraction, Fraction], ...]
    dynamics: tuple[Expr, ...]
    cert: LyapunovCert
    deps_override: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.id < 1:
            raise NetworkError(f"subsystem ids start at 1, got {self.id}")
        for name, box in (("state_box", self.state_box), ("input_box", self.input_box)):
            for lo, hi in box:
                if not lo < hi:
                    raise NetworkError(
                        f"subsystem {self.id}: {name} interval [{lo}, {hi}] is empty"
                    )
        if len(self.dynamics) != len(self.state_box):
            raise NetworkError(
                f"subsystem {self.id}: {len(self.dynamics)} dynamics expressions "
                f"for a {len(self.state_box)}-dimensional state box"
            )

    @property
    def state_dim(self) -> int:
        return len(self.state_box)

    @property
    def input_dim(self) -> int:
        return len(self.input_box)

    def reads_input(self) -> bool:
        name = f"u{self.id}"
        return any(name in free_variables(e) for e in self.dynamics)


@dataclass(frozen=True)
class NetworkSpec:
    subsystems: tuple[Subsystem, ...]
    name: str = ""
    description: str = ""
    lambda_overrides: Mapping[int, tuple[Fraction, ...]] = field(default_factory=dict)
    monolithic_lambda: tuple[Fraction, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "lambda_overrides", dict(self.lambda_overrides))
        ids = [s.id for s in self.subsystems]
        n = len(ids)
        if sorted(ids) != list(range(1, n + 1)):
            raise NetworkError(f"subsystem ids must be exactly 1..{n}, got {sorted(ids)}")
        by_id = {s.id: s for s in self.subsystems}
        for sub in self.subsystems:
            for j in sub.cert.sigma_in:
                if j == sub.id:
                    raise NetworkError(f"subsystem {sub.id}: sigma_in refers to itself")
                if j not in by_id:
                    raise NetworkError(
                        f"subsystem {sub.id}: sigma_in refers to unknown subsystem {j}"
                    )
            if sub.deps_override is not None:
                for j in sub.deps_override:
                    if j not in by_id:
                        raise NetworkError(
                            f"subsystem {sub.id}: deps override names unknown subsystem {j}"
                        )
            self._check_references(sub, by_id)
        if self.monolithic_lambda is not None and len(self.monolithic_lambda) != n:
            raise NetworkError("monolithic lambda must have one entry per subsystem")

    def _check_references(self, sub: Subsystem, by_id: Mapping[int, Subsystem]) -> None:
        for e in sub.dynamics:
            for name in free_variables(e):
                idx = int(name[1:])
                if name.startswith("u"):
                    if idx != sub.id:
                        raise NetworkError(
                            f"subsystem {sub.id}: dynamics reads input u{idx} of another subsystem"
                        )
                    if sub.input_dim != 1:
                        raise NetworkError(
                            f"subsystem {sub.id}: input referenced by name requires a "
                            f"1-dimensional input box"
                        )
                else:
                    if idx not in by_id:
                        raise NetworkError(
                            f"subsystem {sub.id}: dynamics reads undeclared state x{idx}"
                        )
                    if by_id[idx].state_dim != 1:
                        raise NetworkError(
                            f"subsystem {sub.id}: state x{idx} referenced by name requires "
                            f"subsystem {idx} to be 1-dimensional"
                        )

    @property
    def n(self) -> int:
        return len(self.subsystems)

    def subsystem(self, i: int) -> Subsystem:
        return self.subsystems[i - 1]

    def origin_fixed_point_residual(self) -> float:
        """Max |f_i(0, 0)| over all coordinates; 0 for a well-posed network."""
        zero = {f"x{j}": 0.0 for j in range(1, self.n + 1)}
        worst = 0.0
        for sub in self.subsystems:
            bindings = dict(zero, **{f"u{sub.id}": 0.0})
            for e in sub.dynamics:
                worst = max(worst, abs(eval_expr(e, bindings)))
        return worst


def _fraction_pairs(raw, where: str) -> tuple[tuple[Fraction, Fraction], ...]:
    if not isinstance(raw, list):
        raise NetworkError(f"{where}: expected a list of [lo, hi] pairs")
    out = []
    for item in raw:
        if not isinstance(item, list) or len(item) != 2:
            raise NetworkError(f"{where}: expected [lo, hi] pairs, got {item!r}")
        out.append((to_fraction(item[0]), to_fraction(item[1])))
    return tuple(out)


def _gain(raw, where: str) -> LinearGain:
    try:
        return LinearGain(to_fraction(raw))
    except TypeError:
        raise NetworkError(f"{where}: expected a number, got {raw!r}") from None


def _cert_from_table(raw, sub_id: int) -> LyapunovCert:
    if not isinstance(raw, dict):
        raise NetworkError(f"subsystem {sub_id}: missing [subsystem.cert] table")
    where = f"subsystem {sub_id} cert"
    required = ("lipschitz", "alpha_lower", "alpha_upper", "rho", "sigma_self")
    for key in required:
        if key not in raw:
            raise NetworkError(f"{where}: missing field {key!r}")
    unknown = set(raw) - set(required) - {"sigma_in"}
    if unknown:
        raise NetworkError(f"{where}: unknown fields {sorted(unknown)}")
    sigma_in = {}
    for key, value in (raw.get("sigma_in") or {}).items():
        try:
            j = int(key)
        except ValueError:
            raise NetworkError(f"{where}: sigma_in key {key!r} is not a subsystem id") from None
        sigma_in[j] = _gain(value, f"{where} sigma_in[{key}]")
    try:
        return LyapunovCert(
            lipschitz=to_fraction(raw["lipschitz"]),
            alpha_lower=_gain(raw["alpha_lower"], where),
            alpha_upper=_gain(raw["alpha_upper"], where),
            rho=_gain(raw["rho"], where),
            sigma_self=_gain(raw["sigma_self"], where),
            sigma_in=sigma_in,
        )
    except NetworkError as err:
        raise NetworkError(f"{where}: {err}") from None


def parse_network_text(text: str) -> NetworkSpec:
    """Parse a TOML network document into a validated NetworkSpec."""
    try:
        doc = tomllib.loads(text, parse_float=to_fraction)
    except tomllib.TOMLDecodeError as err:
        raise NetworkError(f"not a valid network document: {err}") from None

    meta = doc.get("network", {})
    subsystems = []
    for raw in doc.get("subsystem", []):
        if "id" not in raw:
            raise NetworkError("subsystem without an id")
        sub_id = raw["id"]
        if not isinstance(sub_id, int):
            raise NetworkError(f"subsystem id must be an integer, got {sub_id!r}")
        for key in ("state_box", "input_box", "dynamics"):
            if key not in raw:
                raise NetworkError(f"subsystem {sub_id}: missing field {key!r}")
        dynamics = tuple(parse_expression(src) for src in raw["dynamics"])
        deps = None
        if "deps" in raw:
            states = raw["deps"].get("states")
            if states is None:
                raise NetworkError(f"subsystem {sub_id}: [subsystem.deps] needs 'states'")
            deps = tuple(int(j) for j in states)
        subsystems.append(
            Subsystem(
                id=sub_id,
                state_box=_fraction_pairs(raw["state_box"], f"subsystem {sub_id} state_box"),
                input_box=_fraction_pairs(raw["input_box"], f"subsystem {sub_id} input_box"),
                dynamics=dynamics,
                cert=_cert_from_table(raw.get("cert"), sub_id),
                deps_override=deps,
            )
        )

    lambda_overrides = {}
    for key, values in (doc.get("scc_overrides", {}).get("lambda") or {}).items():
        lambda_overrides[int(key)] = tuple(to_fraction(v) for v in values)
    mono = doc.get("monolithic", {}).get("lambda")
    return NetworkSpec(
        subsystems=tuple(sorted(subsystems, key=lambda s: s.id)),
        name=str(meta.get("name", "")),
        description=str(meta.get("description", "")),
        lambda_overrides=lambda_overrides,
        monolithic_lambda=tuple(to_fraction(v) for v in mono) if mono else None,
    )


def load_network(path) -> NetworkSpec:
    """Load and validate a network description from a TOML file."""
    with open(path, "rb") as fh:
        text = fh.read().decode("utf-8")
    return parse_network_text(text)
