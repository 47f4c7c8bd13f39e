"""Small-gain analysis per strongly connected component.

For a component with members i1 < i2 < ... the dissipation slopes form
a diagonal matrix A and the internal coupling slopes a zero-diagonal
matrix C with entries c[i][j] = sigma_in slope / alpha_lower slope of
the source. If the spectral radius of A^-1 C is below one, a positive
weight vector lam with lam^T (A - C) > 0 exists and the weighted sum of
the member certificates is itself a certificate for the component, with
closed-form linear gains.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .expr import eval_expr
from .graph import SccComponent, SccPartition
from .netspec import LinearGain, LyapunovCert, NetworkSpec
from .numbers import to_fraction

__all__ = [
    "GainMatrices",
    "SmallGainResult",
    "LambdaVector",
    "AggregateCert",
    "GainsError",
    "assemble_gain_matrices",
    "spectral_radius",
    "check_small_gain",
    "find_lambda",
    "aggregate_certificate",
    "sample_decrease_inequality",
]

RADIUS_MARGIN = 1e-12  # radii this close to 1 are treated as failing
_POWER_TOL = 1e-12
_POWER_CAP = 200_000


class GainsError(ValueError):
    """Small-gain machinery failure."""


@dataclass(frozen=True)
class GainMatrices:
    """Diagonal dissipation slopes and zero-diagonal coupling slopes."""

    members: tuple[int, ...]
    a: tuple[Fraction, ...]
    c: tuple[tuple[Fraction, ...], ...]

    def __post_init__(self):
        n = len(self.members)
        if len(self.a) != n or len(self.c) != n or any(len(row) != n for row in self.c):
            raise GainsError("matrix dimensions do not match the member list")
        if any(x <= 0 for x in self.a):
            raise GainsError("all diagonal dissipation slopes must be positive")
        for i, row in enumerate(self.c):
            if row[i] != 0:
                raise GainsError("coupling matrix must have a zero diagonal")
            if any(x < 0 for x in row):
                raise GainsError("coupling slopes must be nonnegative")

    @property
    def size(self) -> int:
        return len(self.members)

    def a_inv_c(self) -> np.ndarray:
        return np.array(
            [[float(x / self.a[i]) for x in row] for i, row in enumerate(self.c)], dtype=float
        )

    def lambda_residual(self, lam: Sequence[Fraction]) -> tuple[Fraction, ...]:
        """Componentwise lam^T (A - C), exact."""
        n = self.size
        return tuple(
            lam[j] * self.a[j] - sum(lam[i] * self.c[i][j] for i in range(n))
            for j in range(n)
        )


def _certs_of(certs, member: int) -> LyapunovCert:
    cert = certs[member] if isinstance(certs, Mapping) else certs.subsystem(member).cert
    return cert


def assemble_gain_matrices(scc: SccComponent, certs) -> GainMatrices:
    """Build A and C for one component from the member certificates.

    ``certs`` is either a mapping id -> LyapunovCert or a NetworkSpec.
    Only couplings between members enter C; external couplings are part
    of the aggregate input gains instead.
    """
    members = scc.members
    a = []
    for m in members:
        cert = _certs_of(certs, m)
        if cert.rho.slope <= 0:
            raise GainsError(f"subsystem {m}: dissipation slope must be positive")
        a.append(cert.rho.slope)
    c_rows = []
    for m in members:
        cert = _certs_of(certs, m)
        row = []
        for src in members:
            if src == m:
                row.append(Fraction(0))
                continue
            gain = cert.sigma_in.get(src)
            if gain is None or gain.absent:
                row.append(Fraction(0))
                continue
            alpha_src = _certs_of(certs, src).alpha_lower.slope
            if alpha_src == 0:
                raise GainsError(f"subsystem {src}: alpha_lower slope is zero")
            row.append(gain.slope / alpha_src)
        c_rows.append(tuple(row))
    return GainMatrices(members=members, a=tuple(a), c=tuple(c_rows))


def spectral_radius(m) -> float:
    """Spectral radius of a square nonnegative matrix.

    Closed form for sizes 1 and 2; shifted power iteration otherwise
    (the shift by the identity removes oscillation between eigenvalues
    of equal magnitude). Raises GainsError if the iteration has not
    converged after the cap, which signals a pathological input; the
    coupling matrix of a genuine strongly connected component is
    irreducible and converges geometrically.
    """
    arr = np.asarray(m, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise GainsError("spectral_radius expects a square matrix")
    if (arr < 0).any():
        raise GainsError("spectral_radius expects a nonnegative matrix")
    n = arr.shape[0]
    if n == 1:
        return float(arr[0, 0])
    if n == 2:
        a, b, c, d = arr[0, 0], arr[0, 1], arr[1, 0], arr[1, 1]
        disc = (a - d) ** 2 + 4 * b * c  # nonnegative for b*c >= 0
        root = float(np.sqrt(disc))
        return max(abs((a + d + root) / 2.0), abs((a + d - root) / 2.0))
    shifted = arr + np.eye(n)
    v = np.full(n, 1.0 / np.sqrt(n))
    lam = 0.0
    for _ in range(_POWER_CAP):
        w = shifted @ v
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            return 0.0
        v = w / norm
        lam = float(v @ (shifted @ v))
        if float(np.linalg.norm(shifted @ v - lam * v, ord=np.inf)) <= _POWER_TOL * max(1.0, lam):
            return max(lam - 1.0, 0.0)
    raise GainsError("power iteration did not converge; matrix is pathological")


@dataclass(frozen=True)
class SmallGainResult:
    radius: float
    ok: bool
    warning: str | None = None


def check_small_gain(gm: GainMatrices) -> SmallGainResult:
    """Strict test radius < 1; radii within RADIUS_MARGIN of 1 are
    reported as failing with a warning rather than silently accepted."""
    radius = spectral_radius(gm.a_inv_c())
    if abs(1.0 - radius) <= RADIUS_MARGIN:
        return SmallGainResult(
            radius=radius,
            ok=False,
            warning=f"spectral radius {radius!r} is within {RADIUS_MARGIN} of 1; "
            "treated as failing",
        )
    return SmallGainResult(radius=radius, ok=radius < 1.0)


@dataclass(frozen=True)
class LambdaVector:
    """Positive weights over a component's members."""

    entries: tuple[Fraction, ...]
    provenance: str  # "computed" or "user-supplied"

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(to_fraction(x) for x in self.entries))
        if any(x <= 0 for x in self.entries):
            raise GainsError("lambda entries must be positive")


def _solve_exact(rows: list[list[Fraction]], rhs: list[Fraction]) -> list[Fraction]:
    """Gaussian elimination over exact rationals."""
    n = len(rows)
    aug = [row[:] + [rhs[i]] for i, row in enumerate(rows)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if aug[r][col] != 0), None)
        if pivot is None:
            raise GainsError("singular system while constructing lambda")
        aug[col], aug[pivot] = aug[pivot], aug[col]
        inv = 1 / aug[col][col]
        aug[col] = [x * inv for x in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                factor = aug[r][col]
                aug[r] = [x - factor * y for x, y in zip(aug[r], aug[col])]
    return [aug[r][n] for r in range(n)]


def find_lambda(gm: GainMatrices, user: Sequence | None = None) -> LambdaVector:
    """Weight vector with lam^T (A - C) > 0 componentwise.

    Computed canonically when the small-gain test passes: with M = A^-1 C,
    mu^T = 1^T (I - M)^-1 (a convergent Neumann series, entrywise >= 1)
    and lam = A^-1 mu. A user-supplied vector bypasses the construction
    but not the verification.
    """
    n = gm.size
    if user is not None:
        lam = LambdaVector(entries=tuple(to_fraction(x) for x in user), provenance="user-supplied")
        if len(lam.entries) != n:
            raise GainsError(f"lambda needs {n} entries, got {len(lam.entries)}")
        residual = gm.lambda_residual(lam.entries)
        if any(r <= 0 for r in residual):
            raise GainsError(
                f"user lambda rejected: residual {tuple(map(float, residual))} "
                "is not componentwise positive"
            )
        return lam

    result = check_small_gain(gm)
    if not result.ok:
        raise GainsError(
            f"small-gain test failed (radius {result.radius}); no lambda exists"
        )
    m = [[gm.c[i][j] / gm.a[i] for j in range(n)] for i in range(n)]
    # mu solves (I - M)^T mu = 1
    rows = [[(Fraction(1) if i == j else Fraction(0)) - m[j][i] for j in range(n)] for i in range(n)]
    mu = _solve_exact(rows, [Fraction(1)] * n)
    if any(x < 1 for x in mu):
        raise GainsError("lambda construction produced an invalid weight")  # unreachable if r < 1
    lam = LambdaVector(
        entries=tuple(mu[i] / gm.a[i] for i in range(n)), provenance="computed"
    )
    residual = gm.lambda_residual(lam.entries)
    if any(r <= 0 for r in residual):
        raise GainsError("constructed lambda failed verification")  # unreachable
    return lam


@dataclass(frozen=True)
class AggregateCert:
    """Component-level certificate from the weighted sum of member
    certificates, with the linear closed forms:

    lipschitz   = sum_i lam_i L_i
    alpha_lower = (min_i lam_i a_lo_i) s       alpha_upper = (sum_i lam_i a_hi_i) s
    rho         = min(lam^T (A - C)) / max(lam) s
    sigma_self  = (sum_i lam_i s_i) s
    sigma_in[j] = (sum_{i in members} sum_{j' in comp j} lam_i s_{i,j'}) s
    """

    component: int
    members: tuple[int, ...]
    lipschitz: Fraction
    alpha_lower: LinearGain
    alpha_upper: LinearGain
    rho: LinearGain
    sigma_self: LinearGain
    sigma_in: Mapping[int, LinearGain] = field(default_factory=dict)
    lam: LambdaVector = None  # type: ignore[assignment]

    def __post_init__(self):
        object.__setattr__(self, "sigma_in", dict(self.sigma_in))


def aggregate_certificate(
    scc: SccComponent,
    lam: LambdaVector,
    certs,
    partition: SccPartition,
) -> AggregateCert:
    """Aggregate certificate for one component; for singletons this is
    the lam-scaled member certificate."""
    gm = assemble_gain_matrices(scc, certs)
    residual = gm.lambda_residual(lam.entries)
    if any(r <= 0 for r in residual):
        raise GainsError("lambda does not satisfy the positivity condition for this component")

    members = scc.members
    weights = dict(zip(members, lam.entries))
    lipschitz = sum(weights[m] * _certs_of(certs, m).lipschitz for m in members)
    alpha_lower = min(weights[m] * _certs_of(certs, m).alpha_lower.slope for m in members)
    alpha_upper = sum(weights[m] * _certs_of(certs, m).alpha_upper.slope for m in members)
    rho = min(residual) / max(lam.entries)
    sigma_self = sum(weights[m] * _certs_of(certs, m).sigma_self.slope for m in members)

    sigma_in: dict[int, Fraction] = {}
    for m in members:
        cert = _certs_of(certs, m)
        for src, gain in cert.sigma_in.items():
            if src in members or gain.absent:
                continue
            k_src = partition.component_of[src]
            sigma_in[k_src] = sigma_in.get(k_src, Fraction(0)) + weights[m] * gain.slope

    return AggregateCert(
        component=scc.index,
        members=members,
        lipschitz=lipschitz,
        alpha_lower=LinearGain(alpha_lower),
        alpha_upper=LinearGain(alpha_upper),
        rho=LinearGain(rho),
        sigma_self=LinearGain(sigma_self),
        sigma_in={k: LinearGain(v) for k, v in sorted(sigma_in.items())},
        lam=lam,
    )


def sample_decrease_inequality(
    net: NetworkSpec,
    partition: SccPartition,
    agg: AggregateCert,
    n_samples: int = 10_000,
    seed: int = 0,
) -> float:
    """Sampled check of the aggregate decrease inequality for a component
    with a norm-type certificate (member certificate value = distance of
    the member states, as certified by the bundled networks).

    Draws state/input pairs uniformly from the boxes, steps the member
    dynamics once, and returns the minimum slack of

        rhs - lhs,  lhs = V(next) - V(cur),
        rhs = -rho(V(cur)) + sum_j sigma_in[j](dist_j) + sigma_self(input dist)

    over all samples. The exact rho slope is used, not the rounded design
    view. Nonnegative (up to roundoff) when the certificate is valid.
    """
    rng = np.random.default_rng(seed)
    members = agg.members
    weights = dict(zip(members, agg.lam.entries))

    def draw_box(box):
        return [
            rng.uniform(float(lo), float(hi), size=n_samples) for (lo, hi) in box
        ]

    states = {}
    states_alt = {}
    for sub in net.subsystems:
        if sub.state_dim != 1:
            raise GainsError("sampled decrease check requires 1-dimensional subsystem states")
        states[sub.id] = draw_box(sub.state_box)[0]
        states_alt[sub.id] = draw_box(sub.state_box)[0]

    inputs = {}
    inputs_alt = {}
    for m in members:
        sub = net.subsystem(m)
        inputs[m] = draw_box(sub.input_box)
        inputs_alt[m] = draw_box(sub.input_box)

    def bindings(xs, us, owner):
        b = {f"x{j}": xs[j] for j in xs}
        if net.subsystem(owner).input_dim == 1:
            b[f"u{owner}"] = us[owner][0]
        return b

    v_cur = sum(
        float(weights[m]) * np.abs(states[m] - states_alt[m]) for m in members
    )
    v_next = np.zeros(n_samples)
    for m in members:
        expr = net.subsystem(m).dynamics[0]
        nxt = eval_expr(expr, bindings(states, inputs, m))
        nxt_alt = eval_expr(expr, bindings(states_alt, inputs_alt, m))
        v_next = v_next + float(weights[m]) * np.abs(nxt - nxt_alt)

    lhs = v_next - v_cur
    rhs = -float(agg.rho.slope) * v_cur
    for k_src, gain in agg.sigma_in.items():
        dist = np.zeros(n_samples)
        for j in partition.component(k_src).members:
            dist = np.maximum(dist, np.abs(states[j] - states_alt[j]))
        rhs = rhs + float(gain.slope) * dist
    input_dist = np.zeros(n_samples)
    for m in members:
        for d in range(len(inputs[m])):
            input_dist = np.maximum(input_dist, np.abs(inputs[m][d] - inputs_alt[m][d]))
    rhs = rhs + float(agg.sigma_self.slope) * input_dist

    return float(np.min(rhs - lhs))
