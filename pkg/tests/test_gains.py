from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from symnet.gains import (
    GainMatrices,
    GainsError,
    LambdaVector,
    aggregate_certificate,
    assemble_gain_matrices,
    check_small_gain,
    find_lambda,
    sample_decrease_inequality,
    spectral_radius,
)


def _eig_oracle(m):
    """Characteristic-polynomial root finding for n <= 3."""
    a = np.asarray(m, dtype=float)
    n = a.shape[0]
    if n == 1:
        return abs(a[0, 0])
    if n == 2:
        tr = a[0, 0] + a[1, 1]
        det = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
        coeffs = [1.0, -tr, det]
    else:
        tr = np.trace(a)
        minors = (
            a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1]
            + a[0, 0] * a[2, 2] - a[0, 2] * a[2, 0]
            + a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
        )
        coeffs = [1.0, -tr, minors, -np.linalg.det(a)]
    return max(abs(r) for r in np.roots(coeffs))


def _bench_component(example_analysis, k):
    return example_analysis.partition.component(k)


def test_assemble_component_two(example_net, example_analysis):
    gm = assemble_gain_matrices(_bench_component(example_analysis, 2), example_net)
    assert gm.members == (4, 5)
    assert gm.a == (Fraction(1, 2), Fraction(1, 2))
    assert gm.c == ((0, Fraction(2, 5)), (Fraction(2, 5), 0))


def test_assemble_component_three(example_net, example_analysis):
    gm = assemble_gain_matrices(_bench_component(example_analysis, 3), example_net)
    assert gm.members == (2, 3)
    assert gm.a == (Fraction(1, 2), Fraction(1, 2))
    assert gm.c == ((0, Fraction(2, 5)), (Fraction(2, 5), 0))


def test_assemble_singleton(example_net, example_analysis):
    gm = assemble_gain_matrices(_bench_component(example_analysis, 1), example_net)
    assert gm.a == (Fraction(1, 2),) and gm.c == ((Fraction(0),),)


def test_gain_matrix_validation():
    with pytest.raises(GainsError, match="zero diagonal"):
        GainMatrices(members=(1,), a=(Fraction(1),), c=((Fraction(1),),))
    with pytest.raises(GainsError, match="positive"):
        GainMatrices(members=(1,), a=(Fraction(0),), c=((Fraction(0),),))


def test_spectral_radius_closed_forms():
    assert spectral_radius([[0.0, 0.8], [0.8, 0.0]]) == pytest.approx(0.8, abs=1e-15)
    assert spectral_radius([[0.0]]) == 0.0
    assert spectral_radius([[0.0, 1.0], [0.0, 0.0]]) == 0.0


def test_spectral_radius_bench_product(example_net, example_analysis):
    gm = assemble_gain_matrices(_bench_component(example_analysis, 2), example_net)
    r = spectral_radius(gm.a_inv_c())
    assert r == pytest.approx(0.8, abs=1e-12)
    assert r * r == pytest.approx(0.64, abs=1e-12)
    assert r == pytest.approx(_eig_oracle(gm.a_inv_c()), abs=1e-12)


def test_check_small_gain_strict():
    ok = check_small_gain(
        GainMatrices(members=(1, 2), a=(Fraction(1, 2), Fraction(1, 2)),
                     c=((0, Fraction(2, 5)), (Fraction(2, 5), 0)))
    )
    assert ok.ok and ok.radius == pytest.approx(0.8)
    bad = check_small_gain(
        GainMatrices(members=(1, 2), a=(Fraction(1, 2), Fraction(1, 2)),
                     c=((0, Fraction(3, 5)), (Fraction(3, 5), 0)))
    )
    assert not bad.ok and bad.radius == pytest.approx(1.2)
    singleton = check_small_gain(GainMatrices(members=(1,), a=(Fraction(1),), c=((Fraction(0),),)))
    assert singleton.ok and singleton.radius == 0.0


def test_check_small_gain_margin_warning():
    # radius exactly 1 sits inside the margin and is rejected with a warning
    gm = GainMatrices(members=(1, 2), a=(Fraction(1), Fraction(1)),
                      c=((0, Fraction(1)), (Fraction(1), 0)))
    result = check_small_gain(gm)
    assert not result.ok and result.warning is not None


@given(st.integers(1, 3), st.data())
@settings(max_examples=100, deadline=None)
def test_spectral_radius_matches_oracle(n, data):
    entries = data.draw(
        st.lists(
            st.floats(min_value=1e-3, max_value=5.0, allow_nan=False),
            min_size=n * n,
            max_size=n * n,
        )
    )
    m = np.array(entries).reshape(n, n)
    assert spectral_radius(m) == pytest.approx(_eig_oracle(m), abs=1e-9)


def test_find_lambda_canonical(example_net, example_analysis):
    gm = assemble_gain_matrices(_bench_component(example_analysis, 2), example_net)
    lam = find_lambda(gm)
    assert lam.entries == (Fraction(10), Fraction(10))
    assert lam.provenance == "computed"
    assert gm.lambda_residual(lam.entries) == (Fraction(1), Fraction(1))


def test_find_lambda_user_supplied(example_net, example_analysis):
    gm = assemble_gain_matrices(_bench_component(example_analysis, 2), example_net)
    lam = find_lambda(gm, user=(11, 13))
    assert lam.provenance == "user-supplied"
    assert gm.lambda_residual(lam.entries) == (Fraction(3, 10), Fraction(21, 10))


def test_find_lambda_singleton():
    gm = GainMatrices(members=(1,), a=(Fraction(1, 2),), c=((Fraction(0),),))
    assert find_lambda(gm).entries == (Fraction(2),)


def test_find_lambda_rejects_bad_user(example_net, example_analysis):
    gm = assemble_gain_matrices(_bench_component(example_analysis, 2), example_net)
    with pytest.raises(GainsError, match="rejected"):
        find_lambda(gm, user=(1, 100))


def test_find_lambda_requires_small_gain():
    gm = GainMatrices(members=(1, 2), a=(Fraction(1, 2), Fraction(1, 2)),
                      c=((0, Fraction(3, 5)), (Fraction(3, 5), 0)))
    with pytest.raises(GainsError, match="small-gain"):
        find_lambda(gm)


def test_lambda_positivity_enforced():
    with pytest.raises(GainsError, match="positive"):
        LambdaVector(entries=(Fraction(1), Fraction(0)), provenance="user-supplied")


def _aggregate(example_net, example_analysis, k, lam_entries):
    comp = _bench_component(example_analysis, k)
    gm = assemble_gain_matrices(comp, example_net)
    lam = find_lambda(gm, user=lam_entries)
    return aggregate_certificate(comp, lam, example_net, example_analysis.partition)


def test_aggregate_component_two(example_net, example_analysis):
    agg = _aggregate(example_net, example_analysis, 2, (11, 13))
    assert agg.lipschitz == 48
    assert agg.alpha_lower.slope == 11
    assert agg.alpha_upper.slope == 24
    assert agg.rho.slope == Fraction(3, 130)  # 0.023077 to printed precision
    assert agg.sigma_self.slope == 13
    assert agg.sigma_in == {}


def test_aggregate_component_three(example_net, example_analysis):
    agg = _aggregate(example_net, example_analysis, 3, (1, 1))
    assert agg.lipschitz == 4
    assert agg.rho.slope == Fraction(1, 10)
    assert agg.sigma_self.slope == 1
    assert {k: g.slope for k, g in agg.sigma_in.items()} == {1: 1, 2: 1}


def test_aggregate_singleton_component_four(example_net, example_analysis):
    agg = _aggregate(example_net, example_analysis, 4, (1,))
    assert agg.lipschitz == 2
    assert agg.rho.slope == Fraction(1, 2)
    assert agg.sigma_self.slope == 0
    assert {k: g.slope for k, g in agg.sigma_in.items()} == {2: 1}


@given(st.integers(1, 4), st.integers(1, 1000))
@settings(max_examples=60, deadline=None)
def test_lambda_scaling(example_net, example_analysis, k, t):
    """Scaling the weights scales every extensive gain and leaves the
    decay slope unchanged."""
    base_lams = {1: (1,), 2: (11, 13), 3: (1, 1), 4: (1,)}
    base = _aggregate(example_net, example_analysis, k, base_lams[k])
    scaled = _aggregate(
        example_net, example_analysis, k, tuple(Fraction(t) * v for v in base_lams[k])
    )
    assert scaled.lipschitz == t * base.lipschitz
    assert scaled.alpha_lower.slope == t * base.alpha_lower.slope
    assert scaled.alpha_upper.slope == t * base.alpha_upper.slope
    assert scaled.sigma_self.slope == t * base.sigma_self.slope
    assert scaled.rho.slope == base.rho.slope
    for j in base.sigma_in:
        assert scaled.sigma_in[j].slope == t * base.sigma_in[j].slope


def test_decrease_inequality_sampling(example_net, example_analysis):
    """One-step decrease of the weighted certificate holds on random
    draws for the strongly coupled component."""
    agg = _aggregate(example_net, example_analysis, 2, (11, 13))
    slack = sample_decrease_inequality(
        example_net, example_analysis.partition, agg, n_samples=10_000, seed=7
    )
    assert slack >= -1e-9
