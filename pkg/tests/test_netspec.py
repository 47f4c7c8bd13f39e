from fractions import Fraction

import pytest

from symnet.bundled import EXAMPLE_NETWORK_TOML
from symnet.netspec import (
    LinearGain,
    LyapunovCert,
    NetworkError,
    parse_network_text,
)

MINIMAL = """\
[network]
name = "minimal"

[[subsystem]]
id = 1
state_box = [[-1, 1]]
input_box = [[-1, 1]]
dynamics = ["0.5*x1 + u1"]
[subsystem.cert]
lipschitz = 1
alpha_lower = 1
alpha_upper = 1
rho = 0.5
sigma_self = 1
"""


def test_load_benchmark(example_net):
    assert example_net.n == 6
    assert example_net.name == "six-subsystem-benchmark"
    sub5 = example_net.subsystem(5)
    assert sub5.cert.lipschitz == 2
    assert sub5.cert.sigma_in[4].slope == Fraction(2, 5)
    assert sub5.reads_input()
    assert not example_net.subsystem(4).reads_input()
    assert example_net.lambda_overrides[2] == (11, 13)
    assert example_net.monolithic_lambda == (3, 1, 1, 11, 13, 1)


def test_load_minimal():
    net = parse_network_text(MINIMAL)
    assert net.n == 1
    assert net.subsystem(1).state_box == ((Fraction(-1), Fraction(1)),)


def test_box_endpoints_are_exact_decimals():
    text = MINIMAL.replace("[[-1, 1]]", "[[-0.3, 0.7]]", 1)
    net = parse_network_text(text)
    assert net.subsystem(1).state_box[0] == (Fraction(-3, 10), Fraction(7, 10))


def test_origin_is_fixed_point(example_net):
    assert example_net.origin_fixed_point_residual() == 0.0


def test_unknown_sigma_in_target_rejected():
    text = MINIMAL.replace('sigma_self = 1', 'sigma_self = 1\nsigma_in = { "9" = 0.5 }')
    with pytest.raises(NetworkError, match="unknown subsystem 9"):
        parse_network_text(text)


@pytest.mark.parametrize(
    "needle, replacement, message",
    [
        ("id = 1", "id = 0", "ids start at 1"),
        ("state_box = [[-1, 1]]", "state_box = [[1, -1]]", "empty"),
        ("state_box = [[-1, 1]]", "state_box = [[-1, 1], [-1, 1]]", "dynamics"),
        ('dynamics = ["0.5*x1 + u1"]', 'dynamics = ["0.5*x1 + u2"]', "input u2"),
        ('dynamics = ["0.5*x1 + u1"]', 'dynamics = ["0.5*x9 + u1"]', "undeclared state x9"),
        ("rho = 0.5", "rho = 0", "rho slope"),
        ("rho = 0.5", "rho = 1.5", "rho slope"),
        ("lipschitz = 1", "lipschitz = -1", "nonnegative"),
        ("alpha_lower = 1", "alpha_lower = 2", "alpha_lower"),
        ("alpha_lower = 1", "alpha_lower = 0", "alpha_lower"),
        ("sigma_self = 1", "sigma_self = -2", "nonnegative"),
        ("lipschitz = 1", "", "missing field 'lipschitz'"),
        ("[subsystem.cert]", "[subsystem.zert]", "cert"),
    ],
)
def test_single_field_corruptions_rejected(needle, replacement, message):
    text = MINIMAL.replace(needle, replacement, 1)
    with pytest.raises(NetworkError, match=message):
        parse_network_text(text)


def test_every_benchmark_mutation_rejected():
    """Structural corruptions of the shipped network all fail validation."""
    mutations = [
        ("id = 6", "id = 7"),  # gap in ids
        ("id = 6", "id = 5"),  # duplicate id
        ('sigma_in = { "5" = 1 }', 'sigma_in = { "6" = 1 }'),  # self reference
        ("rho = 0.5", "rho = 0"),
        ("state_box = [[-1, 1]]", "state_box = [[1, 1]]"),
    ]
    for needle, replacement in mutations:
        text = EXAMPLE_NETWORK_TOML.replace(needle, replacement, 1)
        assert text != EXAMPLE_NETWORK_TOML
        with pytest.raises(NetworkError):
            parse_network_text(text)


def test_deps_override_used():
    text = MINIMAL.replace(
        '[subsystem.cert]', '[subsystem.deps]\nstates = [1]\n[subsystem.cert]'
    )
    net = parse_network_text(text)
    assert net.subsystem(1).deps_override == (1,)


def test_deps_override_unknown_id():
    text = MINIMAL.replace(
        '[subsystem.cert]', '[subsystem.deps]\nstates = [3]\n[subsystem.cert]'
    )
    with pytest.raises(NetworkError, match="unknown subsystem 3"):
        parse_network_text(text)


def test_not_toml_at_all():
    with pytest.raises(NetworkError, match="not a valid network document"):
        parse_network_text("[[subsystem\n")


def test_gain_validation_direct():
    with pytest.raises(NetworkError):
        LinearGain(Fraction(-1))
    with pytest.raises(NetworkError, match="alpha_lower"):
        LyapunovCert(
            lipschitz=Fraction(1),
            alpha_lower=LinearGain(Fraction(2)),
            alpha_upper=LinearGain(Fraction(1)),
            rho=LinearGain(Fraction(1, 2)),
            sigma_self=LinearGain(Fraction(0)),
        )
