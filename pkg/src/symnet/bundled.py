"""Built-in network descriptions.

``EXAMPLE_NETWORK_TOML`` is the six-subsystem benchmark network shipped
with the tool; its certificates use the distance function as the
certificate value, which gives the linear gains recorded below. The toy
networks keep all desk-scale verification runs small enough to check
exhaustively.
"""

from __future__ import annotations

from .netspec import NetworkSpec, parse_network_text

__all__ = [
    "EXAMPLE_NETWORK_TOML",
    "TOY_SINGLE_TOML",
    "TOY_PAIR_TOML",
    "TOY_AUTONOMOUS_PAIR_TOML",
    "example_network",
    "toy_single",
    "toy_pair",
    "toy_autonomous_pair",
]

EXAMPLE_NETWORK_TOML = """\
[network]
name = "six-subsystem-benchmark"
description = "Two 2-cycles feeding two chains; couplings folded into the dynamics."

[[subsystem]]
id = 1
state_box = [[-1, 1]]
input_box = [[-1, 1]]
dynamics = ["0.5*x1/(1 + x1^2) + u1"]
[subsystem.cert]
lipschitz = 2
alpha_lower = 1
alpha_upper = 1
rho = 0.5
sigma_self = 1

[[subsystem]]
id = 2
state_box = [[-1, 1]]
input_box = [[-1, 1]]
dynamics = ["0.5*tanh(x2) + 0.4*(sech(x3) - 1) + x1"]
[subsystem.cert]
lipschitz = 2
alpha_lower = 1
alpha_upper = 1
rho = 0.5
sigma_self = 0
sigma_in = { "1" = 1, "3" = 0.4 }

[[subsystem]]
id = 3
state_box = [[-1, 1]]
input_box = [[-1, 1]]
dynamics = ["0.5*x3 + 0.4*sin(x2) + x5 + u3"]
[subsystem.cert]
lipschitz = 2
alpha_lower = 1
alpha_upper = 1
rho = 0.5
sigma_self = 1
sigma_in = { "2" = 0.4, "5" = 1 }

[[subsystem]]
id = 4
state_box = [[-1, 1]]
input_box = [[-1, 1]]
dynamics = ["0.5*(cos(x4) - 1) + 0.4*tanh(x5)"]
[subsystem.cert]
lipschitz = 2
alpha_lower = 1
alpha_upper = 1
rho = 0.5
sigma_self = 0
sigma_in = { "5" = 0.4 }

[[subsystem]]
id = 5
state_box = [[-1, 1]]
input_box = [[-1, 1]]
dynamics = ["0.5*sin(x5) + 0.4*(sech(x4) - 1) + u5"]
[subsystem.cert]
lipschitz = 2
alpha_lower = 1
alpha_upper = 1
rho = 0.5
sigma_self = 1
sigma_in = { "4" = 0.4 }

[[subsystem]]
id = 6
state_box = [[-1, 1]]
input_box = [[-1, 1]]
dynamics = ["0.5*x6/(1 + abs(x6)) + x5"]
[subsystem.cert]
lipschitz = 2
alpha_lower = 1
alpha_upper = 1
rho = 0.5
sigma_self = 0
sigma_in = { "5" = 1 }

[scc_overrides]
lambda = { "1" = [1], "2" = [11, 13], "3" = [1, 1], "4" = [1] }

[monolithic]
lambda = [3, 1, 1, 11, 13, 1]
"""

TOY_SINGLE_TOML = """\
[network]
name = "toy-single"
description = "One contractive subsystem with an input."

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

TOY_PAIR_TOML = """\
[network]
name = "toy-pair"
description = "A 2-cycle of contractive subsystems, both with inputs."

[[subsystem]]
id = 1
state_box = [[-0.5, 0.5]]
input_box = [[-0.5, 0.5]]
dynamics = ["0.5*x1 + 0.1*x2 + u1"]
[subsystem.cert]
lipschitz = 1
alpha_lower = 1
alpha_upper = 1
rho = 0.5
sigma_self = 1
sigma_in = { "2" = 0.1 }

[[subsystem]]
id = 2
state_box = [[-0.5, 0.5]]
input_box = [[-0.5, 0.5]]
dynamics = ["0.1*x1 + 0.5*x2 + u2"]
[subsystem.cert]
lipschitz = 1
alpha_lower = 1
alpha_upper = 1
rho = 0.5
sigma_self = 1
sigma_in = { "1" = 0.1 }
"""

TOY_AUTONOMOUS_PAIR_TOML = """\
[network]
name = "toy-autonomous-pair"
description = "The 2-cycle without inputs, small enough for exhaustive block checks."

[[subsystem]]
id = 1
state_box = [[-0.5, 0.5]]
input_box = []
dynamics = ["0.5*x1 + 0.1*x2"]
[subsystem.cert]
lipschitz = 1
alpha_lower = 1
alpha_upper = 1
rho = 0.5
sigma_self = 0
sigma_in = { "2" = 0.1 }

[[subsystem]]
id = 2
state_box = [[-0.5, 0.5]]
input_box = []
dynamics = ["0.1*x1 + 0.5*x2"]
[subsystem.cert]
lipschitz = 1
alpha_lower = 1
alpha_upper = 1
rho = 0.5
sigma_self = 0
sigma_in = { "1" = 0.1 }
"""


def example_network() -> NetworkSpec:
    return parse_network_text(EXAMPLE_NETWORK_TOML)


def toy_single() -> NetworkSpec:
    return parse_network_text(TOY_SINGLE_TOML)


def toy_pair() -> NetworkSpec:
    return parse_network_text(TOY_PAIR_TOML)


def toy_autonomous_pair() -> NetworkSpec:
    return parse_network_text(TOY_AUTONOMOUS_PAIR_TOML)
