
from dynpanel.dgp import parse_dgp_config, simulate


HETERO_DESIGNER = {
    "y0_grid": [-1.0, 0.0, 1.0],
    "delta1": {"const": 0.5},
    "delta1_support": [-0.5, 0.0, 0.5],
    "tau1": {"const": 1.0},
    "delta2": [{"const": 0.2, "u": 0.5}, {"const": -0.1}],
    "delta2_noise_sd": 1.0,
    "tau2": [{"const": 2.0}, {"const": 3.0}],
    "tau2_noise_sd": 0.5,
    "e1": {"y0": 0.8},
    "e2": {"const": -0.3, "y0": 1.0, "d1": 0.5, "y1": 0.3},
}


def designer_cfg(**overrides):
    params = {**HETERO_DESIGNER, **overrides}
    return parse_dgp_config({"schema": 1, "regime": "designer", "params": params})


def make_world(doc, n, seed=0):
    return simulate(parse_dgp_config(doc), n, seed)


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES = []
