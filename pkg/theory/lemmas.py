"""Randomized checks of the extrapolation-map and loss-curvature lemmas."""
from typing import Dict

import numpy as np
from scipy import linalg

from models.graph import LaplacianGraph
from models.losses.laplacian import split_regularizer
from models.losses.quadratic import L_L, MU_L, quadratic_loss, quadratic_loss_grad
from theory.reports import SlackTracker, VerificationReport
from utils.exceptions import DisconnectedGraphError
from utils.seeding import split_rngs

GRAPH_NORMALIZATION = "R_n = f'Lf/n^2; mu_R = lambda_min(L_TT); L_R = lambda_max(L)"


def _extension_map(graph: LaplacianGraph):
    # one factorization shared by every trial
    factor = linalg.cho_factor(graph.L_TT)
    L_TS = graph.L_TS
    return lambda v: linalg.cho_solve(factor, -L_TS @ v)


def verify_lemma1(graph: LaplacianGraph, trials: int, seed: int) -> Dict[str, VerificationReport]:
    """(a) y* is (L_R/mu_R)-Lipschitz; (b) ||v_t - y*(v_s)||^2 <= (n^2/mu_R) R_n(v_s, v_t)."""
    if graph.disconnected:
        raise DisconnectedGraphError(graph.mu_R)
    extend = _extension_map(graph)
    n, n_s, n_t = graph.n, graph.n_source, graph.n_target
    lipschitz = graph.L_R / graph.mu_R
    distance_factor = n * n / graph.mu_R

    lipschitz_check, distance_check = SlackTracker(), SlackTracker()
    for rng in split_rngs(seed, trials):
        v1, v2 = rng.normal(size=n_s), rng.normal(size=n_s)
        lhs = float(np.linalg.norm(extend(v1) - extend(v2)))
        lipschitz_check.add(lhs, lipschitz * float(np.linalg.norm(v1 - v2)))

        v_s, v_t = rng.normal(size=n_s), rng.normal(size=n_t)
        lhs = float(np.sum((v_t - extend(v_s)) ** 2))
        distance_check.add(lhs, distance_factor * split_regularizer(graph, v_s, v_t))

    constants = {
        "mu_R": graph.mu_R, "L_R": graph.L_R, "n_s": n_s, "n_t": n_t,
        "mu_R_scaled": 2.0 * graph.mu_R / n, "L_R_scaled": 2.0 * graph.L_R / n,
    }
    return {
        "lipschitz": lipschitz_check.report(
            "||y*(v1) - y*(v2)|| <= (L_R/mu_R) ||v1 - v2||", GRAPH_NORMALIZATION, {**constants, "factor": lipschitz}
        ),
        "distance": distance_check.report(
            "||v_t - y*(v_s)||^2 <= (n^2/mu_R) R_n(v_s, v_t)", GRAPH_NORMALIZATION,
            {**constants, "factor": distance_factor},
        ),
    }


def verify_lemma2(trials: int, seed: int, dim: int = 50, mu_L: float = MU_L, L_L: float = L_L) -> Dict[str, VerificationReport]:
    """Quadratic loss: ||a - b||^2 <= (2/mu_L) sum loss(a, b) and |d_1 loss(a, b)| <= L_L |a - b|."""
    curvature_check, gradient_check = SlackTracker(), SlackTracker()
    for rng in split_rngs(seed, trials):
        a, b = rng.normal(size=dim), rng.normal(size=dim)
        curvature_check.add(float(np.sum((a - b) ** 2)), (2.0 / mu_L) * float(np.sum(quadratic_loss(a, b))))
        slack = L_L * np.abs(a - b) - np.abs(quadratic_loss_grad(a, b))
        # the worst coordinate decides
        worst = int(np.argmin(slack))
        gradient_check.add(float(abs(quadratic_loss_grad(a[worst], b[worst]))), float(L_L * abs(a[worst] - b[worst])))

    constants = {"mu_L": mu_L, "L_L": L_L, "dim": dim}
    normalization = "loss(a, b) = 1/2 (a - b)^2 summed over coordinates"
    return {
        "curvature": curvature_check.report("||a - b||^2 <= (2/mu_L) loss(a, b)", normalization, constants),
        "gradient": gradient_check.report("|d_1 loss(a, b)| <= L_L |a - b|", normalization, constants),
    }
