"""Independent reference computations used by the tests.

None of these touch the simulation code: they are exact recursions or
numerical quadrature.
"""
import math

import numpy as np


def free_first_return_law(rank: int, horizon: int) -> np.ndarray:
    """P(tau = t) for t = 0..horizon for the simple random walk on F_rank.

    The word length |S_n| is a birth-death chain: from 0 it moves to 1, from
    d >= 1 it moves up with probability (2k-1)/(2k) and down with 1/(2k).
    """
    up = (2 * rank - 1) / (2 * rank)
    down = 1 - up
    law = np.zeros(horizon + 1)
    dist = np.zeros(horizon + 2)
    dist[1] = 1.0  # after the first step
    for t in range(2, horizon + 1):
        new = np.zeros_like(dist)
        new[2:] += up * dist[1:-1]
        new[:-1] += down * dist[1:]
        law[t] = new[0]
        new[0] = 0.0
        dist = new
    return law


def free_escape_oracle(rank: int, horizon: int = 4000) -> float:
    return 1.0 - free_first_return_law(rank, horizon).sum()


def free_conditional_return_mean(rank: int, horizon: int = 4000) -> float:
    law = free_first_return_law(rank, horizon)
    return float(np.dot(np.arange(len(law)), law) / law.sum())


def lattice_escape_oracle(dim: int) -> float:
    """1 / G(0) with G(0) = int_0^inf exp(-t) I_0(t/d)^d dt (simple random walk on Z^d)."""
    from scipy.integrate import quad
    from scipy.special import ive

    val, _ = quad(lambda t: ive(0, t / dim) ** dim, 0, np.inf, limit=500, epsabs=1e-12, epsrel=1e-12)
    return 1.0 / val


def limit_series_bruteforce(f, gamma: float, terms: int = 20000) -> float:
    x = 1.0 - gamma
    return gamma * gamma * math.fsum(f(j) * x ** (j - 1) for j in range(1, terms + 1))
