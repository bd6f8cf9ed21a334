"""Common-stream rate distribution under capacity ceilings and QoS floors.

Each pool (one satellite pool over ES shares, one pool per BS over UE shares)
is a continuous knapsack: floors first, then all remaining capacity to the
heaviest-weight receiver, which is exactly optimal for a linear objective.
"""

from dataclasses import dataclass

import numpy as np


class InfeasibleAllocation(RuntimeError):
    """Floors exceed a pool's capacity; carries the offending pool id."""

    def __init__(self, pool):
        super().__init__("rate floors exceed common-stream capacity in pool %r" % (pool,))
        self.pool = pool


@dataclass(frozen=True)
class RateBounds:
    es_common_capacity: float    # min_k log2(1 + common SINR at ES k)
    ue_common_capacity: np.ndarray  # (K,) per-cell min over UEs
    es_floor: np.ndarray         # (K,) residual QoS demand on the common share
    ue_floor: np.ndarray         # (K, L)


def compute_bounds(sinrs, qos_es_min, qos_ue_min):
    es_cap = float(np.min(np.log2(1.0 + sinrs.es_common)))
    ue_cap = np.min(np.log2(1.0 + sinrs.ue_common), axis=1)
    es_floor = np.maximum(0.0, qos_es_min - np.log2(1.0 + sinrs.es_private))
    ue_floor = np.maximum(0.0, qos_ue_min - np.log2(1.0 + sinrs.ue_private))
    return RateBounds(es_common_capacity=es_cap, ue_common_capacity=ue_cap,
                      es_floor=es_floor, ue_floor=ue_floor)


def _allocate_pool(floors, capacity, weights):
    floors = np.asarray(floors, dtype=float)
    used = float(np.sum(floors))
    if used > capacity:
        return None
    rates = floors.copy()
    winner = int(np.argmax(weights))  # argmax takes the lowest index on ties
    rates[winner] += capacity - used
    return rates


def greedy_allocate(bounds, weights):
    """Floors-then-heaviest allocation for every pool.

    Returns (r_es, r_ue). Raises InfeasibleAllocation naming the pool
    ('satellite' or ('bs', k)) whose floors cannot be met; the caller decides
    whether to keep a previous plan or abort.
    """
    K = bounds.es_floor.shape[0]
    r_es = _allocate_pool(bounds.es_floor, bounds.es_common_capacity, weights[:, 0])
    if r_es is None:
        raise InfeasibleAllocation("satellite")
    r_ue = np.zeros_like(bounds.ue_floor)
    for k in range(K):
        rk = _allocate_pool(bounds.ue_floor[k], float(bounds.ue_common_capacity[k]),
                            weights[k, 1:])
        if rk is None:
            raise InfeasibleAllocation(("bs", k))
        r_ue[k] = rk
    return r_es, r_ue
