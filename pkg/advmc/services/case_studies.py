from collections import deque
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel

from advmc.models.chain import Dtmc, Mdp, Policy
from advmc.utils.errors import ParameterOutOfRange
from advmc.utils.logging import get_logger

logger = get_logger(__name__)

ZEROCONF_ADDRESSES = 65024
GRID_ACTIONS = ("up", "down", "left", "right")
TIE_ORDER = ("up", "right", "down", "left")
QUANTUM = 10_000

ZEROCONF_PRESETS = {
    "early": tuple(range(1, 6)),
    "late": tuple(range(6, 11)),
    "all": tuple(range(1, 11)),
}


def simple_protocol() -> Dtmc:
    """Sender that re-sends a message until it is delivered"""
    names = ("start", "try", "lost", "delivered")
    rows = [
        [(1, 1.0)],
        [(2, 0.2), (3, 0.8)],
        [(1, 1.0)],
        [(0, 1.0)],
    ]
    return Dtmc.from_rows(rows, init=0, atoms=names, labels={i: [name] for i, name in enumerate(names)})


def zeroconf(n: int, m: int, K: int = ZEROCONF_ADDRESSES, p: Optional[float] = None) -> Dtmc:
    """Zeroconf address selection with n probe ticks and m hosts already on the network.

    States: s0 = 0, s1..sn = 1..n, err = n+1, uniq = n+2, succ = n+3.
    """
    if p is None:
        raise ParameterOutOfRange("zeroconf needs an explicit forward probability p")
    if n < 1:
        raise ParameterOutOfRange(f"n must be >= 1, got {n}")
    if not 0 < m < K:
        raise ParameterOutOfRange(f"need 0 < m < K, got m={m} K={K}")
    if not 0.0 <= p <= 1.0:
        raise ParameterOutOfRange(f"p must lie in [0, 1], got {p}")

    err, uniq, succ = n + 1, n + 2, n + 3
    collide = m / K
    rows: List[List[Tuple[int, float]]] = [[(uniq, 1.0 - collide), (1, collide)]]
    for i in range(1, n):
        rows.append([(i + 1, p), (0, 1.0 - p)])
    rows.append([(err, p), (0, 1.0 - p)])
    rows.append([(err, 1.0)])
    rows.append([(succ, 1.0)])
    rows.append([(succ, 1.0)])
    labels = {0: ["s0"], err: ["err"], uniq: ["uniq"], succ: ["succ"]}
    return Dtmc.from_rows(rows, init=0, atoms=("s0", "err", "uniq", "succ"), labels=labels)


def gridworld_fig4() -> Dtmc:
    """3x3 grid with hazards at 2 and 6 and the goal at 8; hazard 2 is unreachable"""
    rows = [
        [(1, 0.1), (3, 0.9)],
        [(0, 0.1), (1, 0.1), (4, 0.8)],
        [(2, 1.0)],
        [(3, 0.1), (4, 0.8), (6, 0.1)],
        [(1, 0.1), (5, 0.1), (7, 0.8)],
        [(8, 1.0)],
        [(6, 1.0)],
        [(4, 0.1), (8, 0.9)],
        [(8, 1.0)],
    ]
    return Dtmc.from_rows(rows, init=0, atoms=("hazard", "goal"), labels={2: ["hazard"], 6: ["hazard"], 8: ["goal"]})


class GridSpec(BaseModel):
    rows: int
    cols: int
    hazards: List[int] = []
    goals: List[int] = []
    slip: float = 0.3
    seed: int = 42

    @classmethod
    def table(cls, size: int, seed: int = 42, slip: float = 0.3) -> "GridSpec":
        """Square grid with the goal top-right and a hazard at state `size`"""
        return cls(rows=size, cols=size, hazards=[size] if size > 1 else [], goals=[size * size - 1],
                   slip=slip, seed=seed)

    @property
    def n(self) -> int:
        return self.rows * self.cols


def _check_spec(spec: GridSpec):
    if spec.rows < 1 or spec.cols < 1:
        raise ParameterOutOfRange(f"grid must be at least 1x1, got {spec.rows}x{spec.cols}")
    for cell in list(spec.hazards) + list(spec.goals):
        if not 0 <= cell < spec.n:
            raise ParameterOutOfRange(f"cell {cell} outside the {spec.rows}x{spec.cols} grid")
    if set(spec.hazards) & set(spec.goals):
        raise ParameterOutOfRange("hazard and goal cells overlap")
    if not spec.goals:
        raise ParameterOutOfRange("grid needs at least one goal cell")
    if not 0.0 <= spec.slip <= 1.0:
        raise ParameterOutOfRange(f"slip must lie in [0, 1], got {spec.slip}")


def _move(spec: GridSpec, state: int, action: str) -> int:
    """Neighbour in a direction; walking off the grid stays put"""
    row, col = divmod(state, spec.cols)
    if action == "up":
        row += 1
    elif action == "down":
        row -= 1
    elif action == "left":
        col -= 1
    else:
        col += 1
    if not (0 <= row < spec.rows and 0 <= col < spec.cols):
        return state
    return row * spec.cols + col


def _perpendicular(action: str) -> Tuple[str, str]:
    return ("left", "right") if action in ("up", "down") else ("up", "down")


def _distances(spec: GridSpec) -> Dict[int, int]:
    """BFS distance to the nearest goal, never passing through a hazard"""
    hazards = set(spec.hazards)
    dist = {g: 0 for g in spec.goals}
    queue = deque(spec.goals)
    while queue:
        s = queue.popleft()
        for action in GRID_ACTIONS:
            t = _move(spec, s, action)
            if t not in dist and t not in hazards:
                dist[t] = dist[s] + 1
                queue.append(t)
    return dist


def random_gridworld(spec: GridSpec) -> Tuple[Mdp, Policy]:
    """Seeded gridworld MDP, states numbered left to right then bottom to top"""
    _check_spec(spec)
    rng = np.random.default_rng(spec.seed)
    absorbing = set(spec.hazards) | set(spec.goals)
    table = {}
    for s in range(spec.n):
        for action in GRID_ACTIONS:
            if s in absorbing:
                table[(s, action)] = [(s, 1.0)]
                continue
            leftover = rng.uniform(0.0, spec.slip)
            split = rng.uniform()
            slip_units = int(round(leftover * QUANTUM))
            first = int(round(slip_units * split))
            units: Dict[int, int] = {}
            side_a, side_b = _perpendicular(action)
            for target, amount in (
                (_move(spec, s, action), QUANTUM - slip_units),
                (_move(spec, s, side_a), first),
                (_move(spec, s, side_b), slip_units - first),
            ):
                units[target] = units.get(target, 0) + amount
            table[(s, action)] = [(t, u / QUANTUM) for t, u in sorted(units.items()) if u]

    labels = {s: ["hazard"] for s in spec.hazards}
    labels.update({s: ["goal"] for s in spec.goals})
    mdp = Mdp.from_table(spec.n, table, init=0, actions=GRID_ACTIONS, atoms=("hazard", "goal"), labels=labels)

    dist = _distances(spec)
    choice = {}
    for s in range(spec.n):
        best = TIE_ORDER[0]
        if s not in absorbing:
            reachable = [(dist[_move(spec, s, a)], rank, a) for rank, a in enumerate(TIE_ORDER)
                         if _move(spec, s, a) in dist and _move(spec, s, a) != s]
            if reachable:
                best = min(reachable)[2]
        choice[s] = best
    logger.info(f"Generated {spec.rows}x{spec.cols} gridworld (seed {spec.seed})")
    return mdp, Policy.from_mapping(spec.n, choice)
