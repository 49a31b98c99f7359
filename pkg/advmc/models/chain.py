import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, FrozenSet, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse

from advmc.utils.errors import (
    BadInit,
    BadLabel,
    EntryOutOfRange,
    InfeasiblePerturbation,
    ModelError,
    NoEnabledAction,
    PolicyActionDisabled,
    RowSumViolation,
)

ROW_SUM_TOLERANCE = 1e-9
SNAP_TOLERANCE = 1e-12
DELTA_EPSILON = 1e-15

Row = Tuple[Tuple[int, float], ...]


def _row(entries: Iterable[Tuple[int, float]]) -> Row:
    """Canonical sparse row: sorted by target, zero entries dropped"""
    merged: Dict[int, float] = {}
    for target, prob in entries:
        merged[int(target)] = merged.get(int(target), 0.0) + float(prob)
    return tuple((t, p) for t, p in sorted(merged.items()) if p != 0.0)


def build_labels(n: int, atoms: Sequence[str], mapping: Mapping[int, Iterable[str]]) -> Tuple[FrozenSet[int], ...]:
    """Turn {state: [atom names]} into per-state sets of atom indices"""
    index = {name: i for i, name in enumerate(atoms)}
    labels: List[set] = [set() for _ in range(n)]
    for state, names in mapping.items():
        for name in names:
            if not 0 <= int(state) < n:
                raise BadLabel(int(state), name)
            if name not in index:
                raise BadLabel(int(state), name)
            labels[int(state)].add(index[name])
    return tuple(frozenset(s) for s in labels)


@dataclass(frozen=True, eq=False)
class Dtmc:
    n: int
    init: int
    rows: Tuple[Row, ...]
    atoms: Tuple[str, ...] = ()
    labels: Tuple[FrozenSet[int], ...] = ()

    def __post_init__(self):
        if len(self.rows) != self.n:
            raise ModelError(f"expected {self.n} rows, got {len(self.rows)}")
        for s, row in enumerate(self.rows):
            for t, _ in row:
                if not 0 <= t < self.n:
                    raise ModelError(f"row {s} targets state {t} outside 0..{self.n - 1}")
        if not self.labels:
            object.__setattr__(self, "labels", tuple(frozenset() for _ in range(self.n)))

    @classmethod
    def from_rows(
        cls,
        rows: Sequence[Iterable[Tuple[int, float]]],
        init: int = 0,
        atoms: Sequence[str] = (),
        labels: Optional[Mapping[int, Iterable[str]]] = None,
    ) -> "Dtmc":
        n = len(rows)
        return cls(
            n=n,
            init=init,
            rows=tuple(_row(r) for r in rows),
            atoms=tuple(atoms),
            labels=build_labels(n, atoms, labels or {}),
        )

    @classmethod
    def from_dense(cls, matrix, init: int = 0, atoms: Sequence[str] = (), labels=None) -> "Dtmc":
        dense = np.asarray(matrix, dtype=float)
        rows = [[(t, dense[s, t]) for t in np.flatnonzero(dense[s])] for s in range(dense.shape[0])]
        return cls.from_rows(rows, init=init, atoms=atoms, labels=labels)

    def with_rows(self, rows: Sequence[Row]) -> "Dtmc":
        return Dtmc(n=self.n, init=self.init, rows=tuple(rows), atoms=self.atoms, labels=self.labels)

    @cached_property
    def matrix(self) -> sparse.csr_matrix:
        data, indices, indptr = [], [], [0]
        for row in self.rows:
            for t, p in row:
                indices.append(t)
                data.append(p)
            indptr.append(len(indices))
        return sparse.csr_matrix((np.array(data, dtype=float), np.array(indices, dtype=np.int64), np.array(indptr)), shape=(self.n, self.n))

    def dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        for s, row in enumerate(self.rows):
            for t, p in row:
                out[s, t] = p
        return out

    def prob(self, source: int, target: int) -> float:
        for t, p in self.rows[source]:
            if t == target:
                return p
        return 0.0

    def states_with(self, atom: str) -> FrozenSet[int]:
        i = self.atoms.index(atom)
        return frozenset(s for s in range(self.n) if i in self.labels[s])

    def label_names(self, state: int) -> List[str]:
        return [self.atoms[i] for i in sorted(self.labels[state])]

    def reachable_from(self, start: Optional[int] = None) -> FrozenSet[int]:
        start = self.init if start is None else start
        seen = {start}
        queue = deque([start])
        while queue:
            s = queue.popleft()
            for t, p in self.rows[s]:
                if p > 0 and t not in seen:
                    seen.add(t)
                    queue.append(t)
        return frozenset(seen)

    def same_matrix(self, other: "Dtmc", tolerance: float = 0.0) -> bool:
        if self.n != other.n:
            return False
        return bool(np.all(np.abs(self.dense() - other.dense()) <= tolerance))


@dataclass(frozen=True, eq=False)
class Mdp:
    n: int
    init: int
    actions: Tuple[str, ...]
    transitions: Tuple[Tuple[Tuple[int, str], Row], ...]
    atoms: Tuple[str, ...] = ()
    labels: Tuple[FrozenSet[int], ...] = ()

    def __post_init__(self):
        if not self.labels:
            object.__setattr__(self, "labels", tuple(frozenset() for _ in range(self.n)))

    @classmethod
    def from_table(
        cls,
        n: int,
        table: Mapping[Tuple[int, str], Iterable[Tuple[int, float]]],
        init: int = 0,
        actions: Optional[Sequence[str]] = None,
        atoms: Sequence[str] = (),
        labels: Optional[Mapping[int, Iterable[str]]] = None,
    ) -> "Mdp":
        if actions is None:
            actions = []
            for _, a in table:
                if a not in actions:
                    actions.append(a)
        order = {a: i for i, a in enumerate(actions)}
        for (_, a) in table:
            if a not in order:
                raise ModelError(f"action {a!r} not declared")
        items = sorted(((int(s), a), _row(dist)) for (s, a), dist in table.items())
        items.sort(key=lambda item: (item[0][0], order[item[0][1]]))
        return cls(
            n=n,
            init=init,
            actions=tuple(actions),
            transitions=tuple(items),
            atoms=tuple(atoms),
            labels=build_labels(n, atoms, labels or {}),
        )

    @cached_property
    def table(self) -> Dict[Tuple[int, str], Row]:
        return dict(self.transitions)

    def enabled(self, state: int) -> List[str]:
        return [a for a in self.actions if (state, a) in self.table]

    def distribution(self, state: int, action: str) -> Row:
        return self.table[(state, action)]


@dataclass(frozen=True)
class Policy:
    choice: Tuple[str, ...]

    @classmethod
    def from_mapping(cls, n: int, mapping: Mapping[int, str]) -> "Policy":
        missing = [s for s in range(n) if s not in mapping]
        if missing:
            raise PolicyActionDisabled(missing[0], None)
        return cls(choice=tuple(mapping[s] for s in range(n)))

    def __getitem__(self, state: int) -> str:
        return self.choice[state]

    def as_mapping(self) -> Dict[int, str]:
        return dict(enumerate(self.choice))


@dataclass(frozen=True)
class PerturbationMatrix:
    """Sparse additive perturbation X, keyed by (source, target)"""
    entries: Tuple[Tuple[Tuple[int, int], float], ...] = field(default_factory=tuple)

    @classmethod
    def from_dict(cls, deltas: Mapping[Tuple[int, int], float]) -> "PerturbationMatrix":
        kept = sorted(((int(s), int(t)), float(d)) for (s, t), d in deltas.items() if abs(d) > DELTA_EPSILON)
        return cls(entries=tuple(kept))

    def as_dict(self) -> Dict[Tuple[int, int], float]:
        return dict(self.entries)

    def __iter__(self) -> Iterator[Tuple[Tuple[int, int], float]]:
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def get(self, source: int, target: int) -> float:
        return self.as_dict().get((source, target), 0.0)

    def touched_rows(self) -> List[int]:
        return sorted({s for (s, _), _ in self.entries})

    def negate(self) -> "PerturbationMatrix":
        return PerturbationMatrix(entries=tuple((k, -d) for k, d in self.entries))

    def dense(self, n: int) -> np.ndarray:
        out = np.zeros((n, n))
        for (s, t), d in self.entries:
            out[s, t] = d
        return out

    def max_norm(self) -> float:
        return max((abs(d) for _, d in self.entries), default=0.0)


def _check_row(row: Row, s: int, action: Optional[str] = None):
    for t, p in row:
        if not 0.0 <= p <= 1.0 or math.isnan(p):
            raise EntryOutOfRange(s, t, p)
    total = math.fsum(p for _, p in row)
    if abs(total - 1.0) > ROW_SUM_TOLERANCE:
        raise RowSumViolation(s, total, action)


def _check_labels(n: int, atoms: Sequence[str], labels: Sequence[FrozenSet[int]]):
    for s, label in enumerate(labels):
        for i in sorted(label):
            if not 0 <= i < len(atoms):
                raise BadLabel(s, i)


def validate_dtmc(model: Dtmc) -> None:
    for s, row in enumerate(model.rows):
        _check_row(row, s)
    if not 0 <= model.init < model.n:
        raise BadInit(model.init, model.n)
    _check_labels(model.n, model.atoms, model.labels)


def validate_mdp(mdp: Mdp) -> None:
    for s in range(mdp.n):
        enabled = mdp.enabled(s)
        if not enabled:
            raise NoEnabledAction(s)
        for a in enabled:
            _check_row(mdp.distribution(s, a), s, a)
    if not 0 <= mdp.init < mdp.n:
        raise BadInit(mdp.init, mdp.n)
    _check_labels(mdp.n, mdp.atoms, mdp.labels)


def compose(mdp: Mdp, policy: Policy) -> Dtmc:
    """DTMC induced by a memoryless deterministic policy"""
    rows = []
    for s in range(mdp.n):
        action = policy.choice[s] if s < len(policy.choice) else None
        if action is None or (s, action) not in mdp.table:
            raise PolicyActionDisabled(s, action)
        rows.append(mdp.table[(s, action)])
    return Dtmc(n=mdp.n, init=mdp.init, rows=tuple(rows), atoms=mdp.atoms, labels=mdp.labels)


def _perturb_row(row: Row, deltas: Mapping[int, float], s: int, action: Optional[str] = None) -> Row:
    values = dict(row)
    for t, d in deltas.items():
        values[t] = values.get(t, 0.0) + d
    for t, v in values.items():
        if v < -SNAP_TOLERANCE or v > 1.0 + SNAP_TOLERANCE or math.isnan(v):
            raise InfeasiblePerturbation(f"entry ({s},{t}) becomes {v!r}")
        if abs(v) <= SNAP_TOLERANCE:
            values[t] = 0.0
        else:
            values[t] = min(v, 1.0)
    total = math.fsum(values.values())
    if abs(total - 1.0) > ROW_SUM_TOLERANCE:
        where = f"row {s}" if action is None else f"row {s} action {action!r}"
        raise InfeasiblePerturbation(f"{where} sums to {total!r} after perturbation")
    return _row(values.items())


def apply_perturbation(model: Dtmc, x: PerturbationMatrix) -> Dtmc:
    if not len(x):
        return model
    by_row: Dict[int, Dict[int, float]] = {}
    for (s, t), d in x:
        if not (0 <= s < model.n and 0 <= t < model.n):
            raise InfeasiblePerturbation(f"perturbation entry ({s},{t}) outside the model")
        by_row.setdefault(s, {})[t] = d
    rows = list(model.rows)
    for s, deltas in by_row.items():
        rows[s] = _perturb_row(rows[s], deltas, s)
    return model.with_rows(rows)


def perturb_mdp(mdp: Mdp, deltas: Mapping[Tuple[int, str, int], float]) -> Mdp:
    """Perturb T(s, a, .) for the given (state, action, target) triples"""
    grouped: Dict[Tuple[int, str], Dict[int, float]] = {}
    for (s, a, t), d in deltas.items():
        if (s, a) not in mdp.table:
            raise PolicyActionDisabled(s, a)
        grouped.setdefault((s, a), {})[t] = d
    transitions = []
    for key, row in mdp.transitions:
        if key in grouped:
            row = _perturb_row(row, grouped[key], key[0], key[1])
        transitions.append((key, row))
    return Mdp(
        n=mdp.n,
        init=mdp.init,
        actions=mdp.actions,
        transitions=tuple(transitions),
        atoms=mdp.atoms,
        labels=mdp.labels,
    )
