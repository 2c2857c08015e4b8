"""Bookkeeping for released unification angles.

Each released angle ``theta_ij`` is a difference constraint
``theta_j - theta_i = theta_ij`` between two secret angles.  The client only
releases a new constraint when it is independent of the ones already out,
i.e. when the edge ``{i, j}`` does not close a cycle in the constraint graph,
and never more than ``m - 1`` of them.
"""

from __future__ import annotations

import numbers
import threading
from pathlib import Path


class LedgerError(ValueError):
    pass


class PolicyViolation(LedgerError):
    """Recording an edge the policy refuses."""


def _find(parent, x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


def difference_rank(m: int, edges) -> int:
    """Rank of the system ``{theta_j - theta_i = c}`` over ``m`` unknowns.

    The coefficient matrix is the incidence matrix of the constraint graph,
    whose rank is ``m`` minus the number of connected components.
    """
    parent = list(range(m + 1))
    rank = 0
    for i, j in edges:
        ri, rj = _find(parent, i), _find(parent, j)
        if ri != rj:
            parent[ri] = rj
            rank += 1
    return rank


class ReleaseLedger:
    """Released edges over subsets ``1..m``, keyed by ``(min, max)``."""

    def __init__(self, m: int):
        if m < 1:
            raise LedgerError(f"number of subsets must be positive, got {m}")
        self.m = int(m)
        self._edges: dict[tuple[int, int], float] = {}
        self._lock = threading.RLock()

    def __len__(self):
        return len(self._edges)

    def __contains__(self, pair):
        i, j = pair
        return (min(i, j), max(i, j)) in self._edges

    @property
    def edges(self) -> dict:
        return dict(self._edges)

    def _check_pair(self, i, j):
        for x in (i, j):
            if not isinstance(x, numbers.Integral) or not 1 <= x <= self.m:
                raise LedgerError(f"subset index {x!r} out of range 1..{self.m}")
        if i == j:
            raise LedgerError(f"cannot unify subset {i} with itself")

    def _connected(self, i, j) -> bool:
        parent = list(range(self.m + 1))
        for p, q in self._edges:
            rp, rq = _find(parent, p), _find(parent, q)
            if rp != rq:
                parent[rp] = rq
        return _find(parent, i) == _find(parent, j)

    def can_release(self, i: int, j: int) -> tuple[bool, str]:
        """Check whether releasing ``theta_ij`` keeps the released system safe.

        Returns ``(allowed, reason)``; ``reason`` is empty when allowed.
        Never mutates the ledger.
        """
        self._check_pair(i, j)
        with self._lock:
            reasons = []
            if (min(i, j), max(i, j)) in self._edges:
                reasons.append(f"duplicate: the pair ({i}, {j}) was already released")
            elif self._connected(i, j):
                reasons.append(f"cycle: subsets {i} and {j} are already linked by released angles")
            if len(self._edges) + 1 > self.m - 1:
                reasons.append(f"count: {len(self._edges)} of at most {self.m - 1} angles already released")
            return (not reasons, "; ".join(reasons))

    def record_release(self, i: int, j: int, theta_ij: float) -> "ReleaseLedger":
        with self._lock:
            ok, reason = self.can_release(i, j)
            if not ok:
                raise PolicyViolation(reason)
            self._edges[(min(i, j), max(i, j))] = float(theta_ij)
        return self

    def attacker_rank(self) -> int:
        return difference_rank(self.m, self._edges)

    def reset(self) -> None:
        with self._lock:
            self._edges.clear()

    @property
    def lock(self):
        return self._lock

    # -- persistence ---------------------------------------------------------

    def save(self, path) -> None:
        lines = [f"m {self.m}"]
        lines += [f"{i} {j} {theta!r}" for (i, j), theta in sorted(self._edges.items())]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "ReleaseLedger":
        path = Path(path)
        try:
            lines = [ln.split() for ln in path.read_text().splitlines() if ln.strip()]
        except OSError as exc:
            raise LedgerError(f"cannot read ledger {path}: {exc.strerror or exc}") from exc
        if not lines or lines[0][0] != "m" or len(lines[0]) != 2:
            raise LedgerError(f"{path}: first line must be 'm <count>'")
        ledger = cls(int(lines[0][1]))
        for n, parts in enumerate(lines[1:], start=2):
            if len(parts) != 3:
                raise LedgerError(f"{path}: line {n}: expected 'i j theta_ij'")
            ledger.record_release(int(parts[0]), int(parts[1]), float(parts[2]))
        return ledger
