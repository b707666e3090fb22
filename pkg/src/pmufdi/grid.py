"""Grid topology, PMU placement and the linear PMU measurement model.

A PMU at bus ``i`` measures the voltage phasor ``V_i`` and the current
``I(i, j)`` on every incident branch, oriented away from ``i``.  Both are
linear in the bus voltages, which gives the measurement Jacobian ``H``.
Zero-injection buses (ZIBs) add the KCL constraint matrix ``A``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable

import numpy as np

#: singular values below this fraction of the largest count as zero
RANK_RTOL = 1e-8

CASE_DIR = Path(__file__).parent / "cases"


class CaseError(ValueError):
    """Malformed case file or a violated topology invariant."""


@dataclass(frozen=True)
class Bus:
    id: int
    is_zib: bool = False
    has_pmu: bool = False


@dataclass(frozen=True)
class Branch:
    from_bus: int
    to_bus: int
    admittance: complex


@dataclass(frozen=True)
class GridCase:
    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "buses", tuple(self.buses))
        object.__setattr__(self, "branches", tuple(self.branches))
        validate_case(self)

    @property
    def p(self) -> int:
        return len(self.buses)

    @property
    def zibs(self) -> list[int]:
        return [b.id for b in self.buses if b.is_zib]

    @property
    def pmu_buses(self) -> list[int]:
        return [b.id for b in self.buses if b.has_pmu]

    def neighbors(self, bus: int) -> list[int]:
        return sorted(self._adjacency()[bus])

    def admittance(self, i: int, j: int) -> complex:
        return self._admittances()[frozenset((i, j))]

    def with_pmus(self, pmus: Iterable[int]) -> "GridCase":
        pmus = set(pmus)
        buses = [replace(b, has_pmu=b.id in pmus) for b in self.buses]
        return GridCase(buses, self.branches, self.name)

    def _adjacency(self) -> dict[int, set[int]]:
        adj: dict[int, set[int]] = {b.id: set() for b in self.buses}
        for br in self.branches:
            adj[br.from_bus].add(br.to_bus)
            adj[br.to_bus].add(br.from_bus)
        return adj

    def _admittances(self) -> dict[frozenset, complex]:
        return {frozenset((br.from_bus, br.to_bus)): br.admittance for br in self.branches}


def validate_case(case: GridCase) -> None:
    ids = sorted(b.id for b in case.buses)
    if not ids:
        raise CaseError("case has no buses")
    if len(set(ids)) != len(ids):
        dup = next(i for i in ids if ids.count(i) > 1)
        raise CaseError(f"duplicate bus {dup}")
    if ids != list(range(1, len(ids) + 1)):
        raise CaseError(f"bus ids must be contiguous 1..{len(ids)}")
    p = len(ids)
    seen = set()
    for br in case.branches:
        i, j = br.from_bus, br.to_bus
        if not (1 <= i <= p and 1 <= j <= p):
            raise CaseError(f"branch {i}-{j} references unknown bus")
        if i == j:
            raise CaseError(f"self-loop branch {i}-{j}")
        if br.admittance == 0:
            raise CaseError(f"zero admittance on branch {i}-{j}")
        key = frozenset((i, j))
        if key in seen:
            raise CaseError(f"duplicate branch {i}-{j}")
        seen.add(key)

    adj = case._adjacency()
    reached = {1}
    stack = [1]
    while stack:
        for nb in adj[stack.pop()]:
            if nb not in reached:
                reached.add(nb)
                stack.append(nb)
    if len(reached) != p:
        missing = sorted(set(ids) - reached)
        raise CaseError(f"topology is not connected (unreachable buses {missing})")
    for b in case.buses:
        if b.is_zib and len(adj[b.id]) < 2:
            raise CaseError(f"ZIB {b.id} has fewer than two incident branches")


def load_case(path: str | Path) -> GridCase:
    """Parse a ``.grid`` case file.

    Lines are ``bus <id> [zib] [pmu]``, ``branch <from> <to> <Y_re> <Y_im>``
    or ``line <from> <to> <R> <X>`` (series impedance, converted to
    ``Y = 1/(R + jX)``).  ``#`` starts a comment.
    """
    path = Path(path)
    if not path.exists() and not path.is_absolute() and (CASE_DIR / path).exists():
        path = CASE_DIR / path
    buses: list[Bus] = []
    branches: list[Branch] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tok = line.split()
            kind = tok[0].lower()
            try:
                if kind == "bus":
                    flags = {t.lower() for t in tok[2:]}
                    unknown = flags - {"zib", "pmu"}
                    if unknown:
                        raise ValueError(f"unknown bus flag(s) {sorted(unknown)}")
                    buses.append(Bus(int(tok[1]), "zib" in flags, "pmu" in flags))
                elif kind in ("branch", "line"):
                    if len(tok) != 5:
                        raise ValueError(f"expected 4 fields after '{kind}'")
                    i, j = int(tok[1]), int(tok[2])
                    a, b = float(tok[3]), float(tok[4])
                    if kind == "branch":
                        y = complex(a, b)
                    else:
                        if a == 0 and b == 0:
                            raise ValueError("zero impedance")
                        y = 1 / complex(a, b)
                    branches.append(Branch(i, j, y))
                else:
                    raise ValueError(f"unknown record '{tok[0]}'")
            except (ValueError, IndexError) as exc:
                raise CaseError(f"{path.name}:{lineno}: {exc}") from None
    return GridCase(buses, branches, name=path.stem)


# --- measurement model -----------------------------------------------------


@dataclass(frozen=True)
class Channel:
    """A measurement channel: ``Voltage(bus)`` when ``to`` is None, else ``Current(bus -> to)``."""

    bus: int
    to: int | None = None

    @property
    def is_voltage(self) -> bool:
        return self.to is None

    @property
    def label(self) -> str:
        return f"V{self.bus}" if self.to is None else f"I{self.bus}-{self.to}"

    @classmethod
    def parse(cls, label: str) -> "Channel":
        label = label.strip()
        if label.startswith("V"):
            return cls(int(label[1:]))
        if label.startswith("I") and "-" in label:
            i, j = label[1:].split("-")
            return cls(int(i), int(j))
        raise ValueError(f"bad channel label {label!r}")


def measurement_index(case: GridCase) -> tuple[Channel, ...]:
    pmus = case.pmu_buses
    volts = [Channel(b) for b in pmus]
    currents = sorted((i, j) for i in pmus for j in case.neighbors(i))
    return tuple(volts + [Channel(i, j) for i, j in currents])


@dataclass(frozen=True)
class JacobianSet:
    H: np.ndarray
    H_bar: np.ndarray
    A: np.ndarray
    index: tuple[Channel, ...]
    zibs: tuple[int, ...] = ()
    bus_ids: tuple[int, ...] = field(default=())

    @property
    def n(self) -> int:
        return self.H.shape[0]

    @property
    def p(self) -> int:
        return self.H.shape[1]

    @property
    def k(self) -> int:
        return self.A.shape[0]

    @property
    def labels(self) -> list[str]:
        return [c.label for c in self.index]

    def channels_of(self, pmu_buses: Iterable[int]) -> set[int]:
        """0-based channel indices measured by the PMUs at ``pmu_buses``."""
        pmu_buses = set(pmu_buses)
        return {r for r, c in enumerate(self.index) if c.bus in pmu_buses}


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def admittance_matrix(case: GridCase) -> np.ndarray:
    """Bus admittance matrix of the series branches (no shunts), a weighted Laplacian."""
    Y = np.zeros((case.p, case.p), dtype=complex)
    for br in case.branches:
        i, j, y = br.from_bus - 1, br.to_bus - 1, br.admittance
        Y[i, i] += y
        Y[j, j] += y
        Y[i, j] -= y
        Y[j, i] -= y
    return Y


def zib_matrix(case: GridCase) -> np.ndarray:
    p = case.p
    zibs = case.zibs
    A = np.zeros((len(zibs), p), dtype=complex)
    for r, q in enumerate(zibs):
        for j in case.neighbors(q):
            y = case.admittance(j, q)
            A[r, j - 1] = y
            A[r, q - 1] -= y
    return A


def build_jacobian(case: GridCase) -> JacobianSet:
    index = measurement_index(case)
    H = np.zeros((len(index), case.p), dtype=complex)
    for r, ch in enumerate(index):
        if ch.is_voltage:
            H[r, ch.bus - 1] = 1.0
        else:
            y = case.admittance(ch.bus, ch.to)
            H[r, ch.bus - 1] = y
            H[r, ch.to - 1] = -y
    norms = np.linalg.norm(H, axis=1, keepdims=True)
    H_bar = H / np.where(norms == 0, 1.0, norms)
    return JacobianSet(
        H=_frozen(H),
        H_bar=_frozen(H_bar),
        A=_frozen(zib_matrix(case)),
        index=index,
        zibs=tuple(case.zibs),
        bus_ids=tuple(range(1, case.p + 1)),
    )


def numerical_rank(M: np.ndarray, rtol: float = RANK_RTOL) -> int:
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] == 0:
        return 0
    return int(np.sum(s > rtol * s[0]))


@dataclass(frozen=True)
class ObservabilityReport:
    observable: bool
    rank_H: int
    rank_stacked: int
    p: int
    min_singular_value: float

    @property
    def status(self) -> str:
        if self.observable:
            return "observable"
        if self.rank_stacked == self.p:
            return "observable only with ZIB constraints"
        return "unobservable"


def check_observability(jac: JacobianSet) -> ObservabilityReport:
    """Rank test of ``H`` (and of ``[H; A]`` for the ZIB-assisted case)."""
    p = jac.p
    r_h = numerical_rank(jac.H)
    r_s = numerical_rank(np.vstack([jac.H, jac.A]))
    if jac.H.shape[0]:
        s = np.linalg.svd(jac.H, compute_uv=False)
        smin = float(s[min(p, len(s)) - 1]) if len(s) >= p else 0.0
    else:
        smin = 0.0
    return ObservabilityReport(r_h == p, r_h, r_s, p, smin)


def greedy_pmu_placement(case: GridCase, use_zibs: bool = True) -> set[int]:
    """Greedy placement making ``rank([H; A]) = p``.

    Each round adds the bus whose PMU raises the stacked rank the most;
    ties go to the lowest bus id.  With ``use_zibs=False`` the ZIB rows are
    left out, so the result makes ``H`` alone full column rank (what the
    least-squares estimator needs).
    """
    p = case.p
    placed: set[int] = set()
    A = zib_matrix(case) if use_zibs else np.zeros((0, p), dtype=complex)

    def stacked_rank(pmus):
        jac = build_jacobian(case.with_pmus(pmus))
        return numerical_rank(np.vstack([jac.H, A]))

    current = stacked_rank(placed)
    while current < p:
        best, best_rank = None, current
        for b in range(1, p + 1):
            if b in placed:
                continue
            r = stacked_rank(placed | {b})
            if r > best_rank:
                best, best_rank = b, r
        if best is None:  # cannot happen: a PMU everywhere gives rank p
            raise RuntimeError("greedy placement stalled")
        placed.add(best)
        current = best_rank
    return placed
