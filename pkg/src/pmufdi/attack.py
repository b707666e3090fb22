"""Unobservable false-data-injection attacks on PMU measurements.

An additive attack replaces ``W`` by ``W + C H^T``; it passes the residual
test for any ``C`` and passes the ZIB-enhanced test iff ``C A^T = 0``.  The
attacker can only write the channels it controls, so it also needs
``supp(C H^T)`` inside that set.  A multiplicative attack sends
``W -> X_hat F H^T`` for a full-rank ``F``, which keeps the rank of ``W``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
import scipy.linalg

from .estimation import _mat, estimate_states
from .grid import RANK_RTOL, GridCase, JacobianSet, numerical_rank

UNOBS_TOL = 1e-8


class AttackInfeasible(ValueError):
    def __init__(self, message: str, blocking_bus: int | None = None):
        super().__init__(message)
        self.blocking_bus = blocking_bus


@dataclass(frozen=True)
class AttackSpec:
    """``controlled`` and channel sets are 0-based row indices of ``H``; buses are 1-based."""

    kind: str
    controlled: frozenset[int]
    targets: frozenset[int]
    C: np.ndarray | None = None
    F: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("additive", "multiplicative"):
            raise ValueError(f"unknown attack kind {self.kind!r}")
        object.__setattr__(self, "controlled", frozenset(int(j) for j in self.controlled))
        object.__setattr__(self, "targets", frozenset(int(b) for b in self.targets))
        if self.kind == "additive" and self.C is None:
            raise ValueError("additive attack needs C")
        if self.kind == "multiplicative":
            if self.F is None:
                raise ValueError("multiplicative attack needs F")
            F = np.asarray(self.F)
            if F.ndim != 2 or F.shape[0] != F.shape[1]:
                raise ValueError("F must be square")
            if numerical_rank(F) < F.shape[0]:
                raise ValueError("F must be full rank")

    def validate_for(self, jac: JacobianSet) -> None:
        if any(not 0 <= j < jac.n for j in self.controlled):
            raise ValueError("controlled channel index out of range")
        if any(not 1 <= b <= jac.p for b in self.targets):
            raise ValueError("target bus out of range")


@dataclass
class FeasibilityReport:
    feasible: bool
    method: str
    required_pmu_buses: set[int] = field(default_factory=set)
    witness_c: np.ndarray | None = None
    blocking_buses: set[int] = field(default_factory=set)
    subgraph: set[int] = field(default_factory=set)


# --- subgraph procedure ------------------------------------------------------


def _boundary(case: GridCase, S: set[int]) -> set[int]:
    return {b for b in S if any(nb not in S for nb in case.neighbors(b))}


def build_attack_subgraph(case: GridCase, b: int) -> set[int]:
    """Bus ``b`` and its neighbours, then closed under adding the neighbours
    of any ZIB that sits on the boundary."""
    if not 1 <= b <= case.p:
        raise ValueError(f"unknown bus {b}")
    zibs = set(case.zibs)
    S = {b, *case.neighbors(b)}
    while True:
        grow = {
            nb
            for z in _boundary(case, S) & zibs
            for nb in case.neighbors(z)
            if nb not in S
        }
        if not grow:
            return S
        S |= grow


def subgraph_union(case: GridCase, targets: Iterable[int]) -> set[int]:
    targets = set(targets)
    if not targets:
        raise ValueError("targets must be nonempty")
    S: set[int] = set()
    for b in targets:
        S |= build_attack_subgraph(case, b)
    return S


def feasibility_subgraph(
    case: GridCase, jac: JacobianSet, targets: Iterable[int], controlled: Iterable[int]
) -> FeasibilityReport:
    """Sufficient test: every PMU inside the attack subgraph is fully controlled."""
    S = subgraph_union(case, targets)
    required = S & set(case.pmu_buses)
    controlled = set(controlled)
    missing = {b for b in required if not jac.channels_of([b]) <= controlled}
    return FeasibilityReport(
        feasible=not missing,
        method="subgraph",
        required_pmu_buses=required,
        blocking_buses=missing,
        subgraph=S,
    )


# --- exact nullspace test ----------------------------------------------------


def constraint_matrix(jac: JacobianSet, controlled: Iterable[int]) -> np.ndarray:
    """Rows of ``H`` the attacker cannot write, stacked on ``A``."""
    controlled = set(controlled)
    free = [r for r in range(jac.n) if r not in controlled]
    return np.vstack([jac.H[free], jac.A])


def _fix_phase(c: np.ndarray) -> np.ndarray:
    c = c / np.linalg.norm(c)
    j = int(np.argmax(np.abs(c)))
    return c * (abs(c[j]) / c[j])


def feasibility_exact(
    jac: JacobianSet, controlled: Iterable[int], targets: Iterable[int]
) -> FeasibilityReport:
    """Exact test: some ``c`` with ``M c = 0`` moves every target bus.

    ``M`` stacks the uncontrolled rows of ``H`` and ``A``.  Row ``b`` of an
    orthonormal nullspace basis is nonzero iff some feasible ``c`` has
    ``c_b != 0``; a generic combination then moves all targets at once.
    """
    targets = sorted(set(targets))
    if not targets:
        raise ValueError("targets must be nonempty")
    M = constraint_matrix(jac, controlled)
    if M.shape[0]:
        Nb = scipy.linalg.null_space(M, rcond=RANK_RTOL)
    else:
        Nb = np.eye(jac.p, dtype=complex)
    row_norms = np.linalg.norm(Nb, axis=1) if Nb.size else np.zeros(jac.p)
    blocking = {b for b in targets if row_norms[b - 1] <= 1e-8}
    if blocking:
        return FeasibilityReport(False, "exact", blocking_buses=blocking)

    # projection of sum_b e_b onto null(M); reweight if targets cancel
    idx = [b - 1 for b in targets]
    weights = np.ones(len(idx))
    for attempt in range(16):
        coeff = Nb[idx].conj().T @ weights
        c = Nb @ coeff
        if np.all(np.abs(c[idx]) > 1e-8 * max(np.linalg.norm(c), 1e-300)):
            return FeasibilityReport(True, "exact", witness_c=_fix_phase(c))
        weights = 1.0 + np.arange(1, len(idx) + 1) * (attempt + 1) * 0.6180339887
    return FeasibilityReport(False, "exact", blocking_buses=set(targets))


# --- crafting and applying ---------------------------------------------------


def craft_additive_attack(
    jac: JacobianSet,
    controlled: Iterable[int],
    targets: Iterable[int],
    magnitude: float,
    N: int = 1,
) -> AttackSpec:
    """Time-constant ``C`` whose rows are ``magnitude * witness_c``."""
    controlled = frozenset(controlled)
    targets = frozenset(targets)
    rep = feasibility_exact(jac, controlled, targets)
    if not rep.feasible:
        b = min(rep.blocking_buses)
        raise AttackInfeasible(
            f"no unobservable attack moves bus {b} with the controlled channels", b
        )
    C = np.tile(magnitude * rep.witness_c, (N, 1))
    spec = AttackSpec("additive", controlled, targets, C=C)
    ok = verify_unobservability(spec, jac)
    if not ok.unobservable:  # pragma: no cover - guaranteed by the nullspace construction
        raise RuntimeError(f"crafted attack failed verification: {ok}")
    return spec


def craft_multiplicative_attack(jac: JacobianSet, b: int, c: complex) -> AttackSpec:
    """Diagonal ``F`` with ``F_bb = c`` and ones elsewhere."""
    if not 1 <= b <= jac.p:
        raise ValueError(f"unknown bus {b}")
    if c == 0:
        raise ValueError("c = 0 makes F singular")
    F = np.eye(jac.p, dtype=complex)
    F[b - 1, b - 1] = c
    touched = frozenset(np.flatnonzero(jac.H[:, b - 1] != 0).tolist()) if c != 1 else frozenset()
    return AttackSpec("multiplicative", touched, frozenset({b}), F=F)


def apply_attack(W, jac: JacobianSet, spec: AttackSpec) -> np.ndarray:
    W = _mat(W)
    if W.shape[1] != jac.n:
        raise ValueError(f"W has {W.shape[1]} channels, model has {jac.n}")
    if spec.kind == "additive":
        C = np.atleast_2d(spec.C)
        if C.shape[1] != jac.p:
            raise ValueError(f"C has {C.shape[1]} columns, model has {jac.p} states")
        if C.shape[0] == 1:
            C = np.repeat(C, W.shape[0], axis=0)
        if C.shape[0] != W.shape[0]:
            raise ValueError(f"C has {C.shape[0]} rows, W has {W.shape[0]}")
        return W + C @ jac.H.T
    F = np.asarray(spec.F)
    if F.shape != (jac.p, jac.p):
        raise ValueError(f"F must be {jac.p}x{jac.p}")
    return estimate_states(W, jac) @ F @ jac.H.T


def implied_state_attack(W, jac: JacobianSet, spec: AttackSpec) -> np.ndarray:
    """The ``C`` with ``W_bar = W + C H^T``; for a multiplicative attack ``X_hat (F - I)``."""
    if spec.kind == "additive":
        return np.atleast_2d(spec.C)
    X_hat = estimate_states(W, jac)
    return X_hat @ (np.asarray(spec.F) - np.eye(jac.p))


@dataclass
class UnobservabilityReport:
    unobservable: bool
    violated_zibs: list[int] = field(default_factory=list)
    uncontrolled_channels: list[int] = field(default_factory=list)
    max_violation: float = 0.0


def verify_unobservability(
    spec: AttackSpec, jac: JacobianSet, X_ref=None, tol: float = UNOBS_TOL
) -> UnobservabilityReport:
    """Check ``C A^T = 0`` and ``supp(C H^T)`` within the controlled set.

    A multiplicative spec needs the reference state estimate ``X_ref``;
    its condition reads ``X_ref F A^T = 0``.
    """
    if spec.kind == "additive":
        C = np.atleast_2d(spec.C)
        zib = C @ jac.A.T
        D = C @ jac.H.T
        scale = max(1.0, float(np.abs(C).max(initial=0.0)))
        touched = np.flatnonzero(np.abs(D).max(axis=0, initial=0.0) > tol * scale)
        uncontrolled = sorted(int(j) for j in touched if int(j) not in spec.controlled)
    else:
        if X_ref is None:
            raise ValueError("multiplicative verification needs a reference state matrix")
        X_ref = _mat(X_ref)
        zib = X_ref @ np.asarray(spec.F) @ jac.A.T
        scale = max(1.0, float(np.abs(X_ref).max(initial=0.0)))
        uncontrolled = []
    col_max = np.abs(zib).max(axis=0, initial=0.0) if zib.size else np.zeros(jac.k)
    violated = [jac.zibs[i] for i in np.flatnonzero(col_max > tol * scale)]
    worst = float(col_max.max(initial=0.0))
    return UnobservabilityReport(
        unobservable=not violated and not uncontrolled,
        violated_zibs=violated,
        uncontrolled_channels=uncontrolled,
        max_violation=worst,
    )
