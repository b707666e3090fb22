"""Plain-text file formats: matrix CSV, BDD reports, attack specs, LRD results.

Matrix CSV: a header of column labels, then one row per time instant with
complex entries written ``re+imj`` using the shortest round-trip float
repr, so files reload bit-exactly.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

import numpy as np

from .attack import AttackSpec
from .estimation import BddReport, ComplexMatrixSeries
from .grid import Channel, JacobianSet
from .lrd import LrdResult


def format_complex(z: complex) -> str:
    im = repr(float(z.imag))
    return f"{float(z.real)!r}{'' if im.startswith('-') else '+'}{im}j"


def parse_complex(s: str) -> complex:
    return complex(s.strip().replace(" ", ""))


def state_labels(p: int) -> list[str]:
    return [f"x{b}" for b in range(1, p + 1)]


def write_matrix(path, M, labels: Sequence[str] | None = None) -> Path:
    if isinstance(M, ComplexMatrixSeries):
        labels = M.labels if labels is None else labels
        M = M.data
    M = np.atleast_2d(np.asarray(M, dtype=complex))
    if labels is None:
        labels = [f"c{j + 1}" for j in range(M.shape[1])]
    if len(labels) != M.shape[1]:
        raise ValueError(f"{len(labels)} labels for {M.shape[1]} columns")
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(labels)
        for row in M:
            w.writerow([format_complex(z) for z in row])
    return path


def read_matrix(path) -> ComplexMatrixSeries:
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty matrix file")
    labels, body = rows[0], rows[1:]
    if not body:
        raise ValueError(f"{path}: no data rows")
    data = np.empty((len(body), len(labels)), dtype=complex)
    for t, row in enumerate(body):
        if len(row) != len(labels):
            raise ValueError(f"{path}:{t + 2}: expected {len(labels)} fields, got {len(row)}")
        try:
            data[t] = [parse_complex(s) for s in row]
        except ValueError:
            raise ValueError(f"{path}:{t + 2}: bad complex entry") from None
    return ComplexMatrixSeries(data, labels)


def write_real_columns(path, header: Sequence[str], rows) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    return path


def read_rows(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def write_bdd_report(path, report: BddReport) -> Path:
    return write_real_columns(
        path,
        ["t", "statistic", "flagged"],
        [(t, s, int(f)) for t, s, f in report.rows()],
    )


def read_bdd_report(path, threshold: float = float("nan"), dof: int = 0) -> BddReport:
    _, rows = read_rows(path)
    stat = np.array([float(r[1]) for r in rows])
    return BddReport(stat, threshold, dof)


# --- attack specs ------------------------------------------------------------


def write_attack_spec(path, spec: AttackSpec, jac: JacobianSet) -> Path:
    """``kind``, ``targets``, ``controlled`` (channel labels), then ``C <csv>`` or ``F_diag ...``."""
    path = Path(path)
    labels = jac.labels
    lines = [
        f"kind {spec.kind}",
        "targets " + " ".join(str(b) for b in sorted(spec.targets)),
        "controlled " + " ".join(labels[j] for j in sorted(spec.controlled)),
    ]
    if spec.kind == "additive":
        c_path = path.with_name(path.stem + "_C.csv")
        write_matrix(c_path, spec.C, state_labels(jac.p))
        lines.append(f"C {c_path.name}")
    else:
        F = np.asarray(spec.F)
        if np.count_nonzero(F - np.diag(np.diag(F))):
            raise ValueError("only diagonal F can be serialized")
        lines.append("F_diag " + " ".join(format_complex(z) for z in np.diag(F)))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_attack_spec(path, jac: JacobianSet) -> AttackSpec:
    path = Path(path)
    fields: dict[str, list[str]] = {}
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            key, *rest = line.split()
            fields[key] = rest
    kind = fields.get("kind", [""])[0]
    label_index = {lab: j for j, lab in enumerate(jac.labels)}
    controlled = set()
    for lab in fields.get("controlled", []):
        Channel.parse(lab)
        if lab not in label_index:
            raise ValueError(f"{path}: channel {lab} is not measured in this case")
        controlled.add(label_index[lab])
    targets = {int(b) for b in fields.get("targets", [])}
    if kind == "additive":
        C = read_matrix(path.parent / fields["C"][0]).data
        return AttackSpec("additive", controlled, targets, C=C)
    if kind == "multiplicative":
        diag = [parse_complex(s) for s in fields["F_diag"]]
        return AttackSpec("multiplicative", controlled, targets, F=np.diag(diag))
    raise ValueError(f"{path}: unknown attack kind {kind!r}")


# --- LRD results ---------------------------------------------------------------


def write_lrd_result(out_dir, result: LrdResult, jac: JacobianSet, prefix: str = "lrd") -> dict[str, Path]:
    out = Path(out_dir)
    paths = {
        "W_hat": write_matrix(out / f"{prefix}_W_hat.csv", result.W_hat, jac.labels),
        "C_hat": write_matrix(out / f"{prefix}_C_hat.csv", result.C_hat, state_labels(jac.p)),
        "trace": write_real_columns(
            out / f"{prefix}_trace.csv",
            ["iter", "objective", "primal_residual"],
            [
                (k + 1, o, r)
                for k, (o, r) in enumerate(
                    zip(result.objective_trace, result.primal_residual_trace)
                )
            ],
        ),
        "column_norms": write_real_columns(
            out / f"{prefix}_column_norms.csv",
            ["bus", "l2_norm", "normalized"],
            [
                (b, float(n), float(z))
                for b, n, z in zip(
                    jac.bus_ids, result.column_norms, result.normalized_column_norms
                )
            ],
        ),
    }
    support = out / f"{prefix}_support.txt"
    support.write_text(
        "states " + " ".join(f"x{b}" for b in sorted(result.detected_state_support)) + "\n"
        + "measurements "
        + " ".join(jac.labels[j] for j in sorted(result.detected_measurement_support))
        + "\n",
        encoding="utf-8",
    )
    paths["support"] = support
    return paths


def read_support(path) -> tuple[set[int], set[str]]:
    states: set[int] = set()
    meas: set[str] = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        key, *rest = line.split()
        if key == "states":
            states = {int(s[1:]) for s in rest}
        elif key == "measurements":
            meas = set(rest)
    return states, meas
