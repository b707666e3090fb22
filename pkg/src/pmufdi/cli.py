"""Command-line driver: ``validate``, ``simulate``, ``attack``, ``detect``, ``report``.

Every flag can also come from an INI manifest (``--manifest run.ini``)::

    [experiment]
    case = rts24.grid
    out = runs/bus4
    seed = 0
    detector = all

    [trajectory]
    N = 150
    num_modes = 3

    [lrd]
    lam = 1.05

    [attack]
    kind = multiplicative
    bus = 4
    phase = 0.2

Command-line flags override manifest values.  Exit codes: 0 success,
2 input error, 3 infeasible attack, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import cmath
import configparser
import csv
import json
import logging
import sys
from dataclasses import asdict, fields, replace
from pathlib import Path

import numpy as np

from . import io
from .attack import (
    AttackInfeasible,
    apply_attack,
    craft_additive_attack,
    craft_multiplicative_attack,
    feasibility_subgraph,
    verify_unobservability,
)
from .estimation import (
    BddConfig,
    UnobservableError,
    conventional_bdd,
    enhanced_bdd,
    estimate_states,
)
from .grid import CaseError, GridCase, build_jacobian, check_observability, load_case, numerical_rank
from .lrd import LrdConfig, lambda_sweep, solve_lrd
from .synth import TrajectoryConfig, measure, simulate_trajectory, singular_value_profile

log = logging.getLogger("pmufdi")

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_NUMERIC = 0, 2, 3, 4


class InputError(Exception):
    pass


# --- manifest handling -------------------------------------------------------


def read_manifest(path) -> configparser.ConfigParser:
    cp = configparser.ConfigParser()
    cp.optionxform = str  # keep N, lam etc. case-sensitive
    if path is not None:
        if not Path(path).exists():
            raise InputError(f"manifest {path} not found")
        cp.read(path, encoding="utf-8")
    return cp


def _coerce(cls, section: dict, base):
    types = {f.name: f.type for f in fields(cls)}
    kw = {}
    for key, raw in section.items():
        if key not in types:
            raise InputError(f"unknown {cls.__name__} field {key!r}")
        t = types[key]
        kw[key] = int(raw) if t in (int, "int") else float(raw)
    return replace(base, **kw)


def trajectory_config(args, manifest) -> TrajectoryConfig:
    cfg = TrajectoryConfig()
    if manifest.has_section("trajectory"):
        cfg = _coerce(TrajectoryConfig, dict(manifest["trajectory"]), cfg)
    overrides = {
        k: getattr(args, k)
        for k in ("N", "num_modes", "noise_sigma")
        if getattr(args, k, None) is not None
    }
    if args.seed is not None:
        overrides["seed"] = args.seed
    elif manifest.has_option("experiment", "seed"):
        overrides["seed"] = manifest.getint("experiment", "seed")
    return replace(cfg, **overrides)


def lrd_config(args, manifest) -> LrdConfig:
    cfg = LrdConfig()
    if manifest.has_section("lrd"):
        section = {k: v for k, v in manifest["lrd"].items() if k != "lambda_sweep"}
        cfg = _coerce(LrdConfig, section, cfg)
    if getattr(args, "lam", None) is not None:
        cfg = replace(cfg, lam=args.lam)
    if getattr(args, "max_iter", None) is not None:
        cfg = replace(cfg, max_iter=args.max_iter)
    return cfg


def _setting(args, manifest, name, section="experiment", default=None):
    value = getattr(args, name, None)
    if value is not None:
        return value
    if manifest.has_option(section, name):
        return manifest.get(section, name)
    return default


def _required(args, manifest, name, section):
    value = _setting(args, manifest, name, section)
    if value is None:
        raise InputError(f"--{name} is required for this attack")
    return value


def _case(args, manifest) -> GridCase:
    path = _setting(args, manifest, "case")
    if path is None:
        raise InputError("no case given (use --case or the manifest)")
    return load_case(path)


def _out(args, manifest) -> Path:
    out = Path(_setting(args, manifest, "out", default="."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# --- commands --------------------------------------------------------------------


def cmd_validate(args, manifest) -> int:
    case = _case(args, manifest)
    jac = build_jacobian(case)
    rep = check_observability(jac)
    print(f"case {case.name}: n={jac.n} p={jac.p} k={jac.k}")
    print(f"PMU buses: {' '.join(map(str, case.pmu_buses)) or '(none)'}")
    print(f"ZIBs: {' '.join(map(str, case.zibs)) or '(none)'}")
    print(f"rank(H)={rep.rank_H} rank([H;A])={rep.rank_stacked} smallest singular value of H={rep.min_singular_value:.6g}")
    print(rep.status)
    return EXIT_OK if rep.rank_stacked == jac.p else EXIT_INPUT


def _simulate(case, jac, cfg: TrajectoryConfig, out: Path):
    traj = simulate_trajectory(case, cfg)
    W = measure(traj.X, jac, cfg.noise_sigma, cfg.seed)
    io.write_matrix(out / "X.csv", traj.X, io.state_labels(jac.p))
    io.write_matrix(out / "W.csv", W, jac.labels)
    sv = singular_value_profile(W)
    io.write_real_columns(out / "singular_values.csv", ["index", "singular_value"], [(i + 1, s) for i, s in enumerate(sv)])
    _write_json(out / "simulate.json", {"case": case.name, "config": asdict(cfg), "rank_W": numerical_rank(W)})
    return traj.X, W


def cmd_simulate(args, manifest) -> int:
    case = _case(args, manifest)
    jac = build_jacobian(case)
    cfg = trajectory_config(args, manifest)
    out = _out(args, manifest)
    _, W = _simulate(case, jac, cfg, out)
    sv = singular_value_profile(W)
    dominant = int(np.sum(sv > 1e-6 * sv[0])) if sv[0] > 0 else 0
    print(f"wrote {out / 'W.csv'} ({W.shape[0]}x{W.shape[1]}); {dominant} singular values above 1e-6 * max")
    return EXIT_OK


def _load_or_simulate(args, manifest, case, jac, out: Path) -> np.ndarray:
    src = _setting(args, manifest, "input")
    if src is not None:
        W = io.read_matrix(src)
        if W.labels != jac.labels:
            raise InputError(f"{src}: channel labels do not match case {case.name}")
        return W.data
    if (out / "W.csv").exists():
        return io.read_matrix(out / "W.csv").data
    _, W = _simulate(case, jac, trajectory_config(args, manifest), out)
    return W


def _parse_controlled(tokens: str, jac) -> set[int]:
    label_index = {lab: j for j, lab in enumerate(jac.labels)}
    chosen: set[int] = set()
    for tok in (t.strip() for t in tokens.split(",")):
        if not tok:
            continue
        if tok.lower().startswith("pmu"):
            bus = int(tok[3:])
            chans = jac.channels_of([bus])
            if not chans:
                raise InputError(f"bus {bus} has no PMU")
            chosen |= chans
        elif tok in label_index:
            chosen.add(label_index[tok])
        else:
            raise InputError(f"unknown channel {tok!r}")
    return chosen


def cmd_attack(args, manifest) -> int:
    case = _case(args, manifest)
    jac = build_jacobian(case)
    out = _out(args, manifest)
    W = _load_or_simulate(args, manifest, case, jac, out)
    kind = args.kind or _setting(args, manifest, "kind", "attack")
    if kind == "multiplicative":
        bus = int(_required(args, manifest, "bus", "attack"))
        phase = float(_setting(args, manifest, "phase", "attack", 0.0))
        gain = float(_setting(args, manifest, "gain", "attack", 1.0))
        spec = craft_multiplicative_attack(jac, bus, gain * cmath.exp(1j * phase))
        subgraph = None
    elif kind == "additive":
        targets = {int(t) for t in str(_required(args, manifest, "targets", "attack")).split(",")}
        controlled = _parse_controlled(str(_setting(args, manifest, "controlled", "attack", "")), jac)
        magnitude = float(_setting(args, manifest, "magnitude", "attack", 0.1))
        subgraph = feasibility_subgraph(case, jac, targets, controlled)
        try:
            spec = craft_additive_attack(jac, controlled, targets, magnitude, N=W.shape[0])
        except AttackInfeasible as exc:
            print(f"infeasible: {exc}", file=sys.stderr)
            return EXIT_INFEASIBLE
    else:
        raise InputError("choose --mult or --add (or set [attack] kind)")

    W_bar = apply_attack(W, jac, spec)
    X_hat = estimate_states(W, jac)
    unobs = verify_unobservability(spec, jac, X_ref=X_hat)
    sigma = float(_setting(args, manifest, "noise_sigma", "trajectory", 0.0) or 0.0)
    bdd_cfg = BddConfig(sigma=sigma)
    conv = conventional_bdd(W_bar, jac, bdd_cfg)
    enh = enhanced_bdd(W_bar, jac, bdd_cfg)

    io.write_matrix(out / "Wbar.csv", W_bar, jac.labels)
    io.write_attack_spec(out / "attack.spec", spec, jac)
    io.write_bdd_report(out / "bdd_conventional.csv", conv)
    io.write_bdd_report(out / "bdd_enhanced.csv", enh)
    rank_kept = numerical_rank(W_bar) == numerical_rank(W)
    summary = {
        "kind": spec.kind,
        "targets": sorted(spec.targets),
        "controlled": [jac.labels[j] for j in sorted(spec.controlled)],
        "unobservable": unobs.unobservable,
        "violated_zibs": unobs.violated_zibs,
        "uncontrolled_channels": [jac.labels[j] for j in unobs.uncontrolled_channels],
        "conventional_bdd_flagged": conv.flagged,
        "enhanced_bdd_flagged": enh.flagged,
        "rank_preserved": rank_kept,
    }
    if subgraph is not None:
        summary["subgraph_feasible"] = subgraph.feasible
        summary["subgraph"] = sorted(subgraph.subgraph)
    _write_json(out / "attack.json", summary)

    print(f"attack: {spec.kind} targets {sorted(spec.targets)}")
    print(f"unobservable: {unobs.unobservable}" + (f" (violated ZIBs {unobs.violated_zibs})" if unobs.violated_zibs else ""))
    print(f"conventional BDD: {'FLAGGED' if conv.flagged else 'pass'}")
    print(f"enhanced BDD: {'FLAGGED' if enh.flagged else 'pass'}")
    print(f"rank preserved: {rank_kept}")
    return EXIT_OK


def _parse_sweep(text: str) -> list[float]:
    try:
        lo, hi, steps = text.split(":")
        return [float(x) for x in np.linspace(float(lo), float(hi), int(steps))]
    except ValueError:
        raise InputError(f"bad --lambda-sweep {text!r}; expected lo:hi:steps") from None


def cmd_detect(args, manifest) -> int:
    case = _case(args, manifest)
    jac = build_jacobian(case)
    out = _out(args, manifest)
    src = _setting(args, manifest, "input")
    if src is None:
        src = out / "Wbar.csv" if (out / "Wbar.csv").exists() else out / "W.csv"
    if not Path(src).exists():
        raise InputError(f"no measurement file {src}; run simulate or attack first")
    W = io.read_matrix(src)
    if W.labels != jac.labels:
        raise InputError(f"{src}: channel labels do not match case {case.name}")
    detector = _setting(args, manifest, "detector", default="all")
    sigma = float(_setting(args, manifest, "noise_sigma", "trajectory", 0.0) or 0.0)
    bdd_cfg = BddConfig(sigma=sigma)
    summary: dict = {"input": str(src)}

    if detector in ("conventional", "all"):
        rep = conventional_bdd(W, jac, bdd_cfg)
        io.write_bdd_report(out / "bdd_conventional.csv", rep)
        summary["conventional_bdd_flagged"] = rep.flagged
    if detector in ("enhanced", "all"):
        rep = enhanced_bdd(W, jac, bdd_cfg)
        io.write_bdd_report(out / "bdd_enhanced.csv", rep)
        summary["enhanced_bdd_flagged"] = rep.flagged
    if detector in ("lrd", "all"):
        cfg = lrd_config(args, manifest)
        res = solve_lrd(W, jac, cfg)
        io.write_lrd_result(out, res, jac)
        if not res.converged:
            log.warning("LRD did not converge in %d iterations", cfg.max_iter)
        summary.update(
            lrd_support=sorted(res.detected_state_support),
            lrd_l12=res.l12_norm,
            lrd_converged=res.converged,
            lrd_iterations=res.iterations,
            lrd_lambda=cfg.lam,
        )
        sweep = _setting(args, manifest, "lambda_sweep", "lrd")
        if sweep:
            curve = lambda_sweep(W, jac, _parse_sweep(sweep), cfg)
            io.write_real_columns(
                out / "lambda_sweep.csv",
                ["lambda", "l12_norm", "support"],
                [(lam, l12, " ".join(map(str, sorted(s)))) for lam, l12, s in curve],
            )
    elif detector not in ("conventional", "enhanced"):
        raise InputError(f"unknown detector {detector!r}")
    _write_json(out / "detect.json", summary)
    for key in sorted(summary):
        print(f"{key}: {summary[key]}")
    return EXIT_OK


REPORT_COLUMNS = ["run", "attack", "target", "conventional_bdd", "enhanced_bdd", "lrd_support", "lrd_l12"]


def _flag(v):
    return "-" if v is None else ("flagged" if v else "pass")


def cmd_report(args, manifest) -> int:
    root = Path(args.directory)
    if not root.is_dir():
        raise InputError(f"{root} is not a directory")
    runs = sorted(
        d
        for d in [root, *root.iterdir()]
        if d.is_dir() and ((d / "detect.json").exists() or (d / "attack.json").exists())
    )
    rows, gaps = [], []
    for d in runs:
        att = json.loads((d / "attack.json").read_text()) if (d / "attack.json").exists() else {}
        det = json.loads((d / "detect.json").read_text()) if (d / "detect.json").exists() else {}
        name = "." if d == root else d.name
        if not det:
            gaps.append(f"{name}: detect.json missing")
        conv = det.get("conventional_bdd_flagged", att.get("conventional_bdd_flagged"))
        enh = det.get("enhanced_bdd_flagged", att.get("enhanced_bdd_flagged"))
        rows.append(
            [
                name,
                att.get("kind", "none"),
                " ".join(map(str, att.get("targets", []))) or "-",
                _flag(conv),
                _flag(enh),
                (" ".join(map(str, det["lrd_support"])) or "none") if "lrd_support" in det else "-",
                f"{det['lrd_l12']:.6g}" if "lrd_l12" in det else "-",
            ]
        )
    with open(root / "summary.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        w.writerows(rows)
    widths = [max(len(str(r[i])) for r in [REPORT_COLUMNS, *rows]) for i in range(len(REPORT_COLUMNS))]
    lines = ["  ".join(str(c).ljust(w) for c, w in zip(r, widths)).rstrip() for r in [REPORT_COLUMNS, *rows]]
    text = "\n".join(lines) + "\n"
    if gaps:
        text += "gaps:\n" + "".join(f"  {g}\n" for g in gaps)
    (root / "summary.txt").write_text(text, encoding="utf-8")
    print(text, end="")
    return EXIT_OK


# --- argument parsing --------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--case", help="case file (bundled names such as rts24.grid work too)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int)
    common.add_argument("--manifest", help="INI manifest with [experiment]/[trajectory]/[lrd]/[attack]")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="pmufdi", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", parents=[common], help="check a case and its observability")
    v.add_argument("case_path", nargs="?", help="case file (alternative to --case)")

    s = sub.add_parser("simulate", parents=[common], help="generate X.csv, W.csv, singular_values.csv")
    s.add_argument("--N", type=int)
    s.add_argument("--num-modes", dest="num_modes", type=int)
    s.add_argument("--noise-sigma", dest="noise_sigma", type=float)

    a = sub.add_parser("attack", parents=[common], help="craft and apply an attack")
    kind = a.add_mutually_exclusive_group()
    kind.add_argument("--mult", dest="kind", action="store_const", const="multiplicative")
    kind.add_argument("--add", dest="kind", action="store_const", const="additive")
    a.add_argument("--bus", type=int)
    a.add_argument("--phase", type=float, help="F_bb = gain * exp(j * phase)")
    a.add_argument("--gain", type=float)
    a.add_argument("--targets", help="comma-separated target buses")
    a.add_argument("--controlled", help="comma-separated pmuK tokens or channel labels")
    a.add_argument("--magnitude", type=float)
    a.add_argument("--in", dest="input", help="measurement CSV (default: <out>/W.csv)")
    a.add_argument("--N", type=int)
    a.add_argument("--num-modes", dest="num_modes", type=int)
    a.add_argument("--noise-sigma", dest="noise_sigma", type=float)

    d = sub.add_parser("detect", parents=[common], help="run the detectors on a measurement CSV")
    d.add_argument("--in", dest="input", help="measurement CSV (default: <out>/Wbar.csv or W.csv)")
    d.add_argument("--detector", choices=["conventional", "enhanced", "lrd", "all"])
    d.add_argument("--lambda", dest="lam", type=float)
    d.add_argument("--max-iter", dest="max_iter", type=int)
    d.add_argument("--lambda-sweep", dest="lambda_sweep", help="lo:hi:steps")
    d.add_argument("--noise-sigma", dest="noise_sigma", type=float)

    r = sub.add_parser("report", parents=[common], help="tabulate all runs under a directory")
    r.add_argument("directory")
    return p


COMMANDS = {
    "validate": cmd_validate,
    "simulate": cmd_simulate,
    "attack": cmd_attack,
    "detect": cmd_detect,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    if args.command == "validate" and args.case_path:
        args.case = args.case_path
    try:
        manifest = read_manifest(args.manifest)
        return COMMANDS[args.command](args, manifest)
    except (CaseError, InputError, UnobservableError, FileNotFoundError, KeyError, ValueError) as exc:
        if isinstance(exc, KeyError):
            exc = f"missing setting {exc}"
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
