"""Command line front end.

::

    kt check FILE
    kt flow FILE [--emin X] [--emax Y] [--tol-angle A] [--out F.csv]
    kt spectrum FILE [--method flow|dense|both]
    kt monodromy FILE [--grid N]
    kt reconstruct FILE --energy E [--datum V ...] [--out F.csv]

Results go to stdout as JSON (sorted keys) or CSV (17 significant
digits); human-readable notes go to stderr.  Exit codes: 0 ok, 1 hypothesis
failure, 2 parse or validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io as _io
import json
import sys

import numpy as np

from . import io
from .channels import check_hypotheses
from .errors import HypothesisFailure, NumericalFailure, ValidationError
from .krein import TOL_ANGLE, default_window, locate_eigenvalues, solutions_at, spectral_flow
from .oracle import crosscheck, dense_spectrum
from .periodic import default_grid, monodromy_deviation_grid
from .transfer import reconstruct_solution

EXIT_OK = 0
EXIT_HYPOTHESIS = 1
EXIT_INPUT = 2
EXIT_NUMERICAL = 3

# agreement required between flow-located and dense eigenvalues in `spectrum --method both`
LOCATE_AGREEMENT = 1e-6


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _json(obj, out):
    out.write(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def _write_csv(rows, header, path=None, out=None):
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(x) if isinstance(x, (float, np.floating)) else x for x in r])
    if path is None:
        out.write(buf.getvalue())
    else:
        with open(path, "w", newline="") as fh:
            fh.write(buf.getvalue())


def _admissible(doc):
    gradings, report = check_hypotheses(doc.operator)
    if not report.ok:
        raise HypothesisFailure("hypotheses fail: " + "; ".join(report.failures()), report)
    return gradings


def cmd_check(args, out, err) -> int:
    doc = io.load(args.file)
    _, report = check_hypotheses(doc.operator)
    payload = report.to_dict()
    payload["ok"] = report.ok
    for line in report.failures() or ["all hypotheses hold"]:
        err.write(line + "\n")
    _json(payload, out)
    return EXIT_OK if report.ok else EXIT_HYPOTHESIS


def cmd_flow(args, out, err) -> int:
    doc = io.load(args.file)
    gradings = _admissible(doc)
    lo, hi = default_window(doc.operator)
    e_lo = lo if args.emin is None else args.emin
    e_hi = hi if args.emax is None else args.emax
    res = spectral_flow(doc.operator, gradings, e_lo, e_hi, tol_angle=args.tol_angle)
    if args.out:
        header = ["energy"] + [f"phase_{k + 1}" for k in range(res.phases.shape[1])]
        rows = [[e, *ph] for e, ph in zip(res.energies, res.phases)]
        _write_csv(rows, header, path=args.out)
    summary = res.to_summary()
    summary["default_window"] = {"emin": args.emin is None, "emax": args.emax is None}
    _json(summary, out)
    return EXIT_OK


def _flow_eigenvalues(op, gradings):
    return [(float(e), int(k)) for e, k in locate_eigenvalues(op, gradings)]


def cmd_spectrum(args, out, err) -> int:
    doc = io.load(args.file)
    op = doc.operator
    if args.method == "dense":
        spec = dense_spectrum(op)
        _write_csv([[v, k] for v, k in spec.clusters], ["energy", "multiplicity"], out=out)
        return EXIT_OK
    gradings = _admissible(doc)
    located = _flow_eigenvalues(op, gradings)
    if args.method == "flow":
        _write_csv([[v, k] for v, k in located], ["energy", "multiplicity"], out=out)
        return EXIT_OK
    spec = dense_spectrum(op)
    report = crosscheck(op, gradings, spectrum=spec)
    issues = list(report.discrepancies)
    if [k for _, k in located] != [k for _, k in spec.clusters]:
        issues.append({"kind": "located multiplicities",
                       "flow": [k for _, k in located], "oracle": [k for _, k in spec.clusters]})
    else:
        for (e, _), (v, _) in zip(located, spec.clusters):
            if abs(e - v) > LOCATE_AGREEMENT * (1.0 + abs(v)):
                issues.append({"kind": "location", "flow": e, "oracle": v})
    payload = {
        "dense": [{"energy": v, "multiplicity": k} for v, k in spec.clusters],
        "flow": [{"energy": e, "multiplicity": k} for e, k in located],
        "discrepancies": issues,
        "checked": report.checked,
        "ok": not issues,
    }
    _json(payload, out)
    return EXIT_OK if not issues else EXIT_NUMERICAL


def cmd_monodromy(args, out, err) -> int:
    doc = io.load(args.file)
    if doc.model is None:
        raise ValidationError("monodromy needs a periodic_scalar generator stanza")
    grid = default_grid(doc.model, args.grid)
    dev = monodromy_deviation_grid(doc.model, grid)
    lam = np.linalg.eigvalsh(doc.model.cell)
    at_spec = np.array([np.min(np.abs(lam - e)) <= 1e-12 * (1 + abs(e)) for e in grid])
    payload = {
        "period": doc.model.L,
        "grid_points": int(len(grid)),
        "max_deviation": float(dev.max()),
        "max_deviation_off_spectrum": float(dev[~at_spec].max()) if (~at_spec).any() else 0.0,
        "max_deviation_on_spectrum": float(dev[at_spec].max()) if at_spec.any() else 0.0,
    }
    _json(payload, out)
    return EXIT_OK


def cmd_reconstruct(args, out, err) -> int:
    doc = io.load(args.file)
    op = doc.operator
    gradings = _admissible(doc)
    L = gradings[0].p_plus.shape[0]
    if args.datum:
        vals = args.datum
        if len(vals) == L:
            datum = np.array(vals, dtype=complex)
        elif len(vals) == 2 * L:
            datum = np.array(vals[0::2]) + 1j * np.array(vals[1::2])
        else:
            raise ValidationError(f"--datum needs {L} real or {2 * L} re/im values, got {len(vals)}")
    else:
        sols = solutions_at(op, gradings, args.energy)
        if sols:
            datum = sols[0].psi_plus[0]
        else:
            err.write("energy is not an eigenvalue; using the first channel as datum\n")
            datum = np.eye(L, dtype=complex)[0]
    sol = reconstruct_solution(op, gradings, args.energy, datum)
    if args.out:
        v = sol.vector
        _write_csv([[float(x.real), float(x.imag)] for x in v], ["re", "im"], path=args.out)
    payload = {
        "energy": float(np.real(sol.energy)),
        "norm": sol.norm,
        "residual": sol.residual,
        "eigencondition_defect": sol.eigencondition_defect,
    }
    _json(payload, out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kt", description="Eigenvalue counting for block Jacobi operators.")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", help="check the channel hypotheses")
    c.add_argument("file")
    c.set_defaults(func=cmd_check)

    f = sub.add_parser("flow", help="eigenphase flow and eigenvalue count")
    f.add_argument("file")
    f.add_argument("--emin", type=float, default=None)
    f.add_argument("--emax", type=float, default=None)
    f.add_argument("--tol-angle", type=float, default=TOL_ANGLE)
    f.add_argument("--out", default=None, help="CSV file for the phase trajectories")
    f.set_defaults(func=cmd_flow)

    s = sub.add_parser("spectrum", help="eigenvalues by flow, dense solver, or both")
    s.add_argument("file")
    s.add_argument("--method", choices=("flow", "dense", "both"), default="both")
    s.set_defaults(func=cmd_spectrum)

    m = sub.add_parser("monodromy", help="transfer vs monodromy deviation for a periodic stanza")
    m.add_argument("file")
    m.add_argument("--grid", type=int, default=50)
    m.set_defaults(func=cmd_monodromy)

    r = sub.add_parser("reconstruct", help="rebuild a solution at a given energy")
    r.add_argument("file")
    r.add_argument("--energy", type=float, required=True)
    r.add_argument("--datum", type=float, nargs="+", default=None,
                   help="initial outgoing channel values (L reals, or 2L re/im pairs)")
    r.add_argument("--out", default=None, help="CSV file for the full state vector")
    r.set_defaults(func=cmd_reconstruct)
    return p


def main(argv=None, out=None, err=None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args, out, err)
    except (ValidationError, OSError) as exc:
        err.write(f"error: {exc}\n")
        return EXIT_INPUT
    except HypothesisFailure as exc:
        err.write(f"error: {exc}\n")
        return EXIT_HYPOTHESIS
    except NumericalFailure as exc:
        err.write(f"numerical failure: {exc}\n")
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
