"""``affine-behaviors`` command line.

Exit codes: 0 success, 2 input error, 3 empty behavior, 4 failed
mathematical precondition, 1 numerical breakdown.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import __version__
from . import behavior as bh
from . import control, qdf, sim, stability
from . import serialize as ser
from .config import tolerances
from .errors import (
    AffineBehaviorError,
    EmptyBehaviorError,
    InputError,
    NotContractiveError,
    PreconditionError,
)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INPUT = 2
EXIT_EMPTY = 3
EXIT_PRECONDITION = 4


def _fmt_vec(v):
    return "[" + ", ".join(f"{x:.12g}" for x in np.asarray(v, dtype=float)) + "]"


def _fmt_roots(roots):
    parts = []
    for r in np.asarray(roots, dtype=complex):
        if abs(r.imag) < 1e-12:
            parts.append(f"{r.real:.12g}")
        else:
            parts.append(f"{r.real:.12g}{r.imag:+.12g}i")
    return "[" + ", ".join(parts) + "]"


def _emit(args, payload, lines):
    if args.json:
        sys.stdout.write(ser.dumps(payload))
    else:
        for line in lines:
            print(line)


def _write(path, payload):
    text = ser.dumps(payload)
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    try:
        with open(path, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc.strerror}") from exc


def cmd_analyze(args):
    B, name = ser.load_system(args.system)
    bh.minimize(B)
    if B.k == 0:
        rep = stability.is_contractive(B)
        payload = {
            "command": "analyze",
            "name": name,
            "kind": "autonomous",
            "contractive": rep.contractive,
            "offset_stable": rep.offset_stable,
            "wbar": rep.wbar,
            "det_roots": rep.det_roots,
            "margin": rep.margin,
        }
        lines = [
            f"system: {name or args.system}",
            f"contractive: {str(rep.contractive).lower()}",
            f"offset stable: {str(rep.offset_stable).lower()}",
            f"wbar: {_fmt_vec(rep.wbar) if rep.wbar is not None else 'none'}",
            f"roots: {_fmt_roots(rep.det_roots)}",
            f"margin: {rep.margin:.12g}",
        ]
    else:
        rep = stability.detectability_stabilizability_report(B)
        payload = {
            "command": "analyze",
            "name": name,
            "kind": "controlled",
            "detectable": rep.detectable,
            "offset_stabilizable": rep.offset_stabilizable,
            "consistent": rep.consistent,
            "checks": rep.checks,
            "diagnostics": rep.diagnostics,
        }
        lines = [
            f"system: {name or args.system}",
            f"detectable: {str(rep.detectable).lower()}",
            f"projection offset stabilizable: {str(rep.offset_stabilizable).lower()}",
            f"rank tests consistent: {str(rep.consistent).lower()}",
        ]
        lines += [f"  {k}: {str(v).lower()}" for k, v in rep.checks.items()]
        lines += [f"note: {d}" for d in rep.diagnostics]
    _emit(args, payload, lines)
    return EXIT_OK


def _reverify(B, path):
    form, wbar, psi = ser.certificate_from_dict(ser.load_file(path))
    v1 = qdf.verify_contraction_form(B, form)
    v2 = qdf.verify_psi_certificate(B, psi, form)
    v3 = qdf.verify_lyapunov(bh.difference_behavior(bh.minimize(B)), form)
    return v1, v2, v3


def cmd_certify(args):
    B, name = ser.load_system(args.system)
    try:
        cert = qdf.synthesize_contraction_form(B)
    except NotContractiveError as exc:
        raise NotContractiveError(f"{exc}; det roots {_fmt_roots(exc.roots)}", exc.roots) from exc
    payload = ser.certificate_to_dict(cert)
    if args.out:
        _write(args.out, payload)
        verdicts = _reverify(B, args.out)
        if not all(verdicts):
            print("error: written certificate failed re-verification", file=sys.stderr)
            return EXIT_FAILURE
    summary = {
        "command": "certify",
        "name": name,
        "out": args.out,
        "W": cert.phi.W,
        "phi": cert.phi.phi,
        "wbar": cert.wbar,
        "verified": True,
    }
    if args.out is None:
        sys.stdout.write(ser.dumps(payload))
        return EXIT_OK
    _emit(
        args,
        summary,
        [
            f"certificate written to {args.out}",
            f"window length: {cert.phi.W}",
            f"wbar: {_fmt_vec(cert.wbar)}",
            "contraction form, Lyapunov and psi checks: pass",
        ],
    )
    return EXIT_OK


def _load_pair(plant_path, ref_path):
    B, _ = ser.load_system(plant_path)
    R, _ = ser.load_system(ref_path)
    if R.k != 0 or R.q != B.q:
        raise InputError(f"reference must have q = {B.q} and k = 0, got q = {R.q}, k = {R.k}")
    return B, R


def cmd_check_implementable(args):
    B, R = _load_pair(args.plant, args.reference)
    v = control.is_implementable(B, R)
    payload = {"command": "check-implementable", "implementable": v.implementable, "reason": v.reason, "failed": v.failed}
    _emit(args, payload, [f"implementable: {str(v.implementable).lower()}", f"reason: {v.reason}"])
    return EXIT_OK


def cmd_synthesize(args):
    if args.reference:
        B, R = _load_pair(args.plant, args.reference)
        ctrl = control.synthesize_controller(B, R)
        closed = bh.interconnect_project(B, ctrl.rep)
        payload = {
            "controller": ser.system_to_dict(ctrl.rep, "controller"),
            "closed_loop": ser.system_to_dict(closed, "closed loop"),
            "regular": control.is_regular(B, ctrl),
            "linear": ctrl.linear,
        }
        lines = [f"controller rows: {ctrl.R.rows}", f"regular: {str(payload['regular']).lower()}"]
    else:
        B, _ = ser.load_system(args.plant)
        res = control.synthesize_stabilizing_controller(B, args.target)
        payload = {
            "controller": ser.system_to_dict(res.controller.rep, "controller"),
            "closed_loop": ser.system_to_dict(res.closed_loop, "closed loop"),
            "regular": res.regular,
            "linear": res.controller.linear,
            "achieved_wbar": res.achieved_wbar + 0.0,
            "certificate": ser.certificate_to_dict(res.certificate),
        }
        lines = [
            f"controller rows: {res.controller.R.rows}",
            f"linear: {str(res.controller.linear).lower()}",
            f"regular: {str(res.regular).lower()}",
            "closed loop contractive: true",
            f"wbar: {_fmt_vec(res.achieved_wbar + 0.0)}",
        ]
    if args.out:
        _write(args.out, payload)
        lines.append(f"written to {args.out}")
        _emit(args, {"command": "synthesize", "out": args.out, **payload}, lines)
    else:
        sys.stdout.write(ser.dumps(payload))
    return EXIT_OK


def cmd_simulate(args):
    B, _ = ser.load_system(args.system)
    if args.init is not None:
        init = np.array(args.init, dtype=float)
        L = bh.lag(B)
        if init.size != B.q_total * L:
            raise InputError(f"--init needs q*lag = {B.q_total * L} numbers, got {init.size}")
        run = sim.simulate(B, init, args.steps)
    else:
        run = sim.simulate(B, None, args.steps, seed=args.seed)
    if args.csv in (None, "-"):
        sim.write_csv(sys.stdout, run, long_format=args.long)
    else:
        sim.write_csv(args.csv, run, long_format=args.long)
        seg = run.trajectories[0]
        _emit(
            args,
            {
                "command": "simulate",
                "csv": args.csv,
                "samples": len(seg),
                "final": seg.samples[-1],
                "converged": run.converged,
                "max_residual": float(run.residuals.max(initial=0.0)),
            },
            [
                f"wrote {len(seg)} samples to {args.csv}",
                f"final: {_fmt_vec(seg.samples[-1])}",
                f"converged: {str(run.converged).lower()}",
            ],
        )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument("--coef-tol", type=float, help="coefficient zero threshold")
    common.add_argument("--rank-tol", type=float, help="relative rank threshold")
    common.add_argument("--schur-margin", type=float, help="roots within this of the unit circle count as unstable")

    p = argparse.ArgumentParser(prog="affine-behaviors", description="Stability and control of affine behaviors.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", parents=[common], help="contraction or detectability/stabilizability verdict")
    a.add_argument("system")
    a.set_defaults(func=cmd_analyze)

    c = sub.add_parser("certify", parents=[common], help="synthesize and verify a contraction certificate")
    c.add_argument("system")
    c.add_argument("--out", help="certificate JSON path (stdout if omitted)")
    c.set_defaults(func=cmd_certify)

    i = sub.add_parser("check-implementable", parents=[common], help="test whether a reference is implementable")
    i.add_argument("plant")
    i.add_argument("reference")
    i.set_defaults(func=cmd_check_implementable)

    s = sub.add_parser("synthesize", parents=[common], help="controller for a reference or a stabilizing controller")
    s.add_argument("plant")
    mode = s.add_mutually_exclusive_group(required=True)
    mode.add_argument("--reference", help="reference system file")
    mode.add_argument("--stabilize", action="store_true", help="regular stabilizing controller")
    s.add_argument("--target", type=float, nargs="+", help="equilibrium for the closed loop (with --stabilize)")
    s.add_argument("--out", help="output JSON path (stdout if omitted)")
    s.set_defaults(func=cmd_synthesize)

    m = sub.add_parser("simulate", parents=[common], help="simulate an autonomous system to CSV")
    m.add_argument("system")
    m.add_argument("--init", type=float, nargs="+", help="initial window, q*lag numbers, time-major")
    m.add_argument("--steps", type=int, default=100)
    m.add_argument("--csv", help="output CSV path (stdout if omitted)")
    m.add_argument("--long", action="store_true", help="long format with a traj_id column")
    m.add_argument("--seed", type=int, help="RNG seed for a random initial window (default: AB_SEED or built-in)")
    m.set_defaults(func=cmd_simulate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "synthesize" and args.target is not None and not args.stabilize:
        parser.error("--target requires --stabilize")
    overrides = {
        k: v
        for k, v in (("coef_zero", args.coef_tol), ("rank_rel", args.rank_tol), ("schur_margin", args.schur_margin))
        if v is not None
    }
    try:
        with tolerances(**overrides):
            return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except EmptyBehaviorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EMPTY
    except PreconditionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except AffineBehaviorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
