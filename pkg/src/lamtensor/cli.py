"""``lt``: command-line front end.

Exit codes: 0 all checked properties hold, 1 a property failed (the report
carries the counterexample), 2 input or usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Any

import numpy as np

from . import __version__
from . import algebra as al
from . import axioms
from . import lambdaseq as ls
from . import matcore as mc
from . import order as od
from . import tensorspace as ts
from .errors import (
    InvolutionUnsupportedError,
    LamTensorError,
    RefusedError,
    UnsupportedSequenceError,
)
from .serialize import SCHEMA, dumps, write_atomic

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    def __init__(self, message: str, location: str | None = None):
        super().__init__(message)
        self.location = location


def _load_json(path: str, what: str) -> Any:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {what}: {exc.strerror}", path) from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed JSON in {what}: {exc.msg}", f"{path}:{exc.lineno}:{exc.colno}") from None


def _load_lambda(path: str) -> ls.LambdaSequence:
    obj = _load_json(path, "--lambda")
    if not isinstance(obj, dict):
        raise InputError("lambda spec must be a JSON object", path)
    return ls.from_json(obj)


def _header(args, lam: ls.LambdaSequence) -> dict:
    return {
        "schema": SCHEMA,
        "tool": "lamtensor",
        "version": __version__,
        "command": args.command,
        "seed": args.seed,
        "tolerances": {"exact": axioms.TOL_EXACT, "psd": args.tol, "realization": args.tol},
        "lambda": lam.to_json(),
        "lambda_name": lam.name,
    }


# -- commands -----------------------------------------------------------------

def cmd_axioms(args, lam) -> tuple[dict, bool]:
    levels = args.levels or (2 if lam.arity >= 4 else 3)
    budget = axioms.Budget(max_level=levels, cap=args.budget, trials=args.trials,
                           seed=args.seed, psd_tol=args.tol)
    rep = axioms.check_all(lam, budget)
    body = rep.to_json()
    failed = [c for c in rep.conditions() if rep.verdict(c) == axioms.FAIL]
    body["failed"] = failed
    return body, not failed


def cmd_norm(args, lam) -> tuple[dict, bool]:
    if args.input:
        obj = _load_json(args.input, "--input")
        elem_obj, cand_obj = obj.get("element"), obj.get("candidates")
    else:
        if not (args.element and args.candidates):
            raise InputError("norm needs --element and --candidates (or --input)")
        elem_obj = _load_json(args.element, "--element")
        cand_obj = _load_json(args.candidates, "--candidates")
    if isinstance(cand_obj, dict):
        cand_obj = cand_obj.get("candidates")
    if elem_obj is None or not isinstance(cand_obj, list):
        raise InputError("expected an element object and a list of candidate decompositions")
    element = ts.TensorElement.from_json(elem_obj)
    cands = [ts.Decomposition.from_json(c) for c in cand_obj]
    for i, c in enumerate(cands):
        ts.check_shapes(lam, c, element.spec)
        if not ts.realizes(lam, element, c, args.tol):
            raise InputError(f"candidate {i} does not realize the element", f"candidates[{i}]")
    ub = ts.lambda_norm_ub(lam, element, cands)
    lo = ts.min_norm(element)
    ok = lo <= ub.value + args.tol
    return {"min_norm": lo, "lambda_norm_ub": ub.value, "best_candidate": ub.index,
            "sandwich_holds": bool(ok)}, ok


def cmd_cone(args, lam) -> tuple[dict, bool]:
    obj = _require_input(args)
    cert = od.ConeCertificate.from_json(obj["certificate"] if "certificate" in obj else obj)
    element = None
    if "element" in obj:
        element = ts.TensorElement.from_json(obj["element"])
    v = od.verify_certificate(lam, cert, element, args.tol)
    body = {"certificate_ok": v.ok, "psd_residual": v.psd_residual,
            "realization_residual": v.realization_residual, "level": cert.level}
    ok = v.ok
    if v.ok and axioms.passes(lam, "O3", 2):
        # a certified element must have a PSD flattening
        flat_check = mc.is_psd(od.cert_flat(lam, cert), args.tol)
        body["flattening_min_eig"] = flat_check.min_eig
        body["flattening_psd"] = flat_check.ok
        ok = ok and flat_check.ok
    return body, ok


def cmd_ossys(args, lam) -> tuple[dict, bool]:
    obj = _require_input(args)
    dec = ts.Decomposition.from_json(obj["decomposition"] if "decomposition" in obj else obj)
    ts.check_shapes(lam, dec)
    res = od.order_unit_bound(lam, dec)
    u = ts.realize_flat(lam, dec)
    one = mc.identity(u.shape[0])
    plus = od.verify_certificate(lam, res.plus, res.K_prime * one + u, args.tol)
    minus = od.verify_certificate(lam, res.minus, res.K_prime * one - u, args.tol)
    ok = plus.ok and minus.ok
    return {"K": res.K, "K_prime": res.K_prime,
            "plus": {"ok": plus.ok, "realization_residual": plus.realization_residual,
                     "level": res.plus.level},
            "minus": {"ok": minus.ok, "realization_residual": minus.realization_residual,
                      "level": res.minus.level}}, ok


def cmd_algebra(args, lam) -> tuple[dict, bool]:
    if args.input:
        obj = _load_json(args.input, "--input")
        raw = obj.get("pairs") if isinstance(obj, dict) else obj
        if not isinstance(raw, list):
            raise InputError("expected a list of [x, y] decomposition pairs")
        pairs = [(al.element(lam, ts.Decomposition.from_json(x)), al.element(lam, ts.Decomposition.from_json(y)))
                 for x, y in raw]
    else:
        rng = np.random.default_rng(args.seed)
        dims = (2,) * lam.arity
        pairs = [(al.random_element(lam, dims, 1 + i % 2, rng), al.random_element(lam, dims, 1 + (i // 2) % 2, rng))
                 for i in range(args.trials)]
    report = al.submult_report(lam, pairs, args.tol)
    ok = report["ok"]
    body = {"submultiplicativity": report}
    if all(axioms.passes(lam, "O1", x.dec.level) for pair in pairs for x in pair):
        worst = 0.0
        for x, _ in pairs:
            xs = al.involution(lam, x)
            worst = max(worst, mc.max_abs(xs.flat - mc.adjoint(x.flat)), abs(xs.value() - x.value()))
        body["involution"] = {"max_residual": worst, "ok": worst <= args.tol}
        ok = ok and worst <= args.tol
    else:
        body["involution"] = {"ok": None, "note": "lambda not verified for (O1); involution refused"}
    return body, ok


def _require_input(args) -> dict:
    if not args.input:
        raise InputError(f"{args.command} needs --input")
    obj = _load_json(args.input, "--input")
    if not isinstance(obj, dict):
        raise InputError("input must be a JSON object", args.input)
    return obj


COMMANDS = {"axioms": cmd_axioms, "norm": cmd_norm, "cone": cmd_cone,
            "ossys": cmd_ossys, "algebra": cmd_algebra}


# -- entry point --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lt", description="lambda-tensor product toolkit")
    parser.add_argument("--version", action="version", version=f"lt {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--lambda", dest="lam", required=True, help="lambda spec JSON file")
        p.add_argument("--input", help="input JSON file")
        p.add_argument("--tol", type=float, default=1e-9)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--budget", type=int, default=axioms.ENUM_CAP, help="enumeration cap")
        p.add_argument("--trials", type=int, default=200)
        p.add_argument("--out", help="report path (default stdout)")
        if name == "axioms":
            p.add_argument("--levels", type=int, default=None)
        if name == "norm":
            p.add_argument("--element")
            p.add_argument("--candidates")
    return parser


def _emit(args, report: dict) -> None:
    text = dumps(report)
    if getattr(args, "out", None):
        write_atomic(args.out, text)
    else:
        sys.stdout.write(text)


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    if args.tol <= 0 or args.budget < 1 or args.trials < 1 or (getattr(args, "levels", None) or 1) < 1:
        print("lt: --tol must be > 0; --budget, --trials, --levels must be >= 1", file=sys.stderr)
        return EXIT_INPUT
    try:
        lam = _load_lambda(args.lam)
        header = _header(args, lam)
        try:
            body, ok = COMMANDS[args.command](args, lam)
        except (RefusedError, InvolutionUnsupportedError, UnsupportedSequenceError) as exc:
            # the sequence lacks a property the command depends on
            body, ok = {"refused": f"{type(exc).__name__}: {exc}"}, False
    except InputError as exc:
        return _input_error(str(exc), exc.location)
    except (KeyError, TypeError) as exc:
        return _input_error(f"malformed input: missing or mistyped field {exc}", None)
    except (ValueError, LamTensorError) as exc:
        return _input_error(f"{type(exc).__name__}: {exc}", None)
    report = {**header, **body, "status": "ok" if ok else "fail"}
    _emit(args, report)
    return EXIT_OK if ok else EXIT_FAIL


def _input_error(message: str, location: str | None) -> int:
    err = {"error": message}
    if location:
        err["location"] = location
    sys.stderr.write(json.dumps(err, sort_keys=True) + "\n")
    return EXIT_INPUT


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
