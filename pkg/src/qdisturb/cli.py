"""Command-line front end and the JSON document format it reads.

A document looks like::

    {
      "version": 1,
      "dimension": 2,
      "observables": {
        "Z": {"outcomes": ["+", "-"], "effects": [M, M]}
      },
      "instruments": {
        "L": {"convention": "schrodinger", "outcomes": [...], "kraus": [[M, ...], ...]}
      },
      "solver": {"max_iterations": 200, "gap_tol": 1e-8}
    }

where each matrix ``M`` is a list of rows and each entry a ``[re, im]``
pair. An observable may also be given as a bare list of effects. The
``solver`` section is optional.
Instruments tagged ``"heisenberg"`` list operators ``K`` with
``I_x*(X) = sum K X K^H``; they are adjointed on load.

Certificate files share the matrix encoding and hold ``H``, ``K`` and
optionally the Choi matrices ``J`` together with the two observable names.

Exit codes: 0 ok, 1 semantic failure, 2 input error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import disturbance as dm
from . import instruments as ins
from . import linalg as la
from . import observables as obs_mod
from .instruments import Instrument
from .observables import Observable

FORMAT_VERSION = 1
CONVENTIONS = ("schrodinger", "heisenberg")

EXIT_OK = 0
EXIT_SEMANTIC = 1
EXIT_INPUT = 2
EXIT_SOLVER = 3


class InputError(ValueError):
    """Malformed document; the message names the location."""


# ---------------------------------------------------------------- documents


@dataclass
class Document:
    dimension: int
    observables: dict[str, Observable] = field(default_factory=dict)
    instruments: dict[str, Instrument] = field(default_factory=dict)
    conventions: dict[str, str] = field(default_factory=dict)
    hermiticity: dict[str, float] = field(default_factory=dict)
    solver: dict = field(default_factory=dict)


def _parse_number(v, where: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise InputError(f"{where}: expected a number, got {json.dumps(v)}")
    if not math.isfinite(v):
        raise InputError(f"{where}: non-finite number")
    return float(v)


def parse_matrix(m, where: str, dim: int | None = None) -> np.ndarray:
    """Nested ``[re, im]`` rows to a complex array."""
    if not isinstance(m, list) or not m:
        raise InputError(f"{where}: expected a non-empty list of rows")
    n = len(m) if dim is None else dim
    if len(m) != n:
        raise InputError(f"{where}: expected {n} rows, got {len(m)}")
    out = np.empty((n, n), dtype=np.complex128)
    for i, row in enumerate(m):
        if not isinstance(row, list) or len(row) != n:
            got = len(row) if isinstance(row, list) else type(row).__name__
            raise InputError(f"{where}[{i}]: expected a row of {n} entries, got {got}")
        for j, z in enumerate(row):
            if not isinstance(z, list) or len(z) != 2:
                raise InputError(f"{where}[{i}][{j}]: expected an [re, im] pair")
            out[i, j] = complex(_parse_number(z[0], f"{where}[{i}][{j}]"), _parse_number(z[1], f"{where}[{i}][{j}]"))
    return out


def _labels(spec, n: int, where: str) -> tuple[str, ...]:
    if spec is None:
        return ()
    if not isinstance(spec, list) or len(spec) != n:
        raise InputError(f"{where}: expected {n} outcome labels")
    labels = tuple(str(s) for s in spec)
    if len(set(labels)) != n:
        raise InputError(f"{where}: outcome labels must be distinct")
    return labels


def _parse_observable(name: str, spec, d: int) -> tuple[Observable, float]:
    where = f"observables.{name}"
    if isinstance(spec, list):
        spec = {"effects": spec}
    if not isinstance(spec, dict) or "effects" not in spec:
        raise InputError(f"{where}: expected an object with an 'effects' list")
    effs = spec["effects"]
    if not isinstance(effs, list) or not effs:
        raise InputError(f"{where}.effects: expected a non-empty list")
    mats = [parse_matrix(e, f"{where}.effects[{i}]", d) for i, e in enumerate(effs)]
    herm = max(la.hermiticity_error(m) for m in mats)
    labels = _labels(spec.get("outcomes"), len(mats), f"{where}.outcomes")
    return Observable(tuple(mats), labels), herm


def _parse_instrument(name: str, spec, d: int) -> tuple[Instrument, str]:
    where = f"instruments.{name}"
    if not isinstance(spec, dict) or "kraus" not in spec:
        raise InputError(f"{where}: expected an object with a 'kraus' list")
    conv = spec.get("convention", "schrodinger")
    if conv not in CONVENTIONS:
        raise InputError(f"{where}.convention: expected one of {CONVENTIONS}, got {conv!r}")
    groups = spec["kraus"]
    if not isinstance(groups, list) or not groups:
        raise InputError(f"{where}.kraus: expected a non-empty list of Kraus lists")
    parsed = []
    for x, g in enumerate(groups):
        if not isinstance(g, list) or not g:
            raise InputError(f"{where}.kraus[{x}]: expected a non-empty list of matrices")
        ks = [parse_matrix(k, f"{where}.kraus[{x}][{i}]", d) for i, k in enumerate(g)]
        if conv == "heisenberg":
            ks = [k.conj().T for k in ks]
        parsed.append(tuple(ks))
    labels = _labels(spec.get("outcomes"), len(parsed), f"{where}.outcomes")
    return Instrument(tuple(parsed), labels), conv


def _require_version(raw, where: str = "document") -> None:
    if not isinstance(raw, dict):
        raise InputError(f"{where}: top level must be a JSON object")
    if "version" not in raw:
        raise InputError(f"{where}: missing 'version' field")
    if raw["version"] != FORMAT_VERSION:
        raise InputError(f"{where}: unsupported version {raw['version']!r}")


def _load_json(text: str, source: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise InputError(f"{source}: line {e.lineno} column {e.colno}: {e.msg}") from None


def _read(path) -> str:
    try:
        return Path(path).read_text()
    except OSError as e:
        raise InputError(f"{path}: {e.strerror or e}") from None


SOLVER_KEYS = {"max_iterations": ("max_iter", int), "gap_tol": ("gap_tol", float)}


def _parse_solver(spec) -> dict:
    if not isinstance(spec, dict):
        raise InputError("solver: expected an object")
    out = {}
    for key, v in spec.items():
        if key not in SOLVER_KEYS:
            raise InputError(f"solver.{key}: unknown setting; known: {sorted(SOLVER_KEYS)}")
        name, kind = SOLVER_KEYS[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)) or (kind is int and not isinstance(v, int)) or v <= 0:
            raise InputError(f"solver.{key}: expected a positive {kind.__name__}")
        out[name] = kind(v)
    return out


def parse_document(raw) -> Document:
    _require_version(raw)
    d = raw.get("dimension")
    if isinstance(d, bool) or not isinstance(d, int) or d < 1:
        raise InputError("dimension: expected a positive integer")
    doc = Document(d)
    doc.solver = _parse_solver(raw.get("solver", {}))
    for key in ("observables", "instruments"):
        if not isinstance(raw.get(key, {}), dict):
            raise InputError(f"{key}: expected an object keyed by name")
    for name, spec in raw.get("observables", {}).items():
        doc.observables[name], doc.hermiticity[name] = _parse_observable(name, spec, d)
    for name, spec in raw.get("instruments", {}).items():
        if name in doc.observables:
            raise InputError(f"instruments.{name}: name already used by an observable")
        doc.instruments[name], doc.conventions[name] = _parse_instrument(name, spec, d)
    return doc


def loads(text: str, source: str = "<string>") -> Document:
    return parse_document(_load_json(text, source))


def load(path) -> Document:
    return loads(_read(path), str(path))


def _num(v: float, digits: int | None = None) -> str:
    v = float(v)
    if v == 0:
        return "0"
    if digits is None:
        return repr(v)
    s = format(v, f".{digits}g")
    return s if any(c in s for c in ".en") else s + ".0"


def matrix_text(m, digits: int | None = None) -> str:
    m = np.asarray(m, dtype=np.complex128)
    rows = ", ".join(
        "[" + ", ".join(f"[{_num(z.real, digits)}, {_num(z.imag, digits)}]" for z in row) + "]" for row in m
    )
    return "[" + rows + "]"


def matrix_json(m) -> list:
    m = np.asarray(m, dtype=np.complex128)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def _obj(items: list[tuple[str, str]], indent: int) -> str:
    pad = " " * indent
    if not items:
        return "{}"
    body = ",\n".join(f"{pad}  {json.dumps(k)}: {v}" for k, v in items)
    return "{\n" + body + "\n" + pad + "}"


def _mat_list(ms, indent: int, digits=None) -> str:
    pad = " " * indent
    return "[\n" + ",\n".join(f"{pad}  {matrix_text(m, digits)}" for m in ms) + "\n" + pad + "]"


def dumps(doc: Document, digits: int | None = None) -> str:
    """Serialize a document. By default entries use the shortest decimal that
    round-trips, so :func:`loads` inverts this exactly; ``digits=17`` gives
    fixed significant digits, which also round-trip. Instruments are written
    in the convention they were read in."""
    obs_items = []
    for name, o in doc.observables.items():
        obs_items.append(
            (name, _obj([("outcomes", json.dumps(list(o.outcomes))), ("effects", _mat_list(o.effects, 6, digits))], 4))
        )
    inst_items = []
    for name, inst in doc.instruments.items():
        conv = doc.conventions.get(name, "schrodinger")
        groups = inst.kraus if conv == "schrodinger" else inst.adjoint().kraus
        kraus = "[\n" + ",\n".join("        " + _mat_list(g, 8, digits) for g in groups) + "\n      ]"
        inst_items.append(
            (name, _obj([("convention", json.dumps(conv)), ("outcomes", json.dumps(list(inst.outcomes))), ("kraus", kraus)], 4))
        )
    top = [
        ("version", str(FORMAT_VERSION)),
        ("dimension", str(doc.dimension)),
        ("observables", _obj(obs_items, 2)),
        ("instruments", _obj(inst_items, 2)),
    ]
    if doc.solver:
        inv = {name: key for key, (name, _) in SOLVER_KEYS.items()}
        top.append(("solver", json.dumps({inv[k]: v for k, v in doc.solver.items()})))
    return _obj(top, 0) + "\n"


def dump(doc: Document, path, digits: int | None = None) -> None:
    Path(path).write_text(dumps(doc, digits))


# ------------------------------------------------------------- certificates


@dataclass
class CertificateFile:
    a: str
    b: str
    h: list[np.ndarray]
    k: list[np.ndarray]
    j: list[np.ndarray] | None = None


def certificate_dumps(cert: CertificateFile) -> str:
    raw = {
        "version": FORMAT_VERSION,
        "kind": "disturbance-certificate",
        "observables": [cert.a, cert.b],
        "H": [matrix_json(m) for m in cert.h],
        "K": [matrix_json(m) for m in cert.k],
    }
    if cert.j is not None:
        raw["J"] = [matrix_json(m) for m in cert.j]
    return json.dumps(raw) + "\n"


def certificate_loads(text: str, d: int, source: str = "<certificate>") -> CertificateFile:
    raw = _load_json(text, source)
    _require_version(raw, source)
    names = raw.get("observables")
    if not (isinstance(names, list) and len(names) == 2 and all(isinstance(s, str) for s in names)):
        raise InputError(f"{source}.observables: expected two observable names")
    mats = {}
    for key in ("H", "K", "J"):
        if key not in raw:
            if key == "J":
                continue
            raise InputError(f"{source}: missing '{key}'")
        if not isinstance(raw[key], list):
            raise InputError(f"{source}.{key}: expected a list of matrices")
        size = d * d if key == "J" else d
        mats[key] = [parse_matrix(m, f"{source}.{key}[{i}]", size) for i, m in enumerate(raw[key])]
    return CertificateFile(names[0], names[1], mats["H"], mats["K"], mats.get("J"))


# ------------------------------------------------------------------ reports


@dataclass
class Result:
    command: str
    inputs: dict
    value: object = None
    decision: object = None
    dual_bound: float | None = None
    gap: float | None = None
    status: str = "ok"
    lines: list[str] = field(default_factory=list)
    code: int = EXIT_OK

    def as_json(self) -> dict:
        return {
            "command": self.command,
            "inputs": self.inputs,
            "value": self.value,
            "decision": self.decision,
            "dual_bound": self.dual_bound,
            "gap": self.gap,
            "status": self.status,
        }


def _get_obs(doc: Document, name: str) -> Observable:
    if name not in doc.observables:
        raise InputError(f"unknown observable {name!r}; known: {sorted(doc.observables)}")
    return doc.observables[name]


def _get_inst(doc: Document, name: str) -> Instrument:
    if name not in doc.instruments:
        raise InputError(f"unknown instrument {name!r}; known: {sorted(doc.instruments)}")
    return doc.instruments[name]


def _observable_problems(doc: Document, name: str) -> list[str]:
    msgs = []
    if doc.hermiticity.get(name, 0.0) > la.HERM_TOL:
        msgs.append(f"an effect is not Hermitian (error {doc.hermiticity[name]:.3e})")
    msgs += obs_mod.validate(doc.observables[name]).messages
    return msgs


def _require_valid(doc: Document, res: Result, *names: str) -> bool:
    ok = True
    for n in names:
        for m in _observable_problems(doc, n):
            res.lines.append(f"observable {n}: {m}")
            ok = False
    if not ok:
        res.status = "invalid-input"
        res.code = EXIT_SEMANTIC
    return ok


def _solver_failed(res: Result, err: dm.SolverFailure) -> Result:
    res.status = err.status
    res.code = EXIT_SOLVER
    res.lines.append(f"solver failure: {err}")
    return res


def cmd_validate(doc: Document, args) -> Result:
    res = Result("validate", {"file": args.file})
    bad = []
    for name in doc.observables:
        msgs = _observable_problems(doc, name)
        res.lines.append(f"observable {name}: {'valid' if not msgs else 'INVALID'}")
        res.lines += [f"  {m}" for m in msgs]
        if msgs:
            bad.append(name)
    for name, inst in doc.instruments.items():
        diag = ins.validate_instrument(inst)
        res.lines.append(f"instrument {name} ({doc.conventions[name]}): {'valid' if diag.ok else 'INVALID'}")
        res.lines += [f"  {m}" for m in diag.messages]
        if not diag.ok:
            bad.append(name)
    res.value = len(doc.observables) + len(doc.instruments)
    res.decision = not bad
    res.inputs["invalid"] = bad
    if bad:
        res.status = "invalid"
        res.code = EXIT_SEMANTIC
    return res


def _names(args, n: int, what: str) -> list[str]:
    if len(args.names) != n:
        raise InputError(f"{args.command} needs {n} {what} name(s), got {len(args.names)}")
    return list(args.names)


def cmd_disturb(doc: Document, args) -> Result:
    na, nb = _names(args, 2, "observable")
    a, b = _get_obs(doc, na), _get_obs(doc, nb)
    res = Result("disturb", {"file": args.file, "A": na, "B": nb})
    if not _require_valid(doc, res, na, nb):
        return res
    tol = dm.DECISION_TOL if args.tol is None else args.tol
    try:
        r = dm.disturbance_measure(a, b, decision_tol=tol, **doc.solver)
    except dm.SolverFailure as e:
        return _solver_failed(res, e)
    res.value, res.decision, res.dual_bound, res.gap, res.status = (
        r.value, r.non_disturbing, r.certificate.bound, r.gap, r.status,
    )
    res.lines += [
        f"D_{na}({nb}) = {r.value:.10f}",
        f"non-disturbing: {'yes' if r.non_disturbing else 'no'} (tolerance {tol:g})",
        f"dual bound = {r.certificate.bound:.10f}",
        f"gap = {r.gap:.3e}",
    ]
    if args.certificate:
        cert = CertificateFile(na, nb, r.certificate.h, r.certificate.k, r.choi)
        Path(args.certificate).write_text(certificate_dumps(cert))
        res.lines.append(f"certificate written to {args.certificate}")
    return res


def cmd_firstkind(doc: Document, args) -> Result:
    (na,) = _names(args, 1, "observable")
    a = _get_obs(doc, na)
    res = Result("firstkind", {"file": args.file, "A": na})
    if not _require_valid(doc, res, na):
        return res
    tol = dm.DECISION_TOL if args.tol is None else args.tol
    try:
        r = dm.first_kind_measure(a, decision_tol=tol, **doc.solver)
    except dm.SolverFailure as e:
        return _solver_failed(res, e)
    res.value, res.decision, res.dual_bound, res.gap, res.status = (
        r.value, r.non_disturbing, r.certificate.bound, r.gap, r.status,
    )
    res.lines += [
        f"D_{na}({na}) = {r.value:.10f}",
        f"admits a first-kind instrument: {'yes' if r.non_disturbing else 'no'} (tolerance {tol:g})",
        f"dual bound = {r.certificate.bound:.10f}",
    ]
    return res


def cmd_joint(doc: Document, args) -> Result:
    na, nb = _names(args, 2, "observable")
    a, b = _get_obs(doc, na), _get_obs(doc, nb)
    res = Result("joint", {"file": args.file, "A": na, "B": nb})
    if not _require_valid(doc, res, na, nb):
        return res
    tol = dm.FEAS_TOL if args.tol is None else args.tol
    try:
        r = dm.joint_measurability(a, b, feas_tol=tol, **doc.solver)
    except dm.SolverFailure as e:
        return _solver_failed(res, e)
    res.value, res.decision, res.status = r.margin, r.feasible, r.status
    res.lines += [
        f"jointly measurable: {'yes' if r.feasible else 'no'}",
        f"margin (smallest joint-effect eigenvalue) = {r.margin:.10f}",
    ]
    if r.feasible:
        res.lines.append(f"marginal residual = {r.marginal_residual:.3e}")
    return res


def cmd_repeatable(doc: Document, args) -> Result:
    (ni,) = _names(args, 1, "instrument")
    inst = _get_inst(doc, ni)
    res = Result("repeatable", {"file": args.file, "instrument": ni})
    diag = ins.validate_instrument(inst)
    if not diag.ok:
        res.lines += [f"instrument {ni}: {m}" for m in diag.messages]
        res.status, res.code = "invalid-input", EXIT_SEMANTIC
        return res
    tol = 1e-9 if args.tol is None else args.tol
    a = ins.induced_observable(inst)
    resid = ins.repeatability_residual(inst)
    first = ins.disturbance_of(inst, a)
    res.value = resid
    res.decision = resid <= tol
    res.lines += [
        f"repeatable: {'yes' if resid <= tol else 'no'} (residual {resid:.3e})",
        f"first kind: {'yes' if first <= tol else 'no'} (residual {first:.3e})",
        f"induced observable sharp: {'yes' if obs_mod.is_sharp(a) else 'no'}",
        f"induced observable commutative: {'yes' if obs_mod.is_commutative(a) else 'no'}",
    ]
    return res


def cmd_fixedpoints(doc: Document, args) -> Result:
    if not args.names:
        raise InputError("fixedpoints needs an instrument name")
    ni, *others = args.names
    inst = _get_inst(doc, ni)
    checks = {n: _get_obs(doc, n) for n in others}
    res = Result("fixedpoints", {"file": args.file, "instrument": ni, "observables": others})
    tol = ins.FIX_TOL if args.tol is None else args.tol
    ch = ins.total_channel(inst)
    heis = ins.fixed_point_space(ch, tol)
    schr = ins.fixed_state_space(ch, tol)
    rho = ins.full_rank_fixed_state(ch)
    members = {}
    for n, o in checks.items():
        for label, e in zip(o.outcomes, o.effects):
            members[f"{n}[{label}]"] = heis.residual(e)
    res.value = {
        "dimension": heis.dim,
        "state_dimension": schr.dim,
        "eigenvalue_count": ins.fixed_dim_by_eigenvalues(ch, tol),
        "full_rank_state": rho is not None,
        "membership_residuals": members,
    }
    res.decision = rho is not None
    res.lines += [
        f"dim fix(Ic*) = {heis.dim}",
        f"dim fix(Ic) = {schr.dim}",
        f"full-rank fixed state: {'yes' if rho is not None else 'no'}",
    ]
    if rho is not None:
        res.lines.append(f"  smallest eigenvalue {la.min_eig(rho):.6g}")
    for i, f in enumerate(heis.basis):
        res.lines.append(f"basis[{i}] = {np.array2string(f, precision=6, suppress_small=True)}")
    for key, r in members.items():
        res.lines.append(f"{key} in fix(Ic*): {'yes' if r <= 1e-7 else 'no'} (residual {r:.3e})")
    return res


def cmd_verify(doc: Document, args) -> Result:
    if len(args.names) != 1:
        raise InputError("verify needs the certificate file path")
    path = args.names[0]
    cert = certificate_loads(_read(path), doc.dimension, path)
    a, b = _get_obs(doc, cert.a), _get_obs(doc, cert.b)
    res = Result("verify", {"file": args.file, "certificate": path, "A": cert.a, "B": cert.b})
    if len(cert.h) != len(a) or len(cert.k) != len(b):
        raise InputError(f"{path}: expected {len(a)} H and {len(b)} K matrices")
    tol = dm.FEAS_TOL if args.tol is None else args.tol
    try:
        bound = dm.verify_dual_certificate(a, b, cert.h, cert.k, feas_tol=tol)
    except dm.CertificateError as e:
        res.status, res.decision, res.code = "invalid", False, EXIT_SEMANTIC
        res.inputs["violated"] = e.constraint
        res.lines.append(f"certificate INVALID: {e} (violation {e.violation:.3e})")
        return res
    res.value = res.dual_bound = bound
    res.decision = True
    res.lines.append(f"certificate valid: D_{cert.a}({cert.b}) >= {bound:.10f}")
    if cert.j is not None:
        if len(cert.j) != len(a):
            raise InputError(f"{path}: expected {len(a)} J matrices")
        pc = dm.check_primal(a, b, cert.j)
        feas = pc.feasible(max(tol, 1e-7))
        res.lines.append(
            f"primal instrument: {'feasible' if feas else 'INFEASIBLE'} "
            f"(min eigenvalue {pc.min_eigenvalue:.3e}, marginal residual {pc.marginal_residual:.3e})"
        )
        if feas:
            res.gap = pc.upper_bound - bound
            res.lines.append(f"D_{cert.a}({cert.b}) <= {pc.upper_bound:.10f} (gap {res.gap:.3e})")
    return res


COMMANDS = {
    "validate": cmd_validate,
    "disturb": cmd_disturb,
    "joint": cmd_joint,
    "firstkind": cmd_firstkind,
    "repeatable": cmd_repeatable,
    "fixedpoints": cmd_fixedpoints,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qdisturb", description="Disturbance and compatibility of quantum observables.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("file", help="observable/instrument document (JSON)")
    p.add_argument("names", nargs="*", help="observable or instrument names; for verify, the certificate path")
    p.add_argument("--tol", type=float, default=None, help="decision or feasibility tolerance")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.add_argument("--certificate", metavar="PATH", help="disturb: write the certificate here")
    return p


def _clean(v):
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, (np.floating, float)):
        return float(v) if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_INPUT if e.code else EXIT_OK
    try:
        doc = load(args.file)
        res = COMMANDS[args.command](doc, args)
    except (InputError, la.DimensionError) as e:
        res = Result(args.command, {"file": args.file}, status="input-error", code=EXIT_INPUT)
        res.lines.append(f"error: {e}")
    if args.json:
        print(json.dumps(_clean(res.as_json())))
        if res.code == EXIT_INPUT:
            print(res.lines[-1], file=sys.stderr)
    else:
        out = sys.stderr if res.code == EXIT_INPUT else sys.stdout
        for line in res.lines:
            print(line, file=out)
    return res.code


if __name__ == "__main__":
    sys.exit(main())
