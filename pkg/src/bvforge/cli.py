"""Command line driver.

``bvforge <command> <model.bv> [flags]`` parses a model document, runs
one named operation, and emits a deterministic report.  Exit status 0
means every check in the report passed (computations count as passing),
1 means at least one check failed, and 2 means the input or the model
was rejected before any check could run.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import dataclass, field as dataclass_field, replace
from pathlib import Path

from .algebra import LocalFunction
from .bracket import antibracket, bv_laplacian
from .expr import ExpressionError, format_local_function
from .jet import ModelSpec, check_noether, euler_lagrange
from .linfty import Element, LInftyStructure, check_linfty, extract_brackets, mc_residual
from .master import BVAction, build_stage_action, master_residual, quantum_master_check, solve_master
from .modelfile import ModelDocument, parse_document, print_model

__all__ = ["main", "run_command"]

DEFAULT_MAX_ANTIFIELD_NUMBER = 3


# ------------------------------------------------------------- reports

@dataclass
class Report:
    """Everything a command produced, ready for either output format."""

    command: str
    digest: str
    bounds: tuple[int, int]
    is_check: bool
    results: list[tuple[str, str]] = dataclass_field(default_factory=list)
    residuals: list[tuple[str, str]] = dataclass_field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.residuals if self.is_check else True

    def render(self, fmt: str) -> str:
        if fmt == "structured":
            payload = {
                "command": self.command,
                "model": self.digest,
                "bounds": {"jet": self.bounds[0], "deg": self.bounds[1]},
                "results": {label: value for label, value in self.results},
                "residuals": {label: value for label, value in self.residuals},
                "pass": self.passed,
            }
            return json.dumps(payload, indent=2, sort_keys=True) + "\n"
        lines = []
        for label, value in self.results:
            lines.append(f"{label} = {value}" if label else value)
        for label, value in self.residuals:
            lines.append(f"residual[{label}] = {value}")
        if self.is_check:
            lines.append("PASS" if self.passed else "FAIL")
        return "\n".join(lines) + "\n"


def _format_element(e: Element) -> str:
    if e.is_zero:
        return "0"
    pieces: list[str] = []
    for b, c in e.items():
        body = b.name if abs(c) == 1 else f"{abs(c)}*{b.name}"
        if not pieces:
            pieces.append(body if c > 0 else f"-{body}")
        else:
            pieces.append(f"+ {body}" if c > 0 else f"- {body}")
    return " ".join(pieces)


def _digest(doc: ModelDocument) -> str:
    canonical = print_model(doc.spec, doc.deformation)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


# ------------------------------------------------------------ plumbing

def _apply_bounds(m: ModelSpec, text: str | None) -> ModelSpec:
    if text is None:
        return m
    overrides: dict[str, int] = {}
    for piece in text.split(","):
        piece = piece.strip()
        key, _, value = piece.partition("=")
        if key not in ("jet", "deg") or not value.isdigit():
            raise ValueError(
                f"bad bounds {text!r} (expected jet=<int>,deg=<int>)")
        overrides[key] = int(value)
    return replace(
        m,
        max_jet_order=overrides.get("jet", m.max_jet_order),
        max_poly_degree=overrides.get("deg", m.max_poly_degree),
    )


def _default_stage(m: ModelSpec) -> int:
    if m.structure_functions is not None:
        return 2
    if m.gauge_coefficients:
        return 1
    return 0


def _solved_action(m: ModelSpec, K: int | None) -> BVAction:
    final, _records = solve_master(m, DEFAULT_MAX_ANTIFIELD_NUMBER if K is None else K)
    return final


def _extracted(m: ModelSpec, K: int | None, n_max: int) -> LInftyStructure:
    return extract_brackets(_solved_action(m, K), n_max)


def _theta_elements(L: LInftyStructure, deformation: dict[int, LocalFunction]) -> dict[int, Element]:
    by_name = {b.name: b for b in L.basis}
    theta: dict[int, Element] = {}
    for power, f in deformation.items():
        acc = Element.zero()
        for mono in f.monomials():
            g = mono.factors[0][0]
            name = f"{g.kind.value}[{g.family}]"
            slot = by_name.get(name)
            if slot is None:
                raise ValueError(
                    f"deformation entry t^{power} uses {name}, which is not"
                    " part of the extracted complex")
            acc = acc + Element.from_basis(slot, mono.coefficient)
        theta[power] = acc
    return theta


# ------------------------------------------------------------- commands

def _cmd_el(doc: ModelDocument, args) -> Report:
    m = doc.spec
    report = Report("el", _digest(doc), (m.max_jet_order, m.max_poly_degree), is_check=False)
    if args.field is not None:
        if args.field not in m.fields:
            raise ValueError(f"unknown field family {args.field!r}")
        report.results.append(
            ("", format_local_function(euler_lagrange(m.lagrangian, args.field))))
        return report
    for a in m.fields:
        report.results.append(
            (f"E[{a}]", format_local_function(euler_lagrange(m.lagrangian, a))))
    return report


def _cmd_divergence(doc: ModelDocument, args) -> Report:
    m = doc.spec
    report = Report("divergence", _digest(doc), (m.max_jet_order, m.max_poly_degree), is_check=True)
    for a in m.fields:
        e = euler_lagrange(m.lagrangian, a)
        if not e.is_zero:
            report.residuals.append((f"E[{a}]", format_local_function(e)))
    return report


def _cmd_noether(doc: ModelDocument, args) -> Report:
    m = doc.spec
    report = Report("noether", _digest(doc), (m.max_jet_order, m.max_poly_degree), is_check=True)
    noether = check_noether(m)
    for alpha in m.gauge_indices:
        residual = noether.per_identity_residual[alpha]
        if not residual.is_zero:
            report.residuals.append((alpha, format_local_function(residual)))
    return report


def _cmd_bracket(doc: ModelDocument, args) -> Report:
    m = doc.spec
    report = Report("bracket", _digest(doc), (m.max_jet_order, m.max_poly_degree), is_check=False)
    S = _solved_action(m, args.max_antifield_number)
    value = antibracket(S.total, S.total, m.spatial_dim)
    report.results.append(("(S, S)", format_local_function(value)))
    return report


def _cmd_delta(doc: ModelDocument, args) -> Report:
    m = doc.spec
    report = Report("delta", _digest(doc), (m.max_jet_order, m.max_poly_degree), is_check=False)
    S = _solved_action(m, args.max_antifield_number)
    report.results.append(("delta(S)", format_local_function(bv_laplacian(S.total))))
    return report


def _cmd_build(doc: ModelDocument, args) -> Report:
    m = doc.spec
    report = Report("build", _digest(doc), (m.max_jet_order, m.max_poly_degree), is_check=False)
    stage = _default_stage(m) if args.max_antifield_number is None else args.max_antifield_number
    S = build_stage_action(m, stage)
    for k in sorted(S.by_antifield_number):
        report.results.append(
            (f"S[{k}]", format_local_function(S.stratum(k))))
    return report


def _cmd_solve(doc: ModelDocument, args) -> Report:
    m = doc.spec
    report = Report("solve", _digest(doc), (m.max_jet_order, m.max_poly_degree), is_check=True)
    K = DEFAULT_MAX_ANTIFIELD_NUMBER if args.max_antifield_number is None else args.max_antifield_number
    final, records = solve_master(m, K)
    for record in records:
        if record.lifted:
            report.results.append(
                (f"lift[{record.antifield_number}]",
                 format_local_function(record.correction)))
        else:
            report.residuals.append(
                (f"obstruction[{record.antifield_number}]",
                 format_local_function(record.obstruction)))
    for k in sorted(final.residual_report or {}):
        report.residuals.append(
            (f"stratum {k}", format_local_function(final.residual_report[k])))
    return report


def _cmd_residual(doc: ModelDocument, args) -> Report:
    m = doc.spec
    report = Report("residual", _digest(doc), (m.max_jet_order, m.max_poly_degree), is_check=True)
    S = build_stage_action(m, _default_stage(m))
    strata = master_residual(S)
    K = args.max_antifield_number
    for k in sorted(strata):
        if K is not None and k > K:
            continue
        report.residuals.append((f"stratum {k}", format_local_function(strata[k])))
    return report


def _cmd_qme(doc: ModelDocument, args) -> Report:
    m = doc.spec
    report = Report("qme", _digest(doc), (m.max_jet_order, m.max_poly_degree), is_check=True)
    S = _solved_action(m, args.max_antifield_number)
    outcome = quantum_master_check(S)
    report.results.append(("(S, S)", format_local_function(outcome.classical)))
    report.results.append(("delta(S)", format_local_function(outcome.delta)))
    if not outcome.quantum_residual.is_zero:
        report.residuals.append(
            ("quantum", format_local_function(outcome.quantum_residual)))
    return report


def _cmd_extract(doc: ModelDocument, args) -> Report:
    m = doc.spec
    report = Report("extract", _digest(doc), (m.max_jet_order, m.max_poly_degree), is_check=False)
    n_max = 2 if args.arity is None else args.arity
    L = _extracted(m, args.max_antifield_number, n_max)
    for b in L.basis:
        report.results.append((f"degree[{b.name}]", str(b.degree)))
    for b in L.basis:
        image = L.differential.get(b)
        if image is not None and not image.is_zero:
            report.results.append((f"d({b.name})", _format_element(image)))
    index = {b: i for i, b in enumerate(L.basis)}
    for n in sorted(L.brackets):
        table = L.brackets[n]
        for key in sorted(table, key=lambda tup: [index[b] for b in tup]):
            value = table[key]
            if value.is_zero:
                continue
            names = ", ".join(b.name for b in key)
            report.results.append((f"l{n}({names})", _format_element(value)))
    return report


def _cmd_check_linfty(doc: ModelDocument, args) -> Report:
    m = doc.spec
    report = Report("check-linfty", _digest(doc), (m.max_jet_order, m.max_poly_degree), is_check=True)
    n_max = 3 if args.arity is None else args.arity
    L = _extracted(m, args.max_antifield_number, n_max)
    outcome = check_linfty(L, n_max)
    report.results.append(("identities checked", str(outcome.checked)))
    for n, key, residual in outcome.failures:
        names = ", ".join(b.name for b in key)
        report.residuals.append(
            (f"identity[n={n}; {names}]", _format_element(residual)))
    return report


def _cmd_mc(doc: ModelDocument, args) -> Report:
    m = doc.spec
    report = Report("mc", _digest(doc), (m.max_jet_order, m.max_poly_degree), is_check=True)
    if not doc.deformation:
        raise ValueError("the document has no deformation section")
    order = max(doc.deformation)
    n_max = max(2, order) if args.arity is None else args.arity
    L = _extracted(m, args.max_antifield_number, n_max)
    theta = _theta_elements(L, doc.deformation)
    residuals = mc_residual(L, theta, order)
    for power in sorted(residuals):
        value = residuals[power]
        if value.is_zero:
            report.results.append((f"order {power}", "0"))
        else:
            report.residuals.append((f"order {power}", _format_element(value)))
    return report


_COMMANDS = {
    "el": _cmd_el,
    "divergence": _cmd_divergence,
    "noether": _cmd_noether,
    "bracket": _cmd_bracket,
    "delta": _cmd_delta,
    "build": _cmd_build,
    "solve": _cmd_solve,
    "residual": _cmd_residual,
    "qme": _cmd_qme,
    "extract": _cmd_extract,
    "check-linfty": _cmd_check_linfty,
    "mc": _cmd_mc,
}


# ---------------------------------------------------------------- entry

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bvforge",
        description="Exact antifield computations on small gauge models.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name, handler in _COMMANDS.items():
        p = sub.add_parser(name, help=handler.__doc__)
        p.add_argument("model", help="path to a .bv model document")
        p.add_argument("-K", dest="max_antifield_number", type=int, default=None,
                       help="largest antifield number to solve or report")
        p.add_argument("--format", choices=("text", "structured"), default="text")
        p.add_argument("--bounds", default=None, metavar="jet=<p>,deg=<d>",
                       help="override the ansatz bounds of the document")
        if name in ("extract", "check-linfty", "mc"):
            p.add_argument("-n", dest="arity", type=int, default=None,
                           help="largest bracket arity")
        if name == "el":
            p.add_argument("--field", default=None,
                           help="report a single field family")
    return parser


def run_command(argv: list[str]) -> tuple[int, str]:
    """Run one command line; returns (exit status, report text)."""
    args = _build_parser().parse_args(argv)
    try:
        text = Path(args.model).read_text(encoding="utf-8")
        doc = parse_document(text)
        doc = ModelDocument(spec=_apply_bounds(doc.spec, args.bounds),
                            deformation=doc.deformation)
        report = _COMMANDS[args.command](doc, args)
    except (OSError, ValueError) as err:
        return 2, f"error: {err}\n"
    return (0 if report.passed else 1), report.render(args.format)


def main(argv: list[str] | None = None) -> int:
    status, output = run_command(sys.argv[1:] if argv is None else argv)
    stream = sys.stderr if status == 2 else sys.stdout
    stream.write(output)
    return status


if __name__ == "__main__":
    sys.exit(main())
