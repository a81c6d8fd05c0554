"""Staged extended actions and the classical master equation solver.

An extended action starts from the Lagrangian, adds the antifield
coupling to the gauge transformations, then the antighost terms built
from structure functions (and, for algebras that close only on shell,
the quadratic-antifield terms).  The solver lifts the action stratum by
stratum in antifield number: whenever the self-bracket leaves a lowest
nonvanishing stratum R_k, it solves the exact linear system

    kt(X) = -1/2 R_k   (modulo total divergences)

for a correction X of antifield number k + 1 and ghost number zero over
a bounded monomial basis, where kt is the component of the bracket with
the action that lowers antifield number by exactly one.  A stratum that
fails to lift within the bounds is reported, never silently dropped; it
signals bounds too small rather than a genuine obstruction.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Iterable

from .algebra import (
    Factors,
    Generator,
    GeneratorKind,
    LocalFunction,
    Monomial,
    antifield,
    antighost,
    base,
    decompose_by_antifield_number,
    field,
    gen,
    ghost,
)
from .bracket import JetModelUnsupported, antibracket, bv_laplacian
from .jet import (
    ModelSpec,
    all_multi_indices,
    check_noether,
    enumerate_basis_monomials,
    functional_vanishes,
    total_derivative_multi,
    variational_derivative,
)
from .linsolve import solve_linear_system


class MissingStructureFunctions(ValueError):
    """Stage two needs the structure functions of the gauge algebra."""


class NoetherPreconditionFailed(ValueError):
    """The master solver requires the Noether identities to hold."""


@dataclass(frozen=True)
class BVAction:
    """An extended action stratified by antifield number.

    ``solved_up_to`` records through which antifield number the strata
    of the self-bracket are claimed to vanish modulo divergences.  The
    residual report, when present, maps antifield number to the
    nonvanishing residual strata (empty means the master equation holds
    through the truncation).
    """

    total: LocalFunction
    by_antifield_number: dict[int, LocalFunction]
    solved_up_to: int
    spatial_dim: int
    residual_report: dict[int, LocalFunction] | None = None

    @classmethod
    def from_total(
        cls,
        total: LocalFunction,
        spatial_dim: int,
        solved_up_to: int,
        residual_report: dict[int, LocalFunction] | None = None,
    ) -> "BVAction":
        strata = decompose_by_antifield_number(total)
        for k, part in strata.items():
            if part.ghost_number() != 0:
                raise ValueError(f"stratum {k} of the action is not of ghost number zero")
        return cls(
            total=total,
            by_antifield_number=strata,
            solved_up_to=solved_up_to,
            spatial_dim=spatial_dim,
            residual_report=residual_report,
        )

    def stratum(self, k: int) -> LocalFunction:
        return self.by_antifield_number.get(k, LocalFunction.zero())


@dataclass(frozen=True)
class ObstructionRecord:
    """Outcome of one lifting step at a fixed antifield number."""

    antifield_number: int
    obstruction: LocalFunction
    lifted: bool
    correction: LocalFunction | None
    ansatz_dimensions: tuple[int, int]


def build_stage_action(m: ModelSpec, stage: int) -> BVAction:
    """The staged action: Lagrangian, antifield couplings, antighost terms.

    Stage 0 is the Lagrangian alone.  Stage 1 adds, for every gauge
    coefficient, the antifield against the transformation of the field
    with the ghost in the parameter slot.  Stage 2 adds the antighost
    term (1/2) c C* C C, written over ordered ghost pairs, and the
    on-shell term -(1/4) nu u* u* C C when closure functions are given.
    """
    if stage not in (0, 1, 2):
        raise ValueError("stage must be 0, 1, or 2")
    total = m.lagrangian
    if stage >= 1:
        for (a, alpha, jet) in sorted(m.gauge_coefficients):
            total = total + gen(antifield(a)) * m.gauge_coefficient(a, alpha, jet) \
                * total_derivative_multi(gen(ghost(alpha)), jet, m.spatial_dim)
    if stage >= 2:
        if m.structure_functions is None:
            raise MissingStructureFunctions("stage 2 requires structure functions")
        for gi, alpha in enumerate(m.gauge_indices):
            for beta in m.gauge_indices[gi + 1:]:
                for gamma in m.gauge_indices:
                    c = m.structure_function(gamma, alpha, beta)
                    if not c.is_zero:
                        total = total + c * gen(antighost(gamma)) * gen(ghost(alpha)) * gen(ghost(beta))
        if m.closure_functions is not None:
            for fi, a in enumerate(m.fields):
                for b in m.fields[fi + 1:]:
                    for gi, alpha in enumerate(m.gauge_indices):
                        for beta in m.gauge_indices[gi + 1:]:
                            nu = m.closure_function(a, b, alpha, beta)
                            if not nu.is_zero:
                                total = total - nu * gen(antifield(a)) * gen(antifield(b)) \
                                    * gen(ghost(alpha)) * gen(ghost(beta))
    return BVAction.from_total(total, m.spatial_dim, solved_up_to=stage)


def kt_differential(S: BVAction, f: LocalFunction) -> LocalFunction:
    """The component of (S, f) lowering antifield number by exactly one."""
    out = LocalFunction.zero()
    for k, part in decompose_by_antifield_number(f).items():
        br = antibracket(S.total, part, S.spatial_dim)
        out = out + decompose_by_antifield_number(br).get(k - 1, LocalFunction.zero())
    return out


def master_residual(S: BVAction) -> dict[int, LocalFunction]:
    """Strata of (S, S) that do not reduce to total divergences.

    An empty report means the master equation holds modulo divergences.
    """
    br = antibracket(S.total, S.total, S.spatial_dim)
    out: dict[int, LocalFunction] = {}
    for k, part in decompose_by_antifield_number(br).items():
        if not functional_vanishes(part, S.spatial_dim):
            out[k] = part
    return out


def _correction_pool(m: ModelSpec) -> list[Generator]:
    pool: list[Generator] = [base(i) for i in range(1, m.spatial_dim + 1)]
    jets = all_multi_indices(m.spatial_dim, m.max_jet_order)
    for a in m.fields:
        for jet in jets:
            pool.append(field(a, jet))
            pool.append(antifield(a, jet))
    for alpha in m.gauge_indices:
        for jet in jets:
            pool.append(ghost(alpha, jet))
            pool.append(antighost(alpha, jet))
    return pool


def correction_candidates(m: ModelSpec, antifield_number: int) -> list[LocalFunction]:
    """Monomials of the given antifield number and ghost number zero,
    within the model's jet-order and polynomial-degree bounds."""
    out = []
    for cand in enumerate_basis_monomials(_correction_pool(m), m.max_poly_degree):
        deg = cand.bidegree()
        if deg is not None and deg.antighost == antifield_number and deg.total == 0:
            out.append(cand)
    return out


def _families_in(fs: Iterable[LocalFunction]) -> list[Generator]:
    seen: set[tuple[int, str]] = set()
    reps: dict[tuple[int, str], Generator] = {}
    for f in fs:
        for g in f.generators():
            if g.kind is GeneratorKind.BASE:
                continue
            key = (g.kind.rank, g.family)
            if key not in seen:
                seen.add(key)
                reps[key] = Generator(g.kind, g.family)
    return [reps[k] for k in sorted(reps)]


def _solve_lift(
    m: ModelSpec, S: BVAction, R: LocalFunction, stratum: int
) -> tuple[LocalFunction | None, int, int]:
    """Solve kt(X) = -1/2 R for X at antifield number stratum + 1.

    Returns (correction or None, candidate count, solution nullity).
    The divergence freedom is handled by applying every Euler operator
    to both sides before coefficient matching; at dimension zero the
    sides are matched directly.
    """
    candidates = correction_candidates(m, stratum + 1)
    if not candidates:
        return None, 0, 0
    kt_cols = [kt_differential(S, cand) for cand in candidates]
    target = Fraction(-1, 2) * R

    if m.spatial_dim == 0:
        block_cols = [kt_cols]
        block_rhs = [target]
    else:
        families = _families_in(kt_cols + [target])
        block_cols = [[variational_derivative(col, z, "left") for col in kt_cols]
                      for z in families]
        block_rhs = [variational_derivative(target, z, "left") for z in families]

    # coefficient matching over every monomial appearing in any block
    equations: list[dict[int, Fraction]] = []
    rhs: list[Fraction] = []
    for cols, block_target in zip(block_cols, block_rhs):
        keys: list[Factors] = []
        seen: set[Factors] = set()
        for src in [block_target] + cols:
            for mono in src.monomials():
                if mono.factors not in seen:
                    seen.add(mono.factors)
                    keys.append(mono.factors)
        keys.sort(key=lambda fac: Monomial(Fraction(1), fac).sort_key)
        for fac in keys:
            row: dict[int, Fraction] = {}
            for j, col in enumerate(cols):
                coeff = col.coefficient(fac)
                if coeff:
                    row[j] = coeff
            equations.append(row)
            rhs.append(block_target.coefficient(fac))

    solution = solve_linear_system(equations, rhs, len(candidates))
    if solution is None:
        return None, len(candidates), 0
    correction = LocalFunction.zero()
    for value, cand in zip(solution.values, candidates):
        if value:
            correction = correction + value * cand
    return correction, len(candidates), solution.nullity


def solve_master(m: ModelSpec, K: int) -> tuple[BVAction, list[ObstructionRecord]]:
    """Lift the staged action until every stratum below K vanishes.

    Starts from the highest stage the model data permits, then repeats:
    find the lowest nonvanishing residual stratum R_k with k < K, solve
    for a correction of antifield number k + 1 within the ansatz
    bounds, and add it.  Each step strictly raises the lowest
    nonvanishing stratum, so the loop terminates.  A step whose linear
    system has no solution ends the run with an unlifted record.
    """
    if not check_noether(m).all_pass:
        raise NoetherPreconditionFailed("the gauge identities do not hold; fix the model first")
    if m.structure_functions is not None:
        S = build_stage_action(m, 2)
    elif m.gauge_coefficients:
        S = build_stage_action(m, 1)
    else:
        S = build_stage_action(m, 0)

    records: list[ObstructionRecord] = []
    while True:
        residual = master_residual(S)
        pending = sorted(k for k in residual if k < K)
        if not pending:
            final = replace(
                S,
                solved_up_to=K,
                residual_report={k: v for k, v in residual.items() if k <= K},
            )
            return final, records
        k = pending[0]
        R = residual[k]
        correction, n_candidates, nullity = _solve_lift(m, S, R, k)
        if correction is None:
            records.append(ObstructionRecord(
                antifield_number=k,
                obstruction=R,
                lifted=False,
                correction=None,
                ansatz_dimensions=(n_candidates, 0),
            ))
            final = replace(
                S,
                solved_up_to=k,
                residual_report={kk: vv for kk, vv in residual.items() if kk <= K},
            )
            return final, records
        records.append(ObstructionRecord(
            antifield_number=k,
            obstruction=R,
            lifted=True,
            correction=correction,
            ansatz_dimensions=(n_candidates, nullity),
        ))
        S = BVAction.from_total(
            S.total + correction, m.spatial_dim, solved_up_to=k + 1)


@dataclass(frozen=True)
class QuantumMasterReport:
    """The self-bracket, the Laplacian of the action, and their difference."""

    classical: LocalFunction
    delta: LocalFunction
    quantum_residual: LocalFunction

    @property
    def satisfied(self) -> bool:
        return self.quantum_residual.is_zero


def quantum_master_check(S: BVAction | LocalFunction) -> QuantumMasterReport:
    """Evaluate (S, S) = Delta S on a finite model, exactly.

    Accepts a bare local function too, so candidate actions that do not
    split into ghost number zero strata can still be probed.
    """
    if isinstance(S, BVAction):
        if S.spatial_dim != 0:
            raise JetModelUnsupported("the quantum check needs a finite model")
        total = S.total
    else:
        total = S
    classical = antibracket(total, total, 0)
    delta = bv_laplacian(total)
    return QuantumMasterReport(
        classical=classical,
        delta=delta,
        quantum_residual=classical - delta,
    )
