"""Bracket extraction, identity checks, conversions, and deformations."""

from __future__ import annotations

import itertools
import random
from fractions import Fraction

import pytest

from bvforge.algebra import LocalFunction, field, gen, ghost
from bvforge.bracket import JetModelUnsupported
from bvforge.jet import ModelSpec
from bvforge.linfty import (
    MATH,
    PHYSICS,
    BasisElement,
    DegreeMismatch,
    Element,
    IdentityCheckReport,
    InsufficientStrata,
    LInftyStructure,
    check_linfty,
    convert_conventions,
    extract_brackets,
    identity_residual,
    mc_residual,
    unshuffles,
)
from bvforge.master import BVAction, build_stage_action, solve_master

HALF = LocalFunction.constant(Fraction(1, 2))

EPS = {}
for _i, _j, _k, _s in [(1, 2, 3, 1), (2, 3, 1, 1), (3, 1, 2, 1),
                       (2, 1, 3, -1), (3, 2, 1, -1), (1, 3, 2, -1)]:
    EPS[(_i, _j, _k)] = _s


def eps_structure_functions():
    out = {}
    for gamma, alpha, beta in itertools.product((1, 2, 3), repeat=3):
        s = EPS.get((alpha, beta, gamma), 0)
        if s:
            out[(str(gamma), str(alpha), str(beta))] = LocalFunction.constant(s)
    return out


def ghost_so3_model():
    return ModelSpec(
        spatial_dim=0,
        fields=(),
        gauge_indices=("1", "2", "3"),
        lagrangian=LocalFunction.zero(),
        structure_functions=eps_structure_functions(),
        max_poly_degree=3,
    )


def full_so3_model():
    coeffs = {}
    for alpha in (1, 2, 3):
        for a in (1, 2, 3):
            r = LocalFunction.zero()
            for b in (1, 2, 3):
                s = EPS.get((b, alpha, a), 0)
                if s:
                    r = r + s * gen(field(str(b)))
            if not r.is_zero:
                coeffs[(str(a), str(alpha), ())] = r
    lagr = LocalFunction.zero()
    for a in (1, 2, 3):
        lagr = lagr + HALF * gen(field(str(a))) ** 2
    return ModelSpec(
        spatial_dim=0,
        fields=("1", "2", "3"),
        gauge_indices=("1", "2", "3"),
        lagrangian=lagr,
        gauge_coefficients=coeffs,
        structure_functions=eps_structure_functions(),
        max_poly_degree=3,
    )


def open_algebra_model():
    return ModelSpec(
        spatial_dim=0,
        fields=("1", "2", "3"),
        gauge_indices=("1", "2"),
        lagrangian=HALF * gen(field("3")) ** 2,
        gauge_coefficients={
            ("1", "1", ()): gen(field("3")),
            ("2", "2", ()): gen(field("1")),
        },
        max_poly_degree=4,
    )


def finite_abelian_model():
    diff = gen(field("1")) - gen(field("2"))
    return ModelSpec(
        spatial_dim=0,
        fields=("1", "2"),
        gauge_indices=("e",),
        lagrangian=HALF * diff * diff,
        gauge_coefficients={
            ("1", "e", ()): LocalFunction.one(),
            ("2", "e", ()): LocalFunction.one(),
        },
        max_poly_degree=3,
    )


def odd_basis(*names):
    return tuple(BasisElement(n, 1) for n in names)


def lie_structure(names, table):
    """Load antisymmetric structure constants on a degree-one odd basis."""
    basis = odd_basis(*names)
    by_name = {b.name: b for b in basis}
    tensor = {}
    for (x, y), value in table.items():
        tensor[(by_name[x], by_name[y])] = Element(
            {by_name[z]: Fraction(c) for z, c in value.items()})
    return LInftyStructure(basis=basis, brackets={2: tensor})


def so3_structure():
    table = {}
    for i, j in [(1, 2), (1, 3), (2, 3)]:
        value = {}
        for k in (1, 2, 3):
            s = EPS.get((i, j, k), 0)
            if s:
                value[str(k)] = s
        table[(str(i), str(j))] = value
    return lie_structure(("1", "2", "3"), table)


def sl2_structure():
    return lie_structure(
        ("h", "e", "f"),
        {("h", "e"): {"e": 2}, ("h", "f"): {"f": -2}, ("e", "f"): {"h": 1}})


def broken_jacobi_structure():
    return lie_structure(
        ("a", "b", "c"),
        {("a", "b"): {"c": 1}, ("b", "c"): {"a": 1}, ("a", "c"): {"a": 1}})


def triple_bracket_structure(mu_pair):
    """Only an arity-3 bracket: five odd inputs feed one chained output."""
    a = odd_basis("a1", "a2", "a3", "a4", "a5")
    b = BasisElement("b", 2)
    c = BasisElement("c", 3)
    tensor = {
        (a[0], a[1], a[2]): Element.from_basis(b),
        (b, a[mu_pair[0] - 1], a[mu_pair[1] - 1]): Element.from_basis(c),
    }
    return LInftyStructure(basis=a + (b, c), brackets={3: tensor})


# ---------------------------------------------------------------- unshuffles

def naive_unshuffle_sign(parities, order):
    sign = 1
    for p in range(len(order)):
        for q in range(p + 1, len(order)):
            if order[p] > order[q] and parities[order[p]] and parities[order[q]]:
                sign = -sign
    return sign


def test_unshuffle_counts_match_binomials():
    rng = random.Random(424)
    for n in range(1, 7):
        parities = [rng.randint(0, 1) for _ in range(n)]
        for k in range(1, n + 1):
            splits = list(unshuffles(parities, k))
            expected = len(list(itertools.combinations(range(n), k)))
            assert len(splits) == expected


def test_unshuffle_matches_permutation_filter():
    for n in range(2, 6):
        for k in range(1, n):
            found = {tuple(left) + tuple(right)
                     for left, right, _ in unshuffles([1] * n, k)}
            brute = {
                perm for perm in itertools.permutations(range(n))
                if list(perm[:k]) == sorted(perm[:k])
                and list(perm[k:]) == sorted(perm[k:])
            }
            assert found == brute


def test_unshuffle_signs_match_full_permutation_koszul():
    rng = random.Random(77)
    samples = 0
    while samples < 500:
        n = rng.randint(2, 7)
        k = rng.randint(1, n)
        parities = [rng.randint(0, 1) for _ in range(n)]
        for left, right, sign in unshuffles(parities, k):
            assert sign == naive_unshuffle_sign(parities, left + right)
            samples += 1


# ---------------------------------------------------------------- structure

def test_structure_canonicalizes_keys_with_koszul_sign():
    e1, e2 = odd_basis("1", "2")
    out = Element.from_basis(BasisElement("m", 1))
    L = LInftyStructure(
        basis=(e1, e2, BasisElement("m", 1)),
        brackets={2: {(e2, e1): out}})
    assert L.brackets[2][(e1, e2)] == -1 * out


def test_structure_rejects_forced_zero_entries():
    e1, e2 = odd_basis("1", "2")
    m = BasisElement("m", 1)
    with pytest.raises(ValueError):
        LInftyStructure(
            basis=(e1, e2, m),
            brackets={2: {(e1, e1): Element.from_basis(m)}})


def test_structure_rejects_degree_law_violations():
    e1, e2 = odd_basis("1", "2")
    wrong = BasisElement("w", 0)
    with pytest.raises(ValueError):
        LInftyStructure(
            basis=(e1, e2, wrong),
            brackets={2: {(e1, e2): Element.from_basis(wrong)}})
    with pytest.raises(ValueError):
        LInftyStructure(
            basis=(e1, e2),
            differential={e1: Element.from_basis(e2)})


def test_apply_reorders_inputs():
    L = so3_structure()
    e1, e2, _ = L.basis
    forward = L.apply(2, [Element.from_basis(e1), Element.from_basis(e2)])
    backward = L.apply(2, [Element.from_basis(e2), Element.from_basis(e1)])
    assert forward == -1 * backward
    assert not forward.is_zero


def test_apply_is_multilinear():
    L = so3_structure()
    e1, e2, e3 = L.basis
    x = Element.from_basis(e1, 2) + Element.from_basis(e2, 3)
    value = L.apply(2, [x, Element.from_basis(e3)])
    direct = (2 * L.apply(2, [Element.from_basis(e1), Element.from_basis(e3)])
              + 3 * L.apply(2, [Element.from_basis(e2), Element.from_basis(e3)]))
    assert value == direct


# ---------------------------------------------------------------- extraction

def test_extraction_of_rotation_ghost_action():
    S = build_stage_action(ghost_so3_model(), 2)
    L = extract_brackets(S, 4)
    assert L.convention == PHYSICS
    assert not L.differential
    assert L.arities() == (2,)
    by_name = {b.name: b for b in L.basis}
    for i, j in [(1, 2), (1, 3), (2, 3)]:
        key = (by_name[f"C[{i}]"], by_name[f"C[{j}]"])
        expected = Element({
            by_name[f"C[{k}]"]: Fraction(EPS[(i, j, k)])
            for k in (1, 2, 3) if (i, j, k) in EPS
        })
        assert L.brackets[2][key] == expected


def test_extraction_of_finite_abelian_action():
    S, _ = solve_master(finite_abelian_model(), 2)
    L = extract_brackets(S, 3)
    assert L.arities() == ()
    by_name = {b.name: b for b in L.basis}
    image = L.apply_differential(Element.from_basis(by_name["C[e]"]))
    assert image == Element({by_name["u[1]"]: Fraction(1),
                             by_name["u[2]"]: Fraction(1)})
    report = check_linfty(L, 2)
    assert report.passed


def test_extraction_of_full_rotation_action():
    S, _ = solve_master(full_so3_model(), 3)
    L = extract_brackets(S, 4)
    by_name = {b.name: b for b in L.basis}
    # equation-of-motion part of the differential
    for a in (1, 2, 3):
        image = L.apply_differential(Element.from_basis(by_name[f"u[{a}]"]))
        assert image == Element.from_basis(by_name[f"ustar[{a}]"])
    # field rotation under the binary bracket
    value = L.apply(2, [Element.from_basis(by_name["u[1]"]),
                        Element.from_basis(by_name["C[2]"])])
    assert value == Element.from_basis(by_name["u[3]"], -1)


def test_extraction_commutes_with_master_equation():
    solved_full, _ = solve_master(full_so3_model(), 3)
    assert check_linfty(extract_brackets(solved_full, 4), 4).passed
    solved_open, _ = solve_master(open_algebra_model(), 3)
    assert check_linfty(extract_brackets(solved_open, 4), 4).passed


def test_extraction_of_zero_action():
    S = BVAction.from_total(LocalFunction.zero(), 0, 3)
    L = extract_brackets(S, 3)
    assert L.basis == ()
    assert not L.differential
    assert not L.brackets


def test_extraction_strata_gate():
    total = build_stage_action(ghost_so3_model(), 2).total
    shallow = BVAction.from_total(total, 0, solved_up_to=1)
    with pytest.raises(InsufficientStrata):
        extract_brackets(shallow, 2)
    assert extract_brackets(shallow, 1) is not None


def test_extraction_rejects_jet_models():
    curl = gen(field("1", (2,))) - gen(field("2", (1,)))
    m = ModelSpec(
        spatial_dim=2,
        fields=("1", "2"),
        gauge_indices=("e",),
        lagrangian=HALF * curl * curl,
        gauge_coefficients={("1", "e", (1,)): LocalFunction.one(),
                            ("2", "e", (2,)): LocalFunction.one()},
    )
    S, _ = solve_master(m, 2)
    with pytest.raises(JetModelUnsupported):
        extract_brackets(S, 2)


# ---------------------------------------------------------------- identities

def test_lie_algebras_pass_through_arity_four():
    assert check_linfty(so3_structure(), 4).passed
    assert check_linfty(sl2_structure(), 4).passed


def test_broken_jacobi_fails_in_the_ternary_identity():
    report = check_linfty(broken_jacobi_structure(), 3)
    assert not report.passed
    assert {n for n, _, _ in report.failures} == {3}
    assert not report.jacobi_passed
    assert report.jacobi_failures == tuple(
        (tup, res) for n, tup, res in report.failures if n == 3)


def test_ternary_identity_value_on_broken_fixture():
    L = broken_jacobi_structure()
    a, b, c = L.basis
    residual = identity_residual(L, (a, b, c))
    assert residual == Element.from_basis(c, -1)


def test_all_zero_structure_passes():
    basis = odd_basis("1", "2")
    report = check_linfty(LInftyStructure(basis=basis), 4)
    assert report.passed
    assert report.checked > 0


def test_differential_square_detection():
    p = BasisElement("p", 0)
    q = BasisElement("q", 1)
    r = BasisElement("r", -1)
    good = LInftyStructure(
        basis=(p, q, r),
        differential={q: Element.from_basis(p)})
    assert check_linfty(good, 1).passed
    bad = LInftyStructure(
        basis=(p, q, r),
        differential={q: Element.from_basis(p), p: Element.from_basis(r)})
    report = check_linfty(bad, 1)
    assert not report.passed
    assert report.failures == ((1, (q,), Element.from_basis(r)),)


def test_triple_bracket_identity_has_content_only_at_arity_five():
    passing = triple_bracket_structure((1, 2))
    report = check_linfty(passing, 5)
    assert report.passed

    failing = triple_bracket_structure((4, 5))
    report = check_linfty(failing, 5)
    assert not report.passed
    assert {n for n, _, _ in report.failures} == {5}
    a = failing.basis[:5]
    assert report.failures[0][1] == a
    assert not check_linfty(failing, 4).failures


# ---------------------------------------------------------------- conversion

def test_conversion_reflects_degrees_and_bracket_degree():
    L = so3_structure()
    M = convert_conventions(L)
    assert M.convention == MATH
    assert all(b.degree == 0 for b in M.basis)
    assert M.bracket_degree(2) == 0
    assert M.bracket_degree(3) == -1
    assert L.bracket_degree(2) == -1


def test_conversion_round_trip_is_identity():
    for L in (so3_structure(), sl2_structure(), broken_jacobi_structure(),
              triple_bracket_structure((4, 5))):
        back = convert_conventions(convert_conventions(L))
        assert back == L
        assert check_linfty(back, 3).failures == check_linfty(L, 3).failures


def test_converted_lie_algebra_is_antisymmetric_and_checks_out():
    M = convert_conventions(so3_structure())
    e1, e2, _ = M.basis
    forward = M.apply(2, [Element.from_basis(e1), Element.from_basis(e2)])
    backward = M.apply(2, [Element.from_basis(e2), Element.from_basis(e1)])
    assert forward == -1 * backward
    assert check_linfty(M, 4).passed


def test_converted_differential_still_squares_to_zero():
    p = BasisElement("p", 0)
    q = BasisElement("q", 1)
    L = LInftyStructure(basis=(p, q), differential={q: Element.from_basis(p)})
    M = convert_conventions(L)
    assert M.convention == MATH
    assert check_linfty(M, 1).passed


def test_triple_bracket_conversion_degree():
    L = triple_bracket_structure((1, 2))
    M = convert_conventions(L)
    key = next(iter(M.brackets[3]))
    out = next(iter(M.brackets[3][key].support()))
    assert out.degree == sum(b.degree for b in key) + (2 - 3)


# ---------------------------------------------------------------- deformations

def even_pairing_structure():
    m1 = BasisElement("m1", 0)
    m2 = BasisElement("m2", 0)
    e = BasisElement("e", -1)
    tensor = {
        (m1, m1): Element.from_basis(e),
        (m1, m2): Element.from_basis(e, 2),
    }
    return LInftyStructure(basis=(m1, m2, e), brackets={2: tensor})


def test_mc_residual_of_closed_element_vanishes():
    p = BasisElement("p", 0)
    q = BasisElement("q", 1)
    w = BasisElement("w", 0)
    L = LInftyStructure(basis=(p, q, w), differential={q: Element.from_basis(w)})
    theta = {1: Element.from_basis(p), 2: Element.from_basis(p, 3)}
    residuals = mc_residual(L, theta, 4)
    assert set(residuals) == {1, 2, 3, 4}
    assert all(r.is_zero for r in residuals.values())


def test_mc_residual_shows_primary_obstruction():
    L = even_pairing_structure()
    m1, m2, e = L.basis
    residuals = mc_residual(L, {1: Element.from_basis(m1)}, 3)
    assert residuals[1].is_zero
    assert residuals[2] == Element.from_basis(e, Fraction(1, 2))
    assert residuals[3].is_zero


def test_mc_residual_collects_cross_terms():
    L = even_pairing_structure()
    m1, m2, e = L.basis
    theta = {1: Element.from_basis(m1), 2: Element.from_basis(m2)}
    residuals = mc_residual(L, theta, 3)
    assert residuals[2] == Element.from_basis(e, Fraction(1, 2))
    # order three mixes the two components through both argument orders
    assert residuals[3] == Element.from_basis(e, 2)


def test_mc_residual_of_zero_is_zero():
    residuals = mc_residual(even_pairing_structure(), {}, 3)
    assert all(r.is_zero for r in residuals.values())


def test_mc_residual_degree_gates():
    L = even_pairing_structure()
    m1, m2, e = L.basis
    with pytest.raises(DegreeMismatch):
        mc_residual(L, {1: Element.from_basis(e)}, 2)
    with pytest.raises(DegreeMismatch):
        mc_residual(L, {1: Element.from_basis(m1) + Element.from_basis(e)}, 2)
    with pytest.raises(DegreeMismatch):
        mc_residual(L, {1: Element.from_basis(BasisElement("alien", 0))}, 2)
    so3 = so3_structure()
    with pytest.raises(DegreeMismatch):
        mc_residual(so3, {1: Element.from_basis(so3.basis[0])}, 2)


# ---------------------------------------------------------------- misc

def test_element_arithmetic():
    m = BasisElement("m", 0)
    w = BasisElement("w", 2)
    x = Element({m: Fraction(1, 2), w: Fraction(-1)})
    y = Element.from_basis(m, Fraction(1, 2))
    assert (x - y).items() == ((w, Fraction(-1)),)
    assert (2 * y).coefficient(m) == 1
    assert x.homogeneous_degree() is None
    assert y.homogeneous_degree() == 0
    assert Element.zero().is_zero


def test_report_is_deterministic():
    r1 = check_linfty(broken_jacobi_structure(), 3)
    r2 = check_linfty(broken_jacobi_structure(), 3)
    assert r1 == r2
    assert isinstance(r1, IdentityCheckReport)
