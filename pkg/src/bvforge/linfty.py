"""Multi-bracket structures encoded in solved actions.

A solved action S determines an odd vector field f -> (S, f) on the space
spanned by the model's generators.  Its Taylor coefficients at the origin
are multilinear brackets: the linear part is a differential, the quadratic
part a binary bracket, and so on.  The master equation (S, S) = 0 turns
into a tower of quadratic identities between those brackets, one for each
arity.  This module extracts the brackets from an action, verifies the
identity tower on abstract structures, evaluates deformation residuals
order by order in a formal parameter, and converts between the two common
grading conventions.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from math import factorial
from typing import Iterable, Iterator, Mapping, Sequence

from .algebra import Generator, LocalFunction, gen, graded_partial
from .bracket import JetModelUnsupported, antibracket
from .master import BVAction

PHYSICS = "physics"
MATH = "math"


class InsufficientStrata(ValueError):
    """The action is not solved deep enough to trust the requested arity."""


class DegreeMismatch(ValueError):
    """A deformation element has the wrong grading for the structure."""


@dataclass(frozen=True)
class BasisElement:
    """A named basis vector of the graded space carrying the brackets."""

    name: str
    degree: int

    @property
    def parity(self) -> int:
        return self.degree % 2

    def __repr__(self) -> str:
        return f"{self.name}:{self.degree}"


def _clean(coeffs: Mapping[BasisElement, Fraction]) -> dict:
    return {b: c for b, c in coeffs.items() if c != 0}


class Element:
    """A finite rational linear combination of basis vectors."""

    __slots__ = ("_coeffs",)

    def __init__(self, coeffs: Mapping[BasisElement, Fraction] | None = None):
        self._coeffs = _clean({b: Fraction(c) for b, c in (coeffs or {}).items()})

    @classmethod
    def zero(cls) -> "Element":
        return cls()

    @classmethod
    def from_basis(cls, b: BasisElement, coefficient=1) -> "Element":
        return cls({b: Fraction(coefficient)})

    @property
    def is_zero(self) -> bool:
        return not self._coeffs

    def items(self) -> tuple[tuple[BasisElement, Fraction], ...]:
        return tuple(sorted(self._coeffs.items(),
                            key=lambda bc: (bc[0].degree, bc[0].name)))

    def coefficient(self, b: BasisElement) -> Fraction:
        return self._coeffs.get(b, Fraction(0))

    def support(self) -> tuple[BasisElement, ...]:
        return tuple(b for b, _ in self.items())

    def degrees(self) -> frozenset[int]:
        return frozenset(b.degree for b in self._coeffs)

    def homogeneous_degree(self) -> int | None:
        ds = self.degrees()
        return next(iter(ds)) if len(ds) == 1 else None

    def __add__(self, other: "Element") -> "Element":
        out = dict(self._coeffs)
        for b, c in other._coeffs.items():
            out[b] = out.get(b, Fraction(0)) + c
        return Element(out)

    def __neg__(self) -> "Element":
        return Element({b: -c for b, c in self._coeffs.items()})

    def __sub__(self, other: "Element") -> "Element":
        return self + (-other)

    def __mul__(self, scalar) -> "Element":
        s = Fraction(scalar)
        return Element({b: s * c for b, c in self._coeffs.items()})

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        return isinstance(other, Element) and self._coeffs == other._coeffs

    def __hash__(self) -> int:
        return hash(frozenset(self._coeffs.items()))

    def __repr__(self) -> str:
        if self.is_zero:
            return "Element(0)"
        body = " + ".join(f"{c}*{b.name}" for b, c in self.items())
        return f"Element({body})"


def unshuffles(parities: Sequence[int], k: int) -> Iterator[tuple[tuple[int, ...], tuple[int, ...], int]]:
    """Yield the monotone (k, n-k) splittings of positions with Koszul signs.

    The sign is accumulated from each chosen element passing the unchosen
    elements that precede it, counting only odd-odd crossings.
    """
    n = len(parities)
    for left in itertools.combinations(range(n), k):
        chosen = set(left)
        right = tuple(i for i in range(n) if i not in chosen)
        sign = 1
        for i in left:
            for j in right:
                if j < i and parities[i] % 2 and parities[j] % 2:
                    sign = -sign
        yield left, right, sign


class LInftyStructure:
    """A graded basis, a differential, and symmetric multi-brackets.

    Tensors are stored on canonically ordered input tuples; evaluation on
    any other ordering reorders the inputs with the sign rule of the
    structure's convention (Koszul for the physics grading, Koszul times a
    transposition sign for the mathematics grading).
    """

    def __init__(
        self,
        basis: Sequence[BasisElement],
        differential: Mapping[BasisElement, Element] | None = None,
        brackets: Mapping[int, Mapping[Sequence[BasisElement], Element]] | None = None,
        convention: str = PHYSICS,
    ):
        if convention not in (PHYSICS, MATH):
            raise ValueError(f"unknown convention {convention!r}")
        self.convention = convention
        self.basis = tuple(basis)
        if len({b.name for b in self.basis}) != len(self.basis):
            raise ValueError("basis names must be unique")
        self._index = {b: i for i, b in enumerate(self.basis)}

        self.differential: dict[BasisElement, Element] = {}
        for b, value in (differential or {}).items():
            self._check_membership((b,), value)
            if value.is_zero:
                continue
            self._check_degree_law(1, (b,), value)
            self.differential[b] = value

        self.brackets: dict[int, dict[tuple[BasisElement, ...], Element]] = {}
        for n, tensor in (brackets or {}).items():
            if n < 2:
                raise ValueError("brackets start at arity 2; use differential")
            table: dict[tuple[BasisElement, ...], Element] = {}
            for key, value in tensor.items():
                key = tuple(key)
                if len(key) != n:
                    raise ValueError(f"arity {n} key of length {len(key)}")
                self._check_membership(key, value)
                canon, sign = self._canonical(key)
                value = sign * value
                if canon in table:
                    value = table[canon] + value
                if value.is_zero:
                    table.pop(canon, None)
                    continue
                if self._forced_zero(canon):
                    raise ValueError(
                        f"symmetry forces the bracket on {canon} to vanish")
                self._check_degree_law(n, canon, value)
                table[canon] = value
            if table:
                self.brackets[n] = table

    # -------------------------------------------------------- plumbing

    def _check_membership(self, key: Iterable[BasisElement], value: Element) -> None:
        for b in key:
            if b not in self._index:
                raise ValueError(f"{b!r} is not a basis element")
        for b in value.support():
            if b not in self._index:
                raise ValueError(f"{b!r} is not a basis element")

    def bracket_degree(self, n: int) -> int:
        """The degree shift of the arity-n bracket."""
        return -1 if self.convention == PHYSICS else 2 - n

    def _check_degree_law(self, n: int, key: tuple[BasisElement, ...],
                          value: Element) -> None:
        expected = sum(b.degree for b in key) + self.bracket_degree(n)
        if any(d != expected for d in value.degrees()):
            raise ValueError(
                f"arity {n} output on {key} must sit in degree {expected}")

    def _swap_sign(self, a: BasisElement, b: BasisElement) -> int:
        koszul = -1 if (a.parity and b.parity) else 1
        return koszul if self.convention == PHYSICS else -koszul

    def _canonical(self, tup: tuple[BasisElement, ...]) -> tuple[tuple[BasisElement, ...], int]:
        items = list(tup)
        sign = 1
        for i in range(len(items)):
            for j in range(len(items) - 1 - i):
                if self._index[items[j]] > self._index[items[j + 1]]:
                    sign *= self._swap_sign(items[j], items[j + 1])
                    items[j], items[j + 1] = items[j + 1], items[j]
        return tuple(items), sign

    def _forced_zero(self, canon: tuple[BasisElement, ...]) -> bool:
        return any(a == b and self._swap_sign(a, a) == -1
                   for a, b in zip(canon, canon[1:]))

    def _tensor(self, n: int, key: tuple[BasisElement, ...]) -> Element | None:
        if n == 1:
            return self.differential.get(key[0])
        return self.brackets.get(n, {}).get(key)

    # -------------------------------------------------------- evaluation

    def apply(self, n: int, args: Sequence[Element]) -> Element:
        """Evaluate the arity-n bracket multilinearly on elements."""
        if len(args) != n:
            raise ValueError(f"arity {n} bracket applied to {len(args)} inputs")
        out = Element.zero()
        supports = [arg.items() for arg in args]
        for combo in itertools.product(*supports):
            coeff = Fraction(1)
            for _, c in combo:
                coeff *= c
            key, sign = self._canonical(tuple(b for b, _ in combo))
            value = self._tensor(n, key)
            if value is not None:
                out = out + (coeff * sign) * value
        return out

    def apply_differential(self, x: Element) -> Element:
        return self.apply(1, [x])

    def arities(self) -> tuple[int, ...]:
        return tuple(sorted(self.brackets))

    def __eq__(self, other) -> bool:
        return (isinstance(other, LInftyStructure)
                and self.convention == other.convention
                and self.basis == other.basis
                and self.differential == other.differential
                and self.brackets == other.brackets)

    def __repr__(self) -> str:
        return (f"LInftyStructure(dim={len(self.basis)}, "
                f"arities={self.arities()}, convention={self.convention!r})")


# ------------------------------------------------------------ extraction

def _generator_name(g: Generator) -> str:
    return f"{g.kind.value}[{g.family}]"


def extract_brackets(S: BVAction, n_max: int) -> LInftyStructure:
    """Read the multi-brackets off a finite-model action.

    For each generator z the expansion of (S, z) in monomials is polarized
    by iterated left derivatives at the origin; the arity-n coefficients,
    weighted by (-1)^(n+1), form the arity-n bracket.  That weight makes
    the binary bracket of a ghost-cubic action reproduce the structure
    constants with their textbook orientation.
    """
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    if S.spatial_dim != 0:
        raise JetModelUnsupported("extraction needs a finite model")
    needed = 1 if n_max == 1 else 2
    if S.solved_up_to < needed:
        raise InsufficientStrata(
            f"arity {n_max} needs strata solved through antifield number "
            f"{needed}, have {S.solved_up_to}")

    generators: set[Generator] = set()
    for g in S.total.generators():
        generators.add(g)
        generators.add(g.conjugate())
    basis_gens = sorted(generators)
    to_basis = {g: BasisElement(_generator_name(g), g.ghost_number)
                for g in basis_gens}

    differential: dict[BasisElement, Element] = {}
    brackets: dict[int, dict[tuple[BasisElement, ...], Element]] = {}
    for g in basis_gens:
        image = antibracket(S.total, gen(g), 0)
        by_degree: dict[int, list] = {}
        for mono in image.monomials():
            if 1 <= mono.degree <= n_max:
                by_degree.setdefault(mono.degree, []).append(mono)
        for n, monos in sorted(by_degree.items()):
            part = LocalFunction.from_monomials(monos)
            weight = 1 if n % 2 else -1
            keys = sorted({
                tuple(z for z, e in m.factors for _ in range(e))
                for m in monos
            })
            for key in keys:
                probe = part
                for z in key:
                    probe = graded_partial(probe, z, "left")
                coefficient = weight * probe.constant_term()
                if coefficient == 0:
                    continue
                contribution = Element.from_basis(to_basis[g], coefficient)
                if n == 1:
                    slot = to_basis[key[0]]
                    differential[slot] = differential.get(slot, Element.zero()) + contribution
                else:
                    table = brackets.setdefault(n, {})
                    bkey = tuple(to_basis[z] for z in key)
                    table[bkey] = table.get(bkey, Element.zero()) + contribution

    return LInftyStructure(
        basis=tuple(to_basis[g] for g in basis_gens),
        differential=differential,
        brackets=brackets,
        convention=PHYSICS,
    )


# ------------------------------------------------------------ identities

@dataclass(frozen=True)
class IdentityCheckReport:
    """Residuals of the bracket identities, tuple by tuple."""

    n_max: int
    checked: int
    failures: tuple[tuple[int, tuple[BasisElement, ...], Element], ...]
    jacobi_checked: int
    jacobi_failures: tuple[tuple[tuple[BasisElement, ...], Element], ...]

    @property
    def passed(self) -> bool:
        return not self.failures

    @property
    def jacobi_passed(self) -> bool:
        return not self.jacobi_failures


def identity_residual(L: LInftyStructure, inputs: Sequence[BasisElement]) -> Element:
    """Evaluate the arity-n identity on basis inputs, physics convention.

    The residual sums, over every splitting of the inputs into a block of
    k and its complement, the (n-k+1)-bracket applied to the k-bracket of
    the block followed by the complement, each splitting weighted by its
    Koszul sign.  k = 1 and k = n reproduce the derivation property of
    the differential; middle values interleave the higher brackets.
    """
    n = len(inputs)
    parities = [b.parity for b in inputs]
    residual = Element.zero()
    for k in range(1, n + 1):
        for left, right, sign in unshuffles(parities, k):
            inner = L.apply(k, [Element.from_basis(inputs[i]) for i in left])
            if inner.is_zero:
                continue
            outer_args = [inner] + [Element.from_basis(inputs[j]) for j in right]
            term = L.apply(n - k + 1, outer_args)
            if not term.is_zero:
                residual = residual + sign * term
    return residual


def check_linfty(L: LInftyStructure, n_max: int) -> IdentityCheckReport:
    """Verify the defining identities through arity n_max.

    Structures in the mathematics convention are converted to the physics
    grading first; the report then refers to the converted tensors.
    """
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    if L.convention == MATH:
        L = convert_conventions(L)
    failures = []
    jacobi_failures = []
    checked = 0
    jacobi_checked = 0
    for n in range(1, n_max + 1):
        for tup in itertools.combinations_with_replacement(L.basis, n):
            residual = identity_residual(L, tup)
            checked += 1
            if n == 3:
                jacobi_checked += 1
                if not residual.is_zero:
                    jacobi_failures.append((tup, residual))
            if not residual.is_zero:
                failures.append((n, tup, residual))
    return IdentityCheckReport(
        n_max=n_max,
        checked=checked,
        failures=tuple(failures),
        jacobi_checked=jacobi_checked,
        jacobi_failures=tuple(jacobi_failures),
    )


# ------------------------------------------------------------ conversion

def _suspension_sign(key: Sequence[BasisElement], physics_degrees: Sequence[int]) -> int:
    n = len(key)
    exponent = sum((n - 1 - i) * physics_degrees[i] for i in range(n))
    return -1 if exponent % 2 else 1


def convert_conventions(L: LInftyStructure) -> LInftyStructure:
    """Reflect the grading and re-sign the tensors; an exact involution.

    Degrees map as d -> 1 - d, so the uniform physics bracket degree -1
    becomes the arity-dependent value 2 - n, and vice versa.  Tensor
    entries pick up the standard suspension sign built from the physics
    degrees of their inputs.
    """
    to_physics = L.convention == MATH
    mapping = {b: BasisElement(b.name, 1 - b.degree) for b in L.basis}

    differential = {
        mapping[b]: Element({mapping[o]: c for o, c in value.items()})
        for b, value in L.differential.items()
    }
    brackets: dict[int, dict[tuple[BasisElement, ...], Element]] = {}
    for n, tensor in L.brackets.items():
        table = {}
        for key, value in tensor.items():
            phys_degrees = [1 - b.degree if to_physics else b.degree for b in key]
            sign = _suspension_sign(key, phys_degrees)
            table[tuple(mapping[b] for b in key)] = sign * Element(
                {mapping[o]: c for o, c in value.items()})
        brackets[n] = table

    return LInftyStructure(
        basis=tuple(mapping[b] for b in L.basis),
        differential=differential,
        brackets=brackets,
        convention=PHYSICS if to_physics else MATH,
    )


# ------------------------------------------------------------ deformations

def _compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    """Ordered tuples of positive integers with the given sum."""
    if parts == 1:
        yield (total,)
        return
    for first in range(1, total - parts + 2):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def mc_residual(
    L: LInftyStructure,
    theta: Mapping[int, Element],
    order: int,
) -> dict[int, Element]:
    """Evaluate the deformation residual order by order in the parameter.

    theta maps each power of the formal parameter (from 1) to an element;
    the residual at power m collects d(theta_m) plus 1/n! times every
    arity-n bracket of components whose powers sum to m.  The series is
    silently truncated beyond the requested order.
    """
    if order < 1:
        raise ValueError("order must be at least 1")
    degrees = set()
    for power, component in theta.items():
        if not isinstance(power, int) or power < 1:
            raise DegreeMismatch("theta powers must be positive integers")
        for b in component.support():
            if b not in L._index:
                raise DegreeMismatch(f"{b!r} is not a basis element")
        if not component.is_zero:
            d = component.homogeneous_degree()
            if d is None:
                raise DegreeMismatch("theta components must be homogeneous")
            degrees.add(d)
    if len(degrees) > 1:
        raise DegreeMismatch("theta components must share one degree")
    if degrees:
        d = next(iter(degrees))
        probe = BasisElement("?", d)
        if L._swap_sign(probe, probe) != 1:
            raise DegreeMismatch(
                f"degree {d} elements cannot repeat inside these brackets")

    out: dict[int, Element] = {}
    for m in range(1, order + 1):
        residual = Element.zero()
        direct = theta.get(m)
        if direct is not None and not direct.is_zero:
            residual = residual + L.apply_differential(direct)
        for n in range(2, m + 1):
            if n not in L.brackets:
                continue
            acc = Element.zero()
            for powers in _compositions(m, n):
                args = [theta.get(p) for p in powers]
                if any(a is None or a.is_zero for a in args):
                    continue
                acc = acc + L.apply(n, args)
            if not acc.is_zero:
                residual = residual + Fraction(1, factorial(n)) * acc
        out[m] = residual
    return out
