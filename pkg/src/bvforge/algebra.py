"""Graded-commutative polynomial algebra over jet-space generators.

The coordinate ring is generated by five kinds of symbols:

* base coordinates  ``x[i]``        bidegree (0, 0)
* fields            ``u[a; I]``     bidegree (0, 0)
* antifields        ``ustar[a; I]`` bidegree (0, 1)
* ghosts            ``C[al; I]``    bidegree (1, 0)
* antighosts        ``Cstar[al; I]`` bidegree (0, 2)

where ``I`` is a symmetric multi-index (a sorted tuple of spatial
directions, each >= 1) recording repeated total derivatives.  The
bidegree (p, q) assigns ghost degree p and antighost degree q; the
total degree is p - q and the parity is (p - q) mod 2.  Generators
commute or anticommute according to their parities, odd generators
square to zero, and every product is kept in a canonical form: the
factors of each monomial are sorted by a fixed total order on
generators and the Koszul sign of the sorting permutation is absorbed
into the rational coefficient.

All coefficients are exact ``fractions.Fraction`` values.  Explicit
dependence on the base coordinates is polynomial, so base coordinates
are ordinary even generators here.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, NamedTuple


class OddGeneratorPresent(ValueError):
    """An operation that requires purely even input met an odd generator."""


class UnboundGenerator(KeyError):
    """A substitution left some even generator without a value."""


class GeneratorKind(Enum):
    BASE = "x"
    FIELD = "u"
    ANTIFIELD = "ustar"
    GHOST = "C"
    ANTIGHOST = "Cstar"

    @property
    def rank(self) -> int:
        return _KIND_RANK[self]


_KIND_RANK = {
    GeneratorKind.BASE: 0,
    GeneratorKind.FIELD: 1,
    GeneratorKind.ANTIFIELD: 2,
    GeneratorKind.GHOST: 3,
    GeneratorKind.ANTIGHOST: 4,
}

_KIND_BIDEGREE = {
    GeneratorKind.BASE: (0, 0),
    GeneratorKind.FIELD: (0, 0),
    GeneratorKind.ANTIFIELD: (0, 1),
    GeneratorKind.GHOST: (1, 0),
    GeneratorKind.ANTIGHOST: (0, 2),
}

_CONJUGATE_KIND = {
    GeneratorKind.FIELD: GeneratorKind.ANTIFIELD,
    GeneratorKind.ANTIFIELD: GeneratorKind.FIELD,
    GeneratorKind.GHOST: GeneratorKind.ANTIGHOST,
    GeneratorKind.ANTIGHOST: GeneratorKind.GHOST,
}


class Bidegree(NamedTuple):
    ghost: int
    antighost: int

    @property
    def total(self) -> int:
        return self.ghost - self.antighost

    @property
    def parity(self) -> int:
        return self.total % 2


def jet_order(jet: tuple[int, ...]) -> int:
    return len(jet)


@dataclass(frozen=True, order=False)
class Generator:
    """A single coordinate symbol, possibly carrying a jet multi-index.

    ``family`` is the label of the field/ghost family (or the spatial
    direction for a base coordinate, as a string).  ``jet`` is kept
    sorted; multi-indices are symmetric because total derivatives
    commute.
    """

    kind: GeneratorKind
    family: str
    jet: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if not isinstance(self.family, str) or not self.family:
            raise ValueError("generator family must be a nonempty string")
        jet = tuple(self.jet)
        if any((not isinstance(i, int)) or i < 1 for i in jet):
            raise ValueError("jet indices must be integers >= 1")
        if self.kind is GeneratorKind.BASE and jet:
            raise ValueError("base coordinates carry no jet index")
        object.__setattr__(self, "jet", tuple(sorted(jet)))

    @property
    def bidegree(self) -> Bidegree:
        return Bidegree(*_KIND_BIDEGREE[self.kind])

    @property
    def ghost_number(self) -> int:
        return self.bidegree.total

    @property
    def antifield_number(self) -> int:
        return self.bidegree.antighost

    @property
    def parity(self) -> int:
        return self.bidegree.parity

    @property
    def is_odd(self) -> bool:
        return self.parity == 1

    @property
    def sort_key(self) -> tuple:
        return (self.kind.rank, self.family, len(self.jet), self.jet)

    def __lt__(self, other: "Generator") -> bool:
        return self.sort_key < other.sort_key

    def conjugate(self) -> "Generator":
        """The antibracket partner: u <-> ustar, C <-> Cstar (same family, same jet)."""
        kind = _CONJUGATE_KIND.get(self.kind)
        if kind is None:
            raise ValueError("base coordinates have no conjugate")
        return Generator(kind, self.family, self.jet)

    def with_jet(self, jet: tuple[int, ...]) -> "Generator":
        return Generator(self.kind, self.family, jet)


def base(i: int) -> Generator:
    return Generator(GeneratorKind.BASE, str(i))


def field(family: str, jet: Iterable[int] = ()) -> Generator:
    return Generator(GeneratorKind.FIELD, family, tuple(jet))


def antifield(family: str, jet: Iterable[int] = ()) -> Generator:
    return Generator(GeneratorKind.ANTIFIELD, family, tuple(jet))


def ghost(family: str, jet: Iterable[int] = ()) -> Generator:
    return Generator(GeneratorKind.GHOST, family, tuple(jet))


def antighost(family: str, jet: Iterable[int] = ()) -> Generator:
    return Generator(GeneratorKind.ANTIGHOST, family, tuple(jet))


Factors = tuple[tuple[Generator, int], ...]


@dataclass(frozen=True)
class Monomial:
    """A rational coefficient together with a sequence of generator powers.

    The record itself does not insist on canonical form; ``normalize``
    produces the canonical representative (or the zero monomial).
    """

    coefficient: Fraction
    factors: Factors

    @property
    def is_zero(self) -> bool:
        return self.coefficient == 0

    @property
    def bidegree(self) -> Bidegree:
        p = sum(g.bidegree.ghost * e for g, e in self.factors)
        q = sum(g.bidegree.antighost * e for g, e in self.factors)
        return Bidegree(p, q)

    @property
    def parity(self) -> int:
        return sum(g.parity * e for g, e in self.factors) % 2

    @property
    def ghost_number(self) -> int:
        return self.bidegree.total

    @property
    def antifield_number(self) -> int:
        return self.bidegree.antighost

    @property
    def degree(self) -> int:
        return sum(e for _, e in self.factors)

    @property
    def sort_key(self) -> tuple:
        return tuple((g.sort_key, e) for g, e in self.factors)


ZERO_MONOMIAL = Monomial(Fraction(0), ())


def _permutation_parity(keys: list) -> int:
    """Parity (0 or 1) of the permutation sorting ``keys``. Keys must be distinct."""
    inversions = 0
    for i in range(len(keys)):
        for j in range(i + 1, len(keys)):
            if keys[i] > keys[j]:
                inversions += 1
    return inversions % 2


def normalize(m: Monomial) -> Monomial:
    """Canonical form: factors sorted, Koszul sign absorbed into the coefficient.

    Returns the zero monomial when an odd generator repeats.  Moving an
    even generator past anything costs no sign, so the Koszul sign is
    the parity of the permutation that sorts the subsequence of odd
    generators.
    """
    if m.coefficient == 0:
        return ZERO_MONOMIAL
    odd_seq: list[Generator] = []
    merged: dict[Generator, int] = {}
    for g, e in m.factors:
        if e < 0:
            raise ValueError("negative exponents are not part of the algebra")
        if e == 0:
            continue
        if g.is_odd:
            if e > 1:
                return ZERO_MONOMIAL
            odd_seq.append(g)
        merged[g] = merged.get(g, 0) + e
    keys = [g.sort_key for g in odd_seq]
    if len(set(keys)) != len(keys):
        return ZERO_MONOMIAL
    sign = -1 if _permutation_parity(keys) else 1
    factors = tuple(sorted(merged.items(), key=lambda ge: ge[0].sort_key))
    return Monomial(m.coefficient * sign, factors)


def _coerce_coefficient(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    raise TypeError(f"expected an exact rational, got {type(value).__name__}")


class LocalFunction:
    """A finite rational linear combination of canonical monomials.

    Instances behave as immutable values: all arithmetic returns new
    objects, equality is structural, and the term order is the fixed
    deterministic order used everywhere (reports, solvers, printing).
    """

    __slots__ = ("_terms",)

    def __init__(self, terms: Mapping[Factors, Fraction] | None = None, *, _internal: bool = False):
        data: dict[Factors, Fraction] = {}
        if terms:
            if _internal:
                data = dict(terms)
            else:
                for factors, coeff in terms.items():
                    mono = normalize(Monomial(_coerce_coefficient(coeff), tuple(factors)))
                    if mono.is_zero:
                        continue
                    acc = data.get(mono.factors, Fraction(0)) + mono.coefficient
                    if acc:
                        data[mono.factors] = acc
                    else:
                        data.pop(mono.factors, None)
        self._terms = data

    # -- constructors -------------------------------------------------

    @classmethod
    def zero(cls) -> "LocalFunction":
        return cls()

    @classmethod
    def constant(cls, value) -> "LocalFunction":
        c = _coerce_coefficient(value)
        return cls({(): c} if c else None, _internal=True)

    @classmethod
    def one(cls) -> "LocalFunction":
        return cls.constant(1)

    @classmethod
    def from_generator(cls, g: Generator) -> "LocalFunction":
        return cls({((g, 1),): Fraction(1)}, _internal=True)

    @classmethod
    def from_monomials(cls, monomials: Iterable[Monomial]) -> "LocalFunction":
        data: dict[Factors, Fraction] = {}
        for m in monomials:
            mono = normalize(m)
            if mono.is_zero:
                continue
            acc = data.get(mono.factors, Fraction(0)) + mono.coefficient
            if acc:
                data[mono.factors] = acc
            else:
                data.pop(mono.factors, None)
        return cls(data, _internal=True)

    # -- inspection ----------------------------------------------------

    @property
    def is_zero(self) -> bool:
        return not self._terms

    def __bool__(self) -> bool:
        return bool(self._terms)

    def monomials(self) -> tuple[Monomial, ...]:
        items = sorted(self._terms.items(), key=lambda kv: Monomial(kv[1], kv[0]).sort_key)
        return tuple(Monomial(c, f) for f, c in items)

    def coefficient(self, factors: Factors) -> Fraction:
        return self._terms.get(tuple(factors), Fraction(0))

    def constant_term(self) -> Fraction:
        return self._terms.get((), Fraction(0))

    def generators(self) -> set[Generator]:
        out: set[Generator] = set()
        for factors in self._terms:
            for g, _ in factors:
                out.add(g)
        return out

    def max_jet_order(self) -> int:
        orders = [len(g.jet) for f in self._terms for g, _ in f]
        return max(orders, default=0)

    def is_homogeneous(self) -> bool:
        degs = {Monomial(c, f).bidegree for f, c in self._terms.items()}
        return len(degs) <= 1

    def bidegree(self) -> Bidegree | None:
        """The common bidegree of all terms, or None if mixed or zero."""
        degs = {Monomial(c, f).bidegree for f, c in self._terms.items()}
        if len(degs) == 1:
            return degs.pop()
        return None

    def parity(self) -> int | None:
        pars = {Monomial(c, f).parity for f, c in self._terms.items()}
        if len(pars) == 1:
            return pars.pop()
        return None

    def ghost_number(self) -> int | None:
        ghs = {Monomial(c, f).ghost_number for f, c in self._terms.items()}
        if len(ghs) == 1:
            return ghs.pop()
        return None

    # -- arithmetic ----------------------------------------------------

    def __add__(self, other) -> "LocalFunction":
        other = _as_local_function(other)
        if other is NotImplemented:
            return NotImplemented
        data = dict(self._terms)
        for factors, coeff in other._terms.items():
            acc = data.get(factors, Fraction(0)) + coeff
            if acc:
                data[factors] = acc
            else:
                data.pop(factors, None)
        return LocalFunction(data, _internal=True)

    __radd__ = __add__

    def __neg__(self) -> "LocalFunction":
        return LocalFunction({f: -c for f, c in self._terms.items()}, _internal=True)

    def __sub__(self, other) -> "LocalFunction":
        other = _as_local_function(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other) -> "LocalFunction":
        other = _as_local_function(other)
        if other is NotImplemented:
            return NotImplemented
        return other + (-self)

    def __mul__(self, other) -> "LocalFunction":
        if isinstance(other, (int, Fraction)):
            c = _coerce_coefficient(other)
            if not c:
                return LocalFunction.zero()
            return LocalFunction({f: k * c for f, k in self._terms.items()}, _internal=True)
        if not isinstance(other, LocalFunction):
            return NotImplemented
        data: dict[Factors, Fraction] = {}
        for f1, c1 in self._terms.items():
            for f2, c2 in other._terms.items():
                mono = normalize(Monomial(c1 * c2, f1 + f2))
                if mono.is_zero:
                    continue
                acc = data.get(mono.factors, Fraction(0)) + mono.coefficient
                if acc:
                    data[mono.factors] = acc
                else:
                    data.pop(mono.factors, None)
        return LocalFunction(data, _internal=True)

    def __rmul__(self, other) -> "LocalFunction":
        if isinstance(other, (int, Fraction)):
            return self.__mul__(other)
        return NotImplemented

    def __pow__(self, n: int) -> "LocalFunction":
        if not isinstance(n, int) or n < 0:
            raise ValueError("powers must be nonnegative integers")
        out = LocalFunction.one()
        for _ in range(n):
            out = out * self
        return out

    def __eq__(self, other) -> bool:
        other = _as_local_function(other)
        if other is NotImplemented:
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self) -> int:
        return hash(frozenset(self._terms.items()))

    def __repr__(self) -> str:
        if self.is_zero:
            return "LocalFunction(0)"
        parts = []
        for m in self.monomials()[:4]:
            parts.append(f"{m.coefficient}*{'*'.join(g.kind.value + str(g.family) + str(list(g.jet)) + ('^' + str(e) if e > 1 else '') for g, e in m.factors) or '1'}")
        more = " + ..." if len(self._terms) > 4 else ""
        return f"LocalFunction({' + '.join(parts)}{more})"


def _as_local_function(value) -> "LocalFunction":
    if isinstance(value, LocalFunction):
        return value
    if isinstance(value, (int, Fraction)):
        return LocalFunction.constant(value)
    return NotImplemented


def gen(g: Generator) -> LocalFunction:
    """Shorthand used throughout: the local function consisting of one generator."""
    return LocalFunction.from_generator(g)


def multiply(f: LocalFunction, g: LocalFunction) -> LocalFunction:
    """Graded-commutative product (same as ``f * g``)."""
    return f * g


def graded_partial(f: LocalFunction, z: Generator, side: str = "left") -> LocalFunction:
    """Graded partial derivative of ``f`` with respect to the generator ``z``.

    The left derivative strips ``z`` from the front of each monomial:
    moving an odd ``z`` to the front past a prefix of total parity s
    costs (-1)^s.  The right derivative is obtained monomial-wise from
    the left one through

        dR f / dz = (-1)^((|f| + |z|) |z|) dL f / dz

    with |f| the parity of the monomial.
    """
    if side not in ("left", "right"):
        raise ValueError("side must be 'left' or 'right'")
    data: dict[Factors, Fraction] = {}
    zp = z.parity
    for factors, coeff in f._terms.items():
        prefix_parity = 0
        for pos, (g, e) in enumerate(factors):
            if g == z:
                new = factors[:pos] + ((g, e - 1),) * (e > 1) + factors[pos + 1:]
                c = coeff * e
                if zp:
                    if prefix_parity % 2:
                        c = -c
                    if side == "right":
                        # monomial parity enters the conversion rule
                        mono_parity = (prefix_parity + zp * e + sum(
                            h.parity * k for h, k in factors[pos + 1:])) % 2
                        if (mono_parity + zp) % 2:
                            c = -c
                acc = data.get(new, Fraction(0)) + c
                if acc:
                    data[new] = acc
                else:
                    data.pop(new, None)
                break
            prefix_parity += g.parity * e
    return LocalFunction(data, _internal=True)


def bidegree_decompose(f: LocalFunction) -> dict[Bidegree, LocalFunction]:
    """Split ``f`` into its homogeneous bidegree components."""
    buckets: dict[Bidegree, dict[Factors, Fraction]] = {}
    for factors, coeff in f._terms.items():
        deg = Monomial(coeff, factors).bidegree
        buckets.setdefault(deg, {})[factors] = coeff
    return {deg: LocalFunction(terms, _internal=True)
            for deg, terms in sorted(buckets.items())}


def decompose_by_antifield_number(f: LocalFunction) -> dict[int, LocalFunction]:
    """Split ``f`` into strata of fixed total antighost degree."""
    buckets: dict[int, dict[Factors, Fraction]] = {}
    for factors, coeff in f._terms.items():
        k = Monomial(coeff, factors).antifield_number
        buckets.setdefault(k, {})[factors] = coeff
    return {k: LocalFunction(terms, _internal=True)
            for k, terms in sorted(buckets.items())}


def substitute(f: LocalFunction, bindings: Mapping[Generator, object]) -> Fraction:
    """Evaluate a purely even local function at a rational point.

    Raises OddGeneratorPresent if ``f`` involves any odd generator and
    UnboundGenerator if some even generator of ``f`` has no binding.
    """
    values = {g: _coerce_coefficient(v) for g, v in bindings.items()}
    total = Fraction(0)
    for factors, coeff in f._terms.items():
        term = coeff
        for g, e in factors:
            if g.is_odd:
                raise OddGeneratorPresent(f"cannot evaluate odd generator {g}")
            if g not in values:
                raise UnboundGenerator(f"no value bound for generator {g}")
            term *= values[g] ** e
        total += term
    return total
