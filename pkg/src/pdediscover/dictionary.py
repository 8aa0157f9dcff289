"""Candidate terms and the regression system.

A candidate term is a product of factors, each a (possibly wrapped, possibly
differentiated) field raised to a power. Terms have a canonical printed name
and can be parsed back from it. ``build`` evaluates a term library pointwise
over a field set and stacks the retained grid cells into the regression pair
(phi, y).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .diffops import DerivativeSpec, differentiate, fd_trim
from .grid import FieldSet, SnapshotGrid

__all__ = [
    "TermSyntaxError",
    "DictionaryError",
    "TermFactor",
    "CandidateTerm",
    "DiffMethod",
    "DictionarySpec",
    "Dictionary",
    "parse_term",
    "enumerate_terms",
    "build",
    "subsample",
]


class TermSyntaxError(ValueError):
    """Malformed term expression; carries the offending position."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class DictionaryError(ValueError):
    """Regression system violates a structural requirement."""


_WRAPPER_RANK = {"abs": 0, "cos": 1, "sin": 2, None: 3}
_FUNCS = ("sin", "cos")


@dataclass(frozen=True)
class TermFactor:
    """One factor of a product term: wrapper(field) or a derivative of the
    field, raised to ``power``. Wrappers apply to the plain field value only.
    """

    field: str
    wrapper: str | None  # None | 'sin' | 'cos' | 'abs'
    axis: str  # 'x' or 't'; 't' appears only in output terms
    order: int  # derivative order, 0 = plain value
    power: int

    def __post_init__(self) -> None:
        if self.wrapper not in _WRAPPER_RANK:
            raise ValueError(f"unknown wrapper {self.wrapper!r}")
        if self.wrapper is not None and self.order != 0:
            raise ValueError("wrapped factors cannot carry derivatives")
        if self.power < 1:
            raise ValueError(f"factor power must be >= 1, got {self.power}")
        if self.axis not in ("x", "t"):
            raise ValueError(f"unknown axis {self.axis!r}")

    @property
    def sort_key(self) -> tuple:
        return (self.field, _WRAPPER_RANK[self.wrapper], self.axis, self.order)

    @property
    def name(self) -> str:
        if self.wrapper == "abs":
            base = f"|{self.field}|"
        elif self.wrapper is not None:
            base = f"{self.wrapper}({self.field})"
        elif self.order > 0:
            base = f"{self.field}_{self.axis * self.order}"
        else:
            base = self.field
        return base if self.power == 1 else f"{base}^{self.power}"


@dataclass(frozen=True)
class CandidateTerm:
    """A canonical product of factors; the empty product is the constant 1."""

    factors: tuple[TermFactor, ...]

    @staticmethod
    def from_factors(factors: Iterable[TermFactor]) -> "CandidateTerm":
        """Merge factors sharing a base and sort them canonically."""
        merged: dict[tuple, TermFactor] = {}
        for f in factors:
            key = (f.field, f.wrapper, f.axis, f.order)
            if key in merged:
                prev = merged[key]
                merged[key] = replace(prev, power=prev.power + f.power)
            else:
                merged[key] = f
        ordered = tuple(sorted(merged.values(), key=lambda f: f.sort_key))
        return CandidateTerm(factors=ordered)

    @property
    def is_constant(self) -> bool:
        return not self.factors

    @property
    def name(self) -> str:
        if self.is_constant:
            return "1"
        return "*".join(f.name for f in self.factors)

    @property
    def field_names(self) -> frozenset[str]:
        return frozenset(f.field for f in self.factors)

    def spatial_derivatives(self) -> set[tuple[str, int]]:
        """(field, order) pairs of spatial derivatives this term needs."""
        return {(f.field, f.order) for f in self.factors if f.axis == "x" and f.order > 0}

    def evaluate(
        self,
        values: Mapping[str, np.ndarray],
        derivative: Callable[[str, int], np.ndarray],
        shape: tuple[int, int],
    ) -> np.ndarray:
        """Pointwise values of the term over the whole grid.

        ``derivative(field, order)`` must return the spatial derivative of
        that order; plain field values come from ``values``.
        """
        out: np.ndarray | None = None
        for f in self.factors:
            if f.axis == "t":
                raise DictionaryError(
                    f"term '{self.name}' contains a time derivative; only the"
                    " output may"
                )
            if f.wrapper == "abs":
                base = np.abs(values[f.field])
            elif f.wrapper == "sin":
                base = np.sin(values[f.field])
            elif f.wrapper == "cos":
                base = np.cos(values[f.field])
            elif f.order > 0:
                base = derivative(f.field, f.order)
            else:
                base = values[f.field]
            factor_values = base if f.power == 1 else base**f.power
            out = factor_values if out is None else out * factor_values
        if out is None:
            return np.ones(shape)
        return out


_TOKEN_RE = re.compile(
    r"(?P<name>[A-Za-z][A-Za-z0-9]*(?:_[A-Za-z]+)?)"
    r"|(?P<int>\d+)"
    r"|(?P<op>[*^()|])"
)


def _tokenize(expr: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    n = len(expr)
    while pos < n:
        if expr[pos].isspace():
            pos += 1
            continue
        m = _TOKEN_RE.match(expr, pos)
        if m is None:
            raise TermSyntaxError(f"unexpected character {expr[pos]!r}", pos)
        assert m.lastgroup is not None
        tokens.append((m.lastgroup, m.group(m.lastgroup), pos))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(
        self,
        expr: str,
        fields: Sequence[str] | None,
        allow_time: bool,
    ):
        self.expr = expr
        self.tokens = _tokenize(expr)
        self.i = 0
        self.fields = None if fields is None else set(fields)
        self.allow_time = allow_time

    def peek(self) -> tuple[str, str, int] | None:
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def next(self) -> tuple[str, str, int]:
        tok = self.peek()
        if tok is None:
            raise TermSyntaxError("unexpected end of expression", len(self.expr))
        self.i += 1
        return tok

    def expect(self, kind: str, value: str | None = None) -> tuple[str, str, int]:
        tok = self.next()
        if tok[0] != kind or (value is not None and tok[1] != value):
            want = value if value is not None else kind
            raise TermSyntaxError(f"expected {want!r}, got {tok[1]!r}", tok[2])
        return tok

    def _check_field(self, name: str, pos: int) -> None:
        if self.fields is not None and name not in self.fields:
            raise TermSyntaxError(f"unknown field name {name!r}", pos)

    def _split_name(self, name: str, pos: int) -> TermFactor:
        base, underscore, suffix = name.partition("_")
        if not underscore:
            self._check_field(base, pos)
            return TermFactor(field=base, wrapper=None, axis="x", order=0, power=1)
        if suffix and set(suffix) == {"x"}:
            if len(suffix) > 4:
                raise TermSyntaxError("spatial derivative order exceeds 4", pos)
            self._check_field(base, pos)
            return TermFactor(field=base, wrapper=None, axis="x", order=len(suffix), power=1)
        if suffix and set(suffix) == {"t"}:
            if not self.allow_time:
                raise TermSyntaxError(
                    "time derivatives are allowed in the output term only", pos
                )
            if len(suffix) > 2:
                raise TermSyntaxError("time derivative order exceeds 2", pos)
            self._check_field(base, pos)
            return TermFactor(field=base, wrapper=None, axis="t", order=len(suffix), power=1)
        raise TermSyntaxError(f"malformed derivative suffix {suffix!r}", pos)

    def parse_base(self) -> TermFactor | None:
        kind, value, pos = self.next()
        if kind == "int":
            if value != "1":
                raise TermSyntaxError(f"unexpected number {value!r}", pos)
            return None  # multiplicative identity
        if kind == "op" and value == "|":
            name_tok = self.expect("name")
            self.expect("op", "|")
            self._check_field(name_tok[1], name_tok[2])
            return TermFactor(
                field=name_tok[1], wrapper="abs", axis="x", order=0, power=1
            )
        if kind == "name":
            nxt = self.peek()
            if nxt is not None and nxt[0] == "op" and nxt[1] == "(":
                if value not in _FUNCS:
                    raise TermSyntaxError(f"unknown function {value!r}", pos)
                self.next()
                arg = self.expect("name")
                self.expect("op", ")")
                self._check_field(arg[1], arg[2])
                return TermFactor(
                    field=arg[1], wrapper=value, axis="x", order=0, power=1
                )
            return self._split_name(value, pos)
        raise TermSyntaxError(f"unexpected token {value!r}", pos)

    def parse_factor(self) -> TermFactor | None:
        base = self.parse_base()
        power = 1
        nxt = self.peek()
        if nxt is not None and nxt[0] == "op" and nxt[1] == "^":
            self.next()
            num = self.expect("int")
            power = int(num[1])
            if power < 1:
                raise TermSyntaxError("exponent must be >= 1", num[2])
        if base is None:
            return None
        return replace(base, power=power) if power != 1 else base

    def parse(self) -> CandidateTerm:
        factors = []
        f = self.parse_factor()
        if f is not None:
            factors.append(f)
        while True:
            nxt = self.peek()
            if nxt is None:
                break
            if nxt[0] == "op" and nxt[1] == "*":
                self.next()
                f = self.parse_factor()
                if f is not None:
                    factors.append(f)
            else:
                raise TermSyntaxError(f"unexpected token {nxt[1]!r}", nxt[2])
        return CandidateTerm.from_factors(factors)


def parse_term(
    expr: str,
    fields: Sequence[str] | None = None,
    allow_time: bool = False,
) -> CandidateTerm:
    """Parse a term expression into its canonical form.

    ``fields``, when given, restricts identifiers to known field names.
    Time-derivative suffixes are rejected unless ``allow_time`` is set
    (they are legal only for the output term). Parsing the printed name of
    a term reproduces the term.
    """
    return _Parser(expr, fields, allow_time).parse()


@dataclass(frozen=True)
class DiffMethod:
    """Per-axis derivative estimator defaults used when building a system."""

    method: str = "central_fd"
    poly_degree: int = 4
    window: int = 9

    def spec(self, axis: str, order: int) -> DerivativeSpec:
        if self.method == "polynomial":
            return DerivativeSpec(
                axis=axis,
                order=order,
                method="polynomial",
                poly_degree=self.poly_degree,
                window=self.window,
            )
        return DerivativeSpec(axis=axis, order=order, method="central_fd")


@dataclass(frozen=True)
class DictionarySpec:
    """Library description: generated single-field terms up to a derivative
    order and power, optional constant, plus user-supplied extra terms.

    ``output`` must be a pure first or second time derivative of one field
    (e.g. ``"u_t"``). Cross-field terms are supplied through ``extra_terms``.
    """

    output: str
    max_derivative_order: int = 3
    max_power: int = 3
    include_constant: bool = True
    extra_terms: tuple[str, ...] = ()
    space_method: DiffMethod = DiffMethod()
    time_method: DiffMethod = DiffMethod()

    def __post_init__(self) -> None:
        object.__setattr__(self, "extra_terms", tuple(self.extra_terms))
        if not 0 <= self.max_derivative_order <= 4:
            raise ValueError("max_derivative_order must be in 0..4")
        if not 0 <= self.max_power <= 4:
            raise ValueError("max_power must be in 0..4")
        out = parse_term(self.output, allow_time=True)
        valid = (
            len(out.factors) == 1
            and out.factors[0].axis == "t"
            and out.factors[0].order in (1, 2)
            and out.factors[0].power == 1
            and out.factors[0].wrapper is None
        )
        if not valid:
            raise ValueError(
                f"output must be a pure time derivative of one field, got {self.output!r}"
            )

    @property
    def output_term(self) -> CandidateTerm:
        return parse_term(self.output, allow_time=True)

    @property
    def output_field(self) -> str:
        return self.output_term.factors[0].field

    @property
    def output_order(self) -> int:
        return self.output_term.factors[0].order


def enumerate_terms(spec: DictionarySpec) -> list[CandidateTerm]:
    """Generated library, in deterministic order: the constant, then pure
    powers of the output field, then power-times-derivative products, then
    parsed extra terms; duplicates collapse onto their first occurrence."""
    u = spec.output_field
    q, p = spec.max_derivative_order, spec.max_power
    terms: list[CandidateTerm] = []
    if spec.include_constant:
        terms.append(CandidateTerm(factors=()))
    for a in range(1, p + 1):
        terms.append(
            CandidateTerm.from_factors(
                [TermFactor(field=u, wrapper=None, axis="x", order=0, power=a)]
            )
        )
    for a in range(0, p + 1):
        for b in range(1, q + 1):
            factors = [TermFactor(field=u, wrapper=None, axis="x", order=b, power=1)]
            if a > 0:
                factors.append(
                    TermFactor(field=u, wrapper=None, axis="x", order=0, power=a)
                )
            terms.append(CandidateTerm.from_factors(factors))
    for expr in spec.extra_terms:
        terms.append(parse_term(expr))
    seen: dict[str, CandidateTerm] = {}
    for t in terms:
        seen.setdefault(t.name, t)
    return list(seen.values())


@dataclass(frozen=True)
class Dictionary:
    """The regression pair (phi, y) with column names and sample provenance.

    ``sample_coords[k] = (x_index, t_index)`` locates row k on the grid;
    it is None for systems whose rows are no longer grid cells (e.g. after
    a rank reduction).
    """

    phi: np.ndarray
    y: np.ndarray
    column_names: tuple[str, ...]
    output_name: str
    sample_coords: np.ndarray | None

    def __post_init__(self) -> None:
        phi = np.atleast_2d(np.asarray(self.phi))
        y = np.asarray(self.y)
        if phi.shape[0] != y.shape[0]:
            raise DictionaryError(
                f"phi has {phi.shape[0]} rows but y has {y.shape[0]}"
            )
        if phi.shape[1] != len(self.column_names):
            raise DictionaryError(
                f"phi has {phi.shape[1]} columns but {len(self.column_names)} names"
            )
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "column_names", tuple(self.column_names))

    @property
    def n(self) -> int:
        return self.phi.shape[0]

    @property
    def m(self) -> int:
        return self.phi.shape[1]


def _check_columns(phi: np.ndarray, names: Sequence[str]) -> None:
    zero = np.where(~np.any(phi != 0, axis=0))[0]
    if zero.size:
        bad = ", ".join(names[i] for i in zero)
        raise DictionaryError(
            f"column(s) identically zero on the sampled cells: {bad}"
        )


def build(
    fields: FieldSet,
    spec: DictionarySpec,
    mask: np.ndarray | None = None,
) -> Dictionary:
    """Assemble the regression system from a field set.

    Every needed derivative grid is computed once and reused. Retained rows
    are the grid cells inside the boundary-trim box (see the derivative
    estimators), optionally intersected with a boolean ``mask`` of grid
    shape. Columns follow :func:`enumerate_terms` order.
    """
    terms = enumerate_terms(spec)
    if not terms:
        raise DictionaryError("empty dictionary: no candidate terms")
    known = set(fields.names)
    for t in terms:
        missing = t.field_names - known
        if missing:
            raise DictionaryError(
                f"term '{t.name}' references unknown field(s) {sorted(missing)}"
            )
    if spec.output_field not in known:
        raise DictionaryError(f"output field {spec.output_field!r} not present")

    ref = fields.fields[0]
    shape = ref.shape
    values = {g.field_name: np.asarray(g.values) for g in fields}

    cache: dict[tuple, np.ndarray] = {}
    trims_x: list[int] = [0]

    def spatial(field_name: str, order: int) -> np.ndarray:
        key = (field_name, "x", order, spec.space_method)
        if key not in cache:
            res = differentiate(fields[field_name], spec.space_method.spec("space", order))
            cache[key] = np.asarray(res.grid.values)
            trims_x.append(res.trim)
        return cache[key]

    # force all derivative grids into the cache first so trims are known
    needed = sorted({d for t in terms for d in t.spatial_derivatives()})
    for fname, order in needed:
        spatial(fname, order)

    out_res = differentiate(
        fields[spec.output_field], spec.time_method.spec("time", spec.output_order)
    )
    trim_t = out_res.trim
    trim_x = max(trims_x)

    retained = np.zeros(shape, dtype=bool)
    retained[trim_x : shape[0] - trim_x, trim_t : shape[1] - trim_t] = True
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != shape:
            raise DictionaryError(
                f"mask shape {mask.shape} does not match grid shape {shape}"
            )
        retained &= mask
    coords = np.argwhere(retained)
    if coords.shape[0] == 0:
        raise DictionaryError("empty sample set after trimming and masking")

    rows = retained.nonzero()
    y = np.asarray(out_res.grid.values)[rows]
    complex_data = any(np.iscomplexobj(v) for v in values.values())
    phi = np.empty((coords.shape[0], len(terms)), dtype=complex if complex_data else float)
    for j, term in enumerate(terms):
        phi[:, j] = term.evaluate(values, spatial, shape)[rows]

    names = tuple(t.name for t in terms)
    _check_columns(phi, names)
    return Dictionary(
        phi=phi,
        y=y,
        column_names=names,
        output_name=spec.output_term.name,
        sample_coords=coords,
    )


def subsample(dictionary: Dictionary, count: int, seed: int) -> Dictionary:
    """Uniform random row subset without replacement, deterministic per seed."""
    n = dictionary.n
    if not 1 <= count <= n:
        raise ValueError(f"count must be in 1..{n}, got {count}")
    rng = np.random.default_rng(seed)
    idx = rng.choice(n, size=count, replace=False)
    phi = dictionary.phi[idx]
    _check_columns(phi, dictionary.column_names)
    coords = (
        dictionary.sample_coords[idx] if dictionary.sample_coords is not None else None
    )
    return Dictionary(
        phi=phi,
        y=dictionary.y[idx],
        column_names=dictionary.column_names,
        output_name=dictionary.output_name,
        sample_coords=coords,
    )
