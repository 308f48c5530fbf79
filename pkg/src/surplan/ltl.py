"""Mission formula syntax and word-level semantics.

The grammar covers `true`, atomic propositions, negation, conjunction,
disjunction, implication (sugar), next, until, always, and eventually.
Besides parsing and negation normal form, the module evaluates formulas
directly on ultimately periodic words, which serves as the independent
reference semantics for the automaton construction.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import ContractError, LtlSyntaxError

Letter = frozenset[str]


class Formula:
    """Base class of all formula nodes."""

    __slots__ = ()


@dataclass(frozen=True)
class TrueConst(Formula):
    def __str__(self) -> str:
        return "true"


@dataclass(frozen=True)
class Atom(Formula):
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Not(Formula):
    sub: Formula

    def __str__(self) -> str:
        return f"! {_wrap(self.sub)}"


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula

    def __str__(self) -> str:
        return f"{_wrap(self.left)} & {_wrap(self.right)}"


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula

    def __str__(self) -> str:
        return f"{_wrap(self.left)} | {_wrap(self.right)}"


@dataclass(frozen=True)
class Next(Formula):
    sub: Formula

    def __str__(self) -> str:
        return f"X {_wrap(self.sub)}"


@dataclass(frozen=True)
class Until(Formula):
    left: Formula
    right: Formula

    def __str__(self) -> str:
        return f"{_wrap(self.left)} U {_wrap(self.right)}"


@dataclass(frozen=True)
class Always(Formula):
    sub: Formula

    def __str__(self) -> str:
        return f"G {_wrap(self.sub)}"


@dataclass(frozen=True)
class Eventually(Formula):
    sub: Formula

    def __str__(self) -> str:
        return f"F {_wrap(self.sub)}"


def _wrap(f: Formula) -> str:
    if isinstance(f, (TrueConst, Atom)):
        return str(f)
    return f"({f})"


_TOKEN_RE = re.compile(r"(->|[!&|()])|([A-Za-z_][A-Za-z0-9_]*)|(\S)")


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens: list[tuple[str, str, int]] = []
    pos = 0
    for match in _TOKEN_RE.finditer(text):
        if match.group(3) is not None:
            raise LtlSyntaxError(
                f"unexpected character {match.group(3)!r}", match.start()
            )
        if match.group(1) is not None:
            tokens.append(("op", match.group(1), match.start()))
        else:
            word = match.group(2)
            if word in ("X", "U", "G", "F", "true"):
                tokens.append(("kw", word, match.start()))
            else:
                tokens.append(("ident", word, match.start()))
        pos = match.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    """Recursive descent over the operator precedence chain.

    Binding from loosest to tightest: implication, disjunction, conjunction,
    until, unary. Until and implication associate to the right.
    """

    def __init__(self, text: str, propositions: frozenset[str] | None):
        self.tokens = _tokenize(text)
        self.i = 0
        self.propositions = propositions

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.i]

    def take(self) -> tuple[str, str, int]:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op: str) -> None:
        kind, value, pos = self.peek()
        if kind != "op" or value != op:
            raise LtlSyntaxError(f"expected {op!r}, found {value or 'end of input'!r}", pos)
        self.take()

    def parse(self) -> Formula:
        f = self.parse_implies()
        kind, value, pos = self.peek()
        if kind != "end":
            raise LtlSyntaxError(f"unexpected token {value!r}", pos)
        return f

    def parse_implies(self) -> Formula:
        left = self.parse_or()
        kind, value, _ = self.peek()
        if kind == "op" and value == "->":
            self.take()
            right = self.parse_implies()
            return Or(Not(left), right)
        return left

    def parse_or(self) -> Formula:
        f = self.parse_and()
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value == "|":
                self.take()
                f = Or(f, self.parse_and())
            else:
                return f

    def parse_and(self) -> Formula:
        f = self.parse_until()
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value == "&":
                self.take()
                f = And(f, self.parse_until())
            else:
                return f

    def parse_until(self) -> Formula:
        left = self.parse_unary()
        kind, value, _ = self.peek()
        if kind == "kw" and value == "U":
            self.take()
            return Until(left, self.parse_until())
        return left

    def parse_unary(self) -> Formula:
        kind, value, pos = self.take()
        if kind == "op":
            if value == "!":
                return Not(self.parse_unary())
            if value == "(":
                f = self.parse_implies()
                self.expect_op(")")
                return f
            raise LtlSyntaxError(f"unexpected token {value!r}", pos)
        if kind == "kw":
            if value == "X":
                return Next(self.parse_unary())
            if value == "G":
                return Always(self.parse_unary())
            if value == "F":
                return Eventually(self.parse_unary())
            if value == "true":
                return TrueConst()
            raise LtlSyntaxError(f"operator {value!r} needs a left operand", pos)
        if kind == "ident":
            if self.propositions is not None and value not in self.propositions:
                raise LtlSyntaxError(f"undeclared proposition {value!r}", pos)
            return Atom(value)
        raise LtlSyntaxError("unexpected end of input", pos)


def parse(text: str, propositions: Iterable[str] | None = None) -> Formula:
    """Parse formula text, rejecting propositions outside the declared set."""
    props = frozenset(propositions) if propositions is not None else None
    return _Parser(text, props).parse()


def atoms(formula: Formula) -> frozenset[str]:
    """The set of proposition names occurring in the formula."""
    out: set[str] = set()
    stack = [formula]
    while stack:
        f = stack.pop()
        if isinstance(f, Atom):
            out.add(f.name)
        elif isinstance(f, (Not, Next, Always, Eventually)):
            stack.append(f.sub)
        elif isinstance(f, (And, Or, Until)):
            stack.append(f.left)
            stack.append(f.right)
    return frozenset(out)


def subformulas(formula: Formula) -> Iterator[Formula]:
    """Pre-order, left-to-right traversal including the formula itself."""
    yield formula
    if isinstance(formula, (Not, Next, Always, Eventually)):
        yield from subformulas(formula.sub)
    elif isinstance(formula, (And, Or, Until)):
        yield from subformulas(formula.left)
        yield from subformulas(formula.right)


def nnf(formula: Formula) -> Formula:
    """Negation normal form: negations pushed down to atoms.

    The grammar has no release operator, so the negation of an until is
    rewritten through always: not (a U b) = G not b | (not b U (not a & not b)).
    The negation of `true` is kept literally as an unsatisfiable leaf.
    """
    if isinstance(formula, (TrueConst, Atom)):
        return formula
    if isinstance(formula, And):
        return And(nnf(formula.left), nnf(formula.right))
    if isinstance(formula, Or):
        return Or(nnf(formula.left), nnf(formula.right))
    if isinstance(formula, Next):
        return Next(nnf(formula.sub))
    if isinstance(formula, Until):
        return Until(nnf(formula.left), nnf(formula.right))
    if isinstance(formula, Always):
        return Always(nnf(formula.sub))
    if isinstance(formula, Eventually):
        return Eventually(nnf(formula.sub))
    sub = formula.sub
    if isinstance(sub, TrueConst):
        return formula
    if isinstance(sub, Atom):
        return formula
    if isinstance(sub, Not):
        return nnf(sub.sub)
    if isinstance(sub, And):
        return Or(nnf(Not(sub.left)), nnf(Not(sub.right)))
    if isinstance(sub, Or):
        return And(nnf(Not(sub.left)), nnf(Not(sub.right)))
    if isinstance(sub, Next):
        return Next(nnf(Not(sub.sub)))
    if isinstance(sub, Always):
        return Eventually(nnf(Not(sub.sub)))
    if isinstance(sub, Eventually):
        return Always(nnf(Not(sub.sub)))
    if isinstance(sub, Until):
        nl = nnf(Not(sub.left))
        nr = nnf(Not(sub.right))
        return Or(Always(nr), Until(nr, And(nl, nr)))
    raise TypeError(f"unknown formula node {sub!r}")


def formula_satisfied_on_lasso(
    formula: Formula, stem: Sequence[Letter], loop: Sequence[Letter]
) -> bool:
    """Truth of the formula on the infinite word stem followed by loop forever.

    Works on the finite position set of the lasso: the successor of the last
    loop position wraps back to the start of the loop. Until and eventually
    are least fixpoints, always is a greatest fixpoint; both converge after at
    most one pass per position.
    """
    if len(loop) == 0:
        raise ContractError("the loop part of a lasso must be nonempty")
    word = [frozenset(x) for x in stem] + [frozenset(x) for x in loop]
    n = len(word)
    wrap = len(stem)
    succ = [i + 1 for i in range(n)]
    succ[n - 1] = wrap

    def val(f: Formula) -> list[bool]:
        if isinstance(f, TrueConst):
            return [True] * n
        if isinstance(f, Atom):
            return [f.name in word[i] for i in range(n)]
        if isinstance(f, Not):
            return [not x for x in val(f.sub)]
        if isinstance(f, And):
            return [a and b for a, b in zip(val(f.left), val(f.right))]
        if isinstance(f, Or):
            return [a or b for a, b in zip(val(f.left), val(f.right))]
        if isinstance(f, Next):
            sub = val(f.sub)
            return [sub[succ[i]] for i in range(n)]
        if isinstance(f, Until):
            a, b = val(f.left), val(f.right)
            x = [False] * n
            for _ in range(n + 1):
                nxt = [b[i] or (a[i] and x[succ[i]]) for i in range(n)]
                if nxt == x:
                    break
                x = nxt
            return x
        if isinstance(f, Eventually):
            a = val(f.sub)
            x = [False] * n
            for _ in range(n + 1):
                nxt = [a[i] or x[succ[i]] for i in range(n)]
                if nxt == x:
                    break
                x = nxt
            return x
        if isinstance(f, Always):
            a = val(f.sub)
            x = [True] * n
            for _ in range(n + 1):
                nxt = [a[i] and x[succ[i]] for i in range(n)]
                if nxt == x:
                    break
                x = nxt
            return x
        raise TypeError(f"unknown formula node {f!r}")

    return val(formula)[0]


def canonical_letters(propositions: Iterable[str]) -> list[Letter]:
    """All proposition subsets in a fixed enumeration order."""
    props = sorted(set(propositions))
    letters = []
    for mask in range(2 ** len(props)):
        letters.append(frozenset(p for i, p in enumerate(props) if mask >> i & 1))
    return letters


def enumerate_lassos(
    propositions: Iterable[str], max_stem: int, max_loop: int
) -> Iterator[tuple[tuple[Letter, ...], tuple[Letter, ...]]]:
    """Every lasso word over the alphabet, shortest shapes first.

    The enumeration order is shared with the bulk evaluators below so their
    outputs align elementwise.
    """
    letters = canonical_letters(propositions)
    for stem_len in range(max_stem + 1):
        for loop_len in range(1, max_loop + 1):
            for combo in itertools.product(letters, repeat=stem_len + loop_len):
                yield combo[:stem_len], combo[stem_len:]


@lru_cache(maxsize=32)
def _digit_table(n_letters: int, length: int) -> np.ndarray:
    total = n_letters**length
    idx = np.unravel_index(np.arange(total), (n_letters,) * length)
    return np.stack(idx, axis=1).astype(np.int16)


def semantic_lasso_table(
    formula: Formula, propositions: Iterable[str], max_stem: int, max_loop: int
) -> np.ndarray:
    """Truth of the formula on every lasso from :func:`enumerate_lassos`.

    Vectorized over all words of each shape at once; the per-word evaluator
    :func:`formula_satisfied_on_lasso` is the readable reference this is
    checked against in the test suite.
    """
    letters = canonical_letters(propositions)
    n_letters = len(letters)
    has = {
        p: np.array([p in letter for letter in letters])
        for p in sorted(set(propositions))
    }
    chunks: list[np.ndarray] = []
    for stem_len in range(max_stem + 1):
        for loop_len in range(1, max_loop + 1):
            n = stem_len + loop_len
            digits = _digit_table(n_letters, n)
            succ = np.arange(1, n + 1)
            succ[n - 1] = stem_len

            def val(f: Formula) -> np.ndarray:
                if isinstance(f, TrueConst):
                    return np.ones(digits.shape, dtype=bool)
                if isinstance(f, Atom):
                    return has[f.name][digits]
                if isinstance(f, Not):
                    return ~val(f.sub)
                if isinstance(f, And):
                    return val(f.left) & val(f.right)
                if isinstance(f, Or):
                    return val(f.left) | val(f.right)
                if isinstance(f, Next):
                    return val(f.sub)[:, succ]
                if isinstance(f, Until):
                    a, b = val(f.left), val(f.right)
                    x = np.zeros(digits.shape, dtype=bool)
                    for _ in range(n + 1):
                        nxt = b | (a & x[:, succ])
                        if np.array_equal(nxt, x):
                            break
                        x = nxt
                    return x
                if isinstance(f, Eventually):
                    a = val(f.sub)
                    x = np.zeros(digits.shape, dtype=bool)
                    for _ in range(n + 1):
                        nxt = a | x[:, succ]
                        if np.array_equal(nxt, x):
                            break
                        x = nxt
                    return x
                if isinstance(f, Always):
                    a = val(f.sub)
                    x = np.ones(digits.shape, dtype=bool)
                    for _ in range(n + 1):
                        nxt = a & x[:, succ]
                        if np.array_equal(nxt, x):
                            break
                        x = nxt
                    return x
                raise TypeError(f"unknown formula node {f!r}")

            chunks.append(val(formula)[:, 0])
    return np.concatenate(chunks)
