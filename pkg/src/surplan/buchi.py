"""Automaton form of mission formulas over infinite words.

The translation unfolds a formula in negation normal form into obligation
sets: each automaton state is the set of subformulas that still must hold.
Reading a letter rewrites every obligation into the requirements it places on
the current position plus the obligations it passes to the next one. Each
postponed subformula (an until or an eventually) owes a discharge; acceptance
tracks those debts per transition and is then reduced to a single accepting
set by the usual counter construction.

Every ordering in the construction is derived from canonical formula and
letter orders, so automaton state numbering is reproducible across processes.
"""

from __future__ import annotations

import itertools
from typing import Iterable, Iterator, Sequence

import numpy as np
from scipy.sparse import csr_array
from scipy.sparse.csgraph import connected_components

from .errors import ContractError, ValidationError
from .ltl import (
    And,
    Atom,
    Always,
    Eventually,
    Formula,
    Letter,
    Next,
    Not,
    Or,
    TrueConst,
    Until,
    atoms,
    canonical_letters,
    nnf,
    subformulas,
)


class BuchiAutomaton:
    """Nondeterministic automaton over letters drawn from 2^propositions.

    Transitions carry concrete proposition sets. A run is accepting when it
    enters accepting states infinitely often.
    """

    def __init__(
        self,
        n_states: int,
        initial: int,
        propositions: Iterable[str],
        transitions: Iterable[tuple[int, Letter, int]],
        accepting: Iterable[int],
        descriptions: Sequence[str] = (),
    ):
        self.n_states = n_states
        self.initial = initial
        self.propositions = frozenset(propositions)
        self.transitions = tuple(
            (s, frozenset(letter), t) for s, letter, t in transitions
        )
        self.accepting = frozenset(accepting)
        self.descriptions = tuple(descriptions)
        for s, letter, t in self.transitions:
            if not (0 <= s < n_states and 0 <= t < n_states):
                raise ValidationError("transition endpoint out of range")
            if not letter <= self.propositions:
                raise ValidationError(
                    f"transition letter {sorted(letter)} uses undeclared propositions"
                )
        index: dict[tuple[int, Letter], list[int]] = {}
        for s, letter, t in self.transitions:
            index.setdefault((s, letter), []).append(t)
        self._succ = {
            key: tuple(sorted(set(ts))) for key, ts in index.items()
        }

    def successors(self, state: int, letter: Letter) -> tuple[int, ...]:
        return self._succ.get((state, frozenset(letter)), ())

    def letters(self) -> list[Letter]:
        return canonical_letters(self.propositions)

    def to_text(self) -> str:
        """Plain adjacency listing for debugging."""
        lines = [
            f"states: {self.n_states}",
            f"initial: {self.initial}",
            f"accepting: {sorted(self.accepting)}",
        ]
        for i in range(self.n_states):
            if i < len(self.descriptions):
                lines.append(f"state {i}: {self.descriptions[i]}")
            else:
                lines.append(f"state {i}:")
            for s, letter, t in sorted(
                self.transitions, key=lambda e: (e[0], sorted(e[1]), e[2])
            ):
                if s == i:
                    lines.append(f"  --{{{','.join(sorted(letter)) or ''}}}--> {t}")
        return "\n".join(lines)


def _formula_key(f: Formula) -> str:
    return str(f)


def until_like_subformulas(formula: Formula) -> list[Formula]:
    """Until and eventually subformulas in first-occurrence order."""
    seen: list[Formula] = []
    for sub in subformulas(formula):
        if isinstance(sub, (Until, Eventually)) and sub not in seen:
            seen.append(sub)
    return seen


_EMPTY = frozenset()

# A choice is (obligations passed to the next position,
#              postponed subformulas discharged right now,
#              postponed subformulas whose requirement was examined right now).
_Choice = tuple[frozenset, frozenset, frozenset]


def _sat(formula: Formula, letter: Letter, memo: dict) -> tuple[_Choice, ...]:
    key = (formula, letter)
    cached = memo.get(key)
    if cached is not None:
        return cached
    if isinstance(formula, TrueConst):
        result: tuple[_Choice, ...] = ((_EMPTY, _EMPTY, _EMPTY),)
    elif isinstance(formula, Atom):
        result = ((_EMPTY, _EMPTY, _EMPTY),) if formula.name in letter else ()
    elif isinstance(formula, Not):
        sub = formula.sub
        if isinstance(sub, TrueConst):
            result = ()
        elif isinstance(sub, Atom):
            result = ((_EMPTY, _EMPTY, _EMPTY),) if sub.name not in letter else ()
        else:
            raise ContractError("negation below non-atomic formula; normalize first")
    elif isinstance(formula, And):
        result = _combine(
            _sat(formula.left, letter, memo), _sat(formula.right, letter, memo)
        )
    elif isinstance(formula, Or):
        merged = set(_sat(formula.left, letter, memo))
        merged.update(_sat(formula.right, letter, memo))
        result = tuple(merged)
    elif isinstance(formula, Next):
        result = ((frozenset((formula.sub,)), _EMPTY, _EMPTY),)
    elif isinstance(formula, Until):
        mark = frozenset((formula,))
        choices = set()
        for nxt, dis, pro in _sat(formula.right, letter, memo):
            choices.add((nxt, dis | mark, pro | mark))
        for nxt, dis, pro in _sat(formula.left, letter, memo):
            choices.add((nxt | mark, dis, pro | mark))
        result = tuple(choices)
    elif isinstance(formula, Eventually):
        mark = frozenset((formula,))
        choices = set()
        for nxt, dis, pro in _sat(formula.sub, letter, memo):
            choices.add((nxt, dis | mark, pro | mark))
        choices.add((mark, _EMPTY, mark))
        result = tuple(choices)
    elif isinstance(formula, Always):
        keep = frozenset((formula,))
        result = tuple(
            (nxt | keep, dis, pro) for nxt, dis, pro in _sat(formula.sub, letter, memo)
        )
    else:
        raise TypeError(f"unknown formula node {formula!r}")
    memo[key] = result
    return result


def _combine(a: tuple[_Choice, ...], b: tuple[_Choice, ...]) -> tuple[_Choice, ...]:
    out = set()
    for na, da, pa in a:
        for nb, db, pb in b:
            out.add((na | nb, da | db, pa | pb))
    return tuple(out)


def _state_successors(
    state: frozenset, letter: Letter, memo: dict
) -> tuple[_Choice, ...]:
    choices: tuple[_Choice, ...] = ((_EMPTY, _EMPTY, _EMPTY),)
    for member in sorted(state, key=_formula_key):
        choices = _combine(choices, _sat(member, letter, memo))
        if not choices:
            break
    return choices


def to_buchi(formula: Formula, propositions: Iterable[str] | None = None) -> BuchiAutomaton:
    """Translate a formula into an equivalent automaton.

    The alphabet is 2^propositions; when ``propositions`` is omitted it
    defaults to the atoms of the formula. State counts are whatever the
    construction produces after pruning and quotienting; only the accepted
    language is specified.
    """
    props = frozenset(atoms(formula))
    if propositions is not None:
        props = props | frozenset(propositions)
    normalized = nnf(formula)
    untils = until_like_subformulas(normalized)
    n_untils = len(untils)
    until_index = {u: i for i, u in enumerate(untils)}
    letters = canonical_letters(props)
    memo: dict = {}

    # Obligation-set automaton with per-transition debt bookkeeping.
    start = frozenset((normalized,))
    states: dict[frozenset, int] = {start: 0}
    order: list[frozenset] = [start]
    # edges[s] = list of (letter index, target state, frozenset of satisfied debt indices)
    edges: list[list[tuple[int, int, frozenset[int]]]] = []
    frontier = [start]
    while frontier:
        new_frontier: list[frozenset] = []
        for state in frontier:
            out: list[tuple[int, int, frozenset[int]]] = []
            for li, letter in enumerate(letters):
                seen: set[tuple[int, frozenset[int]]] = set()
                for nxt, dis, pro in _state_successors(state, letter, memo):
                    marks = frozenset(
                        i
                        for i, u in enumerate(untils)
                        if u not in pro or u in dis
                    )
                    key = (nxt, marks)
                    if key in seen:
                        continue
                    seen.add(key)
                    if nxt not in states:
                        states[nxt] = len(order)
                        order.append(nxt)
                        new_frontier.append(nxt)
                    out.append((li, states[nxt], marks))
            edges.append(out)
            # edges is aligned with discovery order; states expand in order
        frontier = new_frontier
    # Discovery appended edge lists in the same order states were discovered,
    # but the loop above appends per frontier; rebuild aligned edge table.
    if len(edges) != len(order):
        raise ContractError("internal bookkeeping mismatch")

    # Counter construction: wait for debt 0, then 1, ..., then n-1; a state at
    # level n_untils certifies one full round of discharges and restarts.
    level_states: dict[tuple[int, int], int] = {}
    level_order: list[tuple[int, int]] = []
    level_edges: list[tuple[int, int, int]] = []

    def level_id(state: int, level: int) -> int:
        key = (state, level)
        if key not in level_states:
            level_states[key] = len(level_order)
            level_order.append(key)
        return level_states[key]

    initial_id = level_id(0, 0)
    pending = [ (0, 0) ]
    done: set[tuple[int, int]] = set()
    while pending:
        state, level = pending.pop()
        if (state, level) in done:
            continue
        done.add((state, level))
        src = level_id(state, level)
        effective = 0 if level == n_untils else level
        for li, target, marks in edges[state]:
            j = effective
            while j < n_untils and j in marks:
                j += 1
            dst = level_id(target, j)
            level_edges.append((src, li, dst))
            if (target, j) not in done:
                pending.append((target, j))

    n = len(level_order)
    accepting = frozenset(
        i for i, (_, level) in enumerate(level_order) if level == n_untils
    )
    transitions = [
        (s, letters[li], t) for s, li, t in level_edges
    ]
    descriptions = tuple(
        "{"
        + ", ".join(sorted(_formula_key(f) for f in order[state]))
        + f"}} @{level}"
        for state, level in level_order
    )
    ba = BuchiAutomaton(n, initial_id, props, transitions, accepting, descriptions)
    ba = _prune_dead(ba)
    ba = _quotient_bisimulation(ba)
    return ba


def _prune_dead(ba: BuchiAutomaton) -> BuchiAutomaton:
    """Drop states that cannot contribute to any accepting run."""
    n = ba.n_states
    if n == 0:
        return ba
    rows = [e[0] for e in ba.transitions]
    cols = [e[2] for e in ba.transitions]
    graph = csr_array((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(n, n))
    n_comp, labels = connected_components(graph, directed=True, connection="strong")
    has_internal_edge = np.zeros(n_comp, dtype=bool)
    for s, _, t in ba.transitions:
        if labels[s] == labels[t]:
            has_internal_edge[labels[s]] = True
    good_comp = np.zeros(n_comp, dtype=bool)
    for s in ba.accepting:
        if has_internal_edge[labels[s]]:
            good_comp[labels[s]] = True
    alive = np.array([good_comp[labels[i]] for i in range(n)])
    # backward closure: anything that reaches an alive state stays
    preds: list[list[int]] = [[] for _ in range(n)]
    for s, _, t in ba.transitions:
        preds[t].append(s)
    stack = [i for i in range(n) if alive[i]]
    while stack:
        i = stack.pop()
        for p in preds[i]:
            if not alive[p]:
                alive[p] = True
                stack.append(p)
    if alive.all():
        return ba
    keep = sorted({int(i) for i in np.flatnonzero(alive)} | {ba.initial})
    remap = {old: new for new, old in enumerate(keep)}
    transitions = [
        (remap[s], letter, remap[t])
        for s, letter, t in ba.transitions
        if alive[s] and alive[t]
    ]
    return BuchiAutomaton(
        len(keep),
        remap[ba.initial],
        ba.propositions,
        transitions,
        [remap[s] for s in ba.accepting if s in remap and alive[s]],
        [ba.descriptions[old] for old in keep] if ba.descriptions else (),
    )


def _quotient_bisimulation(ba: BuchiAutomaton) -> BuchiAutomaton:
    """Merge states with identical acceptance flag and branching behavior."""
    n = ba.n_states
    if n <= 1:
        return ba
    letters = ba.letters()
    letter_index = {letter: i for i, letter in enumerate(letters)}
    out: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for s, letter, t in ba.transitions:
        out[s].append((letter_index[letter], t))
    blocks = [1 if i in ba.accepting else 0 for i in range(n)]
    while True:
        sigs = []
        for i in range(n):
            per_letter: dict[int, set[int]] = {}
            for li, t in out[i]:
                per_letter.setdefault(li, set()).add(blocks[t])
            sig = (
                blocks[i],
                tuple(
                    (li, tuple(sorted(bs))) for li, bs in sorted(per_letter.items())
                ),
            )
            sigs.append(sig)
        ranking = {sig: r for r, sig in enumerate(sorted(set(sigs)))}
        new_blocks = [ranking[sig] for sig in sigs]
        if new_blocks == blocks:
            break
        blocks = new_blocks
    n_blocks = len(set(blocks))
    if n_blocks == n:
        return ba
    transitions = sorted(
        set(
            (blocks[s], letter, blocks[t]) for s, letter, t in ba.transitions
        ),
        key=lambda e: (e[0], sorted(e[1]), e[2]),
    )
    rep_desc = [""] * n_blocks
    if ba.descriptions:
        for i in range(n):
            if not rep_desc[blocks[i]]:
                rep_desc[blocks[i]] = ba.descriptions[i]
    return BuchiAutomaton(
        n_blocks,
        blocks[ba.initial],
        ba.propositions,
        transitions,
        sorted(set(blocks[s] for s in ba.accepting)),
        rep_desc,
    )


def find_accepting_lasso_run(
    ba: BuchiAutomaton, stem: Sequence[Letter], loop: Sequence[Letter]
) -> tuple[list[tuple[int, int]], list[tuple[int, int]]] | None:
    """Witness run of the automaton over the lasso word, if one exists.

    Nodes pair an automaton state with a word position; the loop's last
    position wraps to its first. Returns a path from the initial node and a
    cycle through an accepting node (endpoints repeated), or None when the
    word is rejected.
    """
    if len(loop) == 0:
        raise ContractError("the loop part of a lasso must be nonempty")
    word = [frozenset(x) for x in stem] + [frozenset(x) for x in loop]
    n_pos = len(word)
    wrap = len(stem)

    def succ_pos(i: int) -> int:
        return i + 1 if i + 1 < n_pos else wrap

    start = (ba.initial, 0)
    parents: dict[tuple[int, int], tuple[int, int] | None] = {start: None}
    nodes: list[tuple[int, int]] = [start]
    adj: dict[tuple[int, int], list[tuple[int, int]]] = {}
    queue = [start]
    while queue:
        node = queue.pop()
        state, pos = node
        targets = []
        for t in ba.successors(state, word[pos]):
            nxt = (t, succ_pos(pos))
            targets.append(nxt)
            if nxt not in parents:
                parents[nxt] = node
                nodes.append(nxt)
                queue.append(nxt)
        adj[node] = targets
    idx = {node: i for i, node in enumerate(nodes)}
    rows, cols = [], []
    for node, targets in adj.items():
        for t in targets:
            rows.append(idx[node])
            cols.append(idx[t])
    if rows:
        graph = csr_array(
            (np.ones(len(rows), dtype=np.int8), (rows, cols)),
            shape=(len(nodes), len(nodes)),
        )
        _, labels = connected_components(graph, directed=True, connection="strong")
    else:
        labels = np.arange(len(nodes))
    internal = set()
    for node, targets in adj.items():
        for t in targets:
            if labels[idx[node]] == labels[idx[t]]:
                internal.add(labels[idx[node]])
    anchor = None
    for node in nodes:
        state, _ = node
        if state in ba.accepting and labels[idx[node]] in internal:
            anchor = node
            break
    if anchor is None:
        return None

    path: list[tuple[int, int]] = []
    cursor: tuple[int, int] | None = anchor
    while cursor is not None:
        path.append(cursor)
        cursor = parents[cursor]
    path.reverse()

    # shortest cycle through the anchor inside its component
    component = labels[idx[anchor]]
    cycle_parents: dict[tuple[int, int], tuple[int, int]] = {}
    frontier = [anchor]
    found = None
    visited = {anchor}
    while frontier and found is None:
        nxt_frontier = []
        for node in frontier:
            for t in adj.get(node, []):
                if labels[idx[t]] != component:
                    continue
                if t == anchor:
                    found = node
                    break
                if t not in visited:
                    visited.add(t)
                    cycle_parents[t] = node
                    nxt_frontier.append(t)
            if found is not None:
                break
        frontier = nxt_frontier
    if found is None:
        return None
    chain = [found]
    while chain[-1] != anchor:
        chain.append(cycle_parents[chain[-1]])
    chain.reverse()
    cycle = chain + [anchor]
    return path, cycle


def lasso_accepts(
    ba: BuchiAutomaton, stem: Sequence[Letter], loop: Sequence[Letter]
) -> bool:
    """Whether the automaton accepts stem followed by loop repeated forever."""
    return find_accepting_lasso_run(ba, stem, loop) is not None


def _bool_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return (a.astype(np.uint8) @ b.astype(np.uint8)) > 0


def _closure_reflexive(v: np.ndarray) -> np.ndarray:
    n = v.shape[0]
    reach = v | np.eye(n, dtype=bool)
    steps = max(1, int(np.ceil(np.log2(max(n, 2)))) + 1)
    for _ in range(steps):
        reach = reach | _bool_matmul(reach, reach)
    return reach


def lasso_acceptance_table(
    ba: BuchiAutomaton, max_stem: int, max_loop: int
) -> np.ndarray:
    """Acceptance of every lasso from ``enumerate_lassos`` over the automaton
    alphabet, vectorized across words.

    One traversal relation per loop word is composed from per-letter boolean
    matrices while tracking whether an accepting state was entered; a loop is
    viable from the states that can reach a strongly connected component
    containing such a flagged traversal. Checked against
    :func:`lasso_accepts` on samples in the test suite.
    """
    letters = ba.letters()
    n_letters = len(letters)
    size = ba.n_states
    acc = np.zeros(size, dtype=bool)
    for s in ba.accepting:
        acc[s] = True
    letter_index = {letter: i for i, letter in enumerate(letters)}
    step = np.zeros((n_letters, size, size), dtype=bool)
    for s, letter, t in ba.transitions:
        step[letter_index[letter], s, t] = True
    step_f = step & acc[None, None, :]

    chunks: list[np.ndarray] = []
    for stem_len in range(max_stem + 1):
        for loop_len in range(1, max_loop + 1):
            # reachable state sets after every stem of this length
            stems = np.zeros((1, size), dtype=bool)
            stems[0, ba.initial] = True
            for _ in range(stem_len):
                parts = [_bool_matmul(stems, step[d]) for d in range(n_letters)]
                stems = np.stack(parts, axis=1).reshape(-1, size)
            # viable start states per loop of this length
            pairs: list[tuple[np.ndarray, np.ndarray]] = [
                (step[d], step_f[d]) for d in range(n_letters)
            ]
            for _ in range(loop_len - 1):
                nxt: list[tuple[np.ndarray, np.ndarray]] = []
                for v, vf in pairs:
                    for d in range(n_letters):
                        nxt.append(
                            (
                                _bool_matmul(v, step[d]),
                                _bool_matmul(vf, step[d])
                                | _bool_matmul(v, step_f[d]),
                            )
                        )
                pairs = nxt
            good_starts = np.zeros((len(pairs), size), dtype=bool)
            for li, (v, vf) in enumerate(pairs):
                if not v.any():
                    continue
                graph = csr_array(v.astype(np.int8))
                _, labels = connected_components(
                    graph, directed=True, connection="strong"
                )
                same = labels[:, None] == labels[None, :]
                flagged = vf & same
                if not flagged.any():
                    continue
                good_nodes = np.zeros(size, dtype=bool)
                xs, ys = np.nonzero(flagged)
                good_labels = set(labels[x] for x in xs) | set(labels[y] for y in ys)
                for i in range(size):
                    if labels[i] in good_labels:
                        good_nodes[i] = True
                reach = _closure_reflexive(v)
                good_starts[li] = (reach & good_nodes[None, :]).any(axis=1)
            table = _bool_matmul(stems, good_starts.T)
            chunks.append(table.ravel())
    return np.concatenate(chunks)
