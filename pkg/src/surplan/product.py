"""Synchronous product of a transition system with a mission automaton.

Product states pair a system state with an automaton state; moving along a
system transition advances the automaton over the label of the state being
left. The offline analysis restricts the accepting and surveillance state
sets to those visitable infinitely often, computes shortest-distance fields
toward them, prunes everything that cannot serve an accepting run, and
attaches per-edge progress indicators that the online planner follows.
"""

from __future__ import annotations

import math
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .buchi import BuchiAutomaton, to_buchi
from .errors import InternalConsistencyError, ValidationError
from .ltl import Formula, parse
from .ts import TransitionSystem, min_weight_matrix

INF = math.inf


class ProductAutomaton:
    """Reachable product graph with weighted edges and analysis fields.

    Analysis results (limit sets, distance fields, indicators) start as None
    and are filled in by the offline pipeline. ``initial`` is None when the
    initial product state did not survive pruning.
    """

    def __init__(
        self,
        ts: TransitionSystem,
        ba: BuchiAutomaton,
        ts_of: np.ndarray,
        ba_of: np.ndarray,
        initial: int | None,
        edge_src: np.ndarray,
        edge_dst: np.ndarray,
        edge_weight: np.ndarray,
        accepting: np.ndarray,
        surveillance: np.ndarray,
        surveillance_prop: str = "sur",
    ):
        self.ts = ts
        self.ba = ba
        self.surveillance_prop = surveillance_prop
        self.ts_of = np.asarray(ts_of, dtype=np.int64)
        self.ba_of = np.asarray(ba_of, dtype=np.int64)
        self.n = len(self.ts_of)
        self.initial = initial
        self.edge_src = np.asarray(edge_src, dtype=np.int64)
        self.edge_dst = np.asarray(edge_dst, dtype=np.int64)
        self.edge_weight = np.asarray(edge_weight, dtype=np.float64)
        self.accepting = np.asarray(accepting, dtype=bool)
        self.surveillance = np.asarray(surveillance, dtype=bool)
        out: list[list[int]] = [[] for _ in range(self.n)]
        for e in range(len(self.edge_src)):
            out[self.edge_src[e]].append(e)
        self.out_edges = tuple(tuple(es) for es in out)
        self._min_w: np.ndarray | None = None
        # offline analysis results
        self.f_inf: np.ndarray | None = None
        self.s_pi_inf: np.ndarray | None = None
        self.w_pi: np.ndarray | None = None
        self.w_phi_u: np.ndarray | None = None
        self.w_phi_v: np.ndarray | None = None
        self.ind_pi: np.ndarray | None = None
        self.ind_phi: np.ndarray | None = None

    @property
    def min_w(self) -> np.ndarray:
        """All-pairs minimum path weight over the product graph."""
        if self._min_w is None:
            edges = zip(
                self.edge_src.tolist(),
                self.edge_dst.tolist(),
                self.edge_weight.tolist(),
            )
            self._min_w = min_weight_matrix(self.n, edges)
        return self._min_w

    def successor_states(self, state: int) -> tuple[int, ...]:
        return tuple(int(self.edge_dst[e]) for e in self.out_edges[state])

    def state_name(self, state: int) -> str:
        return f"({self.ts.state_name(int(self.ts_of[state]))}, {int(self.ba_of[state])})"

    def summary(self) -> str:
        parts = [
            f"product states: {self.n}",
            f"edges: {len(self.edge_src)}",
            f"accepting states: {int(self.accepting.sum())}",
            f"surveillance states: {int(self.surveillance.sum())}",
        ]
        if self.f_inf is not None:
            parts.append(f"recurrent accepting states: {int(self.f_inf.sum())}")
        if self.s_pi_inf is not None:
            parts.append(f"recurrent surveillance states: {int(self.s_pi_inf.sum())}")
        return "\n".join(parts)


def build_product(
    ts: TransitionSystem, ba: BuchiAutomaton, surveillance_prop: str = "sur"
) -> ProductAutomaton:
    """Reachable part of the product of a system and an automaton.

    An edge (q, s) -> (q', s') exists when q -> q' is a system transition and
    the automaton moves s -> s' over the label of q. Discovery order is
    deterministic, so state numbering is reproducible. States whose system
    component carries the surveillance proposition are flagged.
    """
    if not ts.propositions >= ba.propositions & ts.propositions:
        raise ValidationError("automaton propositions incompatible with system")
    start = (ts.initial, ba.initial)
    index: dict[tuple[int, int], int] = {start: 0}
    order: list[tuple[int, int]] = [start]
    edge_src: list[int] = []
    edge_dst: list[int] = []
    edge_weight: list[float] = []
    queue: deque[tuple[int, int]] = deque([start])
    while queue:
        q, s = queue.popleft()
        src = index[(q, s)]
        letter = ts.label(q)
        ba_targets = ba.successors(s, letter)
        for q2 in ts.successors(q):
            w = ts.weight(q, q2)
            for s2 in ba_targets:
                key = (q2, s2)
                if key not in index:
                    index[key] = len(order)
                    order.append(key)
                    queue.append(key)
                edge_src.append(src)
                edge_dst.append(index[key])
                edge_weight.append(w)
    ts_of = np.array([q for q, _ in order], dtype=np.int64)
    ba_of = np.array([s for _, s in order], dtype=np.int64)
    accepting = np.array([s in ba.accepting for _, s in order], dtype=bool)
    surveillance = np.array(
        [surveillance_prop in ts.label(q) for q, _ in order], dtype=bool
    )
    return ProductAutomaton(
        ts,
        ba,
        ts_of,
        ba_of,
        0,
        np.array(edge_src, dtype=np.int64),
        np.array(edge_dst, dtype=np.int64),
        np.array(edge_weight, dtype=np.float64),
        accepting,
        surveillance,
        surveillance_prop,
    )


def _distance_to_set(min_w: np.ndarray, mask: np.ndarray) -> np.ndarray:
    if not mask.any():
        return np.full(min_w.shape[0], INF)
    return np.min(min_w[:, mask], axis=1)


def compute_inf_sets(product: ProductAutomaton) -> tuple[np.ndarray, np.ndarray]:
    """Restrict accepting and surveillance sets to their recurrent cores.

    A state stays in either set only while some successor can still reach the
    other (current) set; removal alternates between the two sets until stable.
    The result are exactly the states visitable infinitely often by a single
    run that sees both sets infinitely often.
    """
    n = product.n
    adj = np.zeros((n, n), dtype=bool)
    adj[product.edge_src, product.edge_dst] = True
    min_w = product.min_w
    f_inf = product.accepting.copy()
    s_inf = product.surveillance.copy()
    while True:
        reach_s = _distance_to_set(min_w, s_inf) < INF
        new_f = f_inf & ((adj.astype(np.uint8) @ reach_s.astype(np.uint8)) > 0)
        reach_f = _distance_to_set(min_w, new_f) < INF
        new_s = s_inf & ((adj.astype(np.uint8) @ reach_f.astype(np.uint8)) > 0)
        if np.array_equal(new_f, f_inf) and np.array_equal(new_s, s_inf):
            break
        f_inf, s_inf = new_f, new_s
    return f_inf, s_inf


def surveillance_distance(product: ProductAutomaton, s_inf: np.ndarray) -> np.ndarray:
    """Minimum weight from each state to the recurrent surveillance set."""
    return _distance_to_set(product.min_w, s_inf)


def mission_distance(
    product: ProductAutomaton, f_inf: np.ndarray, w_pi: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Two-part distance toward closing an accepting round.

    The second component is the least total weight of reaching a recurrent
    accepting state and continuing to surveillance from there; the first is
    the least weight of the reach leg among the totals' minimizers. States
    that cannot reach the accepting core get infinity in both parts.
    """
    n = product.n
    if not f_inf.any():
        return np.full(n, INF), np.full(n, INF)
    reach = product.min_w[:, f_inf]
    totals = reach + w_pi[f_inf][None, :]
    v = np.min(totals, axis=1)
    tied = totals == v[:, None]
    u = np.min(np.where(tied, reach, INF), axis=1)
    u[v == INF] = INF
    return u, v


def compute_indicators(product: ProductAutomaton) -> tuple[np.ndarray, np.ndarray]:
    """Per-edge progress flags: 1 when the move strictly shortens the metric.

    For the mission metric both parts must strictly decrease.
    """
    if product.w_pi is None or product.w_phi_u is None or product.w_phi_v is None:
        raise ValidationError("distance fields must be computed first")
    src = product.edge_src
    dst = product.edge_dst
    ind_pi = product.w_pi[src] > product.w_pi[dst]
    ind_phi = (product.w_phi_u[src] > product.w_phi_u[dst]) & (
        product.w_phi_v[src] > product.w_phi_v[dst]
    )
    return ind_pi, ind_phi


def verify_descent(product: ProductAutomaton) -> None:
    """Consistency check: indicator-marked edges always exist where needed.

    From any state with a finite positive surveillance distance some edge
    must shorten it, and from any state outside the accepting core with a
    finite mission metric some edge must shorten both of its parts. Raises
    InternalConsistencyError when the analysis violates this.
    """
    w_pi = product.w_pi
    u, v = product.w_phi_u, product.w_phi_v
    ind_pi, ind_phi = product.ind_pi, product.ind_phi
    if w_pi is None or u is None or ind_pi is None:
        raise ValidationError("analysis fields must be computed first")
    for p in range(product.n):
        edges = product.out_edges[p]
        if 0 < w_pi[p] < INF and not any(ind_pi[e] for e in edges):
            raise InternalConsistencyError(
                f"no surveillance-descent edge out of state {p}"
            )
        if v[p] < INF and not product.f_inf[p] and not any(ind_phi[e] for e in edges):
            raise InternalConsistencyError(
                f"no mission-descent edge out of state {p}"
            )


def trim_product(product: ProductAutomaton) -> ProductAutomaton:
    """Drop states that cannot support the mission, keep the reachable rest.

    States with an infinite surveillance or mission metric are removed; the
    remainder is restricted to the part reachable from the initial state.
    Distance fields and recurrent-set flags carry over unchanged: minimum
    paths realizing them never pass through removed states, because both
    metrics stay finite along any path that ends somewhere finite.
    """
    if product.w_pi is None or product.w_phi_v is None:
        raise ValidationError("distance fields must be computed first")
    finite = (product.w_pi < INF) & (product.w_phi_v < INF)
    reachable = np.zeros(product.n, dtype=bool)
    if product.initial is not None and finite[product.initial]:
        stack = [product.initial]
        reachable[product.initial] = True
        while stack:
            p = stack.pop()
            for e in product.out_edges[p]:
                q = int(product.edge_dst[e])
                if finite[q] and not reachable[q]:
                    reachable[q] = True
                    stack.append(q)
    keep = finite & reachable
    kept = np.flatnonzero(keep)
    remap = np.full(product.n, -1, dtype=np.int64)
    remap[kept] = np.arange(len(kept))
    edge_ok = keep[product.edge_src] & keep[product.edge_dst]
    initial = (
        int(remap[product.initial])
        if product.initial is not None and keep[product.initial]
        else None
    )
    trimmed = ProductAutomaton(
        product.ts,
        product.ba,
        product.ts_of[kept],
        product.ba_of[kept],
        initial,
        remap[product.edge_src[edge_ok]],
        remap[product.edge_dst[edge_ok]],
        product.edge_weight[edge_ok],
        product.accepting[kept],
        product.surveillance[kept],
        product.surveillance_prop,
    )
    trimmed.f_inf = product.f_inf[kept] if product.f_inf is not None else None
    trimmed.s_pi_inf = product.s_pi_inf[kept] if product.s_pi_inf is not None else None
    trimmed.w_pi = product.w_pi[kept]
    trimmed.w_phi_u = product.w_phi_u[kept]
    trimmed.w_phi_v = product.w_phi_v[kept]
    return trimmed


def check_accepting_label_condition(ba: BuchiAutomaton, sur_prop: str) -> bool:
    """Whether every automaton move into an accepting state reads the
    surveillance proposition."""
    return all(
        sur_prop in letter for _, letter, t in ba.transitions if t in ba.accepting
    )


@dataclass
class OfflineResult:
    """Everything the online planner needs, plus diagnostics."""

    ts: TransitionSystem
    formula: Formula
    surveillance_prop: str
    ba: BuchiAutomaton
    product: ProductAutomaton
    trimmed: ProductAutomaton
    feasible: bool
    accepting_label_condition: bool
    timings: dict[str, float] = field(default_factory=dict)


def offline_phase(
    ts: TransitionSystem,
    formula: Formula | str,
    surveillance_prop: str = "sur",
) -> OfflineResult:
    """Run the whole offline pipeline for a mission over a system.

    Translates the formula, builds the product, restricts to recurrent sets,
    computes both distance fields and per-edge indicators, prunes, and
    verifies internal consistency of the result.
    """
    timings: dict[str, float] = {}
    if isinstance(formula, str):
        formula = parse(formula, ts.propositions)
    t0 = time.perf_counter()
    ba = to_buchi(formula, ts.propositions)
    timings["automaton"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    product = build_product(ts, ba, surveillance_prop)
    timings["product"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    product.f_inf, product.s_pi_inf = compute_inf_sets(product)
    product.w_pi = surveillance_distance(product, product.s_pi_inf)
    product.w_phi_u, product.w_phi_v = mission_distance(
        product, product.f_inf, product.w_pi
    )
    timings["distances"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    trimmed = trim_product(product)
    trimmed.ind_pi, trimmed.ind_phi = compute_indicators(trimmed)
    verify_descent(trimmed)
    timings["trim"] = time.perf_counter() - t0

    feasible = trimmed.initial is not None
    label_ok = check_accepting_label_condition(ba, surveillance_prop)
    return OfflineResult(
        ts=ts,
        formula=formula,
        surveillance_prop=surveillance_prop,
        ba=ba,
        product=product,
        trimmed=trimmed,
        feasible=feasible,
        accepting_label_condition=label_ok,
        timings=timings,
    )
