"""Reward fields, reward dynamics, and potential / preference functions.

A reward field assigns a non-negative value to every system state. Dynamics
evolve the field as simulated time passes and define what collecting a
reward does. Potential functions score a candidate next state by the rewards
collectible on short local runs from it; preference functions score how
urgently surveillance progress outweighs collection, growing with the time
elapsed since the last survey.
"""

from __future__ import annotations

import inspect
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Protocol

import numpy as np

from .errors import ContractError, ValidationError


class RewardField:
    """Current reward per system state plus the simulation clock."""

    def __init__(self, n_states: int, values: Iterable[float] | None = None):
        if values is None:
            self.values = np.zeros(n_states, dtype=np.float64)
        else:
            self.values = np.asarray(list(values), dtype=np.float64).copy()
            if self.values.shape != (n_states,):
                raise ValidationError("initial reward vector has wrong length")
            if (self.values < 0).any():
                raise ValidationError("rewards must be non-negative")
        self.clock = 0.0


class RewardDynamics(Protocol):
    """How a reward field changes over time and reacts to collection."""

    def evolve(self, field: RewardField, dt: float) -> None: ...

    def on_collect(self, field: RewardField, state: int) -> float: ...


class DecaySpawnDynamics:
    """Data-package model: values outdate by one per whole time unit, and a
    fresh package may appear wherever the value is zero.

    Each elapsed whole time unit first decays every positive value by one
    (floored at zero), then lets every zero-valued state spawn independently
    with the configured probability. A fresh value is drawn uniformly from
    {0..15} or, with equal chance, uniformly from {16..60}, so smaller
    packages are more likely. Collection empties the state.

    Fractional durations accumulate; the random stream is consumed in a fixed
    order, so a seeded generator replays exactly.
    """

    def __init__(self, rng: np.random.Generator, spawn_probability: float = 0.05):
        if not 0.0 <= spawn_probability <= 1.0:
            raise ValidationError("spawn probability must be within [0, 1]")
        self._rng = rng
        self.spawn_probability = float(spawn_probability)
        self._fraction = 0.0

    def evolve(self, field: RewardField, dt: float) -> None:
        if dt < 0:
            raise ValidationError("time cannot run backwards")
        field.clock += dt
        self._fraction += dt
        # tolerance absorbs float accumulation when weights are not integral
        units = int(math.floor(self._fraction + 1e-9))
        self._fraction -= units
        for _ in range(units):
            self._unit_step(field.values)

    def _unit_step(self, values: np.ndarray) -> None:
        positive = values > 0
        values[positive] -= 1.0
        np.maximum(values, 0.0, out=values)
        draws = self._rng.random(len(values))
        spawn = (values == 0.0) & (draws < self.spawn_probability)
        count = int(spawn.sum())
        if count:
            small = self._rng.random(count) < 0.5
            low = self._rng.integers(0, 16, count)
            high = self._rng.integers(16, 61, count)
            values[spawn] = np.where(small, low, high).astype(np.float64)

    def on_collect(self, field: RewardField, state: int) -> float:
        reward = float(field.values[state])
        field.values[state] = 0.0
        return reward

    def burn_in(self, field: RewardField, units: int) -> None:
        """Evolve the field before the run starts, without advancing the
        clock, so the initial field is not identically zero."""
        for _ in range(units):
            self._unit_step(field.values)


@dataclass(frozen=True)
class RunBundle:
    """Padded array form of a set of local runs, ready for vectorized scoring.

    Each row is one run; ``ts_states`` holds the system-state identity per
    position (padding -1), ``cumw`` the weight from the run's start up to the
    position, ``novel`` whether the position is the first occurrence of its
    system state within the run AND differs from the state the robot is
    leaving. Scoring only ever reads positions where ``valid`` is set.
    """

    ts_states: np.ndarray
    valid: np.ndarray
    cumw: np.ndarray
    novel: np.ndarray

    @property
    def n_runs(self) -> int:
        return self.ts_states.shape[0]


def build_run_bundle(
    runs: Iterable[tuple[tuple[int, ...], tuple[float, ...]]],
    node_ts_state: Callable[[int], int],
    leaving_ts_state: int,
) -> RunBundle:
    """Pack enumerated runs into a bundle.

    ``runs`` yields (node sequence, cumulative weights); nodes map to system
    states through ``node_ts_state`` (identity when runs already live on the
    system). ``leaving_ts_state`` is the state whose reward was collected
    last, which never counts as novel.
    """
    materialized = [
        ([node_ts_state(n) for n in nodes], weights) for nodes, weights in runs
    ]
    if not materialized:
        raise ContractError("a local run set must contain at least one run")
    width = max(len(states) for states, _ in materialized)
    count = len(materialized)
    ts_states = np.full((count, width), -1, dtype=np.int64)
    valid = np.zeros((count, width), dtype=bool)
    cumw = np.zeros((count, width), dtype=np.float64)
    novel = np.zeros((count, width), dtype=bool)
    for r, (states, weights) in enumerate(materialized):
        k = len(states)
        ts_states[r, :k] = states
        valid[r, :k] = True
        cumw[r, :k] = weights
        seen: set[int] = set()
        for i, q in enumerate(states):
            if q != leaving_ts_state and q not in seen:
                novel[r, i] = True
            seen.add(q)
    return RunBundle(ts_states, valid, cumw, novel)


class MaxSumPotential:
    """Largest total reward collectible on one local run.

    A position pays out its sensed value minus the weight spent reaching it
    within the run, provided that is positive, the state was not already
    visited by the run, and it is not the state just left. Every other
    position pays the refresh constant, the assumed value of a reward that
    has meanwhile renewed.
    """

    name = "max-sum"

    def __init__(self, refresh_value: float = 15.0):
        if refresh_value < 0:
            raise ValidationError("refresh value must be non-negative")
        self.refresh_value = float(refresh_value)

    def evaluate(self, bundle: RunBundle, rewards: np.ndarray) -> float:
        gain = rewards[bundle.ts_states] - bundle.cumw
        contributing = bundle.valid & bundle.novel & (gain > 0)
        scores = np.where(
            contributing,
            gain,
            np.where(bundle.valid, self.refresh_value, 0.0),
        )
        return float(scores.sum(axis=1).max())


class MaxSinglePotential:
    """Largest single reward collectible on one local run.

    Same position guard as the sum variant, but non-contributing positions
    score zero and only the best position of the best run counts.
    """

    name = "max-single"

    def evaluate(self, bundle: RunBundle, rewards: np.ndarray) -> float:
        gain = rewards[bundle.ts_states] - bundle.cumw
        contributing = bundle.valid & bundle.novel & (gain > 0)
        scores = np.where(contributing, gain, 0.0)
        return float(scores.max(initial=0.0))


class ThresholdPreference:
    """Zero until the elapsed weight passes the threshold, then strictly
    above every potential."""

    name = "threshold"

    def __init__(self, threshold: float = 50.0):
        self.threshold = float(threshold)

    def __call__(self, elapsed: float, max_potential: float) -> float:
        return 0.0 if elapsed <= self.threshold else max_potential + 1.0


class CubicRampPreference:
    """Grows with the cube of elapsed weight, crossing the maximal potential
    exactly at the threshold."""

    name = "cubic"

    def __init__(self, threshold: float = 50.0):
        self.threshold = float(threshold)

    def __call__(self, elapsed: float, max_potential: float) -> float:
        return (elapsed / self.threshold) ** 3 * max_potential


class CubeRootRampPreference:
    """Grows with the cube root of elapsed weight: steep early, flat late,
    crossing the maximal potential exactly at the threshold."""

    name = "cube-root"

    def __init__(self, threshold: float = 50.0):
        self.threshold = float(threshold)

    def __call__(self, elapsed: float, max_potential: float) -> float:
        return (elapsed / self.threshold) ** (1.0 / 3.0) * max_potential


POTENTIALS: dict[str, Callable[..., object]] = {
    MaxSumPotential.name: MaxSumPotential,
    MaxSinglePotential.name: MaxSinglePotential,
}

PREFERENCES: dict[str, Callable[..., object]] = {
    ThresholdPreference.name: ThresholdPreference,
    CubicRampPreference.name: CubicRampPreference,
    CubeRootRampPreference.name: CubeRootRampPreference,
}


def register_potential(name: str, factory: Callable[..., object]) -> None:
    POTENTIALS[name] = factory


def register_preference(name: str, factory: Callable[..., object]) -> None:
    PREFERENCES[name] = factory


def _construct(factory: Callable[..., object], params: dict):
    accepted = set(inspect.signature(factory).parameters)
    return factory(**{key: value for key, value in params.items() if key in accepted})


def make_potential(name: str, **params: float):
    """Instantiate a registered potential, ignoring parameters it does not take."""
    if name not in POTENTIALS:
        raise ValidationError(
            f"unknown potential {name!r}; known: {sorted(POTENTIALS)}"
        )
    return _construct(POTENTIALS[name], params)


def make_preference(name: str, **params: float):
    """Instantiate a registered preference, ignoring parameters it does not take."""
    if name not in PREFERENCES:
        raise ValidationError(
            f"unknown preference {name!r}; known: {sorted(PREFERENCES)}"
        )
    return _construct(PREFERENCES[name], params)
