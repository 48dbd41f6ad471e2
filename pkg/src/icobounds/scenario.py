"""Scenarios with their correlation functionals and conditional distributions.

Tables are numpy arrays indexed ``[a_1, ..., a_N, x_1, ..., x_N]`` (outcomes
first, then settings).  A correlation is ``I(p) = sum alpha[a, x] p(a|x) +
offset``; the offset keeps tables homogeneous for games such as LGYNI whose
definition carries an additive constant.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import ScenarioMismatchError

DIST_TOL = 1e-9


@dataclass(frozen=True)
class Scenario:
    settings: tuple[int, ...]
    outcomes: tuple[int, ...]

    def __init__(self, settings: Sequence[int], outcomes: Sequence[int]):
        settings = tuple(int(n) for n in settings)
        outcomes = tuple(int(m) for m in outcomes)
        if len(settings) != len(outcomes) or not settings:
            raise ValueError("need one (settings, outcomes) pair per party and at least one party")
        if min(settings) < 1 or min(outcomes) < 1:
            raise ValueError("setting and outcome counts must be positive")
        object.__setattr__(self, "settings", settings)
        object.__setattr__(self, "outcomes", outcomes)

    @property
    def parties(self) -> int:
        return len(self.settings)

    @property
    def table_shape(self) -> tuple[int, ...]:
        return self.outcomes + self.settings

    def outcome_tuples(self) -> Iterable[tuple[int, ...]]:
        return itertools.product(*(range(m) for m in self.outcomes))

    def setting_tuples(self) -> Iterable[tuple[int, ...]]:
        return itertools.product(*(range(n) for n in self.settings))

    def trigger_vectors(self) -> Iterable[tuple[int, ...]]:
        return self.setting_tuples()

    def to_json(self) -> dict:
        return {"settings": list(self.settings), "outcomes": list(self.outcomes)}


def check_trigger(scenario: Scenario, xi: Sequence[int]) -> tuple[int, ...]:
    xi = tuple(int(v) for v in xi)
    if len(xi) != scenario.parties or any(not 0 <= v < n for v, n in zip(xi, scenario.settings)):
        raise ValueError(f"trigger vector {xi} out of range for settings {scenario.settings}")
    return xi


def _table(scenario: Scenario, values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.shape != scenario.table_shape:
        raise ValueError(f"table shape {arr.shape} != expected {scenario.table_shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Correlation:
    scenario: Scenario
    coefficients: np.ndarray
    offset: float = 0.0
    name: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "coefficients", _table(self.scenario, self.coefficients))
        object.__setattr__(self, "offset", float(self.offset))

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Correlation)
            and self.scenario == other.scenario
            and self.offset == other.offset
            and np.array_equal(self.coefficients, other.coefficients)
        )

    def scaled(self, t: float) -> "Correlation":
        return Correlation(self.scenario, t * self.coefficients, t * self.offset, self.name)

    def homogeneous(self) -> "Correlation":
        return Correlation(self.scenario, self.coefficients, 0.0, self.name)

    def to_json(self) -> dict:
        return {
            **self.scenario.to_json(),
            "offset": self.offset,
            "coefficients": _table_to_keys(self.scenario, self.coefficients),
        }

    @classmethod
    def from_json(cls, data: Mapping | str) -> "Correlation":
        if isinstance(data, str):
            data = json.loads(data)
        sc = Scenario(data["settings"], data["outcomes"])
        return cls(sc, _table_from_keys(sc, data["coefficients"]), data.get("offset", 0.0), data.get("name", ""))


@dataclass(frozen=True)
class ConditionalDistribution:
    scenario: Scenario
    table: np.ndarray

    def __post_init__(self):
        tab = _table(self.scenario, self.table)
        if tab.min() < -DIST_TOL:
            raise ValueError(f"negative probability {tab.min():.3e}")
        sums = tab.sum(axis=tuple(range(self.scenario.parties)))
        if np.max(np.abs(sums - 1.0)) > DIST_TOL:
            raise ValueError(f"rows not normalized (max deviation {np.max(np.abs(sums - 1)):.3e})")
        object.__setattr__(self, "table", tab)

    def __eq__(self, other) -> bool:
        return isinstance(other, ConditionalDistribution) and self.scenario == other.scenario and np.array_equal(self.table, other.table)

    def to_json(self) -> dict:
        return {**self.scenario.to_json(), "probabilities": _table_to_keys(self.scenario, self.table)}

    @classmethod
    def from_json(cls, data: Mapping | str) -> "ConditionalDistribution":
        if isinstance(data, str):
            data = json.loads(data)
        sc = Scenario(data["settings"], data["outcomes"])
        return cls(sc, _table_from_keys(sc, data["probabilities"]))


def _key(a, x) -> str:
    return ",".join(map(str, a)) + "|" + ",".join(map(str, x))


def _table_to_keys(scenario: Scenario, table: np.ndarray) -> dict:
    return {_key(a, x): float(table[a + x]) for x in scenario.setting_tuples() for a in scenario.outcome_tuples()}


def _table_from_keys(scenario: Scenario, entries: Mapping[str, float]) -> np.ndarray:
    """Keys ``"a1,...,aN|x1,...,xN"``; absent keys are zero."""
    table = np.zeros(scenario.table_shape)
    for key, val in entries.items():
        left, right = key.split("|")
        a = tuple(int(v) for v in left.split(","))
        x = tuple(int(v) for v in right.split(","))
        if len(a) != scenario.parties or len(x) != scenario.parties:
            raise ValueError(f"malformed table key {key!r}")
        table[a + x] = float(val)
    return table


# ---------------------------------------------------------------------------
# builders

_BIT2 = Scenario((2, 2), (2, 2))


def gyni() -> Correlation:
    """Guess your neighbour's input, uniform settings."""
    tab = np.zeros((2, 2, 2, 2))
    for x1, x2 in itertools.product(range(2), repeat=2):
        tab[x2, x1, x1, x2] = 0.25
    return Correlation(_BIT2, tab, 0.0, "gyni")


def biased_lgyni(alpha: float) -> Correlation:
    """Weight ``alpha`` on the both-active round, ``(1-alpha)/2`` on each lazy round."""
    alpha = float(alpha)
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"biased LGYNI needs alpha in [0, 1], got {alpha}")
    tab = np.zeros((2, 2, 2, 2))
    tab[1, 1, 1, 1] = alpha
    tab[:, 0, 0, 1] = (1 - alpha) / 2  # Bob must output x1 = 0
    tab[0, :, 1, 0] = (1 - alpha) / 2  # Alice must output x2 = 0
    return Correlation(_BIT2, tab, 0.0, f"biased_lgyni({alpha:g})")


def lgyni() -> Correlation:
    """Lazy GYNI: success averaged over the four setting pairs.

    The (0, 0) round is always won, which shows up as the constant 1/4.
    """
    tab = np.zeros((2, 2, 2, 2))
    tab[1, 1, 1, 1] = 0.25
    tab[:, 0, 0, 1] = 0.25
    tab[0, :, 1, 0] = 0.25
    return Correlation(_BIT2, tab, 0.25, "lgyni")


OCB_SCENARIO = Scenario((2, 4), (2, 2))


def ocb_setting(b: int, c: int) -> int:
    """Bob's setting index for the bit pair (b, c); b is the major bit."""
    return 2 * b + c


def biased_ocb(alpha: float) -> Correlation:
    alpha = float(alpha)
    tab = np.zeros((2, 2, 2, 4))
    for x1, b in itertools.product(range(2), repeat=2):
        tab[b, :, x1, ocb_setting(b, 0)] += 0.25
        tab[:, x1, x1, ocb_setting(b, 1)] += 0.25 * alpha
    return Correlation(OCB_SCENARIO, tab, 0.0, f"biased_ocb({alpha:g})")


def ocb() -> Correlation:
    c = biased_ocb(1.0)
    return Correlation(c.scenario, c.coefficients, 0.0, "ocb")


def ocb_lazy_component(x_star: int, b_star: int, alpha: float) -> Correlation:
    """Single-trigger piece of biased OCB with triggers ``(x_star, 2*b_star + 1)``.

    ``biased_ocb(alpha)`` is the uniform average of the four components.
    """
    if x_star not in (0, 1) or b_star not in (0, 1):
        raise ValueError("x_star and b_star are bits")
    alpha = float(alpha)
    tab = np.zeros((2, 2, 2, 4))
    for b in range(2):
        tab[b, :, x_star, ocb_setting(b, 0)] += 0.5
    for x1 in range(2):
        tab[:, x1, x1, ocb_setting(b_star, 1)] += 0.5 * alpha
    return Correlation(OCB_SCENARIO, tab, 0.0, f"ocb_lazy({x_star},{b_star},{alpha:g})")


# ---------------------------------------------------------------------------
# evaluation


def _same(a: Scenario, b: Scenario) -> None:
    if a != b:
        raise ScenarioMismatchError(f"scenario mismatch: {a} vs {b}")


def evaluate(c: Correlation, p: ConditionalDistribution | np.ndarray) -> float:
    if isinstance(p, ConditionalDistribution):
        _same(c.scenario, p.scenario)
        tab = p.table
    else:
        tab = np.asarray(p, dtype=float)
        if tab.shape != c.scenario.table_shape:
            raise ScenarioMismatchError("probability table has the wrong shape")
    return float(np.sum(c.coefficients * tab) + c.offset)


def algebraic_max(c: Correlation) -> float:
    n = c.scenario.parties
    best = c.coefficients.reshape(-1, *c.scenario.settings).max(axis=0) if n else c.coefficients
    return float(best.sum() + c.offset)


def causal_bound_bipartite(c: Correlation) -> float:
    """Exact causal bound for two parties.

    With A first, a deterministic strategy is ``a1 = f(x1)``, ``a2 = g(x1, x2)``.
    For fixed f the best g picks ``max_{a2}`` cell by cell, and the choice of
    ``f(x1)`` only touches the terms with that ``x1``, so the maximum over f
    also splits per ``x1``.  Mixtures of the two orders cannot do better.
    """
    if c.scenario.parties != 2:
        raise ValueError("causal_bound_bipartite handles two parties only")
    alpha = c.coefficients  # [a1, a2, x1, x2]
    a_first = alpha.max(axis=1).sum(axis=2).max(axis=0).sum()
    b_first = alpha.max(axis=0).sum(axis=1).max(axis=0).sum()
    return float(max(a_first, b_first) + c.offset)


def causal_bound_bruteforce(c: Correlation) -> float:
    """Same quantity by enumerating every deterministic function table."""
    if c.scenario.parties != 2:
        raise ValueError("two parties only")
    (m1, m2), (n1, n2) = c.scenario.outcomes, c.scenario.settings
    alpha = c.coefficients
    best = -math.inf
    for f in itertools.product(range(m1), repeat=n1):
        for g in itertools.product(range(m2), repeat=n1 * n2):
            val = sum(alpha[f[x1], g[x1 * n2 + x2], x1, x2] for x1 in range(n1) for x2 in range(n2))
            best = max(best, val)
    for g in itertools.product(range(m2), repeat=n2):
        for f in itertools.product(range(m1), repeat=n1 * n2):
            val = sum(alpha[f[x2 * n1 + x1], g[x2], x1, x2] for x1 in range(n1) for x2 in range(n2))
            best = max(best, val)
    return float(best + c.offset)


def project_trigger(p: ConditionalDistribution, xi: Sequence[int]) -> ConditionalDistribution:
    """Replace the outcome of every party off its trigger by a uniform one."""
    sc = p.scenario
    xi = check_trigger(sc, xi)
    tab = np.array(p.table)
    n = sc.parties
    for i in range(n):
        marg = tab.sum(axis=i, keepdims=True) / sc.outcomes[i]
        shape = [1] * (2 * n)
        shape[n + i] = sc.settings[i]
        off = (np.arange(sc.settings[i]) != xi[i]).reshape(shape)
        tab = np.where(off, np.broadcast_to(marg, tab.shape), tab)
    return ConditionalDistribution(sc, tab)


# ---------------------------------------------------------------------------
# distribution helpers


def uniform_distribution(scenario: Scenario) -> ConditionalDistribution:
    return ConditionalDistribution(scenario, np.full(scenario.table_shape, 1.0 / math.prod(scenario.outcomes)))


def deterministic_distribution(scenario: Scenario, rule: Callable[[tuple[int, ...]], Sequence[int]]) -> ConditionalDistribution:
    """``p(a|x) = 1`` for ``a = rule(x)``."""
    tab = np.zeros(scenario.table_shape)
    for x in scenario.setting_tuples():
        a = tuple(int(v) for v in rule(x))
        tab[a + x] = 1.0
    return ConditionalDistribution(scenario, tab)


def perfect_gyni_distribution() -> ConditionalDistribution:
    return deterministic_distribution(_BIT2, lambda x: (x[1], x[0]))
