"""Shared fixtures, random instance generators, and the acceptance summary hook.

The generators draw kernel rows and priors from small integer grids so every
probability is bounded well away from zero and renormalization is exact.
"""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np
import pytest

from riskmdp import Belief, HistoryPolicy, ModelSpec, parse_model
from riskmdp.model import _normalize_exact

DATA = Path(__file__).parent / "data"


def rel_close(a: float, b: float, tol: float) -> bool:
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


@pytest.fixture(scope="session")
def sample_model() -> ModelSpec:
    return parse_model((DATA / "sample_model.json").read_text())


def random_instance(
    seed: int,
    *,
    n_states: int | None = None,
    n_actions: int | None = None,
    n_params: int | None = None,
    horizon: int | None = None,
    theta_free_costs: bool = False,
    allow_restricted: bool = True,
) -> ModelSpec:
    """Small random model; sizes default to the ranges the exhaustive-search
    comparisons use (up to 2 states, 2 actions, 3 parameters, horizon 3).

    Kernel rows come from integer weights 1..9, so with two states every
    entry is at least 1/18 and no transition is ever pruned.
    """
    rng = np.random.default_rng(seed)
    nx = n_states if n_states is not None else int(rng.integers(1, 3))
    nu = n_actions if n_actions is not None else int(rng.integers(1, 3))
    nth = n_params if n_params is not None else int(rng.integers(1, 4))
    T = horizon if horizon is not None else int(rng.integers(1, 4))
    states = tuple(f"x{i}" for i in range(nx))
    actions = tuple(f"u{i}" for i in range(nu))
    params = tuple(f"th{i}" for i in range(nth))

    kernel = np.zeros((nth, nx, nu, nx))
    for i in range(nth):
        for j in range(nx):
            for k in range(nu):
                a = rng.integers(1, 10, size=nx).astype(float)
                kernel[i, j, k] = _normalize_exact(a)

    cost = rng.integers(0, 9, size=(T, nx, nu, nth)).astype(float) * 0.5
    if theta_free_costs:
        cost = np.repeat(cost[:, :, :, :1], nth, axis=3)

    admissible = np.ones((T, nx, nu), dtype=bool)
    if allow_restricted and nu >= 2:
        for t in range(T):
            for j in range(nx):
                if rng.random() < 0.25:
                    admissible[t, j, int(rng.integers(0, nu))] = False

    prior = Belief(params, rng.integers(1, 10, size=nth).astype(float))
    return ModelSpec(
        horizon=T,
        states=states,
        actions=actions,
        parameters=params,
        prior=prior,
        kernel=kernel,
        cost=cost,
        initial_state=states[int(rng.integers(0, nx))],
        admissible=admissible,
    )


def decision_points(m: ModelSpec) -> list[tuple[str, ...]]:
    """All state histories a policy must cover, in enumeration order."""
    import itertools

    pts = []
    for t in range(1, m.horizon + 1):
        for cont in itertools.product(m.states, repeat=t - 1):
            pts.append((m.initial_state,) + cont)
    return pts


def random_policy(m: ModelSpec, rng: np.random.Generator) -> HistoryPolicy:
    decisions = {}
    for hist in decision_points(m):
        acts = m.admissible_actions(len(hist), hist[-1])
        decisions[hist] = acts[int(rng.integers(0, len(acts)))]
    return HistoryPolicy(decisions=decisions)


def random_history(m: ModelSpec, rng: np.random.Generator) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """A positive-probability (history, actions) pair of random length."""
    from riskmdp import bayes_update, predictive_next_state

    length = int(rng.integers(1, m.horizon + 1))
    hist = (m.initial_state,)
    acts: tuple[str, ...] = ()
    xi = m.prior
    for t in range(1, length):
        options = m.admissible_actions(t, hist[-1])
        u = options[int(rng.integers(0, len(options)))]
        pred = predictive_next_state(m, xi, hist[-1], u)
        support = np.flatnonzero(pred > 0.0)
        y = m.states[int(rng.choice(support))]
        xi = bayes_update(m, xi, hist[-1], u, y)
        hist = hist + (y,)
        acts = acts + (u,)
    return hist, acts


# One PASS/FAIL line per acceptance criterion, printed after the run.

_ACCEPTANCE: dict[int, list[bool]] = {}
_CRITERION_RE = re.compile(r"test_acceptance\.py::test_c(\d+)")


def pytest_runtest_logreport(report):
    m = _CRITERION_RE.search(report.nodeid)
    if not m:
        return
    n = int(m.group(1))
    if report.when == "call":
        _ACCEPTANCE.setdefault(n, []).append(report.passed)
    elif report.failed:  # setup/teardown error counts as a failure
        _ACCEPTANCE.setdefault(n, []).append(False)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        verdict = "PASS" if all(_ACCEPTANCE[n]) else "FAIL"
        terminalreporter.write_line(f"ACCEPTANCE criterion {n}: {verdict}")
