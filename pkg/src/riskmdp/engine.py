"""Policy types, evaluators, the belief-graph solver, and brute-force search.

Three evaluators compute a policy's value at a history:

* eval_policy_recursive folds the criterion's one-step maps backward over
  continuation histories. This is the functional the solver optimizes.
* eval_policy_paths enumerates continuation paths and applies the criterion's
  closed static form (expected cost sum, or log-expected-exponential). It is
  the independent oracle. For the expectation criterion it always equals the
  recursive value; for the entropic criterion the two coincide only when
  stage costs do not depend on the unknown parameter (or the parameter set
  is a singleton). That asymmetry is intrinsic to the two definitions, not a
  numerical artifact; see the tests for a pinned counterexample.
* eval_policy_decomposed aggregates parameter-conditional cost-to-go values
  once at the root. It equals eval_policy_paths for both built-ins.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .belief import BeliefGraph, BeliefNode, posterior_from_history, predictive_next_state
from .criterion import CriterionSpec
from .errors import CapExceeded, DomainError, SchemaError
from .model import Belief, ModelSpec

DEFAULT_PATH_CAP = 10_000_000
DEFAULT_POLICY_CAP = 1_000_000


@dataclass(frozen=True)
class HistoryPolicy:
    """Deterministic history-dependent policy: one action per state history."""

    decisions: dict[tuple[str, ...], str]

    def action(self, history: Sequence[str]) -> str:
        key = tuple(history)
        try:
            return self.decisions[key]
        except KeyError:
            raise DomainError(f"policy has no decision for history {key}") from None


@dataclass(frozen=True)
class QuasiMarkovPolicy:
    """Policy that depends on the history only through (time, state, belief)."""

    table: dict[str, str]  # belief node id -> action label
    graph: BeliefGraph


@dataclass(frozen=True)
class ValueTable:
    values: dict[str, float]  # belief node id -> value
    criterion: CriterionSpec
    root_value: float


def solve_dp(m: ModelSpec, crit: CriterionSpec, graph: BeliefGraph) -> tuple[ValueTable, QuasiMarkovPolicy]:
    """Backward induction over the reachable belief graph.

    At each node the candidate actions are scored by aggregating, per
    parameter, the stage cost plus the transition risk map applied to the
    children's values, then aggregating over the belief with the marginal
    risk map. Ties keep the first action in declared order. The terminal
    continuation value is identically zero, so at t = horizon the transition
    term is skipped outright.
    """
    n_params = len(m.parameters)
    n_states = len(m.states)
    values = np.zeros(len(graph.nodes))
    argmin: dict[str, str] = {}

    levels: dict[int, list[BeliefNode]] = {}
    for node in graph.nodes:
        levels.setdefault(node.t, []).append(node)

    for t in range(m.horizon, 0, -1):
        for node in levels.get(t, []):
            j = m.state_index(node.state)
            w = node.belief.weights
            supp = np.flatnonzero(w > 0.0)
            best_q = None
            best_u = None
            for u in m.admissible_actions(t, node.state):
                k = m.action_index(u)
                cvec = m.cost[t - 1, j, k]
                f = np.zeros(n_params)
                if t == m.horizon:
                    f[supp] = cvec[supp]
                else:
                    v_next = np.zeros(n_states)
                    for l, y in enumerate(m.states):
                        child = graph.child(node, u, y)
                        if child is not None:
                            v_next[l] = values[child.ordinal]
                    for i in supp:
                        f[i] = cvec[i] + crit.sigma.evaluate(v_next, m.kernel[i, j, k])
                q = crit.rho_hat.evaluate(f, w)
                if best_q is None or q < best_q:
                    best_q = q
                    best_u = u
            if best_u is None:
                raise DomainError(f"no admissible action at (t={t}, {node.state})")
            values[node.ordinal] = best_q
            argmin[node.id] = best_u

    table = ValueTable(
        values={n.id: float(values[n.ordinal]) for n in graph.nodes},
        criterion=crit,
        root_value=crit.report(float(values[graph.root.ordinal])),
    )
    return table, QuasiMarkovPolicy(table=argmin, graph=graph)


def to_history_policy(pol: QuasiMarkovPolicy, m: ModelSpec) -> HistoryPolicy:
    """Unfold a belief-graph policy into explicit per-history decisions.

    Beliefs are tracked along the graph's own edges, so they match the
    solver's updates bit for bit. Histories that leave the graph (they have
    zero probability under every parameter in the prior's support) get the
    first admissible action.
    """
    decisions: dict[tuple[str, ...], str] = {}

    def first_admissible(t: int, x: str) -> str:
        acts = m.admissible_actions(t, x)
        if not acts:
            raise DomainError(f"no admissible action at (t={t}, {x})")
        return acts[0]

    def walk(hist: tuple[str, ...], node: BeliefNode | None) -> None:
        t = len(hist)
        x = hist[-1]
        if node is not None:
            u = pol.table[node.id]
        else:
            u = first_admissible(t, x)
        decisions[hist] = u
        if t < m.horizon:
            for y in m.states:
                child = pol.graph.child(node, u, y) if node is not None else None
                walk(hist + (y,), child)

    walk((m.initial_state,), pol.graph.root)
    return HistoryPolicy(decisions=decisions)


def _prefix_actions(pol: HistoryPolicy, hist: tuple[str, ...]) -> tuple[str, ...]:
    return tuple(pol.action(hist[:s]) for s in range(1, len(hist)))


def _coerce_history(m: ModelSpec, history: Sequence[str] | None) -> tuple[str, ...]:
    if history is None:
        return (m.initial_state,)
    hist = tuple(history)
    if not hist:
        raise DomainError("history must contain at least the current state")
    return hist


def eval_policy_recursive(
    m: ModelSpec, crit: CriterionSpec, pol: HistoryPolicy, history: Sequence[str] | None = None
) -> float:
    """Value of a policy at a history under the criterion's one-step recursion.

    Posteriors are recomputed from scratch at every history, which keeps this
    evaluator numerically independent of the belief graph's incremental
    updates. The report transform is applied once at the query root.
    """
    hist = _coerce_history(m, history)
    return crit.report(_recursive_value(m, crit, pol, hist, _prefix_actions(pol, hist)))


def _recursive_value(
    m: ModelSpec, crit: CriterionSpec, pol: HistoryPolicy,
    hist: tuple[str, ...], acts: tuple[str, ...],
) -> float:
    t = len(hist)
    x = hist[-1]
    if t > m.horizon:
        raise DomainError(f"history of length {t} exceeds horizon {m.horizon}")
    u = pol.action(hist)
    if not m.is_admissible(t, x, u):
        raise DomainError(f"policy action {u!r} not admissible at (t={t}, {x})")
    xi = posterior_from_history(m, hist, acts)
    j = m.state_index(x)
    k = m.action_index(u)
    cvec = m.cost[t - 1, j, k]
    supp = np.flatnonzero(xi.weights > 0.0)
    f = np.zeros(len(m.parameters))
    if t == m.horizon:
        f[supp] = cvec[supp]
        return crit.rho_hat.evaluate(f, xi.weights)
    pred = predictive_next_state(m, xi, x, u)
    w = np.zeros(len(m.states))
    for l, y in enumerate(m.states):
        if pred[l] > 0.0:
            w[l] = _recursive_value(m, crit, pol, hist + (y,), acts + (u,))
    for i in supp:
        f[i] = cvec[i] + crit.sigma.evaluate(w, m.kernel[i, j, k])
    return crit.rho_hat.evaluate(f, xi.weights)


def eval_policy_paths(
    m: ModelSpec, crit: CriterionSpec, pol: HistoryPolicy,
    history: Sequence[str] | None = None, path_cap: int = DEFAULT_PATH_CAP,
) -> float:
    """Closed-form policy value by continuation-path enumeration.

    expectation: sum over parameters and paths of the path probability times
    the cost sum. entropic: log of the analogous exponential average, divided
    by kappa. Built-in criteria only. Raises CapExceeded when the number of
    continuation paths would pass path_cap.
    """
    if crit.kind not in ("expectation", "entropic"):
        raise DomainError("path oracle supports only the built-in criteria")
    hist = _coerce_history(m, history)
    t0 = len(hist)
    if t0 > m.horizon:
        raise DomainError(f"history of length {t0} exceeds horizon {m.horizon}")
    acts = _prefix_actions(pol, hist)
    xi = posterior_from_history(m, hist, acts)

    n_cont = len(m.states) ** (m.horizon - t0)
    if n_cont > path_cap:
        raise CapExceeded(f"{n_cont} continuation paths exceed cap {path_cap}")

    n_params = len(m.parameters)
    acc = np.zeros(n_params)
    for cont in itertools.product(m.states, repeat=m.horizon - t0):
        full = hist + cont
        prob = np.ones(n_params)
        csum = np.zeros(n_params)
        for s in range(t0, m.horizon + 1):
            x_s = full[s - 1]
            u_s = pol.action(full[:s])
            if not m.is_admissible(s, x_s, u_s):
                raise DomainError(f"policy action {u_s!r} not admissible at (t={s}, {x_s})")
            j = m.state_index(x_s)
            k = m.action_index(u_s)
            csum += m.cost[s - 1, j, k]
            if s < m.horizon:
                prob *= m.kernel[:, j, k, m.state_index(full[s])]
        if crit.kind == "expectation":
            acc += prob * csum
        else:
            acc += prob * np.exp(crit.kappa * csum)

    mask = xi.weights > 0.0
    if crit.kind == "expectation":
        val = float(np.dot(xi.weights[mask], acc[mask]))
    else:
        val = float(np.log(np.dot(xi.weights[mask], acc[mask]))) / crit.kappa
    return crit.report(val)


def eval_policy_decomposed(
    m: ModelSpec, crit: CriterionSpec, pol: HistoryPolicy, history: Sequence[str] | None = None
) -> float:
    """Policy value via the parameter-conditional decomposition.

    Each parameter in the posterior's support gets its own cost-to-go,
    composed through the transition risk map alone; the marginal risk map
    aggregates them once at the query root. For both built-in criteria this
    equals eval_policy_paths.
    """
    hist = _coerce_history(m, history)
    t0 = len(hist)
    if t0 > m.horizon:
        raise DomainError(f"history of length {t0} exceeds horizon {m.horizon}")
    acts = _prefix_actions(pol, hist)
    xi = posterior_from_history(m, hist, acts)

    def cost_to_go(i: int, h: tuple[str, ...]) -> float:
        t = len(h)
        x = h[-1]
        u = pol.action(h)
        if not m.is_admissible(t, x, u):
            raise DomainError(f"policy action {u!r} not admissible at (t={t}, {x})")
        j = m.state_index(x)
        k = m.action_index(u)
        c = float(m.cost[t - 1, j, k, i])
        if t == m.horizon:
            return c
        row = m.kernel[i, j, k]
        w = np.zeros(len(m.states))
        for l, y in enumerate(m.states):
            if row[l] > 0.0:
                w[l] = cost_to_go(i, h + (y,))
        return c + crit.sigma.evaluate(w, row)

    f = np.zeros(len(m.parameters))
    for i in np.flatnonzero(xi.weights > 0.0):
        f[i] = cost_to_go(int(i), hist)
    return crit.report(crit.rho_hat.evaluate(f, xi.weights))


def enumerate_policies(m: ModelSpec, policy_cap: int = DEFAULT_POLICY_CAP) -> Iterator[HistoryPolicy]:
    """Yield every deterministic history policy exactly once.

    Decision points are ordered by time, then lexicographically by the state
    history; actions run in declared order, so the enumeration order is
    deterministic. Raises CapExceeded before yielding when the policy count
    would pass policy_cap.
    """
    points: list[tuple[str, ...]] = []
    choices: list[tuple[str, ...]] = []
    for t in range(1, m.horizon + 1):
        for cont in itertools.product(m.states, repeat=t - 1):
            hist = (m.initial_state,) + cont
            acts = m.admissible_actions(t, hist[-1])
            if not acts:
                raise DomainError(f"no admissible action at (t={t}, {hist[-1]})")
            points.append(hist)
            choices.append(acts)

    count = 1
    for c in choices:
        count *= len(c)
        if count > policy_cap:
            raise CapExceeded(f"policy space of size {count}+ exceeds cap {policy_cap}")

    for combo in itertools.product(*choices):
        yield HistoryPolicy(decisions=dict(zip(points, combo)))


def brute_force_optimum(
    m: ModelSpec, crit: CriterionSpec, policy_cap: int = DEFAULT_POLICY_CAP
) -> tuple[float, HistoryPolicy]:
    """Exhaustive minimization over all history policies.

    Expectation policies are scored with the path oracle. Entropic policies
    are scored with the one-step recursion, because that is the functional
    the solver optimizes and the static path form provably differs from it
    when costs depend on the unknown parameter. The first minimizer in
    enumeration order wins ties.
    """
    if crit.kind not in ("expectation", "entropic"):
        raise DomainError("brute force supports only the built-in criteria")
    best_v: float | None = None
    best_p: HistoryPolicy | None = None
    for pol in enumerate_policies(m, policy_cap=policy_cap):
        if crit.kind == "expectation":
            v = eval_policy_paths(m, crit, pol)
        else:
            v = eval_policy_recursive(m, crit, pol)
        if best_v is None or v < best_v:
            best_v = v
            best_p = pol
    assert best_v is not None and best_p is not None
    return best_v, best_p


# JSON interchange


def value_table_to_json(table: ValueTable, pol: QuasiMarkovPolicy) -> dict:
    graph = pol.graph
    return {
        "root_value": table.root_value,
        "criterion": table.criterion.describe(),
        "nodes": [
            {
                "id": n.id,
                "t": n.t,
                "state": n.state,
                "belief": n.belief.as_dict(),
                "value": table.values[n.id],
                "argmin_action": pol.table[n.id],
            }
            for n in graph.nodes
        ],
    }


def policy_to_json(pol: HistoryPolicy | QuasiMarkovPolicy) -> dict:
    if isinstance(pol, QuasiMarkovPolicy):
        return {"type": "quasi_markov", "table": dict(sorted(pol.table.items()))}
    decisions = [
        {"t": len(h), "history": list(h), "action": u}
        for h, u in sorted(pol.decisions.items(), key=lambda kv: (len(kv[0]), kv[0]))
    ]
    return {"type": "history", "decisions": decisions}


def parse_policy(source: str | dict, m: ModelSpec, graph: BeliefGraph | None = None):
    """Read a policy JSON document into a HistoryPolicy or QuasiMarkovPolicy."""
    if isinstance(source, str):
        try:
            doc = json.loads(source)
        except json.JSONDecodeError as e:
            raise SchemaError(f"policy is not valid JSON: {e}") from None
    else:
        doc = source
    if not isinstance(doc, dict) or "type" not in doc:
        raise SchemaError("policy must be an object with a 'type' field")
    kind = doc["type"]
    if kind == "history":
        if "decisions" not in doc or not isinstance(doc["decisions"], list):
            raise SchemaError("history policy requires a 'decisions' list")
        decisions: dict[tuple[str, ...], str] = {}
        for row in doc["decisions"]:
            if not isinstance(row, dict) or not {"t", "history", "action"} <= set(row):
                raise SchemaError("each decision needs 't', 'history', and 'action'")
            hist = tuple(row["history"])
            if len(hist) != row["t"]:
                raise SchemaError(f"decision at t={row['t']} has a history of length {len(hist)}")
            for x in hist:
                m.state_index(x)
            m.action_index(row["action"])
            decisions[hist] = row["action"]
        return HistoryPolicy(decisions=decisions)
    if kind == "quasi_markov":
        if graph is None:
            raise DomainError("resolving a quasi_markov policy requires the belief graph")
        if "table" not in doc or not isinstance(doc["table"], dict):
            raise SchemaError("quasi_markov policy requires a 'table' object")
        for node_id, u in doc["table"].items():
            if node_id not in graph.by_id:
                raise DomainError(f"policy names unknown belief node {node_id!r}")
            m.action_index(u)
        return QuasiMarkovPolicy(table=dict(doc["table"]), graph=graph)
    raise SchemaError(f"unknown policy type {kind!r}")
