"""Posterior updating and the reachable belief graph.

The belief over the unknown parameter is a sufficient statistic for the
observed state/action history, so planning happens on the graph of
(time, state, belief) triples reachable from the initial condition.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import CapExceeded, DomainError, ZeroProbabilityObservation
from .model import Belief, ModelSpec, _normalize_exact

DEDUP_DECIMALS = 10
DEFAULT_NODE_CAP = 1_000_000


def _check_step(m: ModelSpec, x: str, u: str) -> tuple[int, int]:
    j = m.state_index(x)
    k = m.action_index(u)
    if not m.admissible[:, j, k].any():
        raise DomainError(f"action {u!r} is never admissible at state {x!r}")
    return j, k


def bayes_update(m: ModelSpec, xi: Belief, x: str, u: str, x_next: str) -> Belief:
    """Condition the belief on observing the transition (x, u) -> x_next.

    Raises ZeroProbabilityObservation when the observation has probability
    zero under the predictive distribution. Parameters outside the support
    of xi stay outside the support of the result.
    """
    if xi.params != m.parameters:
        raise DomainError("belief is not over this model's parameters")
    j, k = _check_step(m, x, u)
    l = m.state_index(x_next)
    lik = m.kernel[:, j, k, l]
    un = xi.weights * lik
    denom = float(un.sum())
    if denom <= 0.0:
        raise ZeroProbabilityObservation(
            f"observation ({x}, {u}) -> {x_next} has zero probability under the current belief")
    return Belief(m.parameters, un)


def predictive_next_state(m: ModelSpec, xi: Belief, x: str, u: str) -> np.ndarray:
    """Belief-averaged next-state distribution, over states in declared order."""
    if xi.params != m.parameters:
        raise DomainError("belief is not over this model's parameters")
    j, k = _check_step(m, x, u)
    return xi.weights @ m.kernel[:, j, k, :]


def _check_history(m: ModelSpec, history: Sequence[str], actions: Sequence[str]) -> None:
    if len(history) < 1:
        raise DomainError("history must contain at least the current state")
    if len(actions) != len(history) - 1:
        raise DomainError(
            f"need exactly one action per transition: {len(history)} states, {len(actions)} actions")
    for s, (x, u) in enumerate(zip(history[:-1], actions), start=1):
        j = m.state_index(x)
        k = m.action_index(u)
        if not m.admissible[s - 1, j, k]:
            raise DomainError(f"action {u!r} not admissible at (t={s}, {x})")
    m.state_index(history[-1])


def path_likelihood(m: ModelSpec, theta: str, history: Sequence[str], actions: Sequence[str]) -> float:
    """Probability of the state sequence under parameter theta, given the actions.

    A history of length one has likelihood 1.
    """
    _check_history(m, history, actions)
    i = m.param_index(theta)
    out = 1.0
    for s in range(len(actions)):
        j = m.state_index(history[s])
        k = m.action_index(actions[s])
        l = m.state_index(history[s + 1])
        out *= float(m.kernel[i, j, k, l])
    return out


def posterior_from_history(m: ModelSpec, history: Sequence[str], actions: Sequence[str]) -> Belief:
    """Posterior over parameters after the whole history, computed in one batch.

    Proportional to prior(theta) times the path likelihood. Agrees with
    folding bayes_update over the transitions.
    """
    _check_history(m, history, actions)
    lik = np.array([path_likelihood(m, th, history, actions) for th in m.parameters])
    un = m.prior.weights * lik
    if float(un.sum()) <= 0.0:
        raise ZeroProbabilityObservation("history has zero probability under the prior")
    return Belief(m.parameters, un)


def belief_fingerprint(t: int, state: str, weights: np.ndarray) -> str:
    """Canonical node key: coordinates rounded to 10 decimal digits."""
    coords = ",".join(f"{w:.{DEDUP_DECIMALS}f}" for w in np.asarray(weights) + 0.0)
    return f"t={t}|x={state}|xi={coords}"


@dataclass(frozen=True, eq=False)
class BeliefNode:
    """One reachable (time, state, belief) triple."""

    id: str
    t: int
    state: str
    belief: Belief
    ordinal: int  # insertion order, used for deterministic iteration


@dataclass(frozen=True, eq=False)
class BeliefGraph:
    """Acyclic leveled graph of reachable beliefs.

    edges maps (node ordinal, action label, next state label) to the child
    ordinal. Nodes are stored in insertion (breadth-first) order.
    """

    model: ModelSpec
    nodes: tuple[BeliefNode, ...]
    edges: dict[tuple[int, str, str], int]
    root: BeliefNode
    by_id: dict[str, BeliefNode] = field(default_factory=dict)

    def __post_init__(self):
        if not self.by_id:
            object.__setattr__(self, "by_id", {n.id: n for n in self.nodes})

    def nodes_at(self, t: int) -> list[BeliefNode]:
        return [n for n in self.nodes if n.t == t]

    def child(self, node: BeliefNode, u: str, x_next: str) -> BeliefNode | None:
        idx = self.edges.get((node.ordinal, u, x_next))
        return None if idx is None else self.nodes[idx]


def build_reachable_belief_graph(m: ModelSpec, node_cap: int = DEFAULT_NODE_CAP) -> BeliefGraph:
    """Breadth-first enumeration of reachable (t, state, belief) nodes.

    Beliefs are deduplicated by their rounded fingerprint. Transitions with
    zero predictive probability are pruned, so Bayes updates never divide by
    zero. Raises CapExceeded before the node count would pass node_cap.
    """
    if node_cap < 1:
        raise DomainError(f"node_cap must be >= 1, got {node_cap}")

    nodes: list[BeliefNode] = []
    by_key: dict[str, int] = {}
    edges: dict[tuple[int, str, str], int] = {}

    def intern(t: int, state: str, belief: Belief) -> int:
        key = belief_fingerprint(t, state, belief.weights)
        got = by_key.get(key)
        if got is not None:
            return got
        if len(nodes) + 1 > node_cap:
            raise CapExceeded(f"belief graph would exceed node cap {node_cap}")
        node = BeliefNode(id=key, t=t, state=state, belief=belief, ordinal=len(nodes))
        nodes.append(node)
        by_key[key] = node.ordinal
        return node.ordinal

    root_ord = intern(1, m.initial_state, m.prior)
    frontier = [root_ord]
    for t in range(1, m.horizon):
        nxt: list[int] = []
        seen: set[int] = set()
        for no in frontier:
            node = nodes[no]
            for u in m.admissible_actions(t, node.state):
                pred = predictive_next_state(m, node.belief, node.state, u)
                for l, y in enumerate(m.states):
                    if pred[l] <= 0.0:
                        continue
                    child_belief = bayes_update(m, node.belief, node.state, u, y)
                    co = intern(t + 1, y, child_belief)
                    edges[(no, u, y)] = co
                    if co not in seen:
                        seen.add(co)
                        nxt.append(co)
        frontier = nxt

    graph = BeliefGraph(model=m, nodes=tuple(nodes), edges=edges, root=nodes[root_ord])
    return graph


def graph_to_json(graph: BeliefGraph) -> dict:
    """Serializable view of the graph, nodes in insertion order."""
    return {
        "root": graph.root.id,
        "nodes": [
            {"id": n.id, "t": n.t, "state": n.state, "belief": n.belief.as_dict()}
            for n in graph.nodes
        ],
        "edges": [
            {"from": graph.nodes[src].id, "action": u, "next_state": y, "to": graph.nodes[dst].id}
            for (src, u, y), dst in sorted(graph.edges.items())
        ],
    }
