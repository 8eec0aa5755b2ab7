"""Model specification: parsing, validation, serialization, and a dose-finding generator.

A model describes a finite-horizon controlled Markov chain whose transition
kernel and stage costs depend on an unknown parameter theta drawn from a
finite set, together with a prior belief over that set. Times are 1-based:
decisions happen at t = 1..horizon.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import DomainError, SchemaError, ValidationError

STOCHASTIC_TOL = 1e-12

_MODEL_FIELDS = {
    "horizon", "states", "actions", "parameters", "prior",
    "kernel", "cost", "initial_state", "admissible",
}
_REQUIRED_FIELDS = _MODEL_FIELDS - {"admissible"}


def _normalize_exact(vec: np.ndarray) -> np.ndarray:
    """Scale a nonnegative vector to sum to exactly 1.0.

    After the division the float sum can still be a few ulp off. The residual
    is first folded into the largest coordinate in one stride, then that
    coordinate is walked single ulp at a time. The computed sum is monotone in
    the coordinate and moves in steps smaller than the rounding window around
    1.0, so the walk cannot jump over an exact 1.0. Zero coordinates are never
    touched, which keeps supports intact.
    """
    out = np.asarray(vec, dtype=float).copy()
    s = float(out.sum())
    if s <= 0.0 or not math.isfinite(s):
        raise DomainError("cannot normalize a vector with nonpositive sum")
    if s != 1.0:
        out = out / s
    j = int(np.argmax(out))
    for _ in range(4):
        d = 1.0 - float(out.sum())
        if d == 0.0:
            return out
        out[j] += d
    # The residual is now within a few ulp, but a single coordinate's ulp
    # lattice can straddle 1.0 without touching it. Walk each nonzero
    # coordinate in turn; their lattices have different granularities, so
    # one of them lands exactly.
    for c in np.argsort(-out, kind="stable"):
        if out[c] <= 0.0:
            continue
        saved = float(out[c])
        for _ in range(64):
            d = 1.0 - float(out.sum())
            if d == 0.0:
                return out
            out[c] = np.nextafter(out[c], math.inf if d > 0.0 else -math.inf)
        if 1.0 - float(out.sum()) == 0.0:
            return out
        out[c] = saved
    raise DomainError("normalization did not converge")


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Issue:
    """One validation finding. severity is 'error' or 'warning'."""
    severity: str
    code: str
    message: str


@dataclass(frozen=True, eq=False)
class Belief:
    """Probability weights over the model's parameter labels, in declared order."""

    params: tuple[str, ...]
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (len(self.params),):
            raise DomainError("belief weight vector does not match parameter labels")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise DomainError("belief weights must be finite and nonnegative")
        object.__setattr__(self, "weights", _readonly(_normalize_exact(w)))

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, float], params: Sequence[str] | None = None) -> "Belief":
        if params is None:
            params = tuple(mapping.keys())
        missing = set(mapping) - set(params)
        if missing:
            raise DomainError(f"belief names unknown parameters: {sorted(missing)}")
        w = np.array([float(mapping.get(p, 0.0)) for p in params])
        return cls(tuple(params), w)

    @classmethod
    def uniform(cls, params: Sequence[str]) -> "Belief":
        n = len(params)
        return cls(tuple(params), np.full(n, 1.0 / n))

    @classmethod
    def point_mass(cls, params: Sequence[str], theta: str) -> "Belief":
        if theta not in params:
            raise DomainError(f"unknown parameter label {theta!r}")
        w = np.array([1.0 if p == theta else 0.0 for p in params])
        return cls(tuple(params), w)

    def mass(self, theta: str) -> float:
        try:
            return float(self.weights[self.params.index(theta)])
        except ValueError:
            raise DomainError(f"unknown parameter label {theta!r}") from None

    @property
    def support(self) -> tuple[str, ...]:
        return tuple(p for p, w in zip(self.params, self.weights) if w > 0.0)

    def as_dict(self) -> dict[str, float]:
        return {p: float(w) for p, w in zip(self.params, self.weights)}

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Belief)
            and self.params == other.params
            and np.array_equal(self.weights, other.weights)
        )

    def __repr__(self) -> str:
        inner = ", ".join(f"{p}={w:.6g}" for p, w in zip(self.params, self.weights))
        return f"Belief({inner})"


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """Immutable model description.

    kernel has shape (n_params, n_states, n_actions, n_states) and
    kernel[i, x, u, y] = P_theta_i(next=y | state=x, action=u).
    cost has shape (horizon, n_states, n_actions, n_params), time index 0-based
    internally for t = 1..horizon. admissible is a boolean array of shape
    (horizon, n_states, n_actions); every (t, state) row must be nonempty for
    the model to validate.
    """

    horizon: int
    states: tuple[str, ...]
    actions: tuple[str, ...]
    parameters: tuple[str, ...]
    prior: Belief
    kernel: np.ndarray
    cost: np.ndarray
    initial_state: str
    admissible: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.admissible is None:
            adm = np.ones((self.horizon, len(self.states), len(self.actions)), dtype=bool)
            object.__setattr__(self, "admissible", adm)
        object.__setattr__(self, "kernel", _readonly(self.kernel))
        object.__setattr__(self, "cost", _readonly(self.cost))
        adm = np.asarray(self.admissible, dtype=bool)
        adm.setflags(write=False)
        object.__setattr__(self, "admissible", adm)

    # label/index helpers
    def state_index(self, x: str) -> int:
        try:
            return self.states.index(x)
        except ValueError:
            raise DomainError(f"unknown state label {x!r}") from None

    def action_index(self, u: str) -> int:
        try:
            return self.actions.index(u)
        except ValueError:
            raise DomainError(f"unknown action label {u!r}") from None

    def param_index(self, theta: str) -> int:
        try:
            return self.parameters.index(theta)
        except ValueError:
            raise DomainError(f"unknown parameter label {theta!r}") from None

    def is_admissible(self, t: int, x: str, u: str) -> bool:
        self._check_time(t)
        return bool(self.admissible[t - 1, self.state_index(x), self.action_index(u)])

    def admissible_actions(self, t: int, x: str) -> tuple[str, ...]:
        """Admissible actions at (t, x), in declared action order."""
        self._check_time(t)
        row = self.admissible[t - 1, self.state_index(x)]
        return tuple(u for u, ok in zip(self.actions, row) if ok)

    def kernel_row(self, theta: str, x: str, u: str) -> np.ndarray:
        return self.kernel[self.param_index(theta), self.state_index(x), self.action_index(u)]

    def cost_vector(self, t: int, x: str, u: str) -> np.ndarray:
        """Stage cost at (t, x, u) as a vector over parameters in declared order."""
        self._check_time(t)
        return self.cost[t - 1, self.state_index(x), self.action_index(u)]

    def _check_time(self, t: int) -> None:
        if not 1 <= t <= self.horizon:
            raise DomainError(f"time {t} outside 1..{self.horizon}")

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, ModelSpec)
            and self.horizon == other.horizon
            and self.states == other.states
            and self.actions == other.actions
            and self.parameters == other.parameters
            and self.prior == other.prior
            and np.array_equal(self.kernel, other.kernel)
            and np.array_equal(self.cost, other.cost)
            and self.initial_state == other.initial_state
            and np.array_equal(self.admissible, other.admissible)
        )


def _expect(cond: bool, msg: str) -> None:
    if not cond:
        raise SchemaError(msg)


def _label_list(raw, name: str) -> tuple[str, ...]:
    _expect(isinstance(raw, list) and raw, f"{name} must be a nonempty list")
    _expect(all(isinstance(s, str) and s for s in raw), f"{name} entries must be nonempty strings")
    _expect(len(set(raw)) == len(raw), f"{name} entries must be unique")
    return tuple(raw)


def parse_model(text: str) -> ModelSpec:
    """Parse a model JSON document.

    Raises SchemaError for shape problems and ValidationError when the
    document is well-formed but semantically invalid. Kernel rows and the
    prior are renormalized exactly once here, after the tolerance check.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError(f"not valid JSON: {e}") from None
    _expect(isinstance(doc, dict), "top level must be a JSON object")
    extra = set(doc) - _MODEL_FIELDS
    _expect(not extra, f"unknown fields: {sorted(extra)}")
    missing = _REQUIRED_FIELDS - set(doc)
    _expect(not missing, f"missing fields: {sorted(missing)}")

    _expect(isinstance(doc["horizon"], int) and not isinstance(doc["horizon"], bool),
            "horizon must be an integer")
    horizon = doc["horizon"]
    states = _label_list(doc["states"], "states")
    actions = _label_list(doc["actions"], "actions")
    params = _label_list(doc["parameters"], "parameters")

    prior_raw = doc["prior"]
    _expect(isinstance(prior_raw, dict), "prior must be an object")
    for k, v in prior_raw.items():
        _expect(isinstance(k, str), "prior keys must be strings")
        _expect(isinstance(v, (int, float)) and not isinstance(v, bool), "prior values must be numbers")
    unknown = set(prior_raw) - set(params)
    _expect(not unknown, f"prior names unknown parameters: {sorted(unknown)}")
    prior_vec = np.array([float(prior_raw.get(p, 0.0)) for p in params])

    kernel_raw = doc["kernel"]
    _expect(isinstance(kernel_raw, dict), "kernel must be an object keyed by parameter")
    kernel = np.zeros((len(params), len(states), len(actions), len(states)))
    for i, th in enumerate(params):
        _expect(th in kernel_raw, f"kernel missing parameter {th!r}")
        per_state = kernel_raw[th]
        _expect(isinstance(per_state, dict), f"kernel[{th!r}] must be an object keyed by state")
        for j, x in enumerate(states):
            _expect(x in per_state, f"kernel[{th!r}] missing state {x!r}")
            per_action = per_state[x]
            _expect(isinstance(per_action, dict), f"kernel[{th!r}][{x!r}] must be an object keyed by action")
            for k, u in enumerate(actions):
                _expect(u in per_action, f"kernel[{th!r}][{x!r}] missing action {u!r}")
                row = per_action[u]
                _expect(isinstance(row, dict), f"kernel[{th!r}][{x!r}][{u!r}] must be an object keyed by next state")
                bad = set(row) - set(states)
                _expect(not bad, f"kernel[{th!r}][{x!r}][{u!r}] names unknown states: {sorted(bad)}")
                for y, p in row.items():
                    _expect(isinstance(p, (int, float)) and not isinstance(p, bool),
                            f"kernel[{th!r}][{x!r}][{u!r}][{y!r}] must be a number")
                kernel[i, j, k] = [float(row.get(y, 0.0)) for y in states]

    cost_raw = doc["cost"]
    _expect(isinstance(cost_raw, dict), "cost must be an object keyed by time")
    cost = np.zeros((max(horizon, 1), len(states), len(actions), len(params)))
    if horizon >= 1:
        for t in range(1, horizon + 1):
            key = str(t)
            _expect(key in cost_raw, f"cost missing time {key!r}")
            per_state = cost_raw[key]
            _expect(isinstance(per_state, dict), f"cost[{key!r}] must be an object keyed by state")
            for j, x in enumerate(states):
                _expect(x in per_state, f"cost[{key!r}] missing state {x!r}")
                per_action = per_state[x]
                _expect(isinstance(per_action, dict), f"cost[{key!r}][{x!r}] must be an object keyed by action")
                for k, u in enumerate(actions):
                    _expect(u in per_action, f"cost[{key!r}][{x!r}] missing action {u!r}")
                    per_theta = per_action[u]
                    _expect(isinstance(per_theta, dict), f"cost[{key!r}][{x!r}][{u!r}] must be an object keyed by parameter")
                    bad = set(per_theta) - set(params)
                    _expect(not bad, f"cost[{key!r}][{x!r}][{u!r}] names unknown parameters: {sorted(bad)}")
                    for i, th in enumerate(params):
                        _expect(th in per_theta, f"cost[{key!r}][{x!r}][{u!r}] missing parameter {th!r}")
                        v = per_theta[th]
                        _expect(isinstance(v, (int, float)) and not isinstance(v, bool),
                                f"cost[{key!r}][{x!r}][{u!r}][{th!r}] must be a number")
                        cost[t - 1, j, k, i] = float(v)
        extra_t = set(cost_raw) - {str(t) for t in range(1, horizon + 1)}
        _expect(not extra_t, f"cost names times outside 1..{horizon}: {sorted(extra_t)}")

    admissible = np.ones((max(horizon, 1), len(states), len(actions)), dtype=bool)
    if "admissible" in doc:
        adm_raw = doc["admissible"]
        _expect(isinstance(adm_raw, dict), "admissible must be an object keyed by time")
        for key, per_state in adm_raw.items():
            _expect(key.isdigit() and 1 <= int(key) <= horizon,
                    f"admissible names a time outside 1..{horizon}: {key!r}")
            t = int(key)
            _expect(isinstance(per_state, dict), f"admissible[{key!r}] must be an object keyed by state")
            bad = set(per_state) - set(states)
            _expect(not bad, f"admissible[{key!r}] names unknown states: {sorted(bad)}")
            for x, acts in per_state.items():
                _expect(isinstance(acts, list), f"admissible[{key!r}][{x!r}] must be a list of actions")
                bad_u = set(acts) - set(actions)
                _expect(not bad_u, f"admissible[{key!r}][{x!r}] names unknown actions: {sorted(bad_u)}")
                j = states.index(x)
                admissible[t - 1, j] = [u in acts for u in actions]

    _expect(isinstance(doc["initial_state"], str), "initial_state must be a string")

    raw = ModelSpec(
        horizon=horizon,
        states=states,
        actions=actions,
        parameters=params,
        prior=Belief(params, np.ones(len(params)) / len(params)),  # placeholder until validated
        kernel=kernel,
        cost=cost,
        initial_state=doc["initial_state"],
        admissible=admissible,
    )
    issues = _validate_raw(raw, prior_vec)
    errors = [i for i in issues if i.severity == "error"]
    if errors:
        raise ValidationError(errors)

    # Renormalize exactly once, after the tolerance check passed.
    kernel_n = kernel.copy()
    for i in range(len(params)):
        for j in range(len(states)):
            for k in range(len(actions)):
                kernel_n[i, j, k] = _normalize_exact(kernel[i, j, k])
    return ModelSpec(
        horizon=horizon,
        states=states,
        actions=actions,
        parameters=params,
        prior=Belief(params, prior_vec),
        kernel=kernel_n,
        cost=cost,
        initial_state=doc["initial_state"],
        admissible=admissible,
    )


def serialize_model(m: ModelSpec) -> str:
    """Serialize to the same JSON layout parse_model accepts. Round-trips exactly."""
    doc = {
        "horizon": m.horizon,
        "states": list(m.states),
        "actions": list(m.actions),
        "parameters": list(m.parameters),
        "prior": m.prior.as_dict(),
        "kernel": {
            th: {
                x: {
                    u: {y: float(m.kernel[i, j, k, l]) for l, y in enumerate(m.states)}
                    for k, u in enumerate(m.actions)
                }
                for j, x in enumerate(m.states)
            }
            for i, th in enumerate(m.parameters)
        },
        "cost": {
            str(t): {
                x: {
                    u: {th: float(m.cost[t - 1, j, k, i]) for i, th in enumerate(m.parameters)}
                    for k, u in enumerate(m.actions)
                }
                for j, x in enumerate(m.states)
            }
            for t in range(1, m.horizon + 1)
        },
        "admissible": {
            str(t): {
                x: [u for k, u in enumerate(m.actions) if m.admissible[t - 1, j, k]]
                for j, x in enumerate(m.states)
            }
            for t in range(1, m.horizon + 1)
        },
        "initial_state": m.initial_state,
    }
    return json.dumps(doc, indent=2)


def _validate_raw(m: ModelSpec, prior_vec: np.ndarray) -> list[Issue]:
    issues: list[Issue] = []

    def err(code, msg):
        issues.append(Issue("error", code, msg))

    def warn(code, msg):
        issues.append(Issue("warning", code, msg))

    if m.horizon < 1:
        err("horizon", f"horizon must be >= 1, got {m.horizon}")
    if m.initial_state not in m.states:
        err("initial_state", f"initial_state {m.initial_state!r} not in states")

    if np.any(prior_vec < 0) or not np.all(np.isfinite(prior_vec)):
        err("prior", "prior weights must be finite and nonnegative")
    else:
        s = float(prior_vec.sum())
        if abs(s - 1.0) > STOCHASTIC_TOL:
            err("prior", f"prior not a distribution: sums to {s!r}")
        elif not np.any(prior_vec > 0):
            err("prior", "prior has empty support")

    for i, th in enumerate(m.parameters):
        for j, x in enumerate(m.states):
            for k, u in enumerate(m.actions):
                row = m.kernel[i, j, k]
                if np.any(row < 0) or not np.all(np.isfinite(row)):
                    err("kernel", f"kernel row not stochastic: negative or non-finite entry at ({th}, {x}, {u})")
                    continue
                s = float(row.sum())
                if abs(s - 1.0) > STOCHASTIC_TOL:
                    err("kernel", f"kernel row not stochastic: ({th}, {x}, {u}) sums to {s!r}")

    if m.horizon >= 1:
        if np.any(m.cost < 0) or not np.all(np.isfinite(m.cost)):
            bad = np.argwhere((m.cost < 0) | ~np.isfinite(m.cost))
            t, j, k, i = bad[0]
            err("cost", f"costs must be finite and nonnegative; first violation at "
                        f"(t={t + 1}, {m.states[j]}, {m.actions[k]}, {m.parameters[i]})")
        for t in range(1, m.horizon + 1):
            for j, x in enumerate(m.states):
                if not m.admissible[t - 1, j].any():
                    err("admissible", f"empty admissible action set at (t={t}, {x})")

    # Transitions unreachable under the prior-weighted predictive kernel get a warning.
    if not any(i.severity == "error" for i in issues):
        prior_n = prior_vec / prior_vec.sum()
        ever_admissible = m.admissible.any(axis=0)
        for j, x in enumerate(m.states):
            for k, u in enumerate(m.actions):
                if not ever_admissible[j, k]:
                    continue
                pred = prior_n @ m.kernel[:, j, k, :]
                for l, y in enumerate(m.states):
                    if pred[l] == 0.0:
                        warn("unreachable", f"transition ({x}, {u}, {y}) has zero prior-predictive probability")
    return issues


def validate_model(m: ModelSpec) -> list[Issue]:
    """Check every model invariant, returning all findings rather than stopping at the first."""
    return _validate_raw(m, np.asarray(m.prior.weights, dtype=float))


def logistic_response(theta: float, dose: float) -> float:
    """Probability of a toxic response at a dose, for a subject with sensitivity theta."""
    return 1.0 / (1.0 + math.exp(-(dose - theta)))


def _num_label(v: float) -> str:
    return f"{v:g}"


def gen_clinical_trials_model(
    doses: Sequence[float],
    theta_grid: Sequence[float],
    horizon: int,
    prior: Belief | Mapping[str, float] | Mapping[float, float] | None = None,
    response: Callable[[float, float], float] | Mapping[tuple[float, float], float] | None = None,
) -> ModelSpec:
    """Build a dose-finding model: states {0,1} record the last response.

    The transition to state "1" (toxic) has probability response(theta, dose),
    independent of the current state, and the stage cost is |dose - theta|.
    response defaults to the logistic curve; a mapping keyed by
    (theta, dose) may be supplied instead.
    """
    if horizon < 1:
        raise DomainError(f"horizon must be >= 1, got {horizon}")
    if not doses:
        raise DomainError("doses must be nonempty")
    if not theta_grid:
        raise DomainError("theta_grid must be nonempty")
    if len(set(doses)) != len(tuple(doses)):
        raise DomainError("doses must be distinct")
    if len(set(theta_grid)) != len(tuple(theta_grid)):
        raise DomainError("theta_grid values must be distinct")

    if response is None:
        psi = logistic_response
    elif callable(response):
        psi = response
    else:
        table = dict(response)

        def psi(theta: float, dose: float) -> float:
            try:
                return float(table[(theta, dose)])
            except KeyError:
                raise DomainError(f"response table missing entry for (theta={theta}, dose={dose})") from None

    states = ("0", "1")
    action_labels = tuple(_num_label(d) for d in doses)
    param_labels = tuple(_num_label(th) for th in theta_grid)

    if prior is None:
        prior_b = Belief.uniform(param_labels)
    elif isinstance(prior, Belief):
        if set(prior.support) - set(param_labels):
            raise DomainError("prior support must lie inside theta_grid")
        prior_b = Belief.from_mapping({p: prior.as_dict().get(p, 0.0) for p in param_labels}, param_labels)
    else:
        named = {(_num_label(k) if not isinstance(k, str) else k): float(v) for k, v in prior.items()}
        if set(named) - set(param_labels):
            raise DomainError("prior support must lie inside theta_grid")
        prior_b = Belief.from_mapping(named, param_labels)

    kernel = np.zeros((len(param_labels), 2, len(action_labels), 2))
    cost = np.zeros((horizon, 2, len(action_labels), len(param_labels)))
    for i, th in enumerate(theta_grid):
        for k, d in enumerate(doses):
            p = float(psi(th, d))
            if not 0.0 <= p <= 1.0:
                raise DomainError(f"response(theta={th}, dose={d}) = {p} outside [0, 1]")
            row = _normalize_exact(np.array([1.0 - p, p])) if 0.0 < p < 1.0 else np.array([1.0 - p, p])
            kernel[i, 0, k] = row
            kernel[i, 1, k] = row
            cost[:, :, k, i] = abs(d - th)

    return ModelSpec(
        horizon=horizon,
        states=states,
        actions=action_labels,
        parameters=param_labels,
        prior=prior_b,
        kernel=kernel,
        cost=cost,
        initial_state="0",
    )
