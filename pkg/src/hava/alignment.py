"""Core of the hybrid value-alignment scheme: permitted-action sets, alignment
scoring, reputation dynamics, reward weighting, safe-action projection, and
the environment wrapper that ties them together.

Two norm sources judge every proposed action: a mandatory rule-based source
(RB) whose permitted set the executed action is always projected into, and a
tentative data-driven source (DD) that may be violated at the price of
reputation.  Reputation multiplicatively gates the task reward, so norm
violations starve the agent of reward until the violation is forgiven.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable

REPUTATION_FLOOR_INCREMENT = 0.001  # constant term of the forgiveness step


@dataclass(frozen=True)
class ActionSet:
    """Permitted actions: either a finite set of action indices or a closed
    real interval in action units (e.g. speed in km/h)."""

    members: frozenset | None = None
    lo: float | None = None
    hi: float | None = None

    @classmethod
    def discrete(cls, ids: Iterable[int]) -> "ActionSet":
        return cls(members=frozenset(int(i) for i in ids))

    @classmethod
    def interval(cls, lo: float, hi: float) -> "ActionSet":
        if lo > hi:
            raise ValueError(f"interval lo {lo} > hi {hi}")
        return cls(lo=float(lo), hi=float(hi))

    @property
    def is_discrete(self) -> bool:
        return self.members is not None

    @property
    def is_empty(self) -> bool:
        return self.members is not None and len(self.members) == 0

    def contains(self, action) -> bool:
        if self.is_discrete:
            return action in self.members
        return self.lo <= action <= self.hi

    def distance(self, action) -> float:
        """Minimal distance from ``action`` to the set.

        Discrete sets carry no metric between labels, so non-membership is
        reported as infinity (an indicator once passed through the alignment
        score).  Intervals measure to the nearest endpoint.
        """
        if self.is_empty:
            raise ValueError("distance from an empty action set is undefined")
        if self.is_discrete:
            return 0.0 if action in self.members else math.inf
        if action < self.lo:
            return self.lo - action
        if action > self.hi:
            return action - self.hi
        return 0.0

    def project(self, action):
        """Closest member of the set; ties break to the lowest action index
        (lowest value for intervals, i.e. the conservative choice)."""
        if self.is_empty:
            raise ValueError("cannot project into an empty action set")
        if self.is_discrete:
            return action if action in self.members else min(self.members)
        return min(max(action, self.lo), self.hi)


def alignment_score(tau: float, d: float) -> float:
    """How aligned an action at distance ``d`` from the norms is:
    max((tau - d) / tau, 0), in [0, 1]."""
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    if d < 0:
        raise ValueError(f"distance must be non-negative, got {d}")
    return max((tau - d) / tau, 0.0)


def min_distance(action, allowed: ActionSet) -> float:
    """Minimal distance of ``action`` to the permitted set (see
    :meth:`ActionSet.distance`)."""
    return allowed.distance(action)


def worst_alignment(al_rb: float, al_dd: float) -> float:
    """The worse of the two alignment scores."""
    return min(al_rb, al_dd)


def reputation_increment(w: float, alpha: float) -> float:
    """Forgiveness step: alpha * (e^w - 1) + 0.001, strictly positive and
    rising slower the lower the reputation is."""
    return alpha * math.expm1(w) + REPUTATION_FLOOR_INCREMENT


def update_reputation(w: float, delta: float, alpha: float) -> float:
    """Next reputation: min(w + increment, delta).  A violation pulls the
    reputation down to the worst alignment; compliance grows it toward 1."""
    return min(w + reputation_increment(w, alpha), delta)


def recovery_steps(alpha: float, max_steps: int = 10**6) -> int:
    """Number of consecutive fully-aligned updates taking reputation from 0
    back to 1, counting the initial 0 -> 0.001 step."""
    if alpha < 0:
        raise ValueError(f"alpha must be non-negative, got {alpha}")
    w = 0.0
    for n in range(1, max_steps + 1):
        w = update_reputation(w, 1.0, alpha)
        if w >= 1.0:
            return n
    raise ValueError(f"reputation did not recover within {max_steps} steps")


def transform_reward(raw: float, w_next: float) -> float:
    """Reputation-weighted reward: positive rewards scale by w, negative ones
    are amplified by (1 + (1 - w)).  Identity at full reputation."""
    if not 0.0 <= w_next <= 1.0:
        raise ValueError(f"reputation must be in [0, 1], got {w_next}")
    if raw >= 0:
        return w_next * raw
    return raw * (1.0 + (1.0 - w_next))


def project_action(proposed, rb_set: ActionSet):
    """The action actually sent to the environment: the proposal if permitted,
    otherwise the closest rule-permitted action."""
    return rb_set.project(proposed)


@dataclass(frozen=True)
class AlignmentValue:
    """The pair of norm sources plus tolerance and forgiveness parameters.

    ``rb`` and ``dd`` map a state to the permitted :class:`ActionSet` (either
    may be absent for the single-source ablations).  ``tau`` is the distance
    beyond which a continuous-action violation scores 0 and is unused for
    discrete action sets.  ``alpha`` sets how fast reputation recovers.
    """

    rb: Callable | None
    dd: Callable | None
    tau: float | None
    alpha: float

    def __post_init__(self):
        if self.rb is None and self.dd is None:
            raise ValueError("at least one norm source is required")
        if self.alpha < 0:
            raise ValueError(f"alpha must be non-negative, got {self.alpha}")
        if self.tau is not None and self.tau <= 0:
            raise ValueError(f"tau must be positive, got {self.tau}")

    @classmethod
    def hava(cls, rb, dd, tau, alpha) -> "AlignmentValue":
        return cls(rb=rb, dd=dd, tau=tau, alpha=alpha)

    @classmethod
    def rb_only(cls, rb, tau, alpha) -> "AlignmentValue":
        return cls(rb=rb, dd=None, tau=tau, alpha=alpha)

    @classmethod
    def dd_only(cls, dd, tau, alpha) -> "AlignmentValue":
        return cls(rb=None, dd=dd, tau=tau, alpha=alpha)

    @property
    def variant(self) -> str:
        if self.rb is not None and self.dd is not None:
            return "hava"
        return "rb-only" if self.rb is not None else "dd-only"


@dataclass(frozen=True)
class AlignmentOutcome:
    """Everything the alignment layer decided for one step."""

    d_rb: float
    d_dd: float
    al_rb: float
    al_dd: float
    delta: float
    w_next: float
    executed_action: object


def _score(av: AlignmentValue, permitted: ActionSet, d: float) -> float:
    # Discrete sets use the indicator rule directly; intervals use the
    # tolerance-scaled score.
    if permitted.is_discrete:
        return 1.0 if d == 0.0 else 0.0
    if av.tau is None:
        raise ValueError("tau is required for interval action sets")
    return alignment_score(av.tau, d)


def hava_step(av: AlignmentValue, state, w: float, proposed) -> AlignmentOutcome:
    """Judge a proposed action and produce the executed action plus the next
    reputation.

    Distances are measured against the proposal, not the executed action, so
    a rule violation damages reputation even though a safe action is executed
    in its place.  An empty data-driven set (norm conflict) makes any action a
    full social violation while the rules still decide what runs.
    """
    d_rb, al_rb = 0.0, 1.0
    rb_set = None
    if av.rb is not None:
        rb_set = av.rb(state)
        if rb_set is None or rb_set.is_empty:
            raise ValueError("rule-based norms must permit at least one action")
        d_rb = rb_set.distance(proposed)
        al_rb = _score(av, rb_set, d_rb)

    d_dd, al_dd = 0.0, 1.0
    if av.dd is not None:
        dd_set = av.dd(state)
        if dd_set is None or dd_set.is_empty:
            d_dd, al_dd = math.inf, 0.0
        else:
            d_dd = dd_set.distance(proposed)
            al_dd = _score(av, dd_set, d_dd)

    delta = worst_alignment(al_rb, al_dd)
    w_next = update_reputation(w, delta, av.alpha)
    executed = project_action(proposed, rb_set) if rb_set is not None else proposed
    return AlignmentOutcome(d_rb, d_dd, al_rb, al_dd, delta, w_next, executed)


class AlignedEnv:
    """Wrap a task environment into its reputation-augmented counterpart.

    States become (state, w) pairs starting at full reputation, rewards are
    reputation-weighted using the post-update reputation, and executed actions
    are projected into the rule-permitted set.  With ``av=None`` the wrapper
    is a transparent pass-through (w stays 1, rewards untouched), which keeps
    a single rollout code path for plain task environments.
    """

    def __init__(self, env, av: AlignmentValue | None):
        self.env = env
        self.av = av
        self._w = 1.0

    @property
    def n_actions(self) -> int:
        return self.env.n_actions

    @property
    def obs_fields(self) -> tuple[str, ...]:
        return self.env.obs_fields

    def observe(self, state) -> tuple[float, ...]:
        return self.env.observe(state)

    @property
    def reputation(self) -> float:
        return self._w

    def reset(self):
        state = self.env.reset()
        self._w = 1.0
        return state, self._w

    def step(self, action_id: int):
        state = self.env.state
        proposed = self.env.action_value(state, action_id)
        if self.av is None:
            next_state, raw, done = self.env.step_value(proposed)
            return (next_state, self._w), raw, raw, done, None
        outcome = hava_step(self.av, state, self._w, proposed)
        next_state, raw, done = self.env.step_value(outcome.executed_action)
        self._w = outcome.w_next
        reward = transform_reward(raw, outcome.w_next)
        return (next_state, self._w), reward, raw, done, outcome
