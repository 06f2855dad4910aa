"""Slot-frame schedulers as scikit-learn style estimators.

Every scheduler is fitted on a :class:`SchedulingProblem`, emits one
:class:`~tschsim.matching.Assignment` per slot-frame cycle via ``predict``
and may consume per-edge feedback through ``partial_fit``.

=============  ===================  ==========================================
kind           label                knowledge used
=============  ===================  ==========================================
statistical    Proposed1            channel-state distributions
cmab_llr       Proposed2            per-edge reward feedback only
perfect_csi    Baseline1            this cycle's realized channel states
static_csi     Baseline2            the first cycle's channel states, frozen
erroneous_csi  Baseline3            this cycle's states plus Gaussian error
=============  ===================  ==========================================
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_is_fitted

from .matching import (Assignment, BipartiteSchedulingGraph, build_bipartite,
                       hungarian_max_weight, max_weight_assignment)
from .validation import as_generator, check_positive

POLICY_KINDS = ("statistical", "cmab_llr", "perfect_csi", "static_csi", "erroneous_csi")
POLICY_LABELS = {
    "statistical": "Proposed1",
    "cmab_llr": "Proposed2",
    "perfect_csi": "Baseline1",
    "static_csi": "Baseline2",
    "erroneous_csi": "Baseline3",
}


@dataclass
class SchedulingProblem:
    """What a scheduler may know before the first cycle.

    ``set_means`` holds the expected packets per slot of each catalog set and
    is only read by schedulers that are allowed statistical knowledge.
    ``normalization_max`` maps packet counts into [0, 1] rewards.
    """

    n_sets: int
    n_slots: int
    n_channels: int
    normalization_max: float
    set_means: np.ndarray | None = None

    def __post_init__(self):
        check_positive(self.n_sets, "n_sets", integer=True)
        check_positive(self.n_slots, "n_slots", integer=True)
        check_positive(self.n_channels, "n_channels", integer=True)
        check_positive(self.normalization_max, "normalization_max")
        if self.set_means is not None:
            self.set_means = np.asarray(self.set_means, dtype=float)
            if self.set_means.shape != (self.n_sets,):
                raise ValueError("set_means needs one entry per catalog set")

    @property
    def n_cells(self):
        return self.n_slots * self.n_channels

    @property
    def n_edges(self):
        return self.n_sets * self.n_cells

    def graph(self, set_weights=None):
        w = self.set_means if set_weights is None else set_weights
        if w is None:
            raise ValueError("problem carries no set means")
        return build_bipartite(self.n_sets, self.n_slots, self.n_channels, w)


@dataclass
class PolicyConfig:
    kind: str
    error_sigma: float | None = None
    normalization_max: float | None = None
    exploration: float | None = None

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"unknown policy {self.kind!r}; choose from {', '.join(POLICY_KINDS)}")
        if self.error_sigma is not None and self.error_sigma < 0:
            raise ValueError("error_sigma must be >= 0")
        if self.normalization_max is not None and self.normalization_max <= 0:
            raise ValueError("normalization_max must be > 0")

    def build(self, random_state=None):
        if self.kind == "erroneous_csi":
            return ErroneousCSIScheduler(error_sigma=self.error_sigma, random_state=random_state)
        if self.kind == "cmab_llr":
            return CMABScheduler(exploration=self.exploration)
        return make_scheduler(self.kind)


class BaseScheduler(BaseEstimator):
    """Shared ``fit``/``predict``/``partial_fit`` plumbing."""

    learns = False
    needs_realization = False

    def fit(self, problem, y=None):
        if not isinstance(problem, SchedulingProblem):
            raise TypeError("fit expects a SchedulingProblem")
        self.problem_ = problem
        self.n_cells_ = problem.n_cells
        self._fit(problem)
        return self

    def _fit(self, problem):
        pass

    def predict(self, edge_weights=None):
        check_is_fitted(self, "problem_")
        if self.needs_realization:
            if edge_weights is None:
                raise ValueError(f"{type(self).__name__} needs this cycle's edge weights")
            edge_weights = np.asarray(edge_weights, dtype=float)
            if edge_weights.shape != (self.problem_.n_sets, self.n_cells_):
                raise ValueError(f"edge weights must have shape "
                                 f"{(self.problem_.n_sets, self.n_cells_)}, got {edge_weights.shape}")
        return self._predict(edge_weights)

    def partial_fit(self, assignment, rewards):
        return self


class StatisticalScheduler(BaseScheduler):
    """Hungarian optimum on the expected set rates; one schedule for all cycles."""

    def _fit(self, problem):
        if problem.set_means is None:
            raise ValueError("the statistical scheduler needs set_means")
        self.graph_ = problem.graph()
        self.assignment_ = statistical_schedule(self.graph_)

    def _predict(self, edge_weights):
        return self.assignment_


def statistical_schedule(graph):
    a = hungarian_max_weight(graph.weights)
    return a.restrict(graph.n_sets, graph.n_cells, graph.core)


class PerfectCSIScheduler(BaseScheduler):
    """Re-solves on every cycle's realized edge weights."""

    needs_realization = True

    def _predict(self, edge_weights):
        return perfect_csi_schedule(edge_weights)


def perfect_csi_schedule(edge_weights):
    return max_weight_assignment(edge_weights)


class StaticCSIScheduler(BaseScheduler):
    """Solves on the first cycle's realized weights and never again."""

    needs_realization = True

    def _fit(self, problem):
        self.assignment_ = None

    def _predict(self, edge_weights):
        if self.assignment_ is None:
            self.assignment_ = max_weight_assignment(edge_weights)
        return self.assignment_


def static_csi_schedule(initial_weights):
    return max_weight_assignment(initial_weights)


class ErroneousCSIScheduler(BaseScheduler):
    """Re-solves every cycle on realized weights plus N(0, sigma^2) error.

    Noisy weights are clamped at zero. ``error_sigma=None`` uses half the
    mean edge weight of the problem.
    """

    needs_realization = True

    def __init__(self, error_sigma=None, random_state=None):
        self.error_sigma = error_sigma
        self.random_state = random_state

    def _fit(self, problem):
        if self.error_sigma is None:
            if problem.set_means is None:
                raise ValueError("error_sigma=None needs set_means to derive a default")
            self.sigma_ = 0.5 * float(problem.set_means.mean())
        else:
            self.sigma_ = float(check_positive(self.error_sigma, "error_sigma", allow_zero=True))
        self.rng_ = as_generator(self.random_state)

    def _predict(self, edge_weights):
        return erroneous_csi_schedule(edge_weights, self.sigma_, self.rng_)


def erroneous_csi_schedule(edge_weights, sigma, rng):
    noisy = np.asarray(edge_weights, dtype=float)
    if sigma > 0:
        noisy = np.maximum(noisy + rng.normal(0.0, sigma, noisy.shape), 0.0)
    a = max_weight_assignment(noisy)
    return Assignment(a.sets, a.cells, float(np.asarray(edge_weights)[a.sets, a.cells].sum()))


@dataclass
class LearnerState:
    """Per-edge mean estimates, visit counts and the cycle counter."""

    theta_hat: np.ndarray
    m_hat: np.ndarray
    tau: int = 0
    log: list | None = field(default=None, repr=False)

    @classmethod
    def zeros(cls, n_edges, record=False):
        return cls(np.zeros(n_edges), np.zeros(n_edges, dtype=np.int64), 0,
                   [] if record else None)

    @property
    def n_edges(self):
        return self.theta_hat.shape[0]


def llr_index(state, edge=None, exploration=None):
    """Upper confidence index ``theta + sqrt(c log(tau) / m)``.

    ``exploration`` defaults to ``n_edges + 1``. With ``edge=None`` the
    indices of all edges are returned.
    """
    if state.tau < 1:
        raise ValueError("tau must be >= 1")
    c = state.n_edges + 1 if exploration is None else exploration
    sl = slice(None) if edge is None else edge
    m = state.m_hat[sl]
    if np.any(m < 1):
        raise ValueError("every edge needs at least one observation")
    return state.theta_hat[sl] + np.sqrt(c * math.log(state.tau) / m)


def llr_update(state, edges, rewards):
    """Running-mean update of the played edges; others stay as they were."""
    edges = np.asarray(edges, dtype=np.int64)
    rewards = np.asarray(rewards, dtype=float)
    m = state.m_hat[edges]
    state.theta_hat[edges] = (state.theta_hat[edges] * m + rewards) / (m + 1)
    state.m_hat[edges] = m + 1
    state.tau += 1
    if state.log is not None:
        state.log.extend(zip(edges.tolist(), rewards.tolist()))
    return state


class CMABScheduler(BaseScheduler):
    """Combinatorial UCB learner over (set, cell) edges.

    For the first ``n_edges`` cycles each edge in turn is forced into a
    matching found with constant weights ``initial_weight``; afterwards the
    Hungarian solver runs on the confidence indices. Rewards passed to
    ``partial_fit`` must already be normalized to [0, 1].

    Parameters
    ----------
    exploration : float, optional
        Constant ``c`` inside the confidence bonus. ``None`` means
        ``n_edges + 1``.
    initial_weight : float
        Weight of every edge during initialization.
    record_rewards : bool
        Keep an ``(edge, reward)`` log in ``state_.log``.
    """

    learns = True

    def __init__(self, exploration=None, initial_weight=1.0, record_rewards=False):
        self.exploration = exploration
        self.initial_weight = initial_weight
        self.record_rewards = record_rewards

    def _fit(self, problem):
        check_positive(self.initial_weight, "initial_weight")
        if self.exploration is not None:
            check_positive(self.exploration, "exploration", allow_zero=True)
        self.n_edges_ = problem.n_edges
        self.state_ = LearnerState.zeros(self.n_edges_, record=self.record_rewards)

    @property
    def initialized(self):
        check_is_fitted(self, "state_")
        return self.state_.tau >= self.n_edges_

    def _predict(self, edge_weights):
        st = self.state_
        S, K = self.problem_.n_sets, self.n_cells_
        if st.tau < self.n_edges_:
            w = np.full((S, K), float(self.initial_weight))
            return max_weight_assignment(w, force=divmod(st.tau, K))
        # index for the cycle about to be played
        nxt = LearnerState(st.theta_hat, st.m_hat, st.tau + 1)
        w = llr_index(nxt, exploration=self.exploration).reshape(S, K)
        return max_weight_assignment(w)

    def partial_fit(self, assignment, rewards):
        check_is_fitted(self, "state_")
        rewards = np.asarray(rewards, dtype=float)
        if rewards.shape != (len(assignment),):
            raise ValueError("need one reward per matched pair")
        edges = assignment.sets * self.n_cells_ + assignment.cells
        llr_update(self.state_, edges, rewards)
        return self


def llr_initialize(scheduler, problem, hook):
    """Run the forced-edge initialization; ``hook(assignment)`` returns rewards."""
    scheduler.fit(problem)
    for _ in range(scheduler.n_edges_):
        a = scheduler.predict()
        scheduler.partial_fit(a, hook(a))
    return scheduler.state_


def llr_step(scheduler, hook):
    """One main-loop cycle: index, solve, observe, update."""
    if not scheduler.initialized:
        raise NotFittedError("initialization has not completed")
    a = scheduler.predict()
    scheduler.partial_fit(a, hook(a))
    return a, scheduler.state_


_SCHEDULERS = {
    "statistical": StatisticalScheduler,
    "cmab_llr": CMABScheduler,
    "perfect_csi": PerfectCSIScheduler,
    "static_csi": StaticCSIScheduler,
    "erroneous_csi": ErroneousCSIScheduler,
}


def make_scheduler(kind, **params):
    try:
        cls = _SCHEDULERS[kind]
    except KeyError:
        raise ValueError(f"unknown policy {kind!r}; choose from {', '.join(POLICY_KINDS)}") from None
    return cls(**params)
