"""Posterior beliefs over user-defined types and their diagnostics.

Three likelihoods are supported:

``product``
    product of the probabilities each type gave to the observed actions,
    accumulated in log space with exact zeros tracked separately;
``sum``
    running sum of those probabilities;
``correlated``
    running sum, over steps, of the joint product across players, paired
    with a prior over joint type profiles.

When every hypothesis has zero mass the posterior is undefined. It then
falls back to the prior, sets ``degenerate`` and records a
``posterior-degenerate`` event.
"""
from __future__ import annotations

import itertools
import logging

import numpy as np

from . import kernels
from .strategies import MemoryTracker

log = logging.getLogger(__name__)

KINDS = ("product", "sum", "correlated")


def posterior_per_player(likelihoods, prior):
    """Bayes quotient ``L * P / sum(L * P)``.

    Returns ``(posterior, degenerate)``; a degenerate posterior is the prior.
    """
    prior = np.asarray(prior, dtype=float)
    num = np.asarray(likelihoods, dtype=float) * prior
    total = num.sum()
    if total <= 0.0:
        return prior.copy(), True
    return num / total, False


def _log_posterior(log_l, zero, prior):
    mask = ~zero & (prior > 0)
    if not mask.any():
        return prior.copy(), True
    shifted = np.where(mask, log_l, -np.inf)
    w = np.exp(shifted - shifted[mask].max()) * prior
    return w / w.sum(), False


def combined_posterior(posteriors):
    """Joint posterior as the outer product of per-player posteriors."""
    out = np.ones(())
    for p in posteriors:
        out = np.multiply.outer(out, np.asarray(p, dtype=float))
    total = out.sum()
    return out / total if total > 0 else out


def _outer(vectors):
    out = np.ones(())
    for v in vectors:
        out = np.multiply.outer(out, v)
    return out


class BeliefState:
    """Posterior over the user type spaces of all other players.

    ``update`` takes, for each other player, the vector of probabilities
    its user types assigned to the action it just played.
    """

    def __init__(self, kind, priors, joint_prior=None):
        if kind not in KINDS:
            raise ValueError(f"unknown posterior kind {kind!r}")
        self.kind = kind
        self.priors = [np.asarray(p, dtype=float) for p in priors]
        if joint_prior is None:
            joint_prior = _outer(self.priors)
        self.joint_prior = np.asarray(joint_prior, dtype=float)
        self.t = 0
        self.events = []
        self._degenerate = {}
        if kind == "product":
            self.log_l = [np.zeros(len(p)) for p in self.priors]
            self.zero = [np.zeros(len(p), dtype=bool) for p in self.priors]
        elif kind == "sum":
            self.acc = [np.zeros(len(p)) for p in self.priors]
        else:
            self.acc_joint = np.zeros(self.joint_prior.shape)
        self._refresh()

    def update(self, step_probs):
        step_probs = [np.asarray(p, dtype=float) for p in step_probs]
        if self.kind == "product":
            for pos, p in enumerate(step_probs):
                self.zero[pos] |= p <= 0.0
                self.log_l[pos] += np.log(np.where(p > 0.0, p, 1.0))
        elif self.kind == "sum":
            for pos, p in enumerate(step_probs):
                self.acc[pos] += p
        else:
            self.acc_joint += _outer(step_probs)
        self.t += 1
        self._refresh()

    def _refresh(self):
        if self.kind == "correlated":
            if self.t == 0:
                joint, degenerate = self.joint_prior.copy(), False
            else:
                joint, degenerate = posterior_per_player(self.acc_joint, self.joint_prior)
            self._note("joint", degenerate)
            self._joint = joint
            self._marginals = [
                joint.sum(axis=tuple(k for k in range(joint.ndim) if k != pos)) for pos in range(joint.ndim)
            ]
            return
        marginals = []
        for pos, prior in enumerate(self.priors):
            if self.t == 0:
                post, degenerate = prior.copy(), False
            elif self.kind == "product":
                post, degenerate = _log_posterior(self.log_l[pos], self.zero[pos], prior)
            else:
                post, degenerate = posterior_per_player(self.acc[pos], prior)
            self._note(pos, degenerate)
            marginals.append(post)
        self._marginals = marginals
        self._joint = combined_posterior(marginals)

    def _note(self, channel, degenerate):
        was = self._degenerate.get(channel, False)
        self._degenerate[channel] = degenerate
        if degenerate and not was:
            event = {"event": "posterior-degenerate", "t": self.t, "channel": channel, "kind": self.kind}
            self.events.append(event)
            log.warning("posterior-degenerate: kind=%s channel=%s t=%d", self.kind, channel, self.t)

    @property
    def degenerate(self) -> bool:
        return any(self._degenerate.values())

    def posterior(self, pos) -> np.ndarray:
        return self._marginals[pos]

    def joint(self) -> np.ndarray:
        return self._joint

    def likelihoods(self, pos):
        """Raw likelihood values for one player (not defined for the correlated kind)."""
        if self.kind == "product":
            return np.where(self.zero[pos], 0.0, np.exp(self.log_l[pos]))
        if self.kind == "sum":
            return self.acc[pos].copy()
        raise ValueError("the correlated posterior has no per-player likelihood")


# -- functions of a concrete history -------------------------------------------


def type_trace(history, strategies):
    """Replay ``strategies`` (all for one player) along ``history``.

    Returns ``(observed, dists)``: ``observed[tau, k]`` is the probability
    type ``k`` gave to the action its player took at step ``tau``;
    ``dists[tau, k]`` is its full action distribution at that step.
    """
    if not strategies:
        raise ValueError("empty type space")
    player = strategies[0].player
    mems = [s.initial_memory() for s in strategies]
    n_actions = strategies[0].n_actions
    t = history.t
    observed = np.zeros((t, len(strategies)))
    dists = np.zeros((t, len(strategies), n_actions))
    for tau in range(t):
        s, a, s2 = history.states[tau], history.actions[tau], history.states[tau + 1]
        for k, strat in enumerate(strategies):
            d = strat.distribution(mems[k], s)
            dists[tau, k] = d
            observed[tau, k] = d[a[player]]
            mems[k] = strat.advance(mems[k], s, a, s2)
    return observed, dists


def replay_beliefs(spec, history, kind) -> BeliefState:
    """Recompute a posterior of the given kind offline from a recorded history."""
    beliefs = BeliefState(kind, spec.priors, spec.joint_prior)
    tracker = MemoryTracker([s for space in spec.user for s in space])
    for tau in range(history.t):
        s, a, s2 = history.states[tau], history.actions[tau], history.states[tau + 1]
        beliefs.update([np.array([tracker.distribution(x, s)[a[j]] for x in space])
                        for space, j in zip(spec.user, spec.others)])
        tracker.advance(s, a, s2)
    return beliefs


def product_log_likelihood(history, strategy):
    """``(log L, is_zero)`` for the product likelihood."""
    observed, _ = type_trace(history, [strategy])
    p = observed[:, 0]
    zero = bool(np.any(p <= 0.0))
    log_l = 0.0
    for v in p:
        if v > 0.0:
            log_l += float(np.log(v))
    return log_l, zero


def product_likelihood(history, strategy) -> float:
    log_l, zero = product_log_likelihood(history, strategy)
    return 0.0 if zero else float(np.exp(log_l))


def sum_likelihood(history, strategy) -> float:
    observed, _ = type_trace(history, [strategy])
    total = 0.0
    for v in observed[:, 0]:
        total += v
    return float(total)


def correlated_posterior(history, user_spaces, joint_prior):
    """Posterior over joint profiles from the correlated likelihood; ``(joint, degenerate)``."""
    joint_prior = np.asarray(joint_prior, dtype=float)
    if history.t == 0:
        return joint_prior.copy(), False
    traces = [type_trace(history, space)[0] for space in user_spaces]
    acc = np.zeros(joint_prior.shape)
    for tau in range(history.t):
        acc += _outer([tr[tau] for tr in traces])
    return posterior_per_player(acc, joint_prior)


def overlap_series(history, strategies):
    """Per-step overlap and stochasticity contributions for one player's types."""
    observed, dists = type_trace(history, strategies)
    peak = dists.max(axis=2) if dists.size else np.zeros(observed.shape)
    return kernels.overlap_terms(observed, peak, strategies[0].n_actions)


def average_overlap(history, strategies) -> float:
    """Mean over steps of the overlap contribution; in [0, 1]."""
    if history.t < 1:
        raise ValueError("average overlap needs at least one step")
    ao, _ = overlap_series(history, strategies)
    return float(ao.mean())


def average_stochasticity(history, strategies) -> float:
    """Mean over steps of the normalised distance of each type from determinism."""
    if history.t < 1:
        raise ValueError("average stochasticity needs at least one step")
    if strategies[0].n_actions < 2:
        raise ValueError("average stochasticity is undefined for a single action")
    _, st = overlap_series(history, strategies)
    return float(st.mean())


def step_overlap(observed) -> float:
    observed = np.asarray(observed, dtype=float)
    if np.count_nonzero(observed > 0.0) < 2:
        return 0.0
    return float(observed.sum() / len(observed))


def step_stochasticity(dists) -> float:
    dists = np.asarray(dists, dtype=float)
    n_actions = dists.shape[1]
    return float((1.0 - dists.max(axis=1)).sum() / len(dists) / (1.0 - 1.0 / n_actions))


class OverlapStats:
    """Running average overlap and stochasticity, one entry per other player."""

    def __init__(self, n_players):
        self.t = 0
        self.ao_sum = np.zeros(n_players)
        self.as_sum = np.zeros(n_players)

    def update(self, observed, dists):
        for pos, (o, d) in enumerate(zip(observed, dists)):
            self.ao_sum[pos] += step_overlap(o)
            if np.asarray(d).shape[1] > 1:
                self.as_sum[pos] += step_stochasticity(d)
        self.t += 1

    @property
    def ao(self):
        return self.ao_sum / self.t if self.t else np.zeros_like(self.ao_sum)

    @property
    def as_(self):
        return self.as_sum / self.t if self.t else np.zeros_like(self.as_sum)


def marginal_action_prob(dists, delta) -> np.ndarray:
    """Probability of each action: type distributions mixed by the type marginal."""
    return np.asarray(delta, dtype=float) @ np.asarray(dists, dtype=float)


def posterior_error(posterior, delta) -> float:
    """L1 distance between a posterior and the true type marginal."""
    return float(np.abs(np.asarray(posterior, dtype=float) - np.asarray(delta, dtype=float)).sum())


# -- predictions ---------------------------------------------------------------


def _advance_all(strategies, mems, s, a, s2):
    out = dict(mems)
    for strat in strategies:
        out[strat.key] = strat.advance(mems[strat.key], s, a, s2)
    return out


def k_step_prediction_prob(spec, joint_posterior, memories, state, suffix) -> float:
    """Probability the believed model assigns to a future ``suffix``.

    ``suffix`` is a list of ``(joint_action, next_state)`` pairs starting at
    ``state``. The controlled player's actions are taken as given; the other
    players' actions are predicted by mixing user types with the posterior
    (held fixed at the current history) and states by the kernel.
    ``memories`` maps strategy keys to their memories at the current history.
    """
    strategies = [s for space in spec.user for s in space]
    total = 0.0
    for profile in itertools.product(*(range(len(u)) for u in spec.user)):
        p = float(joint_posterior[profile])
        if p == 0.0:
            continue
        mems, s = memories, state
        for a, s2 in suffix:
            for pos, j in enumerate(spec.others):
                strat = spec.user[pos][profile[pos]]
                p *= strat.distribution(mems[strat.key], s)[a[j]]
            p *= spec.row(s, a)[s2]
            if p == 0.0:
                break
            mems = _advance_all(strategies, mems, s, a, s2)
            s = s2
        total += p
    return total


def true_prediction_prob(spec, memories, state, suffix) -> float:
    """Probability of ``suffix`` under the true type distribution.

    Types are redrawn each step, so every step mixes over all profiles of
    the type distribution. ``memories`` are the latent strategies' memories.
    """
    strategies = [s for space in spec.latent for s in space]
    p = 1.0
    mems, s = memories, state
    for a, s2 in suffix:
        step = 0.0
        for prof, w in zip(spec.delta_profiles, spec.delta_probs):
            q = w
            for pos, j in enumerate(spec.others):
                strat = spec.latent[pos][prof[pos]]
                q *= strat.distribution(mems[strat.key], s)[a[j]]
            step += q
        p *= step * spec.row(s, a)[s2]
        if p == 0.0:
            return 0.0
        mems = _advance_all(strategies, mems, s, a, s2)
        s = s2
    return p
