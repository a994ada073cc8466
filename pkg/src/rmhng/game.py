"""The naming game: MH receiving, MH communication, the recursive chain, the
full iterated game with its one-sample / limited-length approximations, and
the two baselines plus the centralized Gibbs topline.

Every operation taking an object index ``d`` also accepts an index array, in
which case the same exchange is played independently for each listed object.
``run_game`` uses this to play one iteration's exchanges for all objects at
once; the message order within each object is exactly the scalar one.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .kernels import RngStream, sample_categorical_log
from .model import AgentState, sample_sign_proposal, sample_theta_posterior

# sub-stream ids derived from a run's RngStream
_SHUFFLE, _EXCHANGE, _THETA = 1, 2, 3


class Method(str, enum.Enum):
    RMHNG = "RMHNG"
    OS = "OS"
    LL = "LL"
    OS_AND_LL = "OS_AND_LL"
    NO_COMMUNICATION = "NO_COMMUNICATION"
    ALL_ACCEPTANCE = "ALL_ACCEPTANCE"
    GIBBS = "GIBBS"

    @classmethod
    def parse(cls, name) -> Method:
        if isinstance(name, cls):
            return name
        key = str(name).strip().upper().replace("&", "_AND_").replace("-", "_").replace(" ", "_")
        try:
            return cls(key)
        except ValueError:
            raise ConfigError(f"unknown method {name!r}; choose from {[m.value for m in cls]}") from None

    @classmethod
    def classify(cls, T: int, M: int, N: int) -> Method:
        """The approximation a ``(T, M)`` setting amounts to for ``N`` agents."""
        if M < N:
            return cls.OS_AND_LL if T == 1 else cls.LL
        return cls.OS if T == 1 else cls.RMHNG


# (internal iterations T, chain length M or None for all agents)
DEFAULT_SHAPES = {
    Method.RMHNG: (4, None),
    Method.OS: (1, None),
    Method.LL: (4, 2),
    Method.OS_AND_LL: (1, 2),
    Method.ALL_ACCEPTANCE: (4, None),
    Method.NO_COMMUNICATION: (1, None),
    Method.GIBBS: (1, None),
}


@dataclass
class GameConfig:
    """Size and schedule of one game.

    ``chain_length`` (M) counts the agents taking part in each recursive
    exchange, so ``M == n_agents`` is the exact game and ``M == 2`` is a single
    speaker/listener pair.  ``vectorized=False`` plays objects one at a time
    with densities evaluated on demand: same law, but the cost profile of the
    plain per-object algorithm (used for cost-scaling measurements).
    """

    n_agents: int
    n_signs: int
    n_objects: int
    iterations: int = 100
    internal_iterations: int = 4
    chain_length: int | None = None
    method: Method = Method.RMHNG
    seed: int = 0
    shuffle_per_object: bool = False
    vectorized: bool = True

    def __post_init__(self):
        self.method = Method.parse(self.method)
        if self.chain_length is None:
            self.chain_length = self.n_agents
        self.validate()

    @classmethod
    def for_method(cls, method, n_agents, n_signs, n_objects, **kwargs) -> GameConfig:
        """Config with the method's default ``T`` and ``M`` unless given."""
        method = Method.parse(method)
        T, M = DEFAULT_SHAPES[method]
        kwargs.setdefault("internal_iterations", T)
        kwargs.setdefault("chain_length", M if M is not None else n_agents)
        return cls(n_agents, n_signs, n_objects, method=method, **kwargs)

    @property
    def is_exchange_method(self) -> bool:
        return self.method not in (Method.NO_COMMUNICATION, Method.GIBBS)

    def validate(self):
        N, T, M = self.n_agents, self.internal_iterations, self.chain_length
        if self.n_signs < 1 or self.n_objects < 1 or self.iterations < 1:
            raise ConfigError("n_signs, n_objects and iterations must be positive")
        if N < 1 or (N < 2 and self.is_exchange_method):
            raise ConfigError(f"{self.method.value} needs at least 2 agents, got {N}")
        if T < 1:
            raise ConfigError(f"internal_iterations must be >= 1, got {T}")
        if not 1 <= M <= N:
            raise ConfigError(f"chain_length must lie in [1, {N}], got {M}")
        expected = {
            Method.RMHNG: Method.RMHNG,
            Method.OS: Method.OS,
            Method.LL: Method.LL,
            Method.OS_AND_LL: Method.OS_AND_LL,
        }.get(self.method)
        if expected is not None and Method.classify(T, M, N) is not expected:
            raise ConfigError(
                f"{self.method.value} is inconsistent with T={T}, M={M}, N={N} "
                "(OS means T=1, LL means M<N)"
            )


@dataclass
class ExchangeCounter:
    """Running counts of proposals drawn and receive decisions taken."""

    proposals: int = 0
    receives: int = 0
    accepted: int = 0

    def reset(self):
        self.proposals = self.receives = self.accepted = 0


@dataclass
class GameTrace:
    """Append-only record of a run; read it after the run completes."""

    method: Method
    signs: list = field(default_factory=list)  # per iteration: (N, D) sign tables
    tails: list = field(default_factory=list)  # per iteration: (D,) chain-tail agent
    orders: list = field(default_factory=list)  # per iteration: agent order used
    proposals: list = field(default_factory=list)
    receives: list = field(default_factory=list)
    accepted: list = field(default_factory=list)
    durations: list = field(default_factory=list)
    exchange_durations: list = field(default_factory=list)  # sign phase only, theta updates excluded

    def record(self, agents, tails, order, counter, duration, exchange_duration=None):
        self.signs.append(np.stack([a.signs for a in agents]).copy())
        self.tails.append(np.asarray(tails, dtype=np.int64).copy())
        self.orders.append(np.asarray(order).copy())
        self.proposals.append(counter.proposals)
        self.receives.append(counter.receives)
        self.accepted.append(counter.accepted)
        self.durations.append(duration)
        self.exchange_durations.append(duration if exchange_duration is None else exchange_duration)

    def __len__(self):
        return len(self.signs)

    @property
    def sign_array(self) -> np.ndarray:
        """``(I, N, D)`` signs held by every agent after each iteration."""
        return np.stack(self.signs)

    @property
    def tail_signs(self) -> np.ndarray:
        """``(I, D)`` sign held by the chain-tail agent of each exchange."""
        s = self.sign_array
        tails = np.stack(self.tails)
        return np.take_along_axis(s, tails[:, None, :], axis=1)[:, 0, :]


def mh_receive(w_star, listener: AgentState, d, rng: RngStream, accept_all=False, counter=None):
    """Listener-side MH test of a proposed sign.

    Accepts ``w_star`` with probability
    ``min(1, p(x_d | theta, w_star) / p(x_d | theta, w_d))`` using only the
    listener's own model; returns the sign the listener should now hold.
    ``accept_all`` forces ``r = 1``.  The listener is not modified.
    """
    current = listener.signs[d]
    if accept_all:
        log_r = np.zeros(np.shape(d))
    else:
        lik = listener.object_log_likelihood
        log_r = np.minimum(0.0, lik(d, w_star) - lik(d, current))
    u = rng.uniform(np.shape(d) or None)
    accept = u <= np.exp(log_r)
    if counter is not None:
        counter.receives += int(np.size(accept))
        counter.accepted += int(np.count_nonzero(accept))
    out = np.where(accept, w_star, current)
    return int(out) if np.ndim(out) == 0 else out


def mh_communicate(speaker: AgentState, listener: AgentState, d, rng: RngStream, accept_all=False, counter=None):
    """Speaker utters ``w* ~ P(w | x_d, theta_speaker)``; listener runs :func:`mh_receive`."""
    w_star = sample_sign_proposal(speaker, d, rng)
    if counter is not None:
        counter.proposals += int(np.size(w_star))
    return mh_receive(w_star, listener, d, rng, accept_all=accept_all, counter=counter)


def rmh_communicate(agents, d, T: int, rng: RngStream, accept_all=False, counter=None):
    """Recursive MH communication over ``agents = [A_1, ..., A_n, A_{n+1}]``.

    For ``T`` internal iterations the first ``n`` agents recursively produce a
    sign that ``A_{n+1}`` MH-receives (with two agents, ``A_1`` speaks to
    ``A_2`` directly).  Sign tables are updated in place; the return value is
    the ``d``-th sign of a uniformly chosen participant.
    """
    if len(agents) < 2:
        raise ValueError(f"recursive communication needs at least 2 agents, got {len(agents)}")
    head, last = agents[:-1], agents[-1]
    for _ in range(T):
        if len(head) > 1:
            w_bar = rmh_communicate(head, d, T, rng, accept_all, counter)
            last.signs[d] = mh_receive(w_bar, last, d, rng, accept_all, counter)
        else:
            last.signs[d] = mh_communicate(head[0], last, d, rng, accept_all, counter)
    j = rng.integers(len(agents), size=np.shape(d) or None)
    if np.ndim(d) == 0:
        return int(agents[j].signs[d])
    held = np.stack([a.signs[d] for a in agents])
    return held[j, np.arange(held.shape[1])]


def _update_thetas(agents, theta_rngs):
    for agent, r in zip(agents, theta_rngs):
        agent.theta = sample_theta_posterior(agent, r)


def _check_agents(config: GameConfig, agents):
    if len(agents) != config.n_agents:
        raise ConfigError(f"config expects {config.n_agents} agents, got {len(agents)}")
    for a in agents:
        if a.n_objects != config.n_objects or a.n_signs != config.n_signs:
            raise ConfigError(
                f"agent {a.id} has D={a.n_objects}, K={a.n_signs}; "
                f"config has D={config.n_objects}, K={config.n_signs}"
            )


def _exchange(chain, d, config, rng, counter):
    if len(chain) == 1:
        # a one-agent chain has nobody to hear it: the agent samples its own sign
        w = sample_sign_proposal(chain[0], d, rng)
        counter.proposals += int(np.size(w))
        chain[0].signs[d] = w
        return
    rmh_communicate(
        chain,
        d,
        config.internal_iterations,
        rng,
        accept_all=config.method is Method.ALL_ACCEPTANCE,
        counter=counter,
    )


def run_game(config: GameConfig, agents, rng: RngStream, callback=None) -> GameTrace:
    """Iterated recursive naming game (exact, OS, LL, OS&LL or all-acceptance).

    Each iteration shuffles the agents, plays one recursive exchange per object
    among the first ``M`` of them, then lets every agent resample its mixture
    from its own features and signs.  ``callback(i, agents)`` runs after each
    iteration.
    """
    _check_agents(config, agents)
    if not config.is_exchange_method:
        raise ConfigError(f"run_game does not play {config.method.value}")
    N, D = config.n_agents, config.n_objects
    shuffle_rng = rng.spawn(_SHUFFLE)
    exchange_rng = rng.spawn(_EXCHANGE)
    theta_rngs = [rng.spawn(_THETA, n) for n in range(N)]
    trace = GameTrace(config.method)
    counter = ExchangeCounter()
    objects = np.arange(D)
    saved = [a.cached for a in agents]
    if not config.vectorized:
        for a in agents:
            a.cached = False
    try:
        _iterate(config, agents, trace, counter, objects, shuffle_rng, exchange_rng, theta_rngs, callback)
    finally:
        for a, c in zip(agents, saved):
            a.cached = c
    return trace


def _iterate(config, agents, trace, counter, objects, shuffle_rng, exchange_rng, theta_rngs, callback):
    N, M, D = config.n_agents, config.chain_length, config.n_objects
    for i in range(config.iterations):
        counter.reset()
        start = time.perf_counter()
        if config.shuffle_per_object:
            orders = np.argsort(shuffle_rng.uniform((D, N)), axis=1)
            groups, inverse = np.unique(orders, axis=0, return_inverse=True)
            inverse = np.ravel(inverse)
            for g, order in enumerate(groups):
                _exchange([agents[j] for j in order[:M]], objects[inverse == g], config, exchange_rng, counter)
            tails = orders[:, M - 1]
            order_record = orders
        elif not config.vectorized:
            order = shuffle_rng.permutation(N)
            chain = [agents[j] for j in order[:M]]
            for d in range(D):
                _exchange(chain, d, config, exchange_rng, counter)
            tails = np.full(D, order[M - 1])
            order_record = order
        else:
            order = shuffle_rng.permutation(N)
            _exchange([agents[j] for j in order[:M]], objects, config, exchange_rng, counter)
            tails = np.full(D, order[M - 1])
            order_record = order
        exchanged = time.perf_counter()
        _update_thetas(agents, theta_rngs)
        end = time.perf_counter()
        trace.record(agents, tails, order_record, counter, end - start, exchanged - start)
        if callback is not None:
            callback(i, agents)


def run_no_communication(config: GameConfig, agents, rng: RngStream, callback=None) -> GameTrace:
    """Independent per-agent Gibbs samplers; no messages are exchanged."""
    _check_agents(config, agents)
    sign_rngs = [rng.spawn(_EXCHANGE, n) for n in range(config.n_agents)]
    theta_rngs = [rng.spawn(_THETA, n) for n in range(config.n_agents)]
    trace = GameTrace(Method.NO_COMMUNICATION)
    counter = ExchangeCounter()
    objects = np.arange(config.n_objects)
    for i in range(config.iterations):
        counter.reset()
        start = time.perf_counter()
        for agent, r in zip(agents, sign_rngs):
            agent.signs[:] = sample_sign_proposal(agent, objects, r)
            counter.proposals += config.n_objects
        _update_thetas(agents, theta_rngs)
        trace.record(agents, np.zeros(config.n_objects), np.arange(config.n_agents), counter, time.perf_counter() - start)
        if callback is not None:
            callback(i, agents)
    return trace


def joint_sign_log_posterior(agents) -> np.ndarray:
    """``(D, K)`` table of ``log gamma_k + sum_n log N(x^n_d | theta^n_k)``, unnormalized.

    Reads every agent's features at once, so only the centralized topline uses it.
    """
    table = agents[0].hyper.log_gamma[None, :] + sum(a.log_likelihood for a in agents)
    return table


def run_gibbs_topline(config: GameConfig, agents, rng: RngStream, callback=None) -> GameTrace:
    """Centralized Gibbs sampler over one shared sign table."""
    _check_agents(config, agents)
    sign_rng = rng.spawn(_EXCHANGE)
    theta_rngs = [rng.spawn(_THETA, n) for n in range(config.n_agents)]
    trace = GameTrace(Method.GIBBS)
    counter = ExchangeCounter()
    for i in range(config.iterations):
        counter.reset()
        start = time.perf_counter()
        shared = sample_categorical_log(joint_sign_log_posterior(agents), sign_rng)
        counter.proposals += config.n_objects
        for agent in agents:
            agent.signs[:] = shared
        _update_thetas(agents, theta_rngs)
        trace.record(agents, np.zeros(config.n_objects), np.arange(config.n_agents), counter, time.perf_counter() - start)
        if callback is not None:
            callback(i, agents)
    return trace


def play(config: GameConfig, agents, rng: RngStream, callback=None) -> GameTrace:
    """Run whichever procedure ``config.method`` names."""
    if config.method is Method.GIBBS:
        return run_gibbs_topline(config, agents, rng, callback)
    if config.method is Method.NO_COMMUNICATION:
        return run_no_communication(config, agents, rng, callback)
    return run_game(config, agents, rng, callback)
