"""Multi-agent Inter-GMM: per-agent Gaussian mixtures tied by a shared sign.

Each agent holds a private mixture ``theta = (means, precisions)`` with a
Normal-Wishart prior, its own feature vectors and its own copy of the sign
table.  Nothing here reads another agent's state.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.cluster.vq import kmeans2

from .errors import DegenerateDistributionError, NotPositiveDefiniteError
from .kernels import (
    GaussianParams,
    RngStream,
    check_symmetric,
    cholesky,
    log_gaussian_density,
    sample_gaussian,
    sample_wishart,
)

JITTER = 1e-9


@dataclass
class Hyperparams:
    """Normal-Wishart prior ``(m, alpha_bar, nu, W)`` and sign prior ``gamma``.

    ``W`` is the Wishart scale matrix, so a prior precision has mean ``nu * W``.
    """

    m: np.ndarray
    alpha_bar: float
    nu: float
    W: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        self.m = np.atleast_1d(np.asarray(self.m, dtype=float))
        self.W = np.atleast_2d(np.asarray(self.W, dtype=float))
        self.gamma = np.atleast_1d(np.asarray(self.gamma, dtype=float))
        dim = self.m.size
        if self.W.shape != (dim, dim):
            raise ValueError(f"W has shape {self.W.shape}, expected {(dim, dim)}")
        if not self.alpha_bar > 0:
            raise ValueError("alpha_bar must be positive")
        if not self.nu > 0:
            raise ValueError("nu must be positive")
        if np.any(self.gamma < 0) or not self.gamma.sum() > 0:
            raise ValueError("gamma must be nonnegative with a positive sum")
        check_symmetric(self.W)
        cholesky(self.W)

    @classmethod
    def isotropic(cls, dim, n_signs, m=0.0, alpha_bar=1.0, nu=1.0, w=0.01, gamma=None):
        """Scalar ``m`` and ``w`` broadcast to ``m * ones`` and ``w * I``; uniform gamma."""
        if gamma is None:
            gamma = np.ones(n_signs)
        return cls(
            m=np.full(dim, float(m)),
            alpha_bar=float(alpha_bar),
            nu=float(nu),
            W=float(w) * np.eye(dim),
            gamma=gamma,
        )

    @property
    def dim(self) -> int:
        return self.m.size

    @property
    def n_signs(self) -> int:
        return self.gamma.size

    @property
    def log_gamma(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.gamma / self.gamma.sum())


@dataclass(frozen=True)
class ComponentParams:
    """Means ``(K, dim)`` and precisions ``(K, dim, dim)`` of one agent's mixture."""

    means: np.ndarray
    precisions: np.ndarray

    def __post_init__(self):
        means = np.atleast_2d(np.asarray(self.means, dtype=float))
        precisions = np.asarray(self.precisions, dtype=float)
        k, dim = means.shape
        if precisions.shape != (k, dim, dim):
            raise ValueError(f"precisions shape {precisions.shape} != {(k, dim, dim)}")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "precisions", precisions)

    def __len__(self):
        return self.means.shape[0]

    def __getitem__(self, k) -> GaussianParams:
        return GaussianParams(self.means[k], self.precisions[k])

    def log_densities(self, x: np.ndarray) -> np.ndarray:
        """``(n, K)`` table of ``log N(x_i | mu_k, Lambda_k^-1)``."""
        x = np.atleast_2d(x)
        return np.stack([log_gaussian_density(x, self[k]) for k in range(len(self))], axis=1)


class AgentState:
    """One agent: features ``x`` (D, dim), sign table ``w`` (D,), mixture ``theta``.

    The per-object table ``log gamma_k + log N(x_d | theta_k)`` is cached and
    rebuilt whenever ``theta`` is reassigned; sign tables may be mutated in place.
    With ``cached = False`` the game-facing accessors (:meth:`object_log_likelihood`,
    :meth:`object_proposal_cdf`) evaluate densities on demand instead.
    """

    cached = True

    def __init__(self, id, features, hyper: Hyperparams, signs=None, theta=None):
        self.id = id
        self.features = np.atleast_2d(np.asarray(features, dtype=float))
        if self.features.shape[1] != hyper.dim:
            raise ValueError(
                f"features have dimension {self.features.shape[1]}, hyperparams {hyper.dim}"
            )
        self.hyper = hyper
        n = self.features.shape[0]
        self.signs = np.zeros(n, dtype=np.int64) if signs is None else np.array(signs, dtype=np.int64)
        if self.signs.shape != (n,):
            raise ValueError("signs and features must have the same length")
        if np.any((self.signs < 0) | (self.signs >= hyper.n_signs)):
            raise ValueError("sign index out of range")
        self._theta = None
        self._lik = self._table = self._cdf = None
        self._components = None
        if theta is not None:
            self.theta = theta

    @property
    def n_objects(self) -> int:
        return self.features.shape[0]

    @property
    def n_signs(self) -> int:
        return self.hyper.n_signs

    @property
    def theta(self) -> ComponentParams:
        if self._theta is None:
            raise RuntimeError(f"agent {self.id} has no mixture parameters yet")
        return self._theta

    @theta.setter
    def theta(self, value: ComponentParams):
        if len(value) != self.n_signs:
            raise ValueError(f"expected {self.n_signs} components, got {len(value)}")
        self._theta = value
        self._lik = self._table = self._cdf = None
        self._components = None

    @property
    def log_likelihood(self) -> np.ndarray:
        """``(D, K)`` table of ``log N(x_d | mu_k, Lambda_k^-1)``."""
        if self._lik is None:
            self._lik = self.theta.log_densities(self.features)
        return self._lik

    @property
    def log_table(self) -> np.ndarray:
        """``(D, K)`` unnormalized log posterior over signs for every object."""
        if self._table is None:
            self._table = self.hyper.log_gamma[None, :] + self.log_likelihood
        return self._table

    @property
    def proposal_cdf(self) -> np.ndarray:
        """Row-normalized cumulative sign posterior, used to draw proposals."""
        if self._cdf is None:
            table = self.log_table
            top = table.max(axis=1, keepdims=True)
            if not np.all(np.isfinite(top)):
                bad = int(np.flatnonzero(~np.isfinite(top[:, 0]))[0])
                raise DegenerateDistributionError(
                    f"agent {self.id}: every sign has zero density for object {bad}"
                )
            cdf = np.cumsum(np.exp(table - top), axis=1)
            self._cdf = cdf / cdf[:, -1:]
        return self._cdf

    def _component(self, k) -> GaussianParams:
        if self._components is None:
            self._components = [self.theta[j] for j in range(self.n_signs)]
        return self._components[k]

    def object_log_likelihood(self, d, k):
        """``log N(x_d | theta_k)`` for paired indices, read from the table when cached."""
        if self.cached:
            return self.log_likelihood[d, k]
        d_arr, k_arr = np.broadcast_arrays(np.asarray(d), np.asarray(k))
        out = np.empty(d_arr.shape)
        for idx in np.ndindex(d_arr.shape):
            out[idx] = log_gaussian_density(self.features[d_arr[idx]], self._component(int(k_arr[idx])))
        return out[()] if out.ndim == 0 else out

    def object_proposal_cdf(self, d) -> np.ndarray:
        """Cumulative sign posterior rows for objects ``d``."""
        if self.cached:
            return self.proposal_cdf[d]
        rows = np.atleast_1d(d)
        table = self.hyper.log_gamma[None, :] + np.array(
            [[log_gaussian_density(self.features[i], self._component(k)) for k in range(self.n_signs)] for i in rows]
        )
        top = table.max(axis=1, keepdims=True)
        if not np.all(np.isfinite(top)):
            raise DegenerateDistributionError(f"agent {self.id}: every sign has zero density")
        cdf = np.cumsum(np.exp(table - top), axis=1)
        cdf /= cdf[:, -1:]
        return cdf[0] if np.ndim(d) == 0 else cdf

    def copy(self) -> AgentState:
        return AgentState(self.id, self.features, self.hyper, self.signs.copy(), self._theta)

    def __repr__(self):
        return f"AgentState(id={self.id}, D={self.n_objects}, K={self.n_signs})"


def _check_index(value, bound, what):
    arr = np.asarray(value)
    if np.any((arr < 0) | (arr >= bound)):
        raise IndexError(f"{what} index {value} out of range [0, {bound})")


def log_joint_sign_likelihood(agent: AgentState, d, k):
    """``log gamma_k + log N(x_d | mu_k, Lambda_k^-1)`` for the agent's own model."""
    _check_index(d, agent.n_objects, "object")
    _check_index(k, agent.n_signs, "sign")
    out = agent.log_table[d, k]
    return float(out) if np.ndim(out) == 0 else out


def sample_sign_proposal(agent: AgentState, d, rng: RngStream):
    """Sample ``w ~ P(w | x_d, theta)`` from the agent's own model.

    ``d`` may be an int or an index array; one sign is drawn per object.
    """
    _check_index(d, agent.n_objects, "object")
    cdf = agent.object_proposal_cdf(d)
    u = rng.uniform(np.shape(d) or None)
    idx = np.sum(cdf <= np.asarray(u)[..., None], axis=-1)
    idx = np.minimum(idx, agent.n_signs - 1)
    return int(idx) if np.ndim(d) == 0 else idx


@dataclass
class NormalWishart:
    """Posterior (or prior) Normal-Wishart parameters for one component."""

    m: np.ndarray
    alpha_bar: float
    nu: float
    W: np.ndarray
    count: int = 0
    W_inv: np.ndarray = field(default=None, repr=False)


def effective_dof(nu: float, dim: int) -> float:
    """Degrees of freedom actually used for a Wishart draw.

    An improper ``nu < dim`` (e.g. ``nu=1`` with 10-dim features) is raised to
    ``dim``; the conjugate arithmetic itself keeps the raw value.
    """
    return max(float(nu), float(dim))


def _inverse_pd(matrix, what):
    try:
        chol = cholesky(matrix)
    except NotPositiveDefiniteError:
        warnings.warn(f"{what} not positive definite; adding {JITTER:g} I jitter", RuntimeWarning)
        matrix = matrix + JITTER * np.eye(matrix.shape[0])
        chol = cholesky(matrix)
    inv_chol = np.linalg.inv(chol)
    return inv_chol.T @ inv_chol


def normal_wishart_posterior(x: np.ndarray, hyper: Hyperparams) -> NormalWishart:
    """Conjugate update of the prior with the feature rows ``x`` (n, dim)."""
    x = np.atleast_2d(np.asarray(x, dtype=float)).reshape(-1, hyper.dim)
    c = x.shape[0]
    w_inv_prior = _inverse_pd(hyper.W, "W")
    if c == 0:
        return NormalWishart(hyper.m.copy(), hyper.alpha_bar, hyper.nu, hyper.W.copy(), 0, w_inv_prior)
    xbar = x.mean(axis=0)
    centered = x - xbar
    scatter = centered.T @ centered
    alpha_post = hyper.alpha_bar + c
    m_post = (hyper.alpha_bar * hyper.m + c * xbar) / alpha_post
    diff = xbar - hyper.m
    w_inv = w_inv_prior + scatter + (hyper.alpha_bar * c / alpha_post) * np.outer(diff, diff)
    w_inv = 0.5 * (w_inv + w_inv.T)
    w_post = _inverse_pd(w_inv, "posterior W^-1")
    return NormalWishart(m_post, alpha_post, hyper.nu + c, 0.5 * (w_post + w_post.T), c, w_inv)


def sample_normal_wishart(nw: NormalWishart, rng: RngStream):
    """Draw ``(mu, Lambda)``: ``Lambda ~ W(nu, W)``, ``mu ~ N(m, (alpha Lambda)^-1)``."""
    dim = nw.m.size
    precision = sample_wishart(effective_dof(nw.nu, dim), nw.W, rng)
    mu = sample_gaussian(GaussianParams(nw.m, nw.alpha_bar * precision), rng)
    return mu, precision


def sample_theta_posterior(agent: AgentState, rng: RngStream) -> ComponentParams:
    """Draw the agent's mixture parameters given its features and current signs.

    Components with no assigned objects are drawn from the prior.  The agent is
    not modified; assign the result to ``agent.theta``.
    """
    hyper = agent.hyper
    means = np.empty((hyper.n_signs, hyper.dim))
    precisions = np.empty((hyper.n_signs, hyper.dim, hyper.dim))
    for k in range(hyper.n_signs):
        nw = normal_wishart_posterior(agent.features[agent.signs == k], hyper)
        means[k], precisions[k] = sample_normal_wishart(nw, rng)
    return ComponentParams(means, precisions)


def init_agents(features, hyper: Hyperparams, rng: RngStream, hypers=None, signs=None):
    """Build one agent per feature array, then draw each theta from its posterior.

    ``features`` is a sequence of ``(D, dim)`` arrays, one per agent.  Initial
    signs are uniform random per agent unless ``signs`` gives a shared table.
    ``hypers`` optionally overrides the shared hyperparameters per agent.
    """
    agents = []
    for n, x in enumerate(features):
        h = hyper if hypers is None else hypers[n]
        sub = rng.spawn(n)
        init = sub.integers(h.n_signs, size=np.shape(x)[0]) if signs is None else signs
        agent = AgentState(n, x, h, init)
        agent.theta = sample_theta_posterior(agent, sub)
        agents.append(agent)
    return agents


def kmeans_signs(features, n_signs: int, rng: RngStream, restarts: int = 10) -> np.ndarray:
    """Shared initial sign table from k-means on the concatenated features.

    Only a centralized sampler may use this, since it reads every agent's
    features.  The lowest-inertia of ``restarts`` k-means++ runs is kept.
    """
    x = np.hstack([np.atleast_2d(f) for f in features])
    best, best_labels = np.inf, None
    for r in range(restarts):
        centers, labels = kmeans2(x, n_signs, minit="++", seed=rng.spawn(r).generator)
        inertia = float(np.sum((x - centers[labels]) ** 2))
        if inertia < best:
            best, best_labels = inertia, labels
    return best_labels.astype(np.int64)
