"""Seeded random streams, Gaussian log-densities and the samplers used by the
Inter-GMM generative process (categorical, Gaussian, Wishart).

All densities are evaluated in log space.  Positive-definiteness is checked
with a Cholesky factorization; failures raise :class:`NotPositiveDefiniteError`
rather than letting NaNs propagate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDistributionError, NotPositiveDefiniteError

LOG_2PI = float(np.log(2.0 * np.pi))


class RngStream:
    """A reproducible random stream identified by ``(seed, *key)``.

    Streams derived with :meth:`spawn` use numpy's ``SeedSequence`` spawn keys,
    so ``RngStream(s).spawn(3, 1)`` is the same stream no matter when or where
    it is created, and never shares state with any sibling stream.
    """

    def __init__(self, seed: int, *key: int):
        seed = int(seed)
        if seed < 0 or seed >= 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = seed
        self.key = tuple(int(k) for k in key)
        seq = np.random.SeedSequence(self.seed, spawn_key=self.key)
        self.generator = np.random.Generator(np.random.PCG64(seq))

    def spawn(self, *key: int) -> RngStream:
        return RngStream(self.seed, *self.key, *key)

    def uniform(self, size=None):
        return self.generator.random(size)

    def normal(self, size=None):
        return self.generator.standard_normal(size)

    def integers(self, high: int, size=None):
        return self.generator.integers(0, high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self.generator.permutation(n)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, key={self.key})"


def cholesky(matrix: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor; raises :class:`NotPositiveDefiniteError`."""
    matrix = np.asarray(matrix, dtype=float)
    if not np.all(np.isfinite(matrix)):
        raise NotPositiveDefiniteError("matrix has non-finite entries")
    try:
        return np.linalg.cholesky(matrix)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(str(exc)) from None


def check_symmetric(matrix: np.ndarray, rtol: float = 1e-9) -> None:
    scale = max(float(np.max(np.abs(matrix))), 1.0)
    if not np.allclose(matrix, np.swapaxes(matrix, -1, -2), rtol=0.0, atol=rtol * scale):
        raise NotPositiveDefiniteError("matrix is not symmetric")


@dataclass(frozen=True)
class GaussianParams:
    """Mean vector and precision matrix of a multivariate normal."""

    mean: np.ndarray
    precision: np.ndarray
    chol: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        precision = np.atleast_2d(np.asarray(self.precision, dtype=float))
        if mean.ndim != 1 or precision.shape != (mean.size, mean.size):
            raise ValueError(
                f"precision shape {precision.shape} does not match mean dimension {mean.size}"
            )
        check_symmetric(precision)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "precision", precision)
        object.__setattr__(self, "chol", cholesky(precision))

    @property
    def dim(self) -> int:
        return self.mean.size


def log_gaussian_density(x, p: GaussianParams):
    """``log N(x | p.mean, p.precision^-1)``.

    ``x`` may be a single vector of shape ``(dim,)`` or a batch ``(n, dim)``;
    the result is a float or an ``(n,)`` array accordingly.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (p.dim,):
        raise ValueError(f"feature dimension {x.shape[-1:]} does not match {p.dim}")
    half_logdet = float(np.sum(np.log(np.diag(p.chol))))
    # (x - mean)^T P (x - mean) = |L^T (x - mean)|^2 with P = L L^T
    z = (x - p.mean) @ p.chol
    with np.errstate(over="ignore"):  # overflow is a legitimate zero density
        quad = np.sum(z * z, axis=-1)
    out = half_logdet - 0.5 * p.dim * LOG_2PI - 0.5 * quad
    return float(out) if np.ndim(out) == 0 else out


def _validate_weights(weights: np.ndarray) -> np.ndarray:
    weights = np.asarray(weights, dtype=float)
    if weights.ndim != 1 or weights.size == 0:
        raise DegenerateDistributionError("weights must be a non-empty vector")
    if np.any(np.isnan(weights)) or np.any(weights < 0) or not np.any(weights > 0):
        raise DegenerateDistributionError(f"invalid categorical weights {weights}")
    if not np.all(np.isfinite(weights)):
        raise DegenerateDistributionError("categorical weights must be finite")
    return weights


def sample_categorical(weights, rng: RngStream, size=None):
    """Draw index ``k`` with probability ``weights[k] / sum(weights)``."""
    weights = _validate_weights(weights)
    cdf = np.cumsum(weights)
    u = rng.uniform(size) * cdf[-1]
    idx = np.searchsorted(cdf, u, side="right")
    # guards u*total landing exactly on the last edge through rounding
    idx = np.minimum(idx, weights.size - 1)
    return int(idx) if size is None else idx


def sample_categorical_log(log_weights: np.ndarray, rng: RngStream) -> np.ndarray:
    """One draw per row of an ``(n, K)`` array of unnormalized log-weights."""
    log_weights = np.asarray(log_weights, dtype=float)
    top = np.max(log_weights, axis=-1, keepdims=True)
    if np.any(np.isnan(log_weights)) or not np.all(np.isfinite(top)):
        raise DegenerateDistributionError("every category has zero probability")
    cdf = np.cumsum(np.exp(log_weights - top), axis=-1)
    u = rng.uniform(cdf.shape[:-1]) * cdf[..., -1]
    idx = np.sum(cdf <= u[..., None], axis=-1)
    return np.minimum(idx, log_weights.shape[-1] - 1)


def sample_gaussian(p: GaussianParams, rng: RngStream, size=None):
    """``mean + L^{-T} z`` with ``L L^T = precision`` and ``z ~ N(0, I)``."""
    n = 1 if size is None else int(size)
    z = rng.normal((p.dim, n))
    draws = p.mean[:, None] + np.linalg.solve(p.chol.T, z)
    return draws[:, 0] if size is None else draws.T


def sample_wishart(nu: float, scale, rng: RngStream, size=None):
    """Wishart draw by Bartlett decomposition; ``E[draw] = nu * scale``.

    Requires ``nu >= dim``.  Callers holding an improper prior (``nu < dim``)
    clamp before calling; see :func:`rmhng.model.effective_dof`.
    """
    scale = np.atleast_2d(np.asarray(scale, dtype=float))
    dim = scale.shape[0]
    if scale.shape != (dim, dim):
        raise ValueError(f"scale must be square, got {scale.shape}")
    if not nu >= dim:
        raise ValueError(f"Wishart degrees of freedom {nu} < dimension {dim}")
    check_symmetric(scale)
    ls = cholesky(scale)
    n = 1 if size is None else int(size)
    gen = rng.generator
    a = np.zeros((n, dim, dim))
    rows, cols = np.tril_indices(dim, -1)
    a[:, rows, cols] = gen.standard_normal((n, rows.size))
    diag = np.arange(dim)
    a[:, diag, diag] = np.sqrt(gen.chisquare(nu - diag, size=(n, dim)))
    la = ls @ a
    out = la @ np.swapaxes(la, -1, -2)
    out = 0.5 * (out + np.swapaxes(out, -1, -2))
    return out[0] if size is None else out
