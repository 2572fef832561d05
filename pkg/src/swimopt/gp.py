"""Gaussian-process surrogate with a Matern-5/2 ARD kernel.

Inputs live in the unit box. Outputs are standardized before fitting and
every query is mapped back to the original scale. Hyperparameters are
optimized in log space by L-BFGS-B on the exact log marginal likelihood.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, lapack, solve_triangular
from scipy.optimize import minimize

SQRT5 = math.sqrt(5.0)
LENGTHSCALE_BOUNDS = (0.005, 4.0)
SIGNAL_BOUNDS = (0.05, 20.0)
JITTER_FLOOR = 1e-8
JITTER_MAX = 1e-4


class IllConditionedError(np.linalg.LinAlgError):
    pass


def matern52(X1, X2, lengthscales, signal):
    """Kernel matrix ``k(X1, X2)``."""
    A = X1 / lengthscales
    B = X2 / lengthscales
    d2 = np.sum(A * A, 1)[:, None] + np.sum(B * B, 1)[None, :] - 2.0 * A @ B.T
    r = np.sqrt(np.maximum(d2, 0.0))
    return signal * (1.0 + SQRT5 * r + 5.0 / 3.0 * r * r) * np.exp(-SQRT5 * r)


def _robust_cholesky(K, jitter=JITTER_FLOOR, max_jitter=JITTER_MAX):
    """Cholesky factor of ``K``; adds ``jitter * 10^k`` to the diagonal on failure."""
    extra = 0.0
    n = K.shape[0]
    while True:
        try:
            return np.linalg.cholesky(K + extra * np.eye(n)), extra
        except np.linalg.LinAlgError:
            extra = jitter if extra == 0.0 else extra * 10.0
            if extra > max_jitter:
                raise IllConditionedError("kernel matrix not positive definite up to jitter 1e-4")


def check_dataset(X, y):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] != y.size:
        raise ValueError("inputs and outputs differ in length")
    if X.shape[0] < 2:
        raise ValueError("need at least two observations")
    if np.any(X < -1e-12) or np.any(X > 1 + 1e-12):
        raise ValueError("inputs must lie in the unit box")
    if not np.all(np.isfinite(y)):
        raise ValueError("outputs must be finite")
    if has_duplicates(X):
        raise ValueError("duplicate inputs")
    return X, y


def has_duplicates(X, tol=1e-12):
    return unique_rows(X, tol).size != X.shape[0]


def unique_rows(X, tol=1e-12):
    """Indices of the first occurrence of each distinct row (max-norm ``tol``)."""
    keep = []
    for i, x in enumerate(X):
        if not keep or np.min(np.max(np.abs(X[keep] - x), axis=1)) > tol:
            keep.append(i)
    return np.array(keep, dtype=int)


@dataclass
class GPModel:
    X: np.ndarray
    y: np.ndarray
    lengthscales: np.ndarray
    signal: float               # standardized units
    noise: float = JITTER_FLOOR # standardized units
    y_mean: float = 0.0
    y_std: float = 1.0
    jitter: float = 0.0
    _L: np.ndarray = field(default=None, repr=False)
    _alpha: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.y = np.asarray(self.y, dtype=float).ravel()
        self.lengthscales = np.asarray(self.lengthscales, dtype=float)
        if self._L is None:
            self._factor()

    @property
    def dim(self):
        return self.X.shape[1]

    @property
    def signal_variance(self):
        """Signal variance in the original output units."""
        return self.signal * self.y_std ** 2

    @property
    def noise_variance(self):
        return (self.noise + self.jitter) * self.y_std ** 2

    def _z(self):
        return (self.y - self.y_mean) / self.y_std

    def _factor(self):
        K = matern52(self.X, self.X, self.lengthscales, self.signal)
        K[np.diag_indices_from(K)] += self.noise
        self._L, self.jitter = _robust_cholesky(K)
        self._alpha = cho_solve((self._L, True), self._z())

    def posterior(self, Xs, full_cov=False):
        """Mean and variance (or covariance) of the latent function at ``Xs``."""
        Xs = np.atleast_2d(np.asarray(Xs, dtype=float))
        Ks = matern52(Xs, self.X, self.lengthscales, self.signal)
        mean = Ks @ self._alpha
        V = solve_triangular(self._L, Ks.T, lower=True)
        if full_cov:
            cov = matern52(Xs, Xs, self.lengthscales, self.signal) - V.T @ V
            return self.y_mean + self.y_std * mean, cov * self.y_std ** 2
        var = np.maximum(self.signal - np.sum(V * V, 0), 0.0)
        return self.y_mean + self.y_std * mean, var * self.y_std ** 2

    def log_marginal_likelihood(self):
        """Log evidence of the standardized outputs at the current hyperparameters."""
        z = self._z()
        n = z.size
        return float(-0.5 * z @ self._alpha - np.sum(np.log(np.diag(self._L))) - 0.5 * n * math.log(2 * math.pi))

    def to_dict(self):
        return {"X": self.X.tolist(), "y": self.y.tolist(), "lengthscales": self.lengthscales.tolist(),
                "signal": self.signal, "noise": self.noise, "y_mean": self.y_mean, "y_std": self.y_std}

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["X"]), np.array(d["y"]), np.array(d["lengthscales"]), d["signal"],
                   d["noise"], d["y_mean"], d["y_std"])

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


# --- marginal likelihood ---

def _unpack(theta, d, fit_noise, noise):
    ls = np.exp(theta[:d])
    sig = math.exp(theta[d])
    nz = math.exp(theta[d + 1]) if fit_noise else noise
    return ls, sig, nz


def neg_log_marginal_likelihood(theta, X, z, fit_noise=False, noise=JITTER_FLOOR):
    """Negative log evidence and its gradient with respect to ``theta``.

    ``theta = (log lengthscales, log signal[, log noise])``.
    """
    n, d = X.shape
    ls, sig, nz = _unpack(theta, d, fit_noise, noise)
    A = X / ls
    sq = np.sum(A * A, 1)
    r = np.sqrt(np.maximum(sq[:, None] + sq[None, :] - 2.0 * A @ A.T, 0.0))
    e = np.exp(-SQRT5 * r)
    K = sig * (1.0 + SQRT5 * r + 5.0 / 3.0 * r * r) * e
    Kn = K.copy()
    Kn[np.diag_indices(n)] += nz
    L, info = lapack.dpotrf(Kn, lower=1, clean=1)
    if info != 0:
        return 1e25, np.zeros_like(theta)
    alpha = cho_solve((L, True), z)
    nll = 0.5 * z @ alpha + np.sum(np.log(np.diag(L))) + 0.5 * n * math.log(2 * math.pi)
    Kinv, _ = lapack.dpotri(L, lower=1)
    Kinv = np.tril(Kinv) + np.tril(Kinv, -1).T
    W = np.outer(alpha, alpha) - Kinv
    # dK/dlog(l_j) = sig * 5/3 (1 + sqrt5 r) e^{-sqrt5 r} (a_ij - a_kj)^2 with a = x / l
    M = W * (sig * 5.0 / 3.0 * (1.0 + SQRT5 * r) * e)
    grad = np.empty_like(theta)
    grad[:d] = -(M.sum(1) @ (A * A) - np.sum(A * (M @ A), 0))
    grad[d] = -0.5 * np.sum(W * K)
    if fit_noise:
        grad[d + 1] = -0.5 * nz * np.trace(W)
    return float(nll), grad


def fit(X, y, n_restarts=3, seed=0, warm_start=None, noise_bounds=(JITTER_FLOOR, JITTER_FLOOR),
        lengthscale_bounds=LENGTHSCALE_BOUNDS, signal_bounds=SIGNAL_BOUNDS, maxiter=200):
    """Maximize the log marginal likelihood over Matern-5/2 ARD hyperparameters.

    Starts from ``warm_start`` (a previous :class:`GPModel`) when given, else
    from the centre of the log box, plus ``n_restarts`` random log-uniform
    draws. ``noise_bounds`` with equal ends fixes the noise.
    """
    X, y = check_dataset(X, y)
    n, d = X.shape
    mu = float(np.mean(y))
    sd = float(np.std(y))
    floor = 1e-12 * max(1.0, abs(mu))
    sd = sd if sd > floor else floor
    z = (y - mu) / sd
    fit_noise = noise_bounds[1] > noise_bounds[0]
    bounds = [tuple(np.log(lengthscale_bounds))] * d + [tuple(np.log(signal_bounds))]
    if fit_noise:
        bounds.append(tuple(np.log(noise_bounds)))
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])

    rng = np.random.default_rng(seed)
    starts = []
    if warm_start is not None and warm_start.dim == d:
        th = list(np.log(warm_start.lengthscales)) + [math.log(warm_start.signal)]
        if fit_noise:
            th.append(math.log(max(warm_start.noise, noise_bounds[0])))
        starts.append(np.clip(th, lo, hi))
    mid = np.concatenate([np.full(d, math.log(0.5)), [0.0]] + ([[math.log(noise_bounds[0]) + 2.0]] if fit_noise else []))
    if not starts:
        starts.append(np.clip(mid, lo, hi))
    for _ in range(n_restarts):
        starts.append(rng.uniform(lo, hi))

    best = None
    for th0 in starts:
        res = minimize(neg_log_marginal_likelihood, th0, args=(X, z, fit_noise, noise_bounds[0]), jac=True,
                       method="L-BFGS-B", bounds=bounds, options={"maxiter": maxiter})
        if best is None or res.fun < best.fun:
            best = res
    ls, sig, nz = _unpack(best.x, d, fit_noise, noise_bounds[0])
    return GPModel(X, y, ls, sig, nz, mu, sd)


def sample_joint(model, Xs, n_draws, seed):
    """Exact joint posterior draws at ``Xs``, shape ``(n_draws, len(Xs))``.

    Falls back to an eigen-decomposition with negative eigenvalues clipped
    to zero when the covariance cannot be factored.
    """
    Xs = np.atleast_2d(np.asarray(Xs, dtype=float))
    if Xs.shape[0] < 1:
        raise ValueError("empty candidate set")
    mean, cov = model.posterior(Xs, full_cov=True)
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((n_draws, Xs.shape[0]))
    cov = 0.5 * (cov + cov.T)
    try:
        F = np.linalg.cholesky(cov + 1e-12 * max(model.signal_variance, 1e-300) * np.eye(len(cov)))
    except np.linalg.LinAlgError:
        w, U = np.linalg.eigh(cov)
        F = U * np.sqrt(np.clip(w, 0.0, None))
    return mean + Z @ F.T


def sample_paths(model, Xs, n_draws, seed, n_features=1024):
    """Approximate joint posterior draws by pathwise conditioning.

    Each draw is a random-Fourier-feature prior function corrected by the
    exact posterior update on the training data. Cost is linear in
    ``len(Xs)``, which keeps large candidate sets affordable.
    """
    Xs = np.atleast_2d(np.asarray(Xs, dtype=float))
    rng = np.random.default_rng(seed)
    d = model.dim
    # Matern-5/2 spectral density: Student-t with 5 degrees of freedom
    g = rng.chisquare(5.0, n_features) / 5.0
    W = rng.standard_normal((n_features, d)) / np.sqrt(g)[:, None] / model.lengthscales
    b = rng.uniform(0.0, 2 * math.pi, n_features)
    amp = math.sqrt(2.0 * model.signal / n_features)
    w = rng.standard_normal((n_features, n_draws))
    eps = rng.standard_normal((model.X.shape[0], n_draws)) * math.sqrt(model.noise + model.jitter)

    prior_train = amp * np.cos(model.X @ W.T + b) @ w
    resid = model._z()[:, None] - prior_train - eps
    v = cho_solve((model._L, True), resid)
    prior_test = amp * np.cos(Xs @ W.T + b) @ w
    Ks = matern52(Xs, model.X, model.lengthscales, model.signal)
    f = prior_test + Ks @ v
    return (model.y_mean + model.y_std * f).T
