"""Linear CCA and probabilistic CCA fitted by EM."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg


class SingularCovarianceError(np.linalg.LinAlgError):
    pass


@dataclass
class LinearCcaResult:
    W_x: np.ndarray
    W_y: np.ndarray
    correlations: np.ndarray
    mean_x: np.ndarray
    mean_y: np.ndarray

    def transform(self, X, Y) -> tuple[np.ndarray, np.ndarray]:
        return (np.asarray(X) - self.mean_x) @ self.W_x, (np.asarray(Y) - self.mean_y) @ self.W_y


def _inv_sqrt(C: np.ndarray, what: str, reg: float) -> np.ndarray:
    vals, vecs = np.linalg.eigh(C)
    tol = vals.max() * C.shape[0] * np.finfo(float).eps if vals.size else 0.0
    if vals.min() <= tol:
        hint = " (use reg > 0)" if reg == 0 else ""
        raise SingularCovarianceError(f"{what} covariance is singular{hint}")
    return (vecs / np.sqrt(vals)) @ vecs.T


def linear_cca_fit(X, Y, d: int, reg: float = 1e-4) -> LinearCcaResult:
    """Top-``d`` canonical directions via SVD of the whitened cross-covariance.

    ``reg`` is added to both within-view covariance diagonals.
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.shape[0] != Y.shape[0]:
        raise ValueError(f"views are not paired: {X.shape[0]} vs {Y.shape[0]} rows")
    if not 1 <= d <= min(X.shape[1], Y.shape[1]):
        raise ValueError(f"d={d} must lie in [1, min(d_x, d_y)={min(X.shape[1], Y.shape[1])}]")
    n = X.shape[0]
    mx, my = X.mean(axis=0), Y.mean(axis=0)
    Xc, Yc = X - mx, Y - my
    Cxx = Xc.T @ Xc / (n - 1) + reg * np.eye(X.shape[1])
    Cyy = Yc.T @ Yc / (n - 1) + reg * np.eye(Y.shape[1])
    Cxy = Xc.T @ Yc / (n - 1)
    Kx = _inv_sqrt(Cxx, "X", reg)
    Ky = _inv_sqrt(Cyy, "Y", reg)
    U, s, Vt = np.linalg.svd(Kx @ Cxy @ Ky)
    corr = np.clip(s[:d], 0.0, 1.0)
    return LinearCcaResult(Kx @ U[:, :d], Ky @ Vt[:d].T, corr, mx, my)


# --------------------------------------------------------------------- PCCA


@dataclass
class PccaParams:
    """z ~ N(0, I_d); x|z ~ N(W_x z + mu_x, diag(psi_x)); y|z likewise."""

    W_x: np.ndarray
    W_y: np.ndarray
    mu_x: np.ndarray
    mu_y: np.ndarray
    psi_x: np.ndarray
    psi_y: np.ndarray
    loglik: list[float] = field(default_factory=list)

    @property
    def W(self) -> np.ndarray:
        return np.vstack([self.W_x, self.W_y])

    @staticmethod
    def _posterior_mean(V, W, mu, psi):
        Wp = W / psi[:, None]
        M = np.eye(W.shape[1]) + W.T @ Wp
        return np.linalg.solve(M, Wp.T @ (np.asarray(V) - mu).T).T

    def embed_x(self, X) -> np.ndarray:
        """Posterior mean E[z | x]."""
        return self._posterior_mean(X, self.W_x, self.mu_x, self.psi_x)

    def embed_y(self, Y) -> np.ndarray:
        return self._posterior_mean(Y, self.W_y, self.mu_y, self.psi_y)

    def embed_joint(self, X, Y) -> np.ndarray:
        return self._posterior_mean(
            np.hstack([X, Y]), self.W, np.concatenate([self.mu_x, self.mu_y]),
            np.concatenate([self.psi_x, self.psi_y]),
        )


PSI_FLOOR = 1e-8


def _gaussian_loglik(S: np.ndarray, W: np.ndarray, psi: np.ndarray, n: int) -> float:
    C = W @ W.T + np.diag(psi)
    try:
        L = np.linalg.cholesky(C)
    except np.linalg.LinAlgError:
        raise SingularCovarianceError("model covariance W W^T + Psi is not positive definite") from None
    logdet = 2.0 * np.log(np.diag(L)).sum()
    trace = np.trace(linalg.cho_solve((L, True), S))
    D = S.shape[0]
    return -0.5 * n * (D * np.log(2 * np.pi) + logdet + trace)


def pcca_fit_em(X, Y, d: int, iters: int = 500, tol: float = 1e-6, seed: int = 0) -> PccaParams:
    """Maximum-likelihood PCCA by EM on the stacked views.

    Noise covariances are diagonal and floored at 1e-8. Stops after ``iters``
    iterations or once the log-likelihood gain drops below ``tol``.
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.shape[0] != Y.shape[0]:
        raise ValueError(f"views are not paired: {X.shape[0]} vs {Y.shape[0]} rows")
    dx, dy = X.shape[1], Y.shape[1]
    if not 1 <= d <= min(dx, dy):
        raise ValueError(f"d={d} must lie in [1, min(d_x, d_y)]")
    V = np.hstack([X, Y])
    n, D = V.shape
    mu = V.mean(axis=0)
    Vc = V - mu
    S = Vc.T @ Vc / n

    rng = np.random.default_rng(seed)
    scale = np.sqrt(np.maximum(np.diag(S), PSI_FLOOR))
    W = rng.standard_normal((D, d)) * scale[:, None] / np.sqrt(d)
    psi = np.maximum(np.diag(S) / 2.0, PSI_FLOOR)

    trace = [_gaussian_loglik(S, W, psi, n)]
    eye = np.eye(d)
    for _ in range(iters):
        # E-step through the d x d posterior precision
        Wp = W / psi[:, None]
        M = eye + W.T @ Wp
        try:
            Minv = np.linalg.inv(np.linalg.cholesky(M))
        except np.linalg.LinAlgError:
            raise SingularCovarianceError("posterior precision lost positive definiteness in E-step") from None
        Minv = Minv.T @ Minv
        beta = Minv @ Wp.T                      # d x D, E[z|v] = beta (v - mu)
        SB = S @ beta.T                         # D x d
        Ezz = Minv + beta @ SB                  # averaged E[z z^T]
        # M-step
        W = np.linalg.solve(Ezz, SB.T).T
        psi = np.maximum(np.diag(S) - np.einsum("ij,ij->i", W, SB), PSI_FLOOR)
        ll = _gaussian_loglik(S, W, psi, n)
        gain = ll - trace[-1]
        trace.append(ll)
        if gain < tol:
            break

    return PccaParams(W[:dx], W[dx:], mu[:dx], mu[dx:], psi[:dx], psi[dx:], trace)
