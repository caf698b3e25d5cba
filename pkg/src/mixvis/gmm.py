"""Gaussian / Gaussian-mixture value types and small-matrix linear algebra.

Everything here is a pure function or an immutable value object, so the
fitting and rendering layers can share instances freely across threads.
Internal math is float64 throughout; 32-bit precision only appears at the
file-format boundary (see :mod:`mixvis.summary`).
"""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg import cho_solve
from scipy.special import erf

__all__ = [
    "SingularCovarianceError",
    "GaussianComponent",
    "Gmm",
    "cholesky_invert",
    "symmetric_eigen",
]

_LOG_2PI = math.log(2.0 * math.pi)

# Regularization schedule for nearly singular covariances: add eps*trace/d
# to the diagonal, escalating eps by 100x, at most three retries.
_REG_EPS0 = 1e-9
_REG_RETRIES = 3
_RECON_TOL = 1e-8


class SingularCovarianceError(ValueError):
    """Covariance matrix stayed singular through the regularization schedule."""


def _reconstruction_error(a: np.ndarray, inv: np.ndarray) -> float:
    d = a.shape[0]
    return float(np.abs(a @ inv - np.eye(d)).max())


def cholesky_invert(cov, return_regularized: bool = False):
    """Invert a symmetric positive-definite matrix via Cholesky.

    If the factorization fails (or the inverse does not reconstruct the
    identity to 1e-8 in the max norm), the diagonal is nudged by
    ``eps * trace/d`` with eps = 1e-9, 1e-7, 1e-5 before giving up.

    Returns ``(inverse, log_determinant)``, or with
    ``return_regularized=True`` a triple that also carries the (possibly
    nudged) matrix that was actually inverted.

    Raises SingularCovarianceError if all attempts fail.
    """
    a0 = np.asarray(cov, dtype=np.float64)
    if a0.ndim != 2 or a0.shape[0] != a0.shape[1]:
        raise ValueError(f"covariance must be a square matrix, got shape {a0.shape}")
    scale = float(np.abs(a0).max()) if a0.size else 0.0
    if not np.allclose(a0, a0.T, rtol=1e-8, atol=1e-9 * (scale + 1e-300)):
        raise ValueError("covariance must be symmetric")
    a0 = 0.5 * (a0 + a0.T)
    d = a0.shape[0]
    bump_unit = float(np.trace(a0)) / d

    eps = 0.0
    for attempt in range(_REG_RETRIES + 1):
        a = a0 if eps == 0.0 else a0 + (eps * bump_unit) * np.eye(d)
        try:
            chol = np.linalg.cholesky(a)
        except np.linalg.LinAlgError:
            chol = None
        if chol is not None:
            inv = cho_solve((chol, True), np.eye(d), check_finite=False)
            inv = 0.5 * (inv + inv.T)
            if _reconstruction_error(a, inv) < _RECON_TOL:
                log_det = 2.0 * float(np.log(np.diag(chol)).sum())
                if return_regularized:
                    return inv, log_det, a
                return inv, log_det
        eps = _REG_EPS0 if eps == 0.0 else eps * 100.0

    raise SingularCovarianceError(
        f"covariance (d={d}, trace={d * bump_unit:.3g}) is singular even after regularization"
    )


def symmetric_eigen(cov):
    """Eigendecomposition of a small symmetric matrix by cyclic Jacobi sweeps.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvalues sorted
    descending and eigenvectors as orthonormal columns. Jacobi rotations
    converge unconditionally for symmetric input, which keeps this robust on
    the badly scaled covariances that show up in wide-range spatial domains.
    """
    a = np.asarray(cov, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"matrix must be square, got shape {a.shape}")
    scale = float(np.abs(a).max()) if a.size else 0.0
    if not np.allclose(a, a.T, rtol=1e-8, atol=1e-9 * (scale + 1e-300)):
        raise ValueError("matrix must be symmetric")
    a = 0.5 * (a + a.T)
    d = a.shape[0]
    v = np.eye(d)
    if d == 1 or scale == 0.0:
        return np.diag(a).copy(), v

    frob = float(np.linalg.norm(a))
    for _ in range(64):
        off = math.sqrt(sum(a[p, q] ** 2 for p in range(d) for q in range(p + 1, d)))
        if off <= 1e-14 * frob:
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = a[p, q]
                if abs(apq) <= 1e-18 * frob:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 1.0 / (2.0 * theta)
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(theta, 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                app, aqq = a[p, p], a[q, q]
                a[p, p] = app - t * apq
                a[q, q] = aqq + t * apq
                a[p, q] = a[q, p] = 0.0
                for r in range(d):
                    if r != p and r != q:
                        arp, arq = a[r, p], a[r, q]
                        a[r, p] = a[p, r] = c * arp - s * arq
                        a[r, q] = a[q, r] = s * arp + c * arq
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq

    vals = np.diag(a).copy()
    order = np.argsort(-vals, kind="stable")
    vals = vals[order]
    v = v[:, order]
    # deterministic sign: largest-magnitude entry of each eigenvector positive
    for j in range(d):
        i = int(np.argmax(np.abs(v[:, j])))
        if v[i, j] < 0.0:
            v[:, j] = -v[:, j]
    return vals, v


def _as_points(x, d: int) -> tuple[np.ndarray, bool]:
    """Coerce scalar / vector / matrix input to an (n, d) batch."""
    arr = np.asarray(x, dtype=np.float64)
    if d == 1 and arr.ndim == 0:
        return arr.reshape(1, 1), True
    if arr.ndim == 1:
        if d == 1:
            return arr.reshape(-1, 1), False
        if arr.shape[0] != d:
            raise ValueError(f"expected a length-{d} point, got shape {arr.shape}")
        return arr.reshape(1, d), True
    if arr.ndim == 2:
        if arr.shape[1] != d:
            raise ValueError(f"expected points of dimension {d}, got shape {arr.shape}")
        return arr, False
    raise ValueError(f"cannot interpret input of shape {arr.shape} as points")


class GaussianComponent:
    """One weighted Gaussian: w, mean, covariance, plus cached inverse/logdet.

    The stored covariance is the regularized matrix actually inverted, so
    the cached inverse always reconstructs the identity to 1e-8.
    """

    __slots__ = ("weight", "mean", "cov", "cov_inv", "log_det")

    def __init__(self, weight, mean, cov):
        w = float(weight)
        if not (w > 0.0 and math.isfinite(w)):
            raise ValueError(f"component weight must be positive and finite, got {weight}")
        mu = np.array(mean, dtype=np.float64).reshape(-1)
        if mu.size < 1:
            raise ValueError("mean must have at least one entry")
        if not np.all(np.isfinite(mu)):
            raise ValueError("mean must be finite")
        inv, log_det, reg = cholesky_invert(cov, return_regularized=True)
        if reg.shape[0] != mu.size:
            raise ValueError(
                f"mean has dimension {mu.size} but covariance is {reg.shape[0]}x{reg.shape[0]}"
            )
        for arr in (mu, reg, inv):
            arr.setflags(write=False)
        self.weight = w
        self.mean = mu
        self.cov = reg
        self.cov_inv = inv
        self.log_det = log_det

    @property
    def d(self) -> int:
        return self.mean.size

    def _with_weight(self, weight: float) -> "GaussianComponent":
        clone = object.__new__(GaussianComponent)
        clone.weight = float(weight)
        clone.mean = self.mean
        clone.cov = self.cov
        clone.cov_inv = self.cov_inv
        clone.log_det = self.log_det
        return clone

    def mahalanobis2(self, x):
        """Squared Mahalanobis distance of one point or an (n, d) batch."""
        pts, single = _as_points(x, self.d)
        diff = pts - self.mean
        q = np.einsum("ni,ij,nj->n", diff, self.cov_inv, diff)
        return float(q[0]) if single else q

    def density(self, x):
        """Unit-weight Gaussian density at one point or an (n, d) batch."""
        pts, single = _as_points(x, self.d)
        diff = pts - self.mean
        q = np.einsum("ni,ij,nj->n", diff, self.cov_inv, diff)
        dens = np.exp(-0.5 * (q + self.log_det + self.d * _LOG_2PI))
        return float(dens[0]) if single else dens

    def cholesky_factor(self) -> np.ndarray:
        return np.linalg.cholesky(self.cov)

    def __eq__(self, other):
        if not isinstance(other, GaussianComponent):
            return NotImplemented
        return (
            self.weight == other.weight
            and np.array_equal(self.mean, other.mean)
            and np.array_equal(self.cov, other.cov)
        )

    def __hash__(self):
        return hash((self.weight, self.mean.tobytes(), self.cov.tobytes()))

    def __repr__(self):
        return f"GaussianComponent(w={self.weight:.4g}, d={self.d})"


class Gmm:
    """Gaussian mixture over a fixed dimension; weights normalized to one.

    ``raw_weights`` keeps the weights exactly as given, so serialization can
    round-trip bit-for-bit even though the working weights are normalized.
    """

    __slots__ = ("components", "raw_weights")

    def __init__(self, components):
        comps = tuple(components)
        if not comps:
            raise ValueError("a mixture needs at least one component")
        d = comps[0].d
        if any(c.d != d for c in comps):
            raise ValueError("all components must share the same dimension")
        raw = np.array([c.weight for c in comps], dtype=np.float64)
        total = float(raw.sum())
        if not (total > 0.0 and math.isfinite(total)):
            raise ValueError("component weights must sum to a positive finite value")
        if abs(total - 1.0) > 1e-12:
            comps = tuple(c._with_weight(c.weight / total) for c in comps)
        raw.setflags(write=False)
        self.components = comps
        self.raw_weights = raw

    @property
    def d(self) -> int:
        return self.components[0].d

    @property
    def k(self) -> int:
        return len(self.components)

    @property
    def weights(self) -> np.ndarray:
        return np.array([c.weight for c in self.components])

    @property
    def means(self) -> np.ndarray:
        return np.array([c.mean for c in self.components])

    def covs(self) -> np.ndarray:
        return np.array([c.cov for c in self.components])

    def density(self, x):
        """Mixture density at one point or an (n, d) batch."""
        pts, single = _as_points(x, self.d)
        dens = np.zeros(pts.shape[0])
        for c in self.components:
            dens += c.weight * c.density(pts)
        return float(dens[0]) if single else dens

    def cdf(self, x):
        """CDF of a 1D mixture: sum of w_j * Phi((x - mu_j) / sigma_j)."""
        if self.d != 1:
            raise ValueError(f"cdf is defined for 1D mixtures only, got d={self.d}")
        xs = np.asarray(x, dtype=np.float64)
        single = xs.ndim == 0
        xs = np.atleast_1d(xs)
        out = np.zeros_like(xs)
        for c in self.components:
            sigma = math.sqrt(c.cov[0, 0])
            z = (xs - c.mean[0]) / (sigma * math.sqrt(2.0))
            out += c.weight * 0.5 * (1.0 + erf(z))
        return float(out[0]) if single else out

    def mixture_mean(self) -> np.ndarray:
        return sum(c.weight * c.mean for c in self.components)

    def sample(self, n: int, seed: int) -> np.ndarray:
        """Draw n samples: pick a component by weight, then mu + L z."""
        if n < 0:
            raise ValueError("sample count must be non-negative")
        rng = np.random.default_rng(seed)
        out = np.empty((n, self.d))
        if n == 0:
            return out
        choices = rng.choice(self.k, size=n, p=self.weights)
        z = rng.standard_normal((n, self.d))
        for j, c in enumerate(self.components):
            mask = choices == j
            if mask.any():
                out[mask] = c.mean + z[mask] @ c.cholesky_factor().T
        return out

    def marginal(self, dims) -> "Gmm":
        """Marginal mixture over a subset of dimensions (row/col selection)."""
        idx = list(dims)
        if not idx or any(i < 0 or i >= self.d for i in idx):
            raise ValueError(f"marginal dims {dims} invalid for d={self.d}")
        return Gmm(
            GaussianComponent(c.weight, c.mean[idx], c.cov[np.ix_(idx, idx)])
            for c in self.components
        )

    def affine(self, a, b=0.0) -> "Gmm":
        """Mixture of A x + b: mean -> A mu + b, cov -> A cov A^T."""
        mat = np.atleast_2d(np.asarray(a, dtype=np.float64))
        off = np.asarray(b, dtype=np.float64).reshape(-1)
        if off.size == 1 and mat.shape[0] != 1:
            off = np.full(mat.shape[0], off[0])
        return Gmm(
            GaussianComponent(c.weight, mat @ c.mean + off, mat @ c.cov @ mat.T)
            for c in self.components
        )

    def __eq__(self, other):
        if not isinstance(other, Gmm):
            return NotImplemented
        return (
            np.array_equal(self.raw_weights, other.raw_weights)
            and self.components == other.components
        )

    def __hash__(self):
        return hash(self.components)

    def __repr__(self):
        return f"Gmm(d={self.d}, k={self.k})"
