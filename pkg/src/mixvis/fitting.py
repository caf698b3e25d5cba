"""EM estimation of Gaussian mixtures and fast BIC component selection.

Component counts are chosen by exhaustively fitting each candidate K and
keeping the best BIC. Two approximations keep that affordable on large
clusters: selection runs on a fixed-size random subsample (the chosen K is
then refit on the full cluster), and for 2D/3D mixtures the candidate range
is bounded by the already-selected 1D component counts.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .gmm import GaussianComponent, Gmm, SingularCovarianceError, cholesky_invert

__all__ = [
    "FitConfig",
    "FitResult",
    "fit_em",
    "free_parameter_count",
    "bic",
    "component_bounds",
    "search_component_count",
    "select_components",
    "derive_seed",
]

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class FitConfig:
    """Knobs for EM and component selection.

    ``weight_penalty`` picks the mixture-weight term of the BIC parameter
    count: "simplex" uses K-1 free weights, "printed" uses d-1 (kept only
    for comparison, see free_parameter_count).
    """

    max_components: int = 6
    subsample_size: int = 200
    em_max_iters: int = 200
    em_tol: float = 1e-6
    tiny_cluster_threshold: int = 20
    restarts: int = 3
    seed: int = 0
    weight_penalty: str = "simplex"

    def __post_init__(self):
        for name in (
            "max_components",
            "subsample_size",
            "em_max_iters",
            "em_tol",
            "tiny_cluster_threshold",
            "restarts",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.subsample_size < self.tiny_cluster_threshold:
            raise ValueError("subsample_size must be >= tiny_cluster_threshold")
        if self.weight_penalty not in ("simplex", "printed"):
            raise ValueError(f"unknown weight_penalty {self.weight_penalty!r}")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


@dataclass(frozen=True)
class FitResult:
    gmm: Gmm
    log_likelihood: float
    bic: float
    k_search_trace: tuple = field(default_factory=tuple)
    warning: str | None = None

    @property
    def k(self) -> int:
        return self.gmm.k


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from a tuple of ints/strings (order-sensitive)."""
    h = hashlib.blake2b(repr(tuple(parts)).encode(), digest_size=8)
    return int.from_bytes(h.digest(), "little") >> 1


def free_parameter_count(k: int, d: int, variant: str = "simplex") -> int:
    """Free parameters of a K-component, d-dimensional GMM.

    Per component: d(d+1)/2 covariance entries plus d mean entries. The
    mixture weights add K-1 (simplex dimension). The "printed" variant uses
    d-1 instead, which degenerates to zero weight parameters in 1D at any K
    and exists only so the two penalties can be compared.
    """
    if k < 1 or d < 1:
        raise ValueError("k and d must be >= 1")
    per_comp = d * (d + 1) // 2 + d
    if variant == "simplex":
        return k * per_comp + (k - 1)
    if variant == "printed":
        return k * per_comp + (d - 1)
    raise ValueError(f"unknown variant {variant!r}")


def bic(log_likelihood: float, k: int, d: int, n: int, variant: str = "simplex") -> float:
    """Bayesian information criterion, -2L + q ln n. Lower is better."""
    if n < 1:
        raise ValueError("n must be >= 1")
    q = free_parameter_count(k, d, variant)
    return -2.0 * log_likelihood + q * math.log(n)


def component_bounds(one_d_counts, dims, max_components: int) -> tuple[int, int]:
    """Candidate K range for a multi-dim fit from its 1D parents.

    Lower bound: min of the parents' counts. Upper bound: their product,
    clamped to max_components**2 to bound the worst case.
    """
    counts = []
    for dim in dims:
        if dim not in one_d_counts:
            raise KeyError(f"no 1D component count for dimension {dim}")
        counts.append(int(one_d_counts[dim]))
    if not counts:
        raise ValueError("dims must not be empty")
    k_min = min(counts)
    k_max = int(np.prod(counts))
    k_max = min(k_max, max_components * max_components)
    return k_min, max(k_min, k_max)


# ---------------------------------------------------------------------------
# EM internals


def _kmeanspp_indices(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    chosen = np.empty(k, dtype=np.int64)
    chosen[0] = rng.integers(n)
    d2 = ((x - x[chosen[0]]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            chosen[j] = rng.integers(n)
        else:
            chosen[j] = rng.choice(n, p=d2 / total)
        d2 = np.minimum(d2, ((x - x[chosen[j]]) ** 2).sum(axis=1))
    return chosen


def _floor_cov(cov: np.ndarray, floor: np.ndarray) -> np.ndarray:
    out = cov.copy()
    diag = np.maximum(np.diag(out), floor)
    np.fill_diagonal(out, diag)
    return out


def _safe_invert(cov: np.ndarray, floor: np.ndarray):
    """Cholesky-invert with the variance floor and, if needed, escalation."""
    c = _floor_cov(cov, floor)
    scale = max(float(np.abs(np.diag(c)).max()), 1e-12)
    last = None
    for eps in (0.0, 1e-9, 1e-6, 1e-3):
        try:
            inv, log_det, reg = cholesky_invert(
                c + eps * scale * np.eye(c.shape[0]), return_regularized=True
            )
            return reg, inv, log_det
        except SingularCovarianceError as exc:
            last = exc
    raise last


def _batch_sym_inv(reg: np.ndarray, chol: np.ndarray) -> np.ndarray:
    """Closed-form inverses of a (k, d, d) SPD batch, d <= 3."""
    d = reg.shape[1]
    det = np.prod(np.diagonal(chol, axis1=1, axis2=2), axis=1) ** 2
    if d == 1:
        return 1.0 / reg
    inv = np.empty_like(reg)
    if d == 2:
        inv[:, 0, 0] = reg[:, 1, 1]
        inv[:, 1, 1] = reg[:, 0, 0]
        inv[:, 0, 1] = inv[:, 1, 0] = -reg[:, 0, 1]
        return inv / det[:, None, None]
    if d == 3:
        a, b, c = reg[:, 0, 0], reg[:, 0, 1], reg[:, 0, 2]
        e, f, i = reg[:, 1, 1], reg[:, 1, 2], reg[:, 2, 2]
        inv[:, 0, 0] = e * i - f * f
        inv[:, 0, 1] = inv[:, 1, 0] = c * f - b * i
        inv[:, 0, 2] = inv[:, 2, 0] = b * f - c * e
        inv[:, 1, 1] = a * i - c * c
        inv[:, 1, 2] = inv[:, 2, 1] = b * c - a * f
        inv[:, 2, 2] = a * e - b * b
        return inv / det[:, None, None]
    return np.linalg.inv(reg)


def _batch_floor_invert(covs: np.ndarray, floor: np.ndarray):
    """Floor diagonals and invert a (k, d, d) covariance batch at once.

    The EM inner loop lives here; the rare non-SPD batch falls back to the
    per-component regularization schedule.
    """
    k, d, _ = covs.shape
    covs = covs.copy()
    idx = np.arange(d)
    # added (not clamped): a rank-deficient component's smallest eigenvalue
    # must end up >= the floor, or Cholesky flips between bump levels across
    # iterations and the log-likelihood oscillates
    covs[:, idx, idx] += floor
    tr = covs[:, idx, idx].sum(axis=1) / d
    eps = 0.0
    for _ in range(4):
        reg = covs if eps == 0.0 else covs + (eps * tr)[:, None, None] * np.eye(d)
        try:
            chol = np.linalg.cholesky(reg)
        except np.linalg.LinAlgError:
            eps = 1e-9 if eps == 0.0 else eps * 100.0
            continue
        log_dets = 2.0 * np.log(np.diagonal(chol, axis1=1, axis2=2)).sum(axis=1)
        return reg, _batch_sym_inv(reg, chol), log_dets
    out = [_safe_invert(covs[j], floor) for j in range(k)]
    return (
        np.stack([o[0] for o in out]),
        np.stack([o[1] for o in out]),
        np.array([o[2] for o in out]),
    )


def _dim_pairs(d: int) -> list[tuple[int, int]]:
    return [(a, b) for a in range(d) for b in range(a, d)]


def _monomials(x: np.ndarray) -> np.ndarray:
    """(n, d(d+1)/2) matrix of x_a * x_b products, upper-triangle order.

    Shared by the E-step quadratic forms and the M-step second moments, so
    both reduce to BLAS matmuls instead of (n, k, d) broadcasts. Callers
    center the data first to keep the expanded forms well conditioned.
    """
    pairs = _dim_pairs(x.shape[1])
    m = np.empty((x.shape[0], len(pairs)))
    for i, (a, b) in enumerate(pairs):
        np.multiply(x[:, a], x[:, b], out=m[:, i])
    return m


def _log_densities(x, mono, means, inv_covs, log_dets):
    """(n, k) log Gaussian densities via the expanded quadratic form."""
    d = x.shape[1]
    pairs = _dim_pairs(d)
    coef = np.empty((means.shape[0], len(pairs)))
    for i, (a, b) in enumerate(pairs):
        coef[:, i] = inv_covs[:, a, b] * (1.0 if a == b else 2.0)
    inv_mu = np.einsum("kde,ke->kd", inv_covs, means)
    const = np.einsum("kd,kd->k", inv_mu, means)
    q = mono @ coef.T - 2.0 * (x @ inv_mu.T) + const[None, :]
    np.maximum(q, 0.0, out=q)
    return -0.5 * (q + log_dets[None, :] + d * _LOG_2PI)


def _m_step(x, xmono, resp, floor):
    n, d = x.shape
    nk = resp.sum(axis=0)
    weights = nk / n
    rtx = resp.T @ xmono  # sums of x and of x_a x_b in one pass
    means = rtx[:, :d] / nk[:, None]
    covs = np.empty((resp.shape[1], d, d))
    for i, (a, b) in enumerate(_dim_pairs(d)):
        covs[:, a, b] = covs[:, b, a] = rtx[:, d + i] / nk - means[:, a] * means[:, b]
    covs, inv_covs, log_dets = _batch_floor_invert(covs, floor)
    return weights, means, covs, inv_covs, log_dets


def _degenerate_result(x, config, trace_k=1, warning="degenerate samples"):
    n, d = x.shape
    mean = x.mean(axis=0)
    span = x.max(axis=0) - x.min(axis=0)
    scale = np.maximum(np.abs(mean), 1.0)
    var = np.maximum((1e-6 * span) ** 2, (1e-6 * scale) ** 2)
    comp = GaussianComponent(1.0, mean, np.diag(var))
    gmm = Gmm([comp])
    ll = float(np.log(gmm.density(x) + 1e-300).sum())
    score = bic(ll, 1, d, n, config.weight_penalty)
    return FitResult(gmm, ll, score, ((1, score),), warning)


def _em_single(x, k, rng, config, floor):
    """One EM run from a k-means++ start; returns (gmm params, ll trace).

    Initialization: means at k-means++ seed points, every covariance set to
    the global sample covariance, uniform weights. Starting from the broad
    global covariance avoids degenerate spike components, which keeps the
    likelihood ascent clean from the first step.
    """
    n, d = x.shape
    shift = x.mean(axis=0)
    x = x - shift  # centered data keeps the expanded quadratic forms stable
    mono = _monomials(x)
    xmono = np.hstack([x, mono])
    seeds = _kmeanspp_indices(x, k, rng)
    means = x[seeds].copy()
    weights = np.full(k, 1.0 / k)
    global_cov = x.T @ x / n  # x is centered
    covs, inv_covs, log_dets = _batch_floor_invert(
        np.repeat(global_cov[None, :, :], k, axis=0), floor
    )
    lls = []
    prev_ll = -np.inf
    for _ in range(config.em_max_iters):
        log_w = np.log(np.maximum(weights, 1e-300))
        logp = _log_densities(x, mono, means, inv_covs, log_dets) + log_w[None, :]
        mx = logp.max(axis=1, keepdims=True)
        np.subtract(logp, mx, out=logp)
        np.exp(logp, out=logp)  # logp now holds unnormalized responsibilities
        sums = logp.sum(axis=1)
        lse = mx[:, 0] + np.log(sums)
        ll = float(lse.sum())
        lls.append(ll)
        resp = logp
        resp /= sums[:, None]
        # re-seed collapsed components at distinct worst-modeled samples
        nk = resp.sum(axis=0)
        empty = np.nonzero(nk < 1e-10)[0]
        if empty.size:
            worst = np.argsort(lse)[: empty.size]
            for j, w_idx in zip(empty, worst):
                resp[w_idx] = 0.0
                resp[w_idx, j] = 1.0
        if abs(ll - prev_ll) <= config.em_tol * max(1.0, abs(ll)):
            break
        prev_ll = ll
        weights, means, covs, inv_covs, log_dets = _m_step(x, xmono, resp, floor)
    return weights, means + shift, covs, lls


def fit_em(samples, k: int, seed: int, config: FitConfig | None = None) -> FitResult:
    """Best-of-restarts EM fit with k components.

    k=1 reduces to the closed-form sample mean / ML covariance. Identical
    samples with k > 1 fall back to a k=1 result carrying a warning instead
    of failing.
    """
    config = config or FitConfig()
    x = np.ascontiguousarray(samples, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    n, d = x.shape
    if n < 1:
        raise ValueError("need at least one sample")
    if n < k:
        raise ValueError(f"cannot fit k={k} components to n={n} samples")

    span = x.max(axis=0) - x.min(axis=0)
    floor = (1e-6 * span) ** 2
    if np.all(span == 0.0):
        return _degenerate_result(x, config, warning="degenerate samples" if k > 1 else None)

    if k == 1:
        mean = x.mean(axis=0)
        diff = x - mean
        cov = diff.T @ diff / n
        comp = GaussianComponent(1.0, mean, _floor_cov(cov, floor))
        gmm = Gmm([comp])
        ll = float(np.log(gmm.density(x) + 1e-300).sum())
        score = bic(ll, 1, d, n, config.weight_penalty)
        return FitResult(gmm, ll, score, ((1, score),))

    best = None
    for restart in range(config.restarts):
        rng = np.random.default_rng(np.random.SeedSequence((seed, restart)))
        weights, means, covs, lls = _em_single(x, k, rng, config, floor)
        if best is None or lls[-1] > best[3][-1]:
            best = (weights, means, covs, lls)
    weights, means, covs, lls = best
    comps = [GaussianComponent(weights[j], means[j], covs[j]) for j in range(k)]
    gmm = Gmm(comps)
    ll = lls[-1]
    score = bic(ll, k, d, n, config.weight_penalty)
    return FitResult(gmm, ll, score, ((k, score),))


def search_component_count(
    samples, k_range: tuple[int, int], config: FitConfig | None = None, seed: int | None = None
) -> tuple[int, tuple]:
    """BIC search over K on a fixed random subsample; no final refit.

    The subsample and the per-K fit seeds depend only on ``seed``, never on
    the range, so searches over different ranges see bitwise-identical fits
    for the K values they share.
    """
    config = config or FitConfig()
    if seed is None:
        seed = config.seed
    x = np.ascontiguousarray(samples, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    k_min, k_max = int(k_range[0]), int(k_range[1])
    if not 1 <= k_min <= k_max:
        raise ValueError(f"invalid k range {k_range}")

    if n > config.subsample_size:
        rng = np.random.default_rng(derive_seed(seed, "subsample"))
        sub = x[rng.choice(n, size=config.subsample_size, replace=False)]
    else:
        sub = x
    k_hi = min(k_max, sub.shape[0])
    k_lo = min(k_min, k_hi)

    trace = []
    best_k = k_lo
    best_bic = math.inf
    for k in range(k_lo, k_hi + 1):
        res = fit_em(sub, k, derive_seed(seed, "search", k), config)
        trace.append((k, res.bic))
        if res.bic < best_bic:
            best_bic = res.bic
            best_k = k
        if res.warning:
            best_k = 1
            break
    return best_k, tuple(trace)


def select_components(
    samples, k_range: tuple[int, int], config: FitConfig | None = None, seed: int | None = None
) -> FitResult:
    """Pick K by BIC on a subsample, then refit the winner on all samples.

    Tiny clusters (n <= tiny_cluster_threshold) always get a single
    Gaussian. The returned trace lists every (K, BIC) evaluated during the
    subsample search.
    """
    config = config or FitConfig()
    if seed is None:
        seed = config.seed
    x = np.ascontiguousarray(samples, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    if n < 1:
        raise ValueError("need at least one sample")

    if n <= config.tiny_cluster_threshold:
        return fit_em(x, 1, seed, config)

    best_k, trace = search_component_count(x, k_range, config, seed)
    final = fit_em(x, min(best_k, n), derive_seed(seed, "refit", best_k), config)
    return replace(final, k_search_trace=trace)
