"""Hot numeric kernels: numba @njit loops with vectorized numpy fallbacks.

The module-level names (``eval_gmm1d``, ``accum_gauss2d``, ...) dispatch to
the numba flavor unless ``MIXVIS_DISABLE_NUMBA=1`` (see :mod:`mixvis._accel`).
Both flavors implement identical arithmetic per output element, so results
agree to rounding noise; ``benchmarks/bench_kernels.py`` times them against
each other.

Conventions: float64 contiguous arrays in, float64 buffers accumulated in
place (the splat buffer is float32, the format of the retained accumulation
buffer). 2D buffers are indexed ``buf[row, col]`` = ``buf[y, x]``.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import erf as _np_erf

from ._accel import USE_NUMBA, njit

__all__ = [
    "USE_NUMBA",
    "eval_gmm1d",
    "accum_gauss2d",
    "pcp_accum",
    "splat_accum",
    "wasserstein_gmm_steps",
    "min_mahalanobis2",
    "kde_accum_1d",
    "kde_accum_2d",
]

_SQRT_2PI = math.sqrt(2.0 * math.pi)


# ---------------------------------------------------------------------------
# 1D mixture evaluation


@njit(cache=True)
def eval_gmm1d_numba(xs, weights, means, variances, out):
    k = weights.shape[0]
    for i in range(xs.shape[0]):
        x = xs[i]
        acc = 0.0
        for j in range(k):
            dx = x - means[j]
            acc += (
                weights[j]
                / math.sqrt(2.0 * math.pi * variances[j])
                * math.exp(-0.5 * dx * dx / variances[j])
            )
        out[i] += acc


def eval_gmm1d_numpy(xs, weights, means, variances, out):
    acc = np.zeros_like(xs)
    for j in range(weights.shape[0]):
        dx = xs - means[j]
        acc += (
            weights[j]
            / np.sqrt(2.0 * np.pi * variances[j])
            * np.exp(-0.5 * dx * dx / variances[j])
        )
    out += acc


# ---------------------------------------------------------------------------
# 2D density accumulation with 3-sigma footprint truncation


@njit(cache=True)
def accum_gauss2d_numba(
    buf, x0, dx, y0, dy, amps, mxs, mys, ia, ib, ic, ix0, ix1, iy0, iy1, r2max
):
    for j in range(amps.shape[0]):
        for iy in range(iy0[j], iy1[j]):
            py = y0 + (iy + 0.5) * dy - mys[j]
            for ix in range(ix0[j], ix1[j]):
                px = x0 + (ix + 0.5) * dx - mxs[j]
                q = ia[j] * px * px + 2.0 * ib[j] * px * py + ic[j] * py * py
                if q <= r2max:
                    buf[iy, ix] += amps[j] * math.exp(-0.5 * q)


def accum_gauss2d_numpy(
    buf, x0, dx, y0, dy, amps, mxs, mys, ia, ib, ic, ix0, ix1, iy0, iy1, r2max
):
    for j in range(amps.shape[0]):
        if ix1[j] <= ix0[j] or iy1[j] <= iy0[j]:
            continue
        xs = x0 + (np.arange(ix0[j], ix1[j]) + 0.5) * dx - mxs[j]
        ys = y0 + (np.arange(iy0[j], iy1[j]) + 0.5) * dy - mys[j]
        px = xs[None, :]
        py = ys[:, None]
        q = ia[j] * px * px + 2.0 * ib[j] * px * py + ic[j] * py * py
        contrib = np.where(q <= r2max, amps[j] * np.exp(-0.5 * q), 0.0)
        buf[iy0[j] : iy1[j], ix0[j] : ix1[j]] += contrib


# ---------------------------------------------------------------------------
# Parallel-coordinate panel accumulation (interpolant marginal per column)


@njit(cache=True)
def pcp_accum_numba(buf, us, ys, weights, mi, mj, cii, cij, cjj, amp):
    k = weights.shape[0]
    for iu in range(us.shape[0]):
        u = us[iu]
        a = 1.0 - u
        for j in range(k):
            mean = a * mi[j] + u * mj[j]
            var = a * a * cii[j] + 2.0 * u * a * cij[j] + u * u * cjj[j]
            norm = amp * weights[j] / math.sqrt(2.0 * math.pi * var)
            inv2 = 0.5 / var
            for iy in range(ys.shape[0]):
                dyv = ys[iy] - mean
                buf[iy, iu] += norm * math.exp(-dyv * dyv * inv2)


def pcp_accum_numpy(buf, us, ys, weights, mi, mj, cii, cij, cjj, amp):
    for iu in range(us.shape[0]):
        u = us[iu]
        a = 1.0 - u
        for j in range(weights.shape[0]):
            mean = a * mi[j] + u * mj[j]
            var = a * a * cii[j] + 2.0 * u * a * cij[j] + u * u * cjj[j]
            norm = amp * weights[j] / math.sqrt(2.0 * math.pi * var)
            dyv = ys - mean
            buf[:, iu] += norm * np.exp(-dyv * dyv * (0.5 / var))


# ---------------------------------------------------------------------------
# Back-to-front splatting of 3D Gaussians (infinite-interval ray integrals)


@njit(cache=True)
def splat_accum_numba(
    buf, rects, invs, mus, log_prefs, scales, tfas, colors,
    eye, xcam, ycam, zcam, tanx, tany, near,
):
    height, width = buf.shape[0], buf.shape[1]
    inv_w = 1.0 / width
    inv_h = 1.0 / height
    for k in range(rects.shape[0]):
        i00 = invs[k, 0, 0]
        i01 = invs[k, 0, 1]
        i02 = invs[k, 0, 2]
        i11 = invs[k, 1, 1]
        i12 = invs[k, 1, 2]
        i22 = invs[k, 2, 2]
        e0 = eye[0] - mus[k, 0]
        e1 = eye[1] - mus[k, 1]
        e2 = eye[2] - mus[k, 2]
        # sigma^-1 (eye - mu), reused for every pixel of this component
        s0 = i00 * e0 + i01 * e1 + i02 * e2
        s1 = i01 * e0 + i11 * e1 + i12 * e2
        s2 = i02 * e0 + i12 * e1 + i22 * e2
        log_pref = log_prefs[k]
        scale = scales[k]
        tfa = tfas[k]
        cr = colors[k, 0]
        cg = colors[k, 1]
        cb = colors[k, 2]
        for py in range(rects[k, 2], rects[k, 3]):
            sy = (1.0 - (py + 0.5) * inv_h * 2.0) * tany
            for px in range(rects[k, 0], rects[k, 1]):
                sx = ((px + 0.5) * inv_w * 2.0 - 1.0) * tanx
                d0 = zcam[0] + sx * xcam[0] + sy * ycam[0]
                d1 = zcam[1] + sx * xcam[1] + sy * ycam[1]
                d2 = zcam[2] + sx * xcam[2] + sy * ycam[2]
                dn = math.sqrt(d0 * d0 + d1 * d1 + d2 * d2)
                d0 /= dn
                d1 /= dn
                d2 /= dn
                a = 0.5 * (
                    d0 * (i00 * d0 + i01 * d1 + i02 * d2)
                    + d1 * (i01 * d0 + i11 * d1 + i12 * d2)
                    + d2 * (i02 * d0 + i12 * d1 + i22 * d2)
                )
                b = 0.5 * (d0 * s0 + d1 * s1 + d2 * s2)
                # log_pref + b^2/a <= log-prefactor by Cauchy-Schwarz, so the
                # exponential never overflows
                g = math.exp(log_pref + b * b / a) * math.sqrt(math.pi / a)
                if near > -1e300:  # clip the integral to ray parameters >= near
                    g *= 0.5 * (1.0 - math.erf(math.sqrt(a) * (near + b / a)))
                alpha = (1.0 - math.exp(-scale * g)) * tfa
                buf[py, px, 0] = alpha * cr + (1.0 - alpha) * buf[py, px, 0]
                buf[py, px, 1] = alpha * cg + (1.0 - alpha) * buf[py, px, 1]
                buf[py, px, 2] = alpha * cb + (1.0 - alpha) * buf[py, px, 2]
                buf[py, px, 3] = alpha + (1.0 - alpha) * buf[py, px, 3]


def splat_accum_numpy(
    buf, rects, invs, mus, log_prefs, scales, tfas, colors,
    eye, xcam, ycam, zcam, tanx, tany, near,
):
    height, width = buf.shape[0], buf.shape[1]
    for k in range(rects.shape[0]):
        px0, px1, py0, py1 = rects[k]
        if px1 <= px0 or py1 <= py0:
            continue
        inv = invs[k]
        delta = eye - mus[k]
        sv = inv @ delta
        sx = ((np.arange(px0, px1) + 0.5) / width * 2.0 - 1.0) * tanx
        sy = (1.0 - (np.arange(py0, py1) + 0.5) / height * 2.0) * tany
        dirs = (
            zcam[None, None, :]
            + sx[None, :, None] * xcam[None, None, :]
            + sy[:, None, None] * ycam[None, None, :]
        )
        dirs /= np.sqrt((dirs * dirs).sum(axis=2))[:, :, None]
        a = 0.5 * np.einsum("yxi,ij,yxj->yx", dirs, inv, dirs)
        b = 0.5 * (dirs @ sv)
        g = np.exp(log_prefs[k] + b * b / a) * np.sqrt(np.pi / a)
        if near > -1e300:  # clip the integral to ray parameters >= near
            g *= 0.5 * (1.0 - _np_erf(np.sqrt(a) * (near + b / a)))
        alpha = (1.0 - np.exp(-scales[k] * g)) * tfas[k]
        tile = buf[py0:py1, px0:px1, :]
        blended = alpha[:, :, None] * colors[k, :3][None, None, :] + (
            1.0 - alpha[:, :, None]
        ) * tile[:, :, :3]
        tile[:, :, :3] = blended
        tile[:, :, 3] = alpha + (1.0 - alpha) * tile[:, :, 3]


# ---------------------------------------------------------------------------
# Wasserstein distance between an empirical CDF and a 1D mixture CDF


@njit(cache=True)
def _gmm_cdf_scalar(x, weights, means, sigmas):
    acc = 0.0
    for j in range(weights.shape[0]):
        z = (x - means[j]) / (sigmas[j] * math.sqrt(2.0))
        acc += weights[j] * 0.5 * (1.0 + math.erf(z))
    return acc


@njit(cache=True)
def wasserstein_gmm_steps_numba(sorted_x, lo, hi, weights, means, sigmas, base_nodes, cap_nodes):
    n = sorted_x.shape[0]
    sref = sigmas[0]
    for j in range(1, sigmas.shape[0]):
        if sigmas[j] < sref:
            sref = sigmas[j]
    total = 0.0
    for k in range(n + 1):
        left = lo if k == 0 else sorted_x[k - 1]
        right = hi if k == n else sorted_x[k]
        if right <= left:
            continue
        c = k / n
        width = right - left
        m = base_nodes
        if width > sref:
            m = base_nodes * int(math.ceil(width / sref))
            if m > cap_nodes:
                m = cap_nodes
        if m % 2 == 1:
            m += 1
        h = width / m
        ends = abs(_gmm_cdf_scalar(left, weights, means, sigmas) - c) + abs(
            _gmm_cdf_scalar(right, weights, means, sigmas) - c
        )
        acc4 = 0.0
        acc2 = 0.0
        for i in range(1, m):
            v = abs(_gmm_cdf_scalar(left + i * h, weights, means, sigmas) - c)
            if i % 2 == 1:
                acc4 += v
            else:
                acc2 += v
        total += (h / 3.0) * (ends + 4.0 * acc4 + 2.0 * acc2)
    return total


def _gmm_cdf_array(x, weights, means, sigmas):
    acc = np.zeros_like(x)
    for j in range(weights.shape[0]):
        z = (x - means[j]) / (sigmas[j] * math.sqrt(2.0))
        acc += weights[j] * 0.5 * (1.0 + _np_erf(z))
    return acc


def wasserstein_gmm_steps_numpy(sorted_x, lo, hi, weights, means, sigmas, base_nodes, cap_nodes):
    n = sorted_x.shape[0]
    sref = float(sigmas.min())
    bounds = np.empty(n + 2)
    bounds[0] = lo
    bounds[1 : n + 1] = sorted_x
    bounds[n + 1] = hi
    lefts = bounds[:-1]
    rights = bounds[1:]
    widths = rights - lefts
    cs = np.arange(n + 1) / n
    total = 0.0
    narrow = (widths > 0.0) & (widths <= sref)
    # narrow steps share the node count; batch them in chunks
    idx = np.nonzero(narrow)[0]
    m = base_nodes + (base_nodes % 2)
    simpson_w = np.ones(m + 1)
    simpson_w[1:-1:2] = 4.0
    simpson_w[2:-1:2] = 2.0
    for start in range(0, idx.size, 2048):
        sel = idx[start : start + 2048]
        h = widths[sel] / m
        nodes = lefts[sel, None] + h[:, None] * np.arange(m + 1)[None, :]
        vals = np.abs(_gmm_cdf_array(nodes, weights, means, sigmas) - cs[sel, None])
        total += float(((vals * simpson_w).sum(axis=1) * h / 3.0).sum())
    # wide steps get their own node counts
    for k in np.nonzero(widths > sref)[0]:
        width = widths[k]
        mk = min(int(cap_nodes), base_nodes * int(math.ceil(width / sref)))
        mk += mk % 2
        h = width / mk
        nodes = lefts[k] + h * np.arange(mk + 1)
        vals = np.abs(_gmm_cdf_array(nodes, weights, means, sigmas) - cs[k])
        w = np.ones(mk + 1)
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        total += float((vals * w).sum() * h / 3.0)
    return total


# ---------------------------------------------------------------------------
# Mahalanobis outlier scores: squared distance to the closest component


@njit(cache=True)
def min_mahalanobis2_numba(x, mus, invs, out):
    n, d = x.shape
    k = mus.shape[0]
    for i in range(n):
        best = np.inf
        for j in range(k):
            q = 0.0
            for r in range(d):
                row = 0.0
                for s in range(d):
                    row += invs[j, r, s] * (x[i, s] - mus[j, s])
                q += (x[i, r] - mus[j, r]) * row
            if q < best:
                best = q
        out[i] = best


def min_mahalanobis2_numpy(x, mus, invs, out):
    out[:] = np.inf
    for j in range(mus.shape[0]):
        diff = x - mus[j]
        q = np.einsum("ni,ij,nj->n", diff, invs[j], diff)
        np.minimum(out, q, out=out)


# ---------------------------------------------------------------------------
# Gaussian kernel density estimates (LOD substitution)


@njit(cache=True)
def kde_accum_1d_numba(out, xs, samples, h, amp):
    norm = amp / (samples.shape[0] * h * math.sqrt(2.0 * math.pi))
    for i in range(xs.shape[0]):
        acc = 0.0
        for s in range(samples.shape[0]):
            z = (xs[i] - samples[s]) / h
            acc += math.exp(-0.5 * z * z)
        out[i] += norm * acc


def kde_accum_1d_numpy(out, xs, samples, h, amp):
    norm = amp / (samples.shape[0] * h * math.sqrt(2.0 * math.pi))
    for start in range(0, samples.shape[0], 4096):
        chunk = samples[start : start + 4096]
        z = (xs[:, None] - chunk[None, :]) / h
        out += norm * np.exp(-0.5 * z * z).sum(axis=1)


@njit(cache=True)
def kde_accum_2d_numba(buf, x0, dx, nx, y0, dy, ny, sx, sy, hx, hy, amp, rmax):
    n = sx.shape[0]
    norm = amp / (n * hx * hy * 2.0 * math.pi)
    for s in range(n):
        ix0 = int(math.floor((sx[s] - rmax * hx - x0) / dx - 0.5)) + 1
        ix1 = int(math.ceil((sx[s] + rmax * hx - x0) / dx - 0.5))
        iy0 = int(math.floor((sy[s] - rmax * hy - y0) / dy - 0.5)) + 1
        iy1 = int(math.ceil((sy[s] + rmax * hy - y0) / dy - 0.5))
        if ix0 < 0:
            ix0 = 0
        if iy0 < 0:
            iy0 = 0
        if ix1 > nx - 1:
            ix1 = nx - 1
        if iy1 > ny - 1:
            iy1 = ny - 1
        for iy in range(iy0, iy1 + 1):
            zy = (y0 + (iy + 0.5) * dy - sy[s]) / hy
            if abs(zy) > rmax:
                continue
            ey = math.exp(-0.5 * zy * zy)
            for ix in range(ix0, ix1 + 1):
                zx = (x0 + (ix + 0.5) * dx - sx[s]) / hx
                if abs(zx) > rmax:
                    continue
                buf[iy, ix] += norm * math.exp(-0.5 * zx * zx) * ey


def kde_accum_2d_numpy(buf, x0, dx, nx, y0, dy, ny, sx, sy, hx, hy, amp, rmax):
    n = sx.shape[0]
    norm = amp / (n * hx * hy * 2.0 * math.pi)
    xs = x0 + (np.arange(nx) + 0.5) * dx
    ys = y0 + (np.arange(ny) + 0.5) * dy
    for start in range(0, n, 512):
        cx = sx[start : start + 512]
        cy = sy[start : start + 512]
        zx = (xs[None, :] - cx[:, None]) / hx
        zy = (ys[None, :] - cy[:, None]) / hy
        ex = np.exp(-0.5 * zx * zx)
        ey = np.exp(-0.5 * zy * zy)
        ex[np.abs(zx) > rmax] = 0.0
        ey[np.abs(zy) > rmax] = 0.0
        buf += norm * np.einsum("sy,sx->yx", ey, ex)


# ---------------------------------------------------------------------------
# dispatch

if USE_NUMBA:
    eval_gmm1d = eval_gmm1d_numba
    accum_gauss2d = accum_gauss2d_numba
    pcp_accum = pcp_accum_numba
    splat_accum = splat_accum_numba
    wasserstein_gmm_steps = wasserstein_gmm_steps_numba
    min_mahalanobis2 = min_mahalanobis2_numba
    kde_accum_1d = kde_accum_1d_numba
    kde_accum_2d = kde_accum_2d_numba
else:
    eval_gmm1d = eval_gmm1d_numpy
    accum_gauss2d = accum_gauss2d_numpy
    pcp_accum = pcp_accum_numpy
    splat_accum = splat_accum_numpy
    wasserstein_gmm_steps = wasserstein_gmm_steps_numpy
    min_mahalanobis2 = min_mahalanobis2_numpy
    kde_accum_1d = kde_accum_1d_numpy
    kde_accum_2d = kde_accum_2d_numpy
