"""Software splatting of anisotropic 3D Gaussians.

Per pixel, each Gaussian is integrated along the view ray in closed form.
With ray o + t n, inverse covariance S = Sigma^-1 and delta = o - mu:

    a = (1/2) n' S n
    b = (1/2) delta' S n
    c = |2 pi Sigma|^(-1/2) exp(-(1/2) delta' S delta + b^2 / a)

    G(t0, t1) = c * sqrt(pi/a) * (erf(sqrt(a)(t1 + b/a)) - erf(sqrt(a)(t0 + b/a))) / 2
    G(-inf, inf) = c * sqrt(pi/a)

Splatting uses the infinite form (the camera sitting inside a Gaussian's
support is accepted as a rare-case error); the finite form is exposed for
testing and optional near-plane clipping. Components are composited
back-to-front by distance of their means to the eye, ties broken by
(cluster id, component id) so frames are bit-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import erf

from . import kernels
from .density import ToneMapParams
from .gmm import GaussianComponent, Gmm, symmetric_eigen
from .summary import SubsetKey, Summary

__all__ = [
    "Camera",
    "TransferFunction",
    "TfLut",
    "RenderFrame",
    "ray_coeffs",
    "ray_integral_infinite",
    "ray_integral_interval",
    "gaussian_bbox",
    "build_tf_lut",
    "expected_tf",
    "splat_frame",
    "write_image",
    "read_ppm",
]

_LOG_2PI = math.log(2.0 * math.pi)


# ---------------------------------------------------------------------------
# closed-form ray integrals


def _check_ray(g: GaussianComponent, o, n):
    if g.d != 3:
        raise ValueError(f"ray integration needs a 3D Gaussian, got d={g.d}")
    o = np.asarray(o, dtype=np.float64).reshape(3)
    n = np.asarray(n, dtype=np.float64).reshape(3)
    norm = float(np.linalg.norm(n))
    if abs(norm - 1.0) > 1e-9:
        raise ValueError(f"ray direction must be unit length, |n|={norm}")
    return o, n


def ray_coeffs(g: GaussianComponent, o, n) -> tuple[float, float, float]:
    """Coefficients (a, b, c) of the 1D Gaussian the ray sees."""
    o, n = _check_ray(g, o, n)
    s = g.cov_inv
    delta = o - g.mean
    a = 0.5 * float(n @ s @ n)
    b = 0.5 * float(delta @ s @ n)
    c = math.exp(
        -0.5 * (g.log_det + 3.0 * _LOG_2PI)
        - 0.5 * float(delta @ s @ delta)
        + b * b / a
    )
    return a, b, c


def ray_integral_infinite(g: GaussianComponent, o, n) -> float:
    """Integral of the Gaussian density along the whole ray line."""
    a, _, c = ray_coeffs(g, o, n)
    return c * math.sqrt(math.pi / a)


def ray_integral_interval(g: GaussianComponent, o, n, t0: float, t1: float) -> float:
    """Integral of the Gaussian density over ray parameters [t0, t1]."""
    if t1 < t0:
        raise ValueError(f"interval end {t1} before start {t0}")
    a, b, c = ray_coeffs(g, o, n)
    sq = math.sqrt(a)
    p0 = sq * (t0 + b / a)
    p1 = sq * (t1 + b / a)
    return c * math.sqrt(math.pi / a) * 0.5 * float(erf(p1) - erf(p0))


def gaussian_bbox(g: GaussianComponent, n_sigma: float = 3.0):
    """Oriented box along the principal axes: (center, axis columns, half extents)."""
    if g.d != 3:
        raise ValueError(f"bounding boxes are for 3D Gaussians, got d={g.d}")
    vals, vecs = symmetric_eigen(g.cov)
    half = n_sigma * np.sqrt(np.maximum(vals, 0.0))
    return g.mean.copy(), vecs, half


# ---------------------------------------------------------------------------
# camera


@dataclass(frozen=True)
class Camera:
    eye: tuple
    look_at: tuple
    up: tuple = (0.0, 0.0, 1.0)
    vertical_fov: float = math.radians(45.0)
    width: int = 1920
    height: int = 1080

    def __post_init__(self):
        if not 0.0 < self.vertical_fov < math.pi:
            raise ValueError(f"vertical fov must be in (0, pi), got {self.vertical_fov}")
        if self.width < 1 or self.height < 1:
            raise ValueError("image size must be at least 1x1")
        object.__setattr__(self, "eye", tuple(float(v) for v in self.eye))
        object.__setattr__(self, "look_at", tuple(float(v) for v in self.look_at))
        object.__setattr__(self, "up", tuple(float(v) for v in self.up))
        self.basis()  # fail fast on degenerate geometry

    def basis(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Right-handed (right, up, forward) unit vectors."""
        eye = np.array(self.eye)
        fwd = np.array(self.look_at) - eye
        norm = np.linalg.norm(fwd)
        if norm == 0.0:
            raise ValueError("camera eye and look_at coincide")
        fwd = fwd / norm
        right = np.cross(fwd, np.array(self.up, dtype=np.float64))
        rnorm = np.linalg.norm(right)
        if rnorm < 1e-12:
            raise ValueError("camera up vector is parallel to the view direction")
        right = right / rnorm
        up = np.cross(right, fwd)
        return right, up, fwd

    def tan_half(self) -> tuple[float, float]:
        tany = math.tan(self.vertical_fov / 2.0)
        return tany * self.width / self.height, tany

    def project(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Pixel coordinates (px, py) and camera depth z for (n, 3) points."""
        right, up, fwd = self.basis()
        tanx, tany = self.tan_half()
        v = np.atleast_2d(points) - np.array(self.eye)
        z = v @ fwd
        with np.errstate(divide="ignore", invalid="ignore"):
            px = ((v @ right) / (z * tanx) + 1.0) / 2.0 * self.width - 0.5
            py = (1.0 - (v @ up) / (z * tany)) / 2.0 * self.height - 0.5
        return px, py, z

    @classmethod
    def from_json(cls, doc: dict) -> "Camera":
        fov = doc.get("fov_deg")
        kwargs = {
            "eye": doc["eye"],
            "look_at": doc["look_at"],
            "up": doc.get("up", (0.0, 0.0, 1.0)),
            "width": int(doc.get("width", 1920)),
            "height": int(doc.get("height", 1080)),
        }
        if fov is not None:
            kwargs["vertical_fov"] = math.radians(float(fov))
        return cls(**kwargs)


def auto_camera(summary: Summary, width: int = 1920, height: int = 1080) -> Camera:
    """Frame the position mixtures: look at their center from the diagonal."""
    pos_key = SubsetKey(summary.position_dims())
    lo = np.full(3, np.inf)
    hi = np.full(3, -np.inf)
    for cl in summary.clusters:
        gmm = cl.gmms.get(pos_key)
        if gmm is None:
            continue
        for c in gmm.components:
            s = 3.0 * np.sqrt(np.diag(c.cov))
            lo = np.minimum(lo, c.mean - s)
            hi = np.maximum(hi, c.mean + s)
    if not np.all(np.isfinite(lo)):
        lo = np.zeros(3)
        hi = np.ones(3)
    center = 0.5 * (lo + hi)
    radius = max(float(np.linalg.norm(hi - lo)) / 2.0, 1e-6)
    eye = center + radius * 2.4 * np.array([1.0, -1.0, 0.6]) / np.linalg.norm([1.0, -1.0, 0.6])
    return Camera(tuple(eye), tuple(center), (0.0, 0.0, 1.0), math.radians(45.0), width, height)


# ---------------------------------------------------------------------------
# transfer function + expectation lookup table


class TransferFunction:
    """Piecewise-linear scalar -> RGBA map; clamps outside the control range."""

    __slots__ = ("values", "colors")

    def __init__(self, points):
        pts = sorted(points, key=lambda p: p[0])
        if len(pts) < 1:
            raise ValueError("transfer function needs at least one control point")
        values = np.array([p[0] for p in pts], dtype=np.float64)
        colors = np.array([p[1] for p in pts], dtype=np.float64)
        if colors.ndim != 2 or colors.shape[1] != 4:
            raise ValueError("control colors must be RGBA quadruples")
        if np.any(colors < 0.0) or np.any(colors > 1.0):
            raise ValueError("RGBA components must lie in [0, 1]")
        if np.any(np.diff(values) <= 0.0) and len(pts) > 1:
            raise ValueError("control values must be strictly increasing")
        values.setflags(write=False)
        colors.setflags(write=False)
        self.values = values
        self.colors = colors

    def __call__(self, x) -> np.ndarray:
        xs = np.atleast_1d(np.asarray(x, dtype=np.float64))
        out = np.empty((xs.size, 4))
        for ch in range(4):
            out[:, ch] = np.interp(xs, self.values, self.colors[:, ch])
        return out[0] if np.ndim(x) == 0 else out

    @classmethod
    def from_json(cls, doc) -> "TransferFunction":
        return cls([(float(p[0]), tuple(float(c) for c in p[1])) for p in doc["points"]])

    @classmethod
    def grayscale(cls, lo: float, hi: float, alpha: float = 1.0) -> "TransferFunction":
        return cls([(lo, (0.0, 0.0, 0.0, alpha)), (hi, (1.0, 1.0, 1.0, alpha))])


class TfLut:
    """Expected RGBA of the transfer function under N(mean, var), tabulated.

    Bilinear lookups clamp out-of-range queries and count them in
    ``clamp_count`` as a diagnostic.
    """

    __slots__ = ("means", "variances", "table", "clamp_count")

    def __init__(self, means, variances, table):
        self.means = np.asarray(means, dtype=np.float64)
        self.variances = np.asarray(variances, dtype=np.float64)
        self.table = np.asarray(table, dtype=np.float64)
        if self.table.shape != (self.variances.size, self.means.size, 4):
            raise ValueError("LUT table shape does not match its axes")
        self.clamp_count = 0

    def _axis_coord(self, axis: np.ndarray, v: float) -> float:
        if v < axis[0] or v > axis[-1]:
            self.clamp_count += 1
        v = min(max(v, axis[0]), axis[-1])
        step = (axis[-1] - axis[0]) / (axis.size - 1)
        return (v - axis[0]) / step

    def lookup(self, mean: float, var: float) -> np.ndarray:
        fm = self._axis_coord(self.means, float(mean))
        fv = self._axis_coord(self.variances, float(var))
        im = min(int(fm), self.means.size - 2)
        iv = min(int(fv), self.variances.size - 2)
        tm = fm - im
        tv = fv - iv
        t = self.table
        return (
            (1 - tv) * ((1 - tm) * t[iv, im] + tm * t[iv, im + 1])
            + tv * ((1 - tm) * t[iv + 1, im] + tm * t[iv + 1, im + 1])
        )


def build_tf_lut(
    tf: TransferFunction, mean_range, var_range, resolution=(192, 96), nodes: int = 512
) -> TfLut:
    """Tabulate E[TF | N(mean, var)] by composite Simpson over mean +- 8 sigma.

    The integral is evaluated in standardized coordinates, so one Simpson
    rule (``nodes`` subintervals, >= 256 for the documented accuracy) serves
    every table entry.
    """
    m_lo, m_hi = float(mean_range[0]), float(mean_range[1])
    v_lo, v_hi = float(var_range[0]), float(var_range[1])
    if not (m_hi > m_lo and v_hi > v_lo):
        raise ValueError("LUT ranges must have positive length")
    if v_lo <= 0.0:
        raise ValueError("variance range must be strictly positive")
    nodes = int(nodes)
    if nodes < 256:
        raise ValueError("need at least 256 Simpson subintervals")
    if nodes % 2 == 1:
        nodes += 1
    n_mean, n_var = int(resolution[0]), int(resolution[1])
    means = np.linspace(m_lo, m_hi, n_mean)
    variances = np.linspace(v_lo, v_hi, n_var)

    z = np.linspace(-8.0, 8.0, nodes + 1)
    phi = np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    w = np.ones(nodes + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    hz = 16.0 / nodes
    quad_w = phi * w * (hz / 3.0)

    table = np.empty((n_var, n_mean, 4))
    for iv, var in enumerate(variances):
        sigma = math.sqrt(var)
        xs = means[:, None] + sigma * z[None, :]
        tf_vals = tf(xs.reshape(-1)).reshape(n_mean, nodes + 1, 4)
        table[iv] = np.einsum("mnc,n->mc", tf_vals, quad_w)
    return TfLut(means, variances, np.clip(table, 0.0, 1.0))


def expected_tf(gmm1: Gmm, lut: TfLut) -> np.ndarray:
    """Weight-blended LUT reads: expected RGBA of a 1D mixture."""
    if gmm1.d != 1:
        raise ValueError(f"expected_tf needs a 1D mixture, got d={gmm1.d}")
    out = np.zeros(4)
    for c in gmm1.components:
        out += c.weight * lut.lookup(float(c.mean[0]), float(c.cov[0, 0]))
    return np.clip(out, 0.0, 1.0)


# ---------------------------------------------------------------------------
# frame splatting


@dataclass(frozen=True)
class RenderFrame:
    width: int
    height: int
    pixels: np.ndarray  # (h, w, 4) uint8
    accum: np.ndarray  # (h, w, 4) float32, retained for testing
    camera: Camera | None = None
    tone: ToneMapParams | None = None


def _luminance(rgb: np.ndarray) -> float:
    return float(0.2126 * rgb[0] + 0.7152 * rgb[1] + 0.0722 * rgb[2])


def _component_rect(camera: Camera, g: GaussianComponent, n_sigma: float):
    center, axes, half = gaussian_bbox(g, n_sigma)
    signs = np.array(
        [[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)], dtype=np.float64
    )
    corners = center[None, :] + signs * half[None, :] @ axes.T
    px, py, z = camera.project(corners)
    if np.any(z <= 1e-9):
        return 0, camera.width, 0, camera.height
    x0 = max(0, int(math.floor(px.min())) - 1)
    x1 = min(camera.width, int(math.ceil(px.max())) + 2)
    y0 = max(0, int(math.floor(py.min())) - 1)
    y1 = min(camera.height, int(math.ceil(py.max())) + 2)
    return x0, x1, y0, y1


def splat_frame(
    summary: Summary,
    camera: Camera,
    tf_lut: TfLut,
    color_dim: int,
    doi=None,
    tone: ToneMapParams = ToneMapParams(1.0),
    n_sigma: float = 3.0,
    background=(0.0, 0.0, 0.0),
    outlier_points=None,
    near_clip: float | None = None,
) -> RenderFrame:
    """Back-to-front splat of every cluster's 3D position mixture.

    Each component is weighted by w_j |C|/N; its tone-mapped ray integral
    gives the pixel opacity, further scaled by the expected transfer-function
    alpha of the cluster's ``color_dim`` mixture. Colors are the expected
    transfer-function RGB, desaturated toward their luminance for clusters
    out of focus (doi < 1).

    By default each Gaussian is integrated over the whole ray line (cheap
    and accurate unless the camera sits inside its support); ``near_clip``
    switches to the finite-interval integral from that ray parameter on.
    """
    pos_key = SubsetKey(summary.position_dims())
    color_key = SubsetKey((int(color_dim),))
    weights = np.ones(summary.cluster_count) if doi is None else np.asarray(doi, np.float64)
    if weights.shape != (summary.cluster_count,):
        raise ValueError("doi length must equal the cluster count")

    eye = np.array(camera.eye)
    entries = []
    for cl in summary.clusters:
        gmm3 = cl.gmms.get(pos_key)
        if gmm3 is None:
            continue
        gmm_color = cl.gmms.get(color_key)
        if gmm_color is None:
            raise ValueError(f"cluster {cl.cluster_id} has no 1D mixture for dim {color_dim}")
        rgba = expected_tf(gmm_color, tf_lut)
        gray = _luminance(rgba[:3])
        d = float(weights[cl.cluster_id])
        color = gray + d * (rgba[:3] - gray)
        cluster_w = cl.sample_count / summary.n_total
        for j, comp in enumerate(gmm3.components):
            dist = float(np.linalg.norm(comp.mean - eye))
            entries.append((dist, cl.cluster_id, j, comp, color, rgba[3], cluster_w))

    entries.sort(key=lambda e: (-e[0], e[1], e[2]))  # farthest first, stable ties

    k = len(entries)
    rects = np.zeros((k, 4), dtype=np.int64)
    invs = np.zeros((k, 3, 3))
    mus = np.zeros((k, 3))
    log_prefs = np.zeros(k)
    scales = np.zeros(k)
    tfas = np.zeros(k)
    colors = np.zeros((k, 4))
    for idx, (dist, cid, j, comp, color, tfa, cluster_w) in enumerate(entries):
        rects[idx] = _component_rect(camera, comp, n_sigma)
        invs[idx] = comp.cov_inv
        mus[idx] = comp.mean
        delta = eye - comp.mean
        cq = float(delta @ comp.cov_inv @ delta)
        log_prefs[idx] = -0.5 * (comp.log_det + 3.0 * _LOG_2PI) - 0.5 * cq
        scales[idx] = tone.gamma * comp.weight * cluster_w
        tfas[idx] = tfa
        colors[idx, :3] = color
        colors[idx, 3] = 1.0

    right, up, fwd = camera.basis()
    tanx, tany = camera.tan_half()
    buf = np.empty((camera.height, camera.width, 4), dtype=np.float32)
    buf[:, :, 0] = background[0]
    buf[:, :, 1] = background[1]
    buf[:, :, 2] = background[2]
    buf[:, :, 3] = 1.0
    if k:
        kernels.splat_accum(
            buf, rects, invs, mus, log_prefs, scales, tfas, colors,
            eye, right, up, fwd, tanx, tany,
            -1e308 if near_clip is None else float(near_clip),
        )

    if outlier_points is not None and len(outlier_points):
        pts = np.asarray(outlier_points, dtype=np.float64)
        px, py, z = camera.project(pts[:, :3])
        ix = np.round(px).astype(np.int64)
        iy = np.round(py).astype(np.int64)
        ok = (z > 1e-9) & (ix >= 0) & (ix < camera.width) & (iy >= 0) & (iy < camera.height)
        for x, y, val in zip(ix[ok], iy[ok], pts[ok, 3]):
            rgba = np.asarray(tf_lut.lookup(float(val), float(tf_lut.variances[0])))
            buf[y, x, :3] = rgba[:3]
            buf[y, x, 3] = 1.0

    pixels = np.round(np.clip(buf, 0.0, 1.0) * 255.0).astype(np.uint8)
    return RenderFrame(camera.width, camera.height, pixels, buf, camera, tone)


# ---------------------------------------------------------------------------
# image files


def write_image(frame: RenderFrame, path, format: str = "ppm") -> Path:
    """Write the frame as binary PPM (P6, RGB) or PNG (RGBA, via Pillow)."""
    out = Path(path)
    if format == "ppm":
        header = f"P6\n{frame.width} {frame.height}\n255\n".encode("ascii")
        out.write_bytes(header + frame.pixels[:, :, :3].tobytes())
    elif format == "png":
        from PIL import Image

        Image.fromarray(frame.pixels, mode="RGBA").save(out, format="PNG")
    else:
        raise ValueError(f"unknown image format {format!r}")
    return out


def read_ppm(path) -> np.ndarray:
    """Read back a binary P6 PPM as an (h, w, 3) uint8 array."""
    blob = Path(path).read_bytes()
    parts = blob.split(b"\n", 3)
    if parts[0] != b"P6" or len(parts) < 4:
        raise ValueError("not a binary PPM file")
    w, h = (int(v) for v in parts[1].split())
    if parts[2] != b"255":
        raise ValueError("unsupported PPM depth")
    data = np.frombuffer(parts[3][: w * h * 3], dtype=np.uint8)
    return data.reshape(h, w, 3)
