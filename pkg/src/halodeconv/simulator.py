"""Synthetic AO frames of an extended body with moons and detector defects."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Tuple

import numpy as np

from .imaging import convolve, dilate_by
from .noise import NoiseModel
from .psfcore import MoffatParams, eval_moffat

OUTLIER_KINDS = ("cosmic", "dead", "hot")


@dataclass
class SceneTruth:
    """Ground truth of a simulated frame.

    ``moons`` holds ``(x, y, flux)`` and ``outliers`` ``(x, y, amplitude,
    kind)`` with integer pixel positions (x = column, y = row).
    """

    object_true: np.ndarray
    psf_true: np.ndarray
    moons: List[Tuple[int, int, float]] = field(default_factory=list)
    outliers: List[Tuple[int, int, float, str]] = field(default_factory=list)
    noise: NoiseModel = field(default_factory=lambda: NoiseModel(1.0, 25.0))
    seed: int = 0
    hot_value: float = 1e5

    def __post_init__(self):
        if self.object_true.shape != self.psf_true.shape:
            raise ValueError("object and PSF frames differ in size")
        if np.any(self.psf_true < 0):
            raise ValueError("PSF must be non-negative")
        if abs(float(self.psf_true.sum()) - 1.0) > 1e-9:
            raise ValueError("PSF must have unit sum")
        support = self.object_true > 0
        for x, y, _ in self.moons:
            if support[y, x]:
                raise ValueError(f"moon at ({x}, {y}) lies on the object")
        for *_, kind in self.outliers:
            if kind not in OUTLIER_KINDS:
                raise ValueError(f"unknown outlier kind {kind!r}")

    def to_dict(self):
        return {
            "moons": [{"x": int(x), "y": int(y), "flux": float(f)}
                      for x, y, f in self.moons],
            "outliers": [{"x": int(x), "y": int(y), "amplitude": float(a),
                          "kind": k} for x, y, a, k in self.outliers],
            "noise": self.noise.to_dict(),
            "seed": int(self.seed),
            "hot_value": float(self.hot_value),
        }


def _grid(shape):
    yy, xx = np.mgrid[:shape[0], :shape[1]]
    return xx.astype(np.float64), yy.astype(np.float64)


def _ellipse(xx, yy, cx, cy, a, b, angle):
    ca, sa = math.cos(angle), math.sin(angle)
    u = ca * (xx - cx) + sa * (yy - cy)
    v = -sa * (xx - cx) + ca * (yy - cy)
    return (u / a) ** 2 + (v / b) ** 2 <= 1.0


def make_object(kind, shape=(256, 256), level=1000.0, **params):
    """Sharp-edged flat object.

    ``disk``: ``center=(x, y)``, ``radius``.  ``dumbbell``: two overlapping
    filled ellipses ``lobes=[(cx, cy, a, b), ...]`` sharing ``angle``, with
    a 10% linear brightness gradient along the lobe axis.  ``mask_file``:
    ``path`` of an image loaded as-is (``level`` ignored).
    """
    if kind == "mask_file":
        from .io import read_image

        return read_image(params["path"])
    if not level > 0:
        raise ValueError(f"level must be > 0, got {level}")
    xx, yy = _grid(shape)
    if kind == "disk":
        cx, cy = params.get("center", (shape[1] // 2, shape[0] // 2))
        radius = float(params.get("radius", min(shape) / 8))
        if radius < 0:
            raise ValueError(f"radius must be >= 0, got {radius}")
        inside = (xx - cx) ** 2 + (yy - cy) ** 2 <= radius ** 2
        return np.where(inside, level, 0.0)
    if kind == "dumbbell":
        lobes = params.get("lobes")
        angle = float(params.get("angle", 0.0))
        if lobes is None:
            ny, nx = shape
            s = min(shape) / 256.0
            lobes = [(nx / 2 - 22 * s, ny / 2, 30 * s, 24 * s),
                     (nx / 2 + 24 * s, ny / 2 + 2 * s, 26 * s, 19 * s)]
        inside = np.zeros(shape, bool)
        for cx, cy, a, b in lobes:
            if not (a > 0 and b > 0):
                raise ValueError(f"lobe semi-axes must be > 0, got {(a, b)}")
            inside |= _ellipse(xx, yy, cx, cy, a, b, angle)
        # brightness ramp of 10% along the lobe axis, flat across it
        t = math.cos(angle) * xx + math.sin(angle) * yy
        t_in = t[inside]
        ramp = (t - t_in.min()) / max(t_in.max() - t_in.min(), 1e-12)
        return np.where(inside, level * (0.95 + 0.1 * ramp), 0.0)
    raise ValueError(f"unknown object kind {kind!r}")


def make_psf(core, shape=(256, 256), ring_radius=30.0, count=0, contrast=0.5,
             seed=0):
    """Unit-sum PSF: Moffat core plus Gaussian speckles on a ring.

    Speckles share the core FWHM, sit at seeded random angles on the ring
    and peak at ``contrast`` times the core halo level at that radius.
    """
    if count and not 0.0 < contrast < 1.0:
        raise ValueError(f"contrast must lie in (0, 1), got {contrast}")
    if count < 0 or ring_radius < 0:
        raise ValueError("count and ring_radius must be non-negative")
    ny, nx = shape
    core = MoffatParams(1.0, core.c1, core.c2, core.alpha1, core.alpha2,
                        core.theta, core.beta, 0.0)
    base = eval_moffat(core, nx, ny)
    psf = base.copy()
    if count:
        rng = np.random.default_rng(seed)
        xx, yy = _grid(shape)
        s = core.fwhm / (2.0 * math.sqrt(2.0 * math.log(2.0)))
        for ang in rng.uniform(0.0, 2.0 * math.pi, size=count):
            sx = core.c1 + ring_radius * math.cos(ang)
            sy = core.c2 + ring_radius * math.sin(ang)
            halo = float(base[min(max(int(round(sy)), 0), ny - 1),
                              min(max(int(round(sx)), 0), nx - 1)])
            psf += contrast * halo * np.exp(
                -((xx - sx) ** 2 + (yy - sy) ** 2) / (2.0 * s * s))
    psf = np.maximum(psf, 1e-14 * psf.max())
    return psf / psf.sum()


def point_sources(shape, sources):
    img = np.zeros(shape)
    for x, y, f, *_ in sources:
        img[int(y), int(x)] += f
    return img


def noiseless_frame(truth):
    d = convolve(truth.object_true, truth.psf_true)
    if truth.moons:
        d = d + convolve(point_sources(d.shape, truth.moons), truth.psf_true)
    return d


def simulate_frame(truth):
    """Draw one noisy frame from ``truth`` (deterministic given the seed)."""
    rng = np.random.default_rng(truth.seed)
    signal = noiseless_frame(truth)
    var = truth.noise.variance(signal)
    d = signal + rng.standard_normal(signal.shape) * np.sqrt(var)
    for x, y, amp, kind in truth.outliers:
        if kind == "cosmic":
            d[y, x] += amp
        elif kind == "dead":
            d[y, x] = 0.0
        else:
            d[y, x] = truth.hot_value
    return d


def predicted_significance(truth, x, y, flux=1.0):
    """Matched-filter significance of a point source of ``flux`` at (x, y).

    ``flux * sqrt(sum_x p(x - x0)^2 w(x))`` with the truth inverse-variance
    weights of the noiseless scene.
    """
    signal = convolve(truth.object_true, truth.psf_true)
    w = 1.0 / truth.noise.variance(signal)
    p2 = convolve(point_sources(signal.shape, [(x, y, 1.0)]), truth.psf_true) ** 2
    return flux * math.sqrt(float(np.sum(p2 * w)))


@dataclass
class SceneSpec:
    """Parameters of the reference moon-detection scene (see :func:`make_scene`)."""

    size: int = 256
    object_kind: str = "dumbbell"
    level: float = 1000.0
    alpha: float = 3.0
    beta: float = 2.0
    ring_radius: float = 30.0
    speckles: int = 8
    contrast: float = 0.5
    eta: float = 1.0
    v_ron: float = 25.0
    moon_sigmas: Tuple[float, ...] = (15.0, 8.0, 5.0)
    moon_distances: Tuple[float, ...] = (18.0, 30.0, 12.0)
    n_cosmic: int = 5
    cosmic_snr: Tuple[float, float] = (30.0, 100.0)
    n_dead: int = 20
    n_hot: int = 0
    seed: int = 1


def _place_moons(obj, spec, rng):
    """Pick moon pixels at the requested distances from the object edge."""
    support = obj > 0
    ny, nx = obj.shape
    from scipy import ndimage

    dist = ndimage.distance_transform_edt(~support)
    xx, yy = _grid(obj.shape)
    cy, cx = np.argwhere(support).mean(axis=0)
    angles = rng.permutation(np.linspace(0.0, 2 * math.pi, 12, endpoint=False))
    moons = []
    for k, dist_k in enumerate(spec.moon_distances):
        ang = angles[k] + rng.uniform(-0.2, 0.2)
        # march outwards along the ray until the edge distance is reached
        for r in np.arange(1.0, max(nx, ny), 0.5):
            x = int(round(cx + r * math.cos(ang)))
            y = int(round(cy + r * math.sin(ang)))
            if not (8 <= x < nx - 8 and 8 <= y < ny - 8):
                break
            if dist[y, x] >= max(dist_k, 3.0):
                moons.append((x, y))
                break
    return moons


def make_scene(spec=None):
    """Dumbbell body, speckled PSF, moons at target significances, defects."""
    spec = spec or SceneSpec()
    rng = np.random.default_rng(spec.seed)
    shape = (spec.size, spec.size)
    obj = make_object(spec.object_kind, shape, level=spec.level)
    c = spec.size // 2
    core = MoffatParams(1.0, c, c, spec.alpha, spec.alpha, 0.0, spec.beta)
    psf = make_psf(core, shape, spec.ring_radius, spec.speckles, spec.contrast,
                   seed=spec.seed)
    nm = NoiseModel(spec.eta, spec.v_ron)
    truth = SceneTruth(obj, psf, noise=nm, seed=spec.seed)
    positions = _place_moons(obj, spec, rng)
    truth.moons = [(x, y, sig / predicted_significance(truth, x, y))
                   for (x, y), sig in zip(positions, spec.moon_sigmas)]

    signal = noiseless_frame(truth)
    taken = dilate_by(point_sources(shape, truth.moons) > 0, 6)
    margin = np.zeros(shape, bool)
    margin[2:-2, 2:-2] = True
    outliers = []
    for kind, count in (("cosmic", spec.n_cosmic), ("dead", spec.n_dead),
                        ("hot", spec.n_hot)):
        for _ in range(count):
            while True:
                x, y = (int(v) for v in rng.integers(2, spec.size - 2, size=2))
                if margin[y, x] and not taken[y, x]:
                    break
            taken[max(y - 2, 0):y + 3, max(x - 2, 0):x + 3] = True
            amp = 0.0
            if kind == "cosmic":
                snr = rng.uniform(*spec.cosmic_snr)
                amp = snr * math.sqrt(float(nm.variance(signal[y, x])))
            outliers.append((x, y, amp, kind))
    truth.outliers = outliers
    return truth


def save_truth(truth, directory):
    """Write ``truth.json`` plus ``object_true.fits`` and ``psf_true.fits``."""
    from .io import write_image

    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    write_image(truth.object_true, out / "object_true.fits")
    write_image(truth.psf_true, out / "psf_true.fits")
    with open(out / "truth.json", "w") as fh:
        json.dump(truth.to_dict(), fh, indent=2, sort_keys=True)


def load_truth(directory):
    """Inverse of :func:`save_truth`."""
    from .io import read_image

    src = Path(directory)
    meta = json.loads((src / "truth.json").read_text())
    return SceneTruth(
        object_true=read_image(src / "object_true.fits"),
        psf_true=read_image(src / "psf_true.fits"),
        moons=[(m["x"], m["y"], m["flux"]) for m in meta["moons"]],
        outliers=[(o["x"], o["y"], o["amplitude"], o["kind"])
                  for o in meta["outliers"]],
        noise=NoiseModel(**meta["noise"]),
        seed=meta["seed"],
        hot_value=meta["hot_value"],
    )
