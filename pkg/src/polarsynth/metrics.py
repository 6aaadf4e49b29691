"""Image and polarization metrics: PSNR, SSIM, AoLP angular error and DoLP absolute error."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import convolve2d

from .errors import PreconditionError, ShapeError
from .stokes import STACK_ANGLES_DEG, PolarizationStack, PolarStateMap, synthesize_stack, wrap_aolp

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03

# Reported in place of PSNR when the images are identical.
PSNR_INF = math.inf


def ang_e(phi_gt, phi_est):
    """AoLP angular error in radians, taking the pi-periodicity into account."""
    a = wrap_aolp(phi_gt)
    b = wrap_aolp(phi_est)
    d = np.abs(np.asarray(b) - np.asarray(a))
    # both canonical so |d| < pi; only k in {-1, 0, 1} can be the minimiser
    out = np.minimum(d, np.abs(d - np.pi))
    return out if np.ndim(out) else float(out)


def _masked(mask, shape) -> np.ndarray:
    if mask is None:
        return np.ones(shape, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != shape:
        raise ShapeError(f"mask {mask.shape} vs image {shape}")
    return mask


def mange(aolp_gt, aolp_est, mask=None) -> float:
    """Mean AoLP angular error in degrees over ``mask``."""
    aolp_gt = np.asarray(aolp_gt, dtype=np.float64)
    aolp_est = np.asarray(aolp_est, dtype=np.float64)
    if aolp_gt.shape != aolp_est.shape:
        raise ShapeError(f"{aolp_gt.shape} vs {aolp_est.shape}")
    m = _masked(mask, aolp_gt.shape)
    if not m.any():
        raise PreconditionError("MAngE over an empty mask is undefined")
    # math.fsum keeps the reduction order-independent
    return math.degrees(math.fsum(ang_e(aolp_gt[m], aolp_est[m]).ravel()) / m.sum())


def mabse(dolp_gt, dolp_est, mask=None) -> float:
    dolp_gt = np.asarray(dolp_gt, dtype=np.float64)
    dolp_est = np.asarray(dolp_est, dtype=np.float64)
    if dolp_gt.shape != dolp_est.shape:
        raise ShapeError(f"{dolp_gt.shape} vs {dolp_est.shape}")
    m = _masked(mask, dolp_gt.shape)
    if not m.any():
        raise PreconditionError("MAbsE over an empty mask is undefined")
    return math.fsum(np.abs(dolp_est[m] - dolp_gt[m]).ravel()) / m.sum()


def psnr(img, ref, peak: float = 1.0, mask=None) -> float:
    img = np.asarray(img, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if img.shape != ref.shape:
        raise ShapeError(f"{img.shape} vs {ref.shape}")
    m = _masked(mask, img.shape)
    if not m.any():
        raise PreconditionError("PSNR over an empty mask is undefined")
    mse = math.fsum(((img[m] - ref[m]) ** 2).ravel()) / m.sum()
    if mse == 0:
        return PSNR_INF
    return 10.0 * math.log10(peak**2 / mse)


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    ax = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(ax**2) / (2.0 * sigma**2))
    w = np.outer(g, g)
    return w / w.sum()


def ssim(img, ref, peak: float = 1.0) -> float:
    """Mean SSIM over all fully-covered 11x11 Gaussian windows (sigma 1.5)."""
    img = np.asarray(img, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if img.shape != ref.shape:
        raise ShapeError(f"{img.shape} vs {ref.shape}")
    if img.ndim != 2:
        raise PreconditionError("SSIM expects single-channel images")
    if min(img.shape) < SSIM_WINDOW:
        raise PreconditionError(f"images smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window")
    w = gaussian_window()
    c1 = (SSIM_K1 * peak) ** 2
    c2 = (SSIM_K2 * peak) ** 2

    def filt(a):
        return convolve2d(a, w, mode="valid")

    mu_x, mu_y = filt(img), filt(ref)
    sxx = filt(img * img) - mu_x**2
    syy = filt(ref * ref) - mu_y**2
    sxy = filt(img * ref) - mu_x * mu_y
    num = (2 * mu_x * mu_y + c1) * (2 * sxy + c2)
    den = (mu_x**2 + mu_y**2 + c1) * (sxx + syy + c2)
    return float(np.mean(num / den))


@dataclass
class MetricReport:
    psnr: dict[int, float] = field(default_factory=dict)
    ssim: dict[int, float] = field(default_factory=dict)
    mange: float = float("nan")
    mabse: float = float("nan")
    pixel_count: int = 0

    @property
    def psnr_mean(self) -> float:
        vals = list(self.psnr.values())
        return float(np.mean(vals)) if vals else float("nan")

    @property
    def ssim_mean(self) -> float:
        vals = list(self.ssim.values())
        return float(np.mean(vals)) if vals else float("nan")

    def as_dict(self) -> dict[str, float]:
        out: dict[str, float] = {}
        for a in sorted(self.psnr):
            out[f"psnr_{a:03d}"] = self.psnr[a]
        out["psnr"] = self.psnr_mean
        for a in sorted(self.ssim):
            out[f"ssim_{a:03d}"] = self.ssim[a]
        out["ssim"] = self.ssim_mean
        out["mange"] = self.mange
        out["mabse"] = self.mabse
        out["pixel_count"] = self.pixel_count
        return out

    def to_text(self) -> str:
        return "\n".join(f"{k}={_fmt(v)}" for k, v in self.as_dict().items())

    def csv_header(self) -> str:
        return ",".join(self.as_dict())

    def csv_row(self) -> str:
        return ",".join(_fmt(v) for v in self.as_dict().values())


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.6f}"


def evaluate(
    gt: PolarStateMap,
    est: PolarStateMap,
    gt_stack: PolarizationStack | None = None,
    est_stack: PolarizationStack | None = None,
    peak: float = 1.0,
    dolp_mask=None,
) -> MetricReport:
    """Full report comparing an estimated state (and stack) against ground truth.

    AoLP error is taken where both maps are valid. DoLP error uses ``dolp_mask``
    (default: every pixel). Image metrics use the given stacks, or stacks
    re-synthesized from the states when omitted.
    """
    if gt.shape != est.shape:
        raise ShapeError(f"{gt.shape} vs {est.shape}")
    both = gt.valid & est.valid
    report = MetricReport()
    report.pixel_count = int(both.sum())
    report.mange = mange(gt.aolp, est.aolp, both) if both.any() else float("nan")
    report.mabse = mabse(gt.dolp, est.dolp, dolp_mask)
    gt_stack = gt_stack or synthesize_stack(gt)
    est_stack = est_stack or synthesize_stack(est)
    for angle, a, b in zip(STACK_ANGLES_DEG, est_stack.as_list(), gt_stack.as_list()):
        report.psnr[angle] = psnr(a, b, peak)
        if a.ndim == 2 and min(a.shape) >= SSIM_WINDOW:
            report.ssim[angle] = ssim(a, b, peak)
    return report
