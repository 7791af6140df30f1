"""Retinex enhancement head.

A small recurrent stack of RICD steps estimates a per-pixel illumination map
m in [floor, 1]; the enhanced image is the input divided by m. Training is
self-supervised: a fidelity term pulls m toward the input image and a
Gaussian-weighted smoothness term regularizes m.
"""

from dataclasses import dataclass

import numpy as np

from .diffconv import RicdConfig, ricd_step
from .errors import DomainError, ShapeError
from .tensor import ConvKernel, Tensor, conv2d, shift2d

DEFAULT_FLOOR = 0.01

SMOOTH_WINDOW = 5
SMOOTH_SIGMA = 1.0


@dataclass
class IlluminationMap:
    """Estimated illumination, elementwise within [floor, 1]."""

    values: Tensor
    floor: float = DEFAULT_FLOOR

    def __post_init__(self):
        d = self.values.data
        if d.min() < self.floor - 1e-12 or d.max() > 1.0 + 1e-12:
            raise DomainError(
                f"illumination must lie in [{self.floor}, 1], got "
                f"[{d.min():.4g}, {d.max():.4g}]")


@dataclass
class EnhanceHead:
    """Input projection, per-step RICD kernel pairs, 1x1 output projection."""

    cfg: RicdConfig
    proj_in: ConvKernel
    steps: list  # [(kern_large, kern_small), ...], one pair per RICD step
    proj_out: ConvKernel
    floor: float = DEFAULT_FLOOR

    def __post_init__(self):
        if len(self.steps) != self.cfg.steps:
            raise ShapeError(
                f"head has {len(self.steps)} kernel pairs for {self.cfg.steps} steps")

    def named_tensors(self, prefix="enhance"):
        yield f"{prefix}.proj_in.w", self.proj_in.weights
        yield f"{prefix}.proj_in.b", self.proj_in.bias
        for t, (big, small) in enumerate(self.steps, start=1):
            yield f"{prefix}.step{t}.large.w", big.weights
            yield f"{prefix}.step{t}.large.b", big.bias
            yield f"{prefix}.step{t}.small.w", small.weights
            yield f"{prefix}.step{t}.small.b", small.bias
        yield f"{prefix}.proj_out.w", self.proj_out.weights
        yield f"{prefix}.proj_out.b", self.proj_out.bias


def uniform_kernel(rng, c_out, c_in, k, requires_grad=True, bias=True):
    """Kernel with uniform +-sqrt(6/fan_in) weights and zero bias."""
    bound = np.sqrt(6.0 / (c_in * k * k))
    w = Tensor(rng.uniform(-bound, bound, (c_out, c_in, k, k)), requires_grad)
    b = Tensor(np.zeros(c_out), requires_grad) if bias else None
    return ConvKernel(w, b)


def init_enhance_head(cfg, rng, in_channels=3, floor=DEFAULT_FLOOR):
    hidden = cfg.hidden_channels
    proj_in = uniform_kernel(rng, hidden, in_channels, 3)
    steps = [(uniform_kernel(rng, hidden, hidden, cfg.k_large),
              uniform_kernel(rng, hidden, hidden, cfg.k_small))
             for _ in range(cfg.steps)]
    proj_out = uniform_kernel(rng, in_channels, hidden, 1)
    return EnhanceHead(cfg, proj_in, steps, proj_out, floor)


def estimate_illumination(x, head):
    """Run the recurrent RICD stack and squash to [floor, 1]."""
    if x.data.ndim != 4 or x.data.shape[1] != head.proj_in.c_in:
        raise ShapeError(
            f"expected (N,{head.proj_in.c_in},H,W) input, got {x.data.shape}")
    f = conv2d(x, head.proj_in, padding=(head.proj_in.k - 1) // 2)
    for big, small in head.steps:
        f = ricd_step(f, big, small).relu()
    z = conv2d(f, head.proj_out)
    eps = head.floor
    m = (eps + (1.0 - eps) * z.sigmoid()).clamp(eps, 1.0)
    return IlluminationMap(m, eps)


def retinex_enhance(x, illum):
    """Pixel-wise division by the illumination map, clamped to [0, 1]."""
    m = illum.values if isinstance(illum, IlluminationMap) else illum
    floor = illum.floor if isinstance(illum, IlluminationMap) else DEFAULT_FLOOR
    if m.data.shape != x.data.shape and m.data.shape[1] != 1:
        raise ShapeError(f"image {x.data.shape} vs illumination {m.data.shape}")
    if m.data.min() < floor - 1e-12:
        raise DomainError(f"illumination below its floor {floor}")
    return (x / m).clamp(0.0, 1.0)


def fidelity_loss(illum, x):
    """Mean squared gap between the illumination map and the input image."""
    m = illum.values if isinstance(illum, IlluminationMap) else illum
    if m.data.size == 0:
        raise DomainError("empty input")
    if m.data.shape != x.data.shape:
        raise ShapeError(f"shape mismatch {m.data.shape} vs {x.data.shape}")
    d = m - x
    return (d * d).mean()


_smooth_cache = {}


def _smooth_constants(h, w):
    """Per-offset Gaussian weights divided by each pixel's in-image weight sum."""
    key = (h, w)
    if key not in _smooth_cache:
        r = SMOOTH_WINDOW // 2
        g = {(dy, dx): np.exp(-(dy * dy + dx * dx) / (2.0 * SMOOTH_SIGMA ** 2))
             for dy in range(-r, r + 1) for dx in range(-r, r + 1)}
        s = np.zeros((h, w))
        masks = {}
        for (dy, dx), gv in g.items():
            mask = np.zeros((h, w))
            ys = slice(max(-dy, 0), h + min(-dy, 0))
            xs = slice(max(-dx, 0), w + min(-dx, 0))
            mask[ys, xs] = 1.0
            masks[(dy, dx)] = mask
            s += gv * mask
        weights = {off: g[off] * masks[off] / s for off in g if off != (0, 0)}
        _smooth_cache[key] = weights
    return _smooth_cache[key]


def smoothness_loss(illum):
    """Gaussian-weighted mean absolute gap between each pixel and its 5x5
    neighbors; weights renormalized over in-image taps, mean over all elements."""
    m = illum.values if isinstance(illum, IlluminationMap) else illum
    n_, c_, h, w = m.data.shape
    if h < SMOOTH_WINDOW or w < SMOOTH_WINDOW:
        raise DomainError(f"map {h}x{w} smaller than the {SMOOTH_WINDOW}x{SMOOTH_WINDOW} window")
    weights = _smooth_constants(h, w)
    total = None
    for (dy, dx), wmap in weights.items():
        neighbor = shift2d(m, -dy, -dx)
        term = ((m - neighbor).abs() * Tensor(wmap[None, None])).sum()
        total = term if total is None else total + term
    return total * (1.0 / m.data.size)
