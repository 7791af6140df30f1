"""Differencing convolutions.

Three operators that replace (or mix with) the plain convolution response:

* CDC: every neighbor is differenced against the window's center pixel,
  blended with vanilla convolution by a trade-off theta.
* RICD step: the response of a small-kernel convolution acts as the center of
  a large-kernel convolution, i.e. the two responses are subtracted.
* IAICD: the differencing center is aggregated from all window neighbors,
  weighted by a normalized illumination map.

All operators use zero padding of (k-1)/2 so outputs keep the input's spatial
size, and all are differentiable through the tensor tape.
"""

from dataclasses import dataclass

from .errors import ConfigError, DomainError, ShapeError
from .tensor import Tensor, box_sum, conv2d, conv2d_raw

MODE_WINDOW_RENORMALIZED = "window_renormalized"
MODE_LITERAL = "literal"
_MODES = (MODE_WINDOW_RENORMALIZED, MODE_LITERAL)


@dataclass
class CdcConfig:
    """theta in [0,1]: 1 = pure central differencing, 0 = vanilla conv."""

    theta: float = 0.7

    def __post_init__(self):
        if not 0.0 <= self.theta <= 1.0:
            raise ConfigError(f"theta must be in [0, 1], got {self.theta}")


@dataclass
class RicdConfig:
    k_large: int = 5
    k_small: int = 3
    steps: int = 3
    hidden_channels: int = 16

    def __post_init__(self):
        if self.k_large % 2 == 0 or self.k_small % 2 == 0:
            raise ConfigError("kernel sizes must be odd")
        if not self.k_large > self.k_small >= 1:
            raise ConfigError(
                f"need k_large > k_small >= 1, got {self.k_large}, {self.k_small}")
        if self.steps < 1:
            raise ConfigError(f"steps must be >= 1, got {self.steps}")
        if self.hidden_channels < 1:
            raise ConfigError("hidden_channels must be positive")


@dataclass
class NormalizedIllumination:
    """Channel-normalized illumination used as IAICD center weights.

    In window_renormalized mode the weights are rescaled inside every sliding
    window (during iaicd_forward) so they sum to 1 there; literal mode uses
    the values as-is.
    """

    values: Tensor
    mode: str = MODE_WINDOW_RENORMALIZED

    def __post_init__(self):
        if self.mode not in _MODES:
            raise ConfigError(f"unknown normalization mode {self.mode!r}")


def _weight_sum_1x1(kern):
    # (C_out, C_in, 1, 1) kernel holding the per-channel-pair weight sums
    return kern.weights.sum(axis=(2, 3), keepdims=True)


def cdc_forward(x, kern, cfg):
    """theta-blend of central differencing and vanilla convolution.

    Computed in the decomposed form: vanilla response minus theta times the
    center pixel scaled by the kernel's weight sum (bias enters once).
    """
    if not isinstance(cfg, CdcConfig):
        cfg = CdcConfig(cfg)
    k = kern.k
    vanilla = conv2d(x, kern, stride=1, padding=(k - 1) // 2)
    if cfg.theta == 0.0:
        return vanilla
    correction = conv2d_raw(x, _weight_sum_1x1(kern))
    return vanilla - cfg.theta * correction


def ricd_step(x, kern_large, kern_small):
    """Large-kernel response minus small-kernel response at the same centers."""
    if kern_large.c_in != kern_small.c_in or kern_large.c_out != kern_small.c_out:
        raise ShapeError(
            f"kernel channels disagree: {kern_large.weights.shape} vs "
            f"{kern_small.weights.shape}")
    big = conv2d(x, kern_large, stride=1, padding=(kern_large.k - 1) // 2)
    small = conv2d(x, kern_small, stride=1, padding=(kern_small.k - 1) // 2)
    return big - small


def normalize_illumination(m, mode=MODE_WINDOW_RENORMALIZED):
    """Divide each channel by the per-pixel sum of absolute channel values."""
    values = m.values if isinstance(m, NormalizedIllumination) else m
    if (values.data <= 0.0).any():
        raise DomainError("illumination must be positive everywhere")
    total = values.abs().sum(axis=(1,), keepdims=True)
    return NormalizedIllumination(values / total, mode)


def _center_weights(x, m, mode):
    """Resolve the per-pixel weight map driving the IAICD center.

    Accepts raw illumination (channel-normalized here) or an already
    normalized map. Weight channels must equal x's channels (per-channel
    centers) or 1 (shared spatial weights). A raw map whose channel count
    matches neither is reduced to its per-pixel channel mean: channel
    normalization would erase per-pixel brightness, which is the only signal
    a channel-agnostic feature map can use.
    """
    if isinstance(m, NormalizedIllumination):
        v = m.values
        mode = m.mode
    else:
        if m.data.shape[1] in (1, x.data.shape[1]):
            v = normalize_illumination(m).values
        else:
            if (m.data <= 0.0).any():
                raise DomainError("illumination must be positive everywhere")
            v = m.mean(axis=(1,), keepdims=True)
    if v.data.shape[0] != x.data.shape[0] or v.data.shape[2:] != x.data.shape[2:]:
        raise ShapeError(
            f"illumination {v.data.shape} does not spatially match input {x.data.shape}")
    if v.data.shape[1] not in (1, x.data.shape[1]):
        raise ShapeError(
            f"weight map needs 1 or {x.data.shape[1]} channels, got {v.data.shape[1]}")
    if mode not in _MODES:
        raise ConfigError(f"unknown normalization mode {mode!r}")
    return v, mode


def iaicd_forward(x, kern, m, mode=MODE_WINDOW_RENORMALIZED):
    """Differencing convolution with an illumination-aggregated center.

    center(p) = sum over the k x k window of weight * x, where the weights
    come from the (channel-normalized) illumination map; out-of-image
    positions contribute zero weight. window_renormalized divides by the
    in-window weight sum so the center is a convex combination.
    """
    v, mode = _center_weights(x, m, mode)
    k = kern.k
    num = box_sum(v * x, k)
    if mode == MODE_WINDOW_RENORMALIZED:
        den = box_sum(v, k).clamp(lo=1e-300)
        center = num / den
    else:
        center = num
    response = conv2d(x, kern, stride=1, padding=(k - 1) // 2)
    return response - conv2d_raw(center, _weight_sum_1x1(kern))
