"""Low-light depth completion toolkit: differencing convolutions, Retinex
enhancement, a small dual-branch completion network, training, synthetic
nighttime RGB-D data, and evaluation metrics."""

from . import _determinism  # noqa: F401  (must run before numpy does real work)

from .errors import (ConfigError, DataError, DomainError, FormatError,
                     IoError, LdcnetError, NoValidPixels, OptimError,
                     ShapeError)
from .tensor import (ConvKernel, Tensor, avg_downsample2, backward, box_sum,
                     concat_channels, conv2d, no_grad, upsample2_bilinear)

__version__ = "0.1.0"

__all__ = [
    "Tensor", "ConvKernel", "conv2d", "avg_downsample2", "upsample2_bilinear",
    "box_sum", "concat_channels", "backward", "no_grad",
    "LdcnetError", "ShapeError", "ConfigError", "DomainError", "FormatError",
    "DataError", "IoError", "OptimError", "NoValidPixels",
    "__version__",
]
