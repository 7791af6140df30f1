"""Depth and image-quality metrics.

Depth metrics are computed over valid pixels only. Inverse metrics use
1000/depth so that meters in give 1/kilometers out, following the usual
completion-benchmark convention. Delta accuracies use a strict `<` threshold.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NoValidPixels


@dataclass
class MetricReport:
    """Named metric values with unit strings."""

    values: dict = field(default_factory=dict)  # name -> (value, unit)

    def add(self, name, value, unit):
        self.values[name] = (float(value), unit)

    def __getitem__(self, name):
        return self.values[name][0]

    def __contains__(self, name):
        return name in self.values

    def to_json(self):
        return json.dumps({k: {"value": v, "unit": u}
                           for k, (v, u) in self.values.items()}, sort_keys=True)


def _valid_pair(o, d, valid, need_positive):
    o = np.asarray(o, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    v = np.asarray(valid, dtype=bool)
    if o.shape != d.shape or o.shape != v.shape:
        raise DomainError(f"shape mismatch: {o.shape}, {d.shape}, {v.shape}")
    if not v.any():
        raise NoValidPixels("no valid pixels to evaluate")
    ov, dv = o[v], d[v]
    if need_positive and (ov.min() <= 0.0 or dv.min() <= 0.0):
        raise DomainError("depths must be positive on valid pixels")
    return ov, dv


def completion_metrics(o, d, valid):
    """RMSE/MAE in meters, iRMSE/iMAE in 1/km over the valid mask."""
    ov, dv = _valid_pair(o, d, valid, need_positive=True)
    diff = ov - dv
    idiff = 1000.0 / ov - 1000.0 / dv
    rep = MetricReport()
    rep.add("rmse", np.sqrt(np.mean(diff ** 2)), "m")
    rep.add("mae", np.mean(np.abs(diff)), "m")
    rep.add("irmse", np.sqrt(np.mean(idiff ** 2)), "1/km")
    rep.add("imae", np.mean(np.abs(idiff)), "1/km")
    return rep


def estimation_metrics(o, d, valid):
    """Relative errors, log RMSE and delta accuracies over the valid mask."""
    ov, dv = _valid_pair(o, d, valid, need_positive=True)
    diff = ov - dv
    ratio = np.maximum(ov / dv, dv / ov)
    rep = MetricReport()
    rep.add("abs_rel", np.mean(np.abs(diff) / dv), "")
    rep.add("sq_rel", np.mean(diff ** 2 / dv), "")
    rep.add("rmse", np.sqrt(np.mean(diff ** 2)), "m")
    rep.add("rmse_log", np.sqrt(np.mean((np.log(ov) - np.log(dv)) ** 2)), "")
    for i in (1, 2, 3):
        rep.add(f"delta{i}", np.mean(ratio < 1.25 ** i), "")
    return rep


def discrete_entropy(img):
    """Shannon entropy in bits of the 8-bit quantized intensity histogram.

    Values are clipped to [0,1], quantized to 256 levels with round-half-up,
    and channels share one pooled histogram.
    """
    arr = np.asarray(img.data if hasattr(img, "data") else img, dtype=np.float64)
    if arr.size == 0:
        raise DomainError("empty image")
    q = np.floor(np.clip(arr, 0.0, 1.0) * 255.0 + 0.5).astype(np.int64)
    counts = np.bincount(q.ravel(), minlength=256)
    p = counts[counts > 0] / q.size
    return float(-(p * np.log2(p)).sum())
