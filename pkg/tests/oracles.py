"""Independent nested-loop reference implementations.

Everything here is written as plain per-pixel loops over numpy scalars, kept
deliberately separate from the library's vectorized code paths so the two
routes can disagree.
"""

import numpy as np


def conv2d_oracle(x, w, b=None, stride=1, padding=0):
    n, c, h, wd = x.shape
    co, ci, k, _ = w.shape
    ho = (h + 2 * padding - k) // stride + 1
    wo = (wd + 2 * padding - k) // stride + 1
    out = np.zeros((n, co, ho, wo))
    r = k // 2
    for bi in range(n):
        for o in range(co):
            for oy in range(ho):
                for ox in range(wo):
                    acc = 0.0
                    cy = oy * stride - padding + r
                    cx = ox * stride - padding + r
                    for ic in range(ci):
                        for dy in range(-r, r + 1):
                            for dx in range(-r, r + 1):
                                yy, xx = cy + dy, cx + dx
                                if 0 <= yy < h and 0 <= xx < wd:
                                    acc += w[o, ic, dy + r, dx + r] * x[bi, ic, yy, xx]
                    if b is not None:
                        acc += b[o]
                    out[bi, o, oy, ox] = acc
    return out


def cdc_oracle(x, w, b, theta):
    """Literal theta-mixture of central-differencing and vanilla convolution.

    Zero padding: out-of-image neighbors read 0 but still subtract the center,
    matching the decomposed form where the full kernel weight sum multiplies
    the center pixel.
    """
    n, c, h, wd = x.shape
    co, ci, k, _ = w.shape
    r = k // 2
    out = np.zeros((n, co, h, wd))
    for bi in range(n):
        for o in range(co):
            for cy in range(h):
                for cx in range(wd):
                    vanilla = 0.0
                    cdc = 0.0
                    for ic in range(ci):
                        center = x[bi, ic, cy, cx]
                        for dy in range(-r, r + 1):
                            for dx in range(-r, r + 1):
                                yy, xx = cy + dy, cx + dx
                                v = x[bi, ic, yy, xx] if (0 <= yy < h and 0 <= xx < wd) else 0.0
                                wt = w[o, ic, dy + r, dx + r]
                                vanilla += wt * v
                                cdc += wt * (v - center)
                    val = theta * cdc + (1.0 - theta) * vanilla
                    if b is not None:
                        val += b[o]
                    out[bi, o, cy, cx] = val
    return out


def iaicd_oracle(x, w, b, weight_map, mode):
    """Differencing convolution whose center aggregates window neighbors.

    weight_map: (N, Cv, H, W) with Cv == C (per-channel weights) or Cv == 1
    (shared spatial weights). window_renormalized divides by the in-image
    weight sum; literal uses the weights as-is. Out-of-image neighbors carry
    zero weight in the center; the outer differencing uses zero padding with
    the full kernel sum multiplying the center (as in cdc_oracle).
    """
    n, c, h, wd = x.shape
    co, ci, k, _ = w.shape
    r = k // 2
    cv = weight_map.shape[1]
    out = np.zeros((n, co, h, wd))
    for bi in range(n):
        centers = np.zeros((ci, h, wd))
        for ic in range(ci):
            vc = 0 if cv == 1 else ic
            for cy in range(h):
                for cx in range(wd):
                    num = 0.0
                    den = 0.0
                    for dy in range(-r, r + 1):
                        for dx in range(-r, r + 1):
                            yy, xx = cy + dy, cx + dx
                            if 0 <= yy < h and 0 <= xx < wd:
                                wt = weight_map[bi, vc, yy, xx]
                                num += wt * x[bi, ic, yy, xx]
                                den += wt
                    if mode == "window_renormalized":
                        centers[ic, cy, cx] = num / den
                    else:
                        centers[ic, cy, cx] = num
        for o in range(co):
            for cy in range(h):
                for cx in range(wd):
                    acc = 0.0
                    for ic in range(ci):
                        for dy in range(-r, r + 1):
                            for dx in range(-r, r + 1):
                                yy, xx = cy + dy, cx + dx
                                v = x[bi, ic, yy, xx] if (0 <= yy < h and 0 <= xx < wd) else 0.0
                                acc += w[o, ic, dy + r, dx + r] * (v - centers[ic, cy, cx])
                    if b is not None:
                        acc += b[o]
                    out[bi, o, cy, cx] = acc
    return out


def cdc_literal_shift(x, w, b, theta):
    """Vectorized literal theta-mixture via explicit shifts (no library code).

    Same zero-padding convention as cdc_oracle but fast enough for the
    1000-case identity suite.
    """
    n, c, h, wd = x.shape
    co, ci, k, _ = w.shape
    r = k // 2
    vanilla = np.zeros((n, co, h, wd))
    wsum = w.sum(axis=(2, 3))  # (co, ci)
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            shifted = np.zeros_like(x)
            ys = slice(max(-dy, 0), h + min(-dy, 0))
            xs = slice(max(-dx, 0), wd + min(-dx, 0))
            yd = slice(max(dy, 0), h + min(dy, 0))
            xd = slice(max(dx, 0), wd + min(dx, 0))
            shifted[:, :, ys, xs] = x[:, :, yd, xd]
            vanilla += np.einsum("oc,nchw->nohw", w[:, :, dy + r, dx + r], shifted)
    centered = vanilla - np.einsum("oc,nchw->nohw", wsum, x)
    out = theta * centered + (1.0 - theta) * vanilla
    if b is not None:
        out += b.reshape(1, -1, 1, 1)
    return out


def block_mean_oracle(x):
    n, c, h, w = x.shape
    out = np.zeros((n, c, h // 2, w // 2))
    for bi in range(n):
        for ic in range(c):
            for oy in range(h // 2):
                for ox in range(w // 2):
                    s = 0.0
                    for dy in range(2):
                        for dx in range(2):
                            s += x[bi, ic, 2 * oy + dy, 2 * ox + dx]
                    out[bi, ic, oy, ox] = s / 4.0
    return out


def bilinear_up_oracle(x):
    """2x upsampling; output center i maps to (i + 0.5)/2 - 0.5, taps clamped."""
    n, c, h, w = x.shape
    out = np.zeros((n, c, 2 * h, 2 * w))
    for bi in range(n):
        for ic in range(c):
            for oy in range(2 * h):
                for ox in range(2 * w):
                    sy = (oy + 0.5) / 2.0 - 0.5
                    sx = (ox + 0.5) / 2.0 - 0.5
                    y0, x0 = int(np.floor(sy)), int(np.floor(sx))
                    ty, tx = sy - y0, sx - x0
                    y0c, y1c = min(max(y0, 0), h - 1), min(max(y0 + 1, 0), h - 1)
                    x0c, x1c = min(max(x0, 0), w - 1), min(max(x0 + 1, 0), w - 1)
                    v = ((1 - ty) * (1 - tx) * x[bi, ic, y0c, x0c]
                         + (1 - ty) * tx * x[bi, ic, y0c, x1c]
                         + ty * (1 - tx) * x[bi, ic, y1c, x0c]
                         + ty * tx * x[bi, ic, y1c, x1c])
                    out[bi, ic, oy, ox] = v
    return out


def smoothness_oracle(m, sigma=1.0, window=5):
    """Mean over all elements of Gaussian-weighted absolute neighbor gaps.

    Weights: G(dy,dx) = exp(-(dy^2+dx^2)/(2 sigma^2)) over the window
    (center included), renormalized per pixel to sum 1 over in-image taps.
    """
    n, c, h, w = m.shape
    r = window // 2
    g = np.array([[np.exp(-(dy * dy + dx * dx) / (2.0 * sigma * sigma))
                   for dx in range(-r, r + 1)] for dy in range(-r, r + 1)])
    total = 0.0
    for bi in range(n):
        for ic in range(c):
            for cy in range(h):
                for cx in range(w):
                    s = 0.0
                    acc = 0.0
                    for dy in range(-r, r + 1):
                        for dx in range(-r, r + 1):
                            yy, xx = cy + dy, cx + dx
                            if 0 <= yy < h and 0 <= xx < w:
                                s += g[dy + r, dx + r]
                    for dy in range(-r, r + 1):
                        for dx in range(-r, r + 1):
                            yy, xx = cy + dy, cx + dx
                            if 0 <= yy < h and 0 <= xx < w:
                                acc += (g[dy + r, dx + r] / s) * abs(m[bi, ic, cy, cx] - m[bi, ic, yy, xx])
                    total += acc
    return total / m.size


def completion_metrics_oracle(o, d, valid):
    se = ae = ise = iae = 0.0
    cnt = 0
    flat_o, flat_d, flat_v = o.ravel(), d.ravel(), valid.ravel()
    for i in range(flat_o.size):
        if flat_v[i]:
            diff = flat_o[i] - flat_d[i]
            se += diff * diff
            ae += abs(diff)
            idiff = 1000.0 / flat_o[i] - 1000.0 / flat_d[i]
            ise += idiff * idiff
            iae += abs(idiff)
            cnt += 1
    return {
        "rmse": np.sqrt(se / cnt),
        "mae": ae / cnt,
        "irmse": np.sqrt(ise / cnt),
        "imae": iae / cnt,
    }


def estimation_metrics_oracle(o, d, valid):
    absrel = sqrel = se = sle = 0.0
    d1 = d2 = d3 = 0
    cnt = 0
    flat_o, flat_d, flat_v = o.ravel(), d.ravel(), valid.ravel()
    for i in range(flat_o.size):
        if flat_v[i]:
            diff = flat_o[i] - flat_d[i]
            absrel += abs(diff) / flat_d[i]
            sqrel += diff * diff / flat_d[i]
            se += diff * diff
            sle += (np.log(flat_o[i]) - np.log(flat_d[i])) ** 2
            ratio = max(flat_o[i] / flat_d[i], flat_d[i] / flat_o[i])
            d1 += ratio < 1.25
            d2 += ratio < 1.25 ** 2
            d3 += ratio < 1.25 ** 3
            cnt += 1
    return {
        "abs_rel": absrel / cnt,
        "sq_rel": sqrel / cnt,
        "rmse": np.sqrt(se / cnt),
        "rmse_log": np.sqrt(sle / cnt),
        "delta1": d1 / cnt,
        "delta2": d2 / cnt,
        "delta3": d3 / cnt,
    }


def fd_gradient(f, arr, h=1e-5):
    """Central finite differences of scalar f(arr) w.r.t. every entry of arr."""
    g = np.zeros_like(arr)
    it = np.nditer(arr, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        orig = arr[idx]
        arr[idx] = orig + h
        fp = f()
        arr[idx] = orig - h
        fm = f()
        arr[idx] = orig
        g[idx] = (fp - fm) / (2.0 * h)
        it.iternext()
    return g


def rel_err(a, b, floor=1e-8):
    """Elementwise relative error with an absolute floor for near-zero pairs."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    scale = np.maximum(np.abs(a), np.abs(b))
    err = np.abs(a - b)
    out = np.where(scale < floor, 0.0, err / np.maximum(scale, floor))
    return out
