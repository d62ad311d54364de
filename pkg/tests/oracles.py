"""Independent reference implementations used by the tests."""

import math

import numpy as np


def jacobi_eigh(a, tol=1e-15, max_sweeps=100):
    """Cyclic Jacobi rotations for a dense symmetric matrix.

    Returns eigenvalues (descending) and eigenvectors as columns.
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    v = np.eye(n)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(a, -1) ** 2))
        if off <= tol * max(1.0, np.sqrt(np.sum(a * a))):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if a[p, q] == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * a[p, q])
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
                v = v @ rot
    lam = np.diag(a)
    order = np.argsort(lam)[::-1]
    return lam[order], v[:, order]


def ridge_normal_equations(x, y, lam):
    """(X^T X + lam I) W = X^T Y by a dense solve."""
    x = np.asarray(x, dtype=float)
    return np.linalg.solve(x.T @ x + lam * np.eye(x.shape[1]), x.T @ np.asarray(y, dtype=float))


def wide_deep_reference(params, layers, wide_mean, wide_std, deep_mean, deep_std, wide, deep):
    """Scalar loops over one record, written without matrix products."""
    xw = [(w - m) / s for w, m, s in zip(wide, wide_mean, wide_std)]
    h = [(d - m) / s for d, m, s in zip(deep, deep_mean, deep_std)]
    for k in range(len(layers)):
        weights, bias = params[f"W{k}"], params[f"b{k}"]
        nxt = []
        for row in range(weights.shape[0]):
            acc = bias[row]
            for col in range(weights.shape[1]):
                acc += weights[row, col] * h[col]
            nxt.append(np.tanh(acc))
        h = nxt
    out = float(params["bias"])
    for w, x in zip(params["wide"], xw):
        out += w * x
    for w, x in zip(params["head"], h):
        out += w * x
    return out


def naive_fraction(raster, a_name, b_name, threshold):
    """Scalar per-pixel loop: count pixels with (a-b)/(a+b) above threshold."""
    a, b = raster.band(a_name), raster.band(b_name)
    hits = valid = 0
    for i in range(raster.height):
        for j in range(raster.width):
            x, y = float(a[i, j]), float(b[i, j])
            if math.isnan(x) or math.isnan(y) or x + y == 0:
                continue
            valid += 1
            if min(1.0, max(-1.0, (x - y) / (x + y))) > threshold:
                hits += 1
    return hits / valid


def normal_equation_fit(raw, ref):
    """Solve [[Sxx, Sx], [Sx, n]] [scale, offset] = [Sxy, Sy] by Cramer's rule."""
    n = len(raw)
    sx, sy = sum(raw), sum(ref)
    sxx = sum(x * x for x in raw)
    sxy = sum(x * y for x, y in zip(raw, ref))
    det = sxx * n - sx * sx
    return (sxy * n - sx * sy) / det, (sxx * sy - sx * sxy) / det
