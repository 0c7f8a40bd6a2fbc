"""Shared oracles: central finite differences and tolerance helpers."""
import numpy as np


def fd_gradient(f, x, h=1e-5):
    """Central finite differences of scalar ``f()`` w.r.t. the array ``x``,
    perturbing ``x`` in place (f must read the same array object)."""
    x = np.asarray(x)
    g = np.zeros_like(x, dtype=np.float64)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f()
        flat[i] = orig - h
        fm = f()
        flat[i] = orig
        gf[i] = (fp - fm) / (2.0 * h)
    return g


def max_rel_err(analytic, numeric):
    """Elementwise |a-n| / max(1, |a|, |n|), reduced to the maximum."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(1.0, np.maximum(np.abs(a), np.abs(n)))
    return float(np.max(np.abs(a - n) / denom))


def assert_grad_close(analytic, numeric, tol=1e-4):
    err = max_rel_err(analytic, numeric)
    assert err <= tol, f"gradient mismatch: max relative error {err:.3e} > {tol}"


def onehot_rows(y, classes):
    y = np.asarray(y)
    out = np.zeros((y.size, classes))
    out[np.arange(y.size), y] = 1.0
    return out
