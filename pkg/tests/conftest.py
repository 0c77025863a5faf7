import numpy as np


def materialize(apply_op, shape):
    """Dense matrix of a linear operator by probing unit vectors."""
    n = int(np.prod(shape))
    cols = np.empty((n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = 1.0
        cols[:, k] = np.asarray(apply_op(e.reshape(shape))).ravel()
    return cols


def rel_err(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = max(np.linalg.norm(b.ravel()), 1e-300)
    return np.linalg.norm((a - b).ravel()) / denom
