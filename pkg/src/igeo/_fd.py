"""Finite-difference helpers with domain-aware step shrinking."""
import numpy as np

from .errors import StencilError

MAX_HALVINGS = 20


def fit_step(in_domain, theta, h, offsets):
    """Largest step ``h / 2**n`` (n <= 20) keeping ``theta + step * o`` in-domain for all offsets."""
    theta = np.asarray(theta, dtype=float)
    step = float(h)
    for _ in range(MAX_HALVINGS + 1):
        if all(in_domain(theta + step * np.asarray(o)) for o in offsets):
            return step
        step *= 0.5
    raise StencilError(f"stencil of size {h:g} leaves the domain at theta={theta.tolist()}")


def axis_offsets(k):
    eye = np.eye(k)
    return [s * eye[i] for i in range(k) for s in (1.0, -1.0)]


def pair_offsets(k):
    eye = np.eye(k)
    return [s * eye[i] + t * eye[j]
            for i in range(k) for j in range(k) for s in (1.0, -1.0) for t in (1.0, -1.0)]


def central_jacobian(fun, theta, in_domain, rel=1e-6, floor=1e-6):
    """Central-difference Jacobian, rows indexed by parameter: out[i] = d fun / d theta_i.

    Step per coordinate is max(floor, rel * |theta_i|), shrunk toward the domain interior.
    """
    theta = np.asarray(theta, dtype=float)
    k = theta.size
    rows = []
    for i in range(k):
        e = np.zeros(k)
        e[i] = 1.0
        h = fit_step(in_domain, theta, max(floor, rel * abs(theta[i])), [e, -e])
        rows.append((np.asarray(fun(theta + h * e)) - np.asarray(fun(theta - h * e))) / (2 * h))
    return np.array(rows)


def central_gradient(fun, theta, in_domain, h=1e-6):
    """Gradient of a scalar function by central differences."""
    return central_jacobian(lambda t: np.atleast_1d(fun(t)), theta, in_domain,
                            rel=h, floor=h)[:, 0]


def central_hessian(fun, theta, in_domain, h=1e-4):
    """Mixed central second differences; works for array-valued ``fun`` (last axes kept)."""
    theta = np.asarray(theta, dtype=float)
    k = theta.size
    h = fit_step(in_domain, theta, h, pair_offsets(k))
    eye = np.eye(k)
    out = None
    for i in range(k):
        for j in range(i, k):
            acc = 0.0
            for s in (1.0, -1.0):
                for t in (1.0, -1.0):
                    acc = acc + s * t * np.asarray(fun(theta + h * (s * eye[i] + t * eye[j])))
            val = acc / (4 * h * h)
            if out is None:
                out = np.zeros((k, k) + np.shape(val))
            out[i, j] = val
            out[j, i] = val
    return out
