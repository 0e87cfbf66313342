"""Exact estimator moments and Cramer-Rao gap checks under escort weightings.

All expectations are finite sums over the alphabet.  Estimators may depend on
theta, so every check is pointwise: the report carries the theta it holds at.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _fd
from .distributions import EscortMap, ParametricModel, as_pmf, escort, escort_map_model
from .eguchi import MetricMatrix, alpha_metric_closed, generalized_metric_closed
from .errors import (BiasError, BoundViolationError, NotExponentialEscortError,
                     SizeMismatchError)

BIAS_TOL = 1e-10
SENSITIVITY_TOL = 1e-8
PSD_TOL = -1e-8
EFFICIENT_EIG_TOL = 1e-9
EFFICIENT_NORM_TOL = 1e-8


@dataclass(frozen=True)
class Estimator:
    """values[i, x] = estimate of component i when symbol x is observed."""

    values: np.ndarray
    target: np.ndarray
    weighting: str = "p"

    def __post_init__(self):
        v = np.atleast_2d(np.array(self.values, dtype=float))
        t = np.atleast_1d(np.array(self.target, dtype=float))
        if t.shape != (v.shape[0],):
            raise SizeMismatchError(f"target has shape {t.shape}, estimator has {v.shape[0]} rows")
        v.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "target", t)

    @property
    def m(self) -> int:
        return self.values.shape[0]


def indicator_estimator(theta) -> Estimator:
    """theta_hat_i(x) = 1{x = i} on the alphabet {0..M}; unbiased on the simplex chart."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    M = theta.size
    return Estimator(np.hstack([np.zeros((M, 1)), np.eye(M)]), theta, "p")


def exact_moments(est: Estimator, w):
    w = as_pmf(w)
    if est.values.shape[1] != w.size:
        raise SizeMismatchError(f"estimator covers {est.values.shape[1]} symbols, weighting {w.size}")
    mean = est.values @ w
    c = est.values - mean[:, None]
    cov = (c * w) @ c.T
    return mean, 0.5 * (cov + cov.T)


def _bias_norm(est, w):
    mean, _ = exact_moments(est, w)
    return float(np.max(np.abs(mean - est.target)))


def _require_unbiased(est, w, what):
    b = _bias_norm(est, w)
    if b > BIAS_TOL:
        raise BiasError(f"estimator is biased under {what}: max |E[est] - target| = {b:.3e}")
    return b


def _require_sensitivity(est, dw, expected, what):
    # sum_x d_i w(x) est_j(x) must match d_i target_j for the bound to apply
    sens = dw @ est.values.T
    err = float(np.max(np.abs(sens - expected)))
    if err > SENSITIVITY_TOL:
        raise BiasError(f"estimator is not locally unbiased under {what}: "
                        f"sensitivity off by {err:.3e}")


def _escort_pair(S, theta, alpha):
    p = S.eval(theta)
    return p, escort(p, alpha)


def to_escort_estimator(est: Estimator, S: ParametricModel, theta, alpha: float,
                        centered: bool = True) -> Estimator:
    """Turn an estimator unbiased under p_theta into one unbiased under its alpha-escort.

    The centered form theta + (p/p^(a)) (est - theta) keeps the covariance with the
    score, so an efficient input stays efficient for the alpha bound.  The plain
    reweighting (p/p^(a)) est (``centered=False``) is also unbiased but only
    pointwise: its theta-derivative of the mean is wrong and it can undercut
    [G^(a)]^-1 when alpha > 1.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    p, w = _escort_pair(S, theta, alpha)
    _require_unbiased(est, p, "p_theta")
    r = p / w
    vals = (est.target[:, None] + r * (est.values - est.target[:, None])) if centered \
        else r * est.values
    return Estimator(vals, est.target, f"escort:{alpha:g}")


def from_escort_estimator(est: Estimator, S: ParametricModel, theta, alpha: float,
                          centered: bool = True) -> Estimator:
    """Inverse of :func:`to_escort_estimator`."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    p, w = _escort_pair(S, theta, alpha)
    _require_unbiased(est, w, f"the {alpha:g}-escort")
    r = w / p
    vals = (est.target[:, None] + r * (est.values - est.target[:, None])) if centered \
        else r * est.values
    return Estimator(vals, est.target, "p")


@dataclass
class CrlbReport:
    theta: np.ndarray
    alpha_or_F: str
    variance: np.ndarray
    bound: np.ndarray
    estimator_bias_norm: float
    condition_number: float = field(default=float("nan"))

    @property
    def gap(self) -> np.ndarray:
        g = self.variance - self.bound
        return 0.5 * (g + g.T)

    @property
    def min_gap_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.gap)[0])

    @property
    def gap_norm(self) -> float:
        return float(np.linalg.norm(self.gap))

    @property
    def efficient(self) -> bool:
        return abs(self.min_gap_eigenvalue) <= EFFICIENT_EIG_TOL and self.gap_norm <= EFFICIENT_NORM_TOL

    @property
    def bound_holds(self) -> bool:
        return self.min_gap_eigenvalue >= PSD_TOL

    def assert_bound(self):
        if not self.bound_holds:
            raise BoundViolationError(
                f"variance undercuts the bound: min gap eigenvalue {self.min_gap_eigenvalue:.3e}",
                report=self)
        return self

    def to_dict(self):
        return {"theta": self.theta.tolist(), "alpha_or_F": self.alpha_or_F,
                "variance": self.variance.tolist(), "bound": self.bound.tolist(),
                "gap": self.gap.tolist(), "min_gap_eigenvalue": self.min_gap_eigenvalue,
                "efficient": self.efficient, "estimator_bias_norm": self.estimator_bias_norm}


def alpha_crlb_report(S: ParametricModel, theta, alpha: float, est: Estimator) -> CrlbReport:
    """Var_{p^(a)}[est] against [G^(a)]^-1 for an estimator unbiased under the alpha-escort.

    Besides the pointwise mean, the estimator must satisfy
    sum_x (p^(a)/p) (est_j - theta_j) d_i p = delta_ij, which is what unbiasedness in a
    neighbourhood of theta buys the classical proof; BiasError otherwise.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    p, w = _escort_pair(S, theta, alpha)
    bias = _require_unbiased(est, w, f"the {alpha:g}-escort")
    centered = Estimator(est.target[:, None] + (w / p) * (est.values - est.target[:, None]),
                        est.target)
    _require_sensitivity(centered, S.jacobian(theta), np.eye(S.k), f"the {alpha:g}-escort")
    G = alpha_metric_closed(S, theta, alpha)
    _, var = exact_moments(est, w)
    return CrlbReport(theta, f"alpha:{alpha:g}", var, G.inverse(), bias, G.condition_number)


def generalized_crlb_report(S: ParametricModel, theta, F: EscortMap, est: Estimator,
                            target_jacobian=None) -> CrlbReport:
    """Var_{F(p)}[est] against T^T [G^(f,F)]^-1 T with T[i, j] = d_i E_{F(p)}[est_j].

    ``target_jacobian`` declares T (identity by default); the estimator is checked
    to have that sensitivity.  G^(f,F) does not depend on f, so only F is needed.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    SF = escort_map_model(S, F)
    w = SF.eval(theta)
    bias = _require_unbiased(est, w, str(F))
    T = np.eye(S.k) if target_jacobian is None else np.asarray(target_jacobian, dtype=float)
    _require_sensitivity(est, SF.jacobian(theta), T, str(F))
    G = generalized_metric_closed(S, theta, F)
    bound = T.T @ G.inverse() @ T
    _, var = exact_moments(est, w)
    return CrlbReport(theta, str(F), var, 0.5 * (bound + bound.T), bias, G.condition_number)


# exponential escort models ----------------------------------------------------------------------

@dataclass
class EfficiencyReport:
    theta: np.ndarray
    F: str
    model_form_residual: float
    potential_residual: float      # |d psi - eta|
    covariance_residual: float     # |G - Cov(h)|
    hessian_residual: float        # |G + E[d d log F(p)]|
    dual_residual: float           # |d eta - G|
    efficiency_residual: float     # |Var(h) - G|
    crlb: CrlbReport

    def passes(self, tol_fd=1e-5, tol_exact=1e-10) -> bool:
        return (max(self.potential_residual, self.hessian_residual, self.dual_residual) <= tol_fd
                and max(self.covariance_residual, self.efficiency_residual) <= tol_exact)

    def to_dict(self):
        out = {k: getattr(self, k) for k in ("model_form_residual", "potential_residual",
                                              "covariance_residual", "hessian_residual",
                                              "dual_residual", "efficiency_residual")}
        out.update(theta=self.theta.tolist(), F=self.F, crlb=self.crlb.to_dict())
        return out


MODEL_FORM_TOL = 1e-10
PROBE_STEP = 1e-2


def exponential_escort_efficiency(S: ParametricModel, theta, F: EscortMap, c, h,
                                  psi: Callable) -> EfficiencyReport:
    """Certify that h is an efficient estimator of eta = E_{F(p)}[h] when
    log F(p_theta) = c + theta.h - psi(theta).

    The model form is probed at theta and theta +- 0.01 e_i; any mismatch above
    1e-10 raises NotExponentialEscortError.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    c = np.asarray(c, dtype=float)
    H = np.atleast_2d(np.asarray(h, dtype=float))
    if H.shape != (S.k, S.size) or c.shape != (S.size,):
        raise SizeMismatchError(f"c/h shapes {c.shape}/{H.shape} do not fit k={S.k}, |X|={S.size}")
    SF = escort_map_model(S, F)

    def log_form_gap(t):
        return np.log(SF.eval(t)) - (c + t @ H - psi(t))

    step = _fd.fit_step(S.in_domain, theta, PROBE_STEP, _fd.axis_offsets(S.k))
    probes = [theta] + [theta + step * o for o in _fd.axis_offsets(S.k)]
    form = max(float(np.max(np.abs(log_form_gap(t)))) for t in probes)
    if form > MODEL_FORM_TOL:
        raise NotExponentialEscortError(
            f"log F(p_theta) deviates from c + theta.h - psi by {form:.3e} near theta={theta.tolist()}")

    w = SF.eval(theta)
    G = generalized_metric_closed(S, theta, F)

    def eta(t):
        return H @ SF.eval(t)

    eta0 = eta(theta)
    dpsi = _fd.central_gradient(psi, theta, S.in_domain, h=1e-5)
    est = Estimator(H, eta0, str(F))
    _, cov_h = exact_moments(est, w)
    hess = _fd.central_hessian(lambda t: np.log(SF.eval(t)), theta, S.in_domain, h=1e-4)
    neg_exp_hess = -np.einsum("ijx,x->ij", hess, w)
    d_eta = _fd.central_jacobian(eta, theta, S.in_domain, rel=1e-5, floor=1e-5)
    crlb = generalized_crlb_report(S, theta, F, est, target_jacobian=G.g)
    return EfficiencyReport(
        theta, str(F), form,
        float(np.max(np.abs(dpsi - eta0))),
        float(np.max(np.abs(G.g - cov_h))),
        float(np.max(np.abs(G.g - neg_exp_hess))),
        float(np.max(np.abs(d_eta - G.g))),
        float(np.max(np.abs(crlb.variance - G.g))),
        crlb)


# comparison informations ------------------------------------------------------------------------

def naudts_information(S: ParametricModel, theta, alpha: float) -> MetricMatrix:
    """sum_x d_k p d_l p / p^(a)."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    p, w = _escort_pair(S, theta, alpha)
    J = S.jacobian(theta)
    return MetricMatrix((J / w) @ J.T, theta, "closed_form")


def bercher_information(S: ParametricModel, theta, alpha: float) -> MetricMatrix:
    """E_{p^(a)}[(p^(a)/p) d_i log p^(a) d_j log p^(a)], a discrete two-parameter Fisher analogue."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    p, w = _escort_pair(S, theta, alpha)
    s = S.jacobian(theta) / p
    s_esc = alpha * (s - (s @ w)[:, None])
    weight = w * w / p
    return MetricMatrix((s_esc * weight) @ s_esc.T, theta, "closed_form")


def information_comparison(S: ParametricModel, theta, alpha: float) -> dict:
    """g^(a) next to the Naudts and Bercher matrices; differences are reported, not asserted."""
    g = alpha_metric_closed(S, theta, alpha).g
    n = naudts_information(S, theta, alpha).g
    b = bercher_information(S, theta, alpha).g
    return {"alpha": alpha, "g_alpha": g.tolist(), "naudts": n.tolist(), "bercher": b.tolist(),
            "naudts_minus_g": float(np.max(np.abs(n - g))),
            "bercher_over_a2_minus_g": float(np.max(np.abs(b / alpha ** 2 - g)))}

