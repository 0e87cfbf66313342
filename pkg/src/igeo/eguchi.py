"""Metrics and dual connections induced by a divergence (Eguchi construction).

Finite-difference route: g_ij = -d_i d'_j D(p_theta, p_theta'), and the connection
coefficients Gamma_ij,k = -d_i d_j d'_k D, Gamma*_ij,k = -d_k d'_i d'_j D, all taken
on the diagonal theta' = theta.  Closed forms are provided for the KL, relative
alpha-entropy and generalized (f, F) cases so the two routes can be compared.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _fd
from .distributions import (EscortMap, ParametricModel, escort, escort_map_model,
                            escort_model)
from .divergences import DivergenceSpec
from .errors import SingularMetricError

METRIC_STEP = 1e-4
CONNECTION_STEP = 5e-4
OUTER_STEP = 5e-4
ASYMMETRY_WARN = 1e-6
MAX_CONDITION = 1e12


@dataclass(frozen=True)
class MetricMatrix:
    g: np.ndarray
    theta: np.ndarray
    provenance: str
    asymmetry: float = 0.0

    @property
    def eigenvalues(self):
        return np.linalg.eigvalsh(self.g)

    @property
    def min_eigenvalue(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def condition_number(self) -> float:
        ev = np.abs(self.eigenvalues)
        return float(np.inf if ev[0] == 0 else ev[-1] / ev[0])

    def is_positive_definite(self) -> bool:
        return self.min_eigenvalue > 0

    def inverse(self, max_condition=MAX_CONDITION) -> np.ndarray:
        """Inverse by linear solve; near-singular metrics raise instead of returning noise."""
        cond = self.condition_number
        if not np.isfinite(cond) or cond > max_condition:
            raise SingularMetricError(f"metric condition number {cond:.3g} exceeds {max_condition:g}",
                                      condition_number=cond)
        inv = np.linalg.solve(self.g, np.eye(len(self.g)))
        return 0.5 * (inv + inv.T)


@dataclass(frozen=True)
class ConnectionTensor:
    """Lowered-index coefficients, gamma[i, j, k] = Gamma_ij,k."""

    gamma: np.ndarray
    theta: np.ndarray
    which: str  # "primal" or "dual"


def _theta(S, theta):
    return np.atleast_1d(np.asarray(theta, dtype=float))


def eguchi_metric_fd(D: DivergenceSpec, S: ParametricModel, theta, h=METRIC_STEP,
                     richardson=False) -> MetricMatrix:
    """4-point mixed central differences of -D(p_theta, p_theta'), symmetrized.

    ``richardson`` combines steps h and 2h to cancel the O(h^2) term; used when the
    metric is itself differentiated.
    """
    theta = _theta(S, theta)
    k = S.k
    h = _fd.fit_step(S.in_domain, theta, 2 * h if richardson else h, _fd.pair_offsets(k))
    if richardson:
        g1 = _metric_stencil(D, S, theta, h / 2)
        g2 = _metric_stencil(D, S, theta, h)
        g = (4 * g1 - g2) / 3
    else:
        g = _metric_stencil(D, S, theta, h)
    asym = float(np.max(np.abs(g - g.T)))
    if asym > ASYMMETRY_WARN * max(1.0, float(np.max(np.abs(g)))):
        warnings.warn(f"Eguchi metric asymmetric by {asym:.2e} before symmetrization "
                      f"({D.name} on {S.name})", RuntimeWarning, stacklevel=2)
    return MetricMatrix(0.5 * (g + g.T), theta, "finite_difference", asym)


def _metric_stencil(D, S, theta, h):
    k = S.k
    eye = np.eye(k)
    pts = {(i, s): S.eval(theta + s * h * eye[i]) for i in range(k) for s in (1, -1)}
    g = np.empty((k, k))
    for i in range(k):
        for j in range(k):
            acc = 0.0
            for s in (1, -1):
                for t in (1, -1):
                    acc += s * t * D(pts[i, s], pts[j, t])
            g[i, j] = -acc / (4 * h * h)
    return g


def eguchi_connections_fd(D: DivergenceSpec, S: ParametricModel, theta, h=CONNECTION_STEP,
                          richardson=True):
    """(primal, dual) connection tensors from third-order mixed central differences.

    With ``richardson`` the 8-point stencil is evaluated at h and 2h and combined
    as (4 T(h) - T(2h)) / 3, cancelling the O(h^2) truncation term.
    """
    theta = _theta(S, theta)
    h = _fd.fit_step(S.in_domain, theta, 2 * h if richardson else h, _fd.pair_offsets(S.k))
    if not richardson:
        gam, gam_star = _connections_stencil(D, S, theta, h)
    else:
        g1, s1 = _connections_stencil(D, S, theta, h / 2)
        g2, s2 = _connections_stencil(D, S, theta, h)
        gam, gam_star = (4 * g1 - g2) / 3, (4 * s1 - s2) / 3
    return (ConnectionTensor(gam, theta, "primal"), ConnectionTensor(gam_star, theta, "dual"))


def _connections_stencil(D, S, theta, h):
    k = S.k
    eye = np.eye(k)
    single = {(c, u): S.eval(theta + u * h * eye[c]) for c in range(k) for u in (1, -1)}
    double = {(i, j, s, t): S.eval(theta + h * (s * eye[i] + t * eye[j]))
              for i in range(k) for j in range(i, k) for s in (1, -1) for t in (1, -1)}
    gam = np.empty((k, k, k))
    gam_star = np.empty((k, k, k))
    scale = 8 * h ** 3
    for i in range(k):
        for j in range(i, k):
            for c in range(k):
                acc = acc_star = 0.0
                for s in (1, -1):
                    for t in (1, -1):
                        pij = double[i, j, s, t]
                        for u in (1, -1):
                            acc += s * t * u * D(pij, single[c, u])
                            acc_star += s * t * u * D(single[c, u], pij)
                gam[i, j, c] = gam[j, i, c] = -acc / scale
                gam_star[i, j, c] = gam_star[j, i, c] = -acc_star / scale
    return gam, gam_star


def metric_derivative_fd(D: DivergenceSpec, S: ParametricModel, theta, h=OUTER_STEP,
                         inner_h=METRIC_STEP) -> np.ndarray:
    """dg[k, i, j] = d_k g_ij: Richardson-extrapolated central differences of the FD metric."""
    theta = _theta(S, theta)
    k = S.k
    inner = _fd.pair_offsets(k)

    def carries_inner(t):
        return all(S.in_domain(t + 2 * inner_h * o) for o in inner)

    h = _fd.fit_step(carries_inner, theta, 2 * h, _fd.axis_offsets(k)) / 2
    eye = np.eye(k)
    dg = np.empty((k, k, k))
    for c in range(k):
        g = {m: eguchi_metric_fd(D, S, theta + m * h * eye[c], inner_h, richardson=True).g
             for m in (1, -1, 2, -2)}
        d1 = (g[1] - g[-1]) / (2 * h)
        d2 = (g[2] - g[-2]) / (4 * h)
        dg[c] = (4 * d1 - d2) / 3
    return dg


def duality_residual(D: DivergenceSpec, S: ParametricModel, theta, h=CONNECTION_STEP) -> np.ndarray:
    """residual[k, i, j] = d_k g_ij - Gamma_ki,j - Gamma*_kj,i, every term by finite differences."""
    dg = metric_derivative_fd(D, S, theta)
    gam, gam_star = eguchi_connections_fd(D, S, theta, h)
    return dg - gam.gamma - np.transpose(gam_star.gamma, (0, 2, 1))


# closed forms -----------------------------------------------------------------------------------

def _cov(stat, w):
    centered = stat - (stat @ w)[:, None]
    return (centered * w) @ centered.T


def fisher_metric(S: ParametricModel, theta) -> MetricMatrix:
    theta = _theta(S, theta)
    p = S.eval(theta)
    s = S.jacobian(theta) / p
    return MetricMatrix(_cov(s, p), theta, "closed_form")


def alpha_metric_closed(S: ParametricModel, theta, alpha: float) -> MetricMatrix:
    """Covariance of the score d_i log p_theta under the alpha-escort of p_theta."""
    theta = _theta(S, theta)
    p = S.eval(theta)
    w = escort(p, alpha)
    s = S.jacobian(theta) / p
    return MetricMatrix(_cov(s, w), theta, "closed_form")


def generalized_metric_closed(S: ParametricModel, theta, F: EscortMap) -> MetricMatrix:
    """E_{F(p)}[d_i log F(p) d_j log F(p)] -- the Fisher matrix of the escort model; f drops out."""
    theta = _theta(S, theta)
    SF = escort_map_model(S, F)
    w = SF.eval(theta)
    s = SF.jacobian(theta) / w
    return MetricMatrix((s * w) @ s.T, theta, "closed_form")


def closed_form_metric(D: DivergenceSpec, S: ParametricModel, theta) -> Optional[MetricMatrix]:
    """Closed-form counterpart of eguchi_metric_fd for the built-in divergences."""
    if D.kind == "kl":
        return fisher_metric(S, theta)
    if D.kind == "relative_alpha":
        return alpha_metric_closed(S, theta, D.order)
    if D.kind == "renyi":
        m = fisher_metric(S, theta)
        return MetricMatrix(D.order * m.g, m.theta, "closed_form")
    if D.kind == "csiszar":
        m = fisher_metric(S, theta)
        return MetricMatrix(D.generator.f_second_at_1 * m.g, m.theta, "closed_form")
    if D.kind == "generalized":
        return generalized_metric_closed(S, theta, D.escort_map)
    return None


def alpha_representation(S: ParametricModel, theta, alpha: float, i: int) -> np.ndarray:
    """(p^(a)/p) (d_i log p - E_{p^(a)}[d_i log p]) as a vector over the alphabet."""
    theta = _theta(S, theta)
    p = S.eval(theta)
    w = escort(p, alpha)
    s = S.jacobian(theta)[i] / p
    return (w / p) * (s - np.dot(w, s))


def m_connection(S: ParametricModel, theta) -> np.ndarray:
    """sum_x d_i d_j p . d_k log p, indexed [i, j, k]."""
    theta = _theta(S, theta)
    return np.einsum("ijx,kx->ijk", S.hessian(theta), S.score(theta))


def e_connection(S: ParametricModel, theta) -> np.ndarray:
    """sum_x d_k p . d_i d_j log p, indexed [i, j, k]."""
    theta = _theta(S, theta)
    p = S.eval(theta)
    jac = S.jacobian(theta)
    d2log = S.hessian(theta) / p - np.einsum("ix,jx->ijx", jac, jac) / p ** 2
    return np.einsum("ijx,kx->ijk", d2log, jac)


# reports ----------------------------------------------------------------------------------------

@dataclass
class MetricReport:
    theta: np.ndarray
    divergence: str
    g_closed: Optional[np.ndarray]
    g_fd: np.ndarray
    max_abs_diff: Optional[float]
    min_eigenvalue: float
    condition_number: float
    duality_max_residual: Optional[float] = None
    jacobian_source: str = "analytic"

    def to_dict(self):
        def arr(x):
            return None if x is None else np.asarray(x).tolist()
        return {"theta": arr(self.theta), "divergence": self.divergence,
                "g_closed": arr(self.g_closed), "g_fd": arr(self.g_fd),
                "max_abs_diff": self.max_abs_diff, "min_eigenvalue": self.min_eigenvalue,
                "condition_number": self.condition_number,
                "duality_max_residual": self.duality_max_residual,
                "jacobian_source": self.jacobian_source}


def metric_report(D: DivergenceSpec, S: ParametricModel, theta, h=METRIC_STEP,
                  with_duality=False) -> MetricReport:
    fd = eguchi_metric_fd(D, S, theta, h)
    closed = closed_form_metric(D, S, theta)
    ref = closed if closed is not None else fd
    diff = None if closed is None else float(np.max(np.abs(closed.g - fd.g)))
    dual = float(np.max(np.abs(duality_residual(D, S, theta)))) if with_duality else None
    return MetricReport(fd.theta, D.name, None if closed is None else closed.g, fd.g, diff,
                        ref.min_eigenvalue, ref.condition_number, dual, S.jacobian_source)


def escort_connection_comparison(S: ParametricModel, theta, alpha: float) -> dict:
    """Relative-alpha connections on S against the m/e connections of the escort model.

    The metrics agree up to alpha^2; whether the connections do is reported, not asserted.
    """
    theta = _theta(S, theta)
    D = DivergenceSpec.kl() if alpha == 1 else DivergenceSpec.relative_alpha(alpha)
    gam, gam_star = eguchi_connections_fd(D, S, theta)
    Sa = escort_model(S, alpha)
    m, e = eguchi_connections_fd(DivergenceSpec.kl(), Sa, theta)
    scale = alpha ** 2
    return {"theta": theta.tolist(), "alpha": alpha,
            "primal_vs_m_max_diff": float(np.max(np.abs(scale * gam.gamma - m.gamma))),
            "dual_vs_e_max_diff": float(np.max(np.abs(scale * gam_star.gamma - e.gamma)))}
