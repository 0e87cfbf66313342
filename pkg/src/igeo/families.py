"""Power-law and alpha-exponential families on a finite alphabet.

Both families share one shape: p_theta(x) = u(x) / Z(theta) with
u = R^e, R = q^(a-1) + theta.f for the power-law kind (e = 1/(a-1)) and
R = q^(1-a) + theta.f for the alpha-exponential kind (e = 1/(1-a)).
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _fd
from .distributions import ParametricModel, as_pmf, escort
from .eguchi import MetricMatrix, alpha_metric_closed
from .errors import DomainError, InvalidOrderError, SizeMismatchError

KINDS = ("power_law", "alpha_exponential")
RANK_TOL = 1e-10


@dataclass(frozen=True)
class FamilySpec:
    kind: str
    alpha: float
    q: np.ndarray
    features: np.ndarray  # shape (k, |X|)
    theta: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown family kind {self.kind!r}; expected one of {KINDS}")
        a = float(self.alpha)
        if not np.isfinite(a) or a <= 0:
            raise InvalidOrderError(f"alpha must be positive, got {a}")
        if a == 1:
            raise InvalidOrderError("alpha = 1 is excluded; use a generic ParametricModel "
                                    "for the classical exponential/mixture families")
        q = as_pmf(self.q)
        f = np.atleast_2d(np.array(self.features, dtype=float))
        if f.shape[1] != q.size:
            raise SizeMismatchError(f"features have {f.shape[1]} columns, alphabet has {q.size}")
        f.setflags(write=False)
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "features", f)
        if self.theta is not None:
            t = np.atleast_1d(np.array(self.theta, dtype=float))
            if t.shape != (f.shape[0],):
                raise SizeMismatchError(f"theta has shape {t.shape}, expected ({f.shape[0]},)")
            t.setflags(write=False)
            object.__setattr__(self, "theta", t)
            if not self.in_domain(t):
                raise DomainError(f"bracket term is not positive everywhere at theta={t.tolist()}")
        design = np.vstack([np.ones(q.size), f])
        if np.linalg.matrix_rank(design, tol=RANK_TOL) < design.shape[0]:
            warnings.warn("features together with the constant vector are linearly dependent; "
                          "the metric may be singular", RuntimeWarning, stacklevel=2)

    @property
    def k(self) -> int:
        return self.features.shape[0]

    @property
    def exponent(self) -> float:
        a = self.alpha
        return 1.0 / (a - 1.0) if self.kind == "power_law" else 1.0 / (1.0 - a)

    @property
    def base_term(self) -> np.ndarray:
        a = self.alpha
        return self.q ** (a - 1.0) if self.kind == "power_law" else self.q ** (1.0 - a)

    def bracket(self, theta) -> np.ndarray:
        """R_theta(x), the term raised to ``exponent``."""
        return self.base_term + np.asarray(theta, dtype=float) @ self.features

    def in_domain(self, theta) -> bool:
        return bool(np.all(self.bracket(theta) > 0))

    def with_theta(self, theta):
        return FamilySpec(self.kind, self.alpha, self.q, self.features, theta)

    def to_dict(self):
        out = {"kind": self.kind, "alpha": self.alpha, "q": self.q.tolist(),
               "features": self.features.tolist()}
        if self.theta is not None:
            out["theta"] = self.theta.tolist()
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - {"kind", "alpha", "q", "features", "theta"}
        if unknown:
            raise ValueError(f"unknown FamilySpec fields: {sorted(unknown)}")
        return cls(d["kind"], d["alpha"], d["q"], d["features"], d.get("theta"))

    @classmethod
    def from_json(cls, text: str):
        return cls.from_dict(json.loads(text))


def _family_model(spec: FamilySpec) -> ParametricModel:
    e = spec.exponent
    f = spec.features

    def unnormalized(t):
        R = spec.bracket(t)
        # R^e in log space, shifted for stability
        logu = e * np.log(R)
        return np.exp(logu - logu.max()), R

    def eval_fn(t):
        u, _ = unnormalized(t)
        return u / u.sum()

    def jacobian_fn(t):
        u, R = unnormalized(t)
        p = u / u.sum()
        dlogu = e * f / R
        return p * (dlogu - (dlogu @ p)[:, None])

    return ParametricModel(spec.k, spec.q.size, eval_fn, spec.in_domain,
                           jacobian_fn=jacobian_fn, name=f"{spec.kind}({spec.alpha:g})")


def power_law_model(spec: FamilySpec) -> ParametricModel:
    if spec.kind != "power_law":
        raise ValueError(f"expected a power_law spec, got {spec.kind}")
    return _family_model(spec)


def alpha_exponential_model(spec: FamilySpec) -> ParametricModel:
    if spec.kind != "alpha_exponential":
        raise ValueError(f"expected an alpha_exponential spec, got {spec.kind}")
    return _family_model(spec)


def family_model(spec: FamilySpec) -> ParametricModel:
    return _family_model(spec)


def normalizer(spec: FamilySpec, theta) -> float:
    """Z(theta) = sum_x R_theta(x)^e."""
    if not spec.in_domain(theta):
        raise DomainError(f"theta={np.asarray(theta).tolist()} outside the family domain")
    return float(np.sum(spec.bracket(theta) ** spec.exponent))


# escort correspondence --------------------------------------------------------------------------

@dataclass(frozen=True)
class EscortCorrespondence:
    """The alpha-exponential family of order 1/alpha reached by escorting a power-law family."""

    source: FamilySpec
    target: FamilySpec

    def normalizer(self, theta) -> float:
        """M(theta): sum p_theta^a * Z(theta)^a / sum q^a, the target family's normalizer."""
        a = self.source.alpha
        p = power_law_model(self.source).eval(theta)
        Z = normalizer(self.source, theta)
        return float(np.sum(p ** a) * Z ** a / np.sum(self.source.q ** a))

    def deviation(self, theta) -> float:
        """max_x |escort(p_theta, a) - member of the target family at theta|."""
        p = power_law_model(self.source).eval(theta)
        lhs = escort(p, self.source.alpha)
        rhs = alpha_exponential_model(self.target).eval(theta)
        return float(np.max(np.abs(lhs - rhs)))


def escort_correspondence(spec: FamilySpec) -> EscortCorrespondence:
    """Base q^(a) and features f / ||q||^(a-1), with ||q|| the alpha-norm (sum q^a)^(1/a)."""
    if spec.kind != "power_law":
        raise ValueError("the escort correspondence starts from a power_law spec")
    a = spec.alpha
    norm_pow = np.sum(spec.q ** a) ** ((a - 1.0) / a)
    target = FamilySpec("alpha_exponential", 1.0 / a, escort(spec.q, a),
                        spec.features / norm_pow, spec.theta)
    return EscortCorrespondence(spec, target)


# eta coordinates and the non-duality check ------------------------------------------------------

@dataclass(frozen=True)
class EtaCoordinates:
    theta: np.ndarray
    alpha: float
    eta_hat: np.ndarray  # (k, |X|)
    eta: np.ndarray
    escort_pmf: np.ndarray
    dlogM_fd: np.ndarray

    @property
    def potential_residual(self) -> float:
        return float(np.max(np.abs(self.dlogM_fd - self.eta)))


def _eta(spec, theta):
    a = spec.alpha
    R = spec.bracket(theta)
    eta_hat = (a / (a - 1.0)) * spec.features / R
    w = escort(power_law_model(spec).eval(theta), a)
    return eta_hat, eta_hat @ w, w


def log_escort_normalizer(spec: FamilySpec, theta) -> float:
    """log M(theta) = log sum R^(a/(a-1)) - log sum q^a."""
    if not spec.in_domain(theta):
        raise DomainError(f"theta={np.asarray(theta).tolist()} outside the family domain")
    a = spec.alpha
    logs = (a / (a - 1.0)) * np.log(spec.bracket(theta))
    top = logs.max()
    return float(top + np.log(np.sum(np.exp(logs - top))) - np.log(np.sum(spec.q ** a)))


def eta_coordinates(spec: FamilySpec, theta, h=1e-6) -> EtaCoordinates:
    if spec.kind != "power_law":
        raise ValueError("eta coordinates are defined for power_law specs")
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if not spec.in_domain(theta):
        raise DomainError(f"theta={theta.tolist()} outside the family domain")
    eta_hat, eta, w = _eta(spec, theta)
    grad = _fd.central_gradient(lambda t: log_escort_normalizer(spec, t), theta,
                                spec.in_domain, h=h)
    return EtaCoordinates(theta, spec.alpha, eta_hat, eta, w, grad)


def eta_jacobian_fd(spec: FamilySpec, theta, h=None) -> np.ndarray:
    """J[i, j] = d eta_j / d theta_i by central differences.

    eta scales like 1/(a-1), so the default step shrinks with |a-1| to keep the
    truncation error relative.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if h is None:
        h = 1e-4 * min(1.0, abs(spec.alpha - 1.0))
    return _fd.central_jacobian(lambda t: _eta(spec, t)[1], theta, spec.in_domain, rel=h, floor=h)


@dataclass
class CounterexampleReport:
    theta: np.ndarray
    alpha: float
    J: np.ndarray
    g: np.ndarray
    eta: np.ndarray
    identity_residual: float
    identity_tolerance: float
    witness: float

    @property
    def identity_holds(self) -> bool:
        return self.identity_residual <= self.identity_tolerance

    @property
    def relative_witness(self) -> float:
        return self.witness / float(np.max(np.abs(self.g)))

    def to_dict(self):
        return {"theta": self.theta.tolist(), "alpha": self.alpha, "J": self.J.tolist(),
                "g": self.g.tolist(), "eta": self.eta.tolist(),
                "identity_residual": self.identity_residual,
                "identity_tolerance": self.identity_tolerance,
                "identity_holds": self.identity_holds, "witness": self.witness,
                "relative_witness": self.relative_witness}


def counterexample_report(spec: FamilySpec, theta, h=None) -> CounterexampleReport:
    """Compare d eta/d theta (FD) with a*g - ((a-1)/a) eta eta^T and with g itself.

    If eta were dual to theta, J would equal g; ``witness`` = max|J - g| measures
    by how much it does not.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if not spec.in_domain(theta):
        raise DomainError(f"theta={theta.tolist()} outside the family domain")
    a = spec.alpha
    J = eta_jacobian_fd(spec, theta, h)
    g: MetricMatrix = alpha_metric_closed(power_law_model(spec), theta, a)
    _, eta, _ = _eta(spec, theta)
    predicted = a * g.g - ((a - 1.0) / a) * np.outer(eta, eta)
    resid = float(np.max(np.abs(J - predicted)))
    tol = max(1e-4, 1e-3 * float(np.max(np.abs(J))))
    witness = float(np.max(np.abs(J - g.g)))
    return CounterexampleReport(theta, a, J, g.g, eta, resid, tol, witness)


# models that are exponential after an escort ----------------------------------------------------

def exponential_escort_model(c, h, alpha: float = 1.0) -> ParametricModel:
    """Model whose alpha-escort is the exponential family exp(c + theta.h - psi).

    p_theta is the 1/alpha escort of that family, i.e. p ∝ exp((c + theta.h)/alpha);
    alpha = 1 gives the classical exponential family.
    """
    c = np.asarray(c, dtype=float)
    H = np.atleast_2d(np.asarray(h, dtype=float))
    if H.shape[1] != c.size:
        raise SizeMismatchError(f"h has {H.shape[1]} columns, c has {c.size} entries")
    if not np.isfinite(alpha) or alpha <= 0:
        raise InvalidOrderError(f"alpha must be positive, got {alpha}")

    def eval_fn(t):
        z = (c + t @ H) / alpha
        z = np.exp(z - z.max())
        return z / z.sum()

    def jacobian_fn(t):
        p = eval_fn(t)
        s = H / alpha
        return p * (s - (s @ p)[:, None])

    return ParametricModel(H.shape[0], c.size, eval_fn, jacobian_fn=jacobian_fn,
                           name=f"exp-escort({alpha:g})")


def log_partition(c, h):
    """psi(theta) = log sum_x exp(c + theta.h), as a callable."""
    c = np.asarray(c, dtype=float)
    H = np.atleast_2d(np.asarray(h, dtype=float))

    def psi(theta):
        z = c + np.asarray(theta, dtype=float) @ H
        top = z.max()
        return float(top + np.log(np.sum(np.exp(z - top))))

    return psi
