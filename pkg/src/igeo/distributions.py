"""Probability vectors on a finite alphabet, escort transforms and parametric models.

The alphabet is always ``{0, ..., M}``.  A pmf is a plain 1-d float array that
has passed :func:`as_pmf`; models return such arrays from ``eval``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import _fd
from .errors import (DomainError, EscortMapContractError, InvalidAlphabetError,
                     InvalidOrderError, PmfError)

SUPPORT_FLOOR = 1e-12
MASS_TOL = 1e-12


def as_pmf(p, floor: float = SUPPORT_FLOOR) -> np.ndarray:
    """Validate ``p`` and return it as a read-only float array.

    Raises PmfError unless every entry exceeds ``floor`` and the total mass is 1
    within 1e-12.  Entries touching the floor are rejected, never clipped.
    """
    arr = np.array(p, dtype=float)
    if arr.ndim != 1 or arr.size < 2:
        raise PmfError(f"pmf must be a 1-d vector of length >= 2, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise PmfError("pmf has non-finite entries")
    if np.min(arr) <= floor:
        raise PmfError(f"pmf entry {np.min(arr):.3g} is not above the support floor {floor:g}")
    if abs(arr.sum() - 1.0) > MASS_TOL:
        raise PmfError(f"pmf mass is {arr.sum()!r}, not 1")
    arr.setflags(write=False)
    return arr


def uniform(size: int) -> np.ndarray:
    return as_pmf(np.full(size, 1.0 / size))


def _check_order(alpha):
    if not np.isfinite(alpha) or alpha <= 0:
        raise InvalidOrderError(f"order must be a positive real, got {alpha}")


def escort(p, alpha: float) -> np.ndarray:
    """alpha-escort p^a / sum p^a, computed in log space to avoid overflow."""
    _check_order(alpha)
    p = as_pmf(p)
    logw = alpha * np.log(p)
    logw -= logw.max()
    w = np.exp(logw)
    return as_pmf(w / w.sum())


def _escort_jacobian(p, w, jac, alpha):
    # d_i w = a [ (w/p) d_i p - w * sum_y (w/p) d_i p ]
    r = w / p
    inner = (jac * r).sum(axis=1, keepdims=True)
    return alpha * (jac * r - w * inner)


@dataclass(frozen=True)
class EscortMap:
    """A map F sending a pmf to another pmf: identity, alpha-escort or a custom transform."""

    kind: str
    alpha: Optional[float] = None
    transform: Optional[Callable] = field(default=None, compare=False)
    name: str = ""

    @classmethod
    def identity(cls):
        return cls("identity", name="identity")

    @classmethod
    def alpha_escort(cls, alpha: float):
        _check_order(alpha)
        return cls("alpha-escort", alpha=float(alpha), name=f"escort:{alpha:g}")

    @classmethod
    def custom(cls, transform: Callable, name: str = "custom"):
        return cls("custom", transform=transform, name=name)

    @classmethod
    def parse(cls, text: str):
        """``identity`` or ``escort:<alpha>``."""
        if text == "identity":
            return cls.identity()
        head, _, arg = text.partition(":")
        if head == "escort" and arg:
            return cls.alpha_escort(float(arg))
        raise ValueError(f"unknown escort map {text!r}")

    def __call__(self, p):
        return apply_escort_map(self, p)

    def __str__(self):
        return self.name or self.kind


def apply_escort_map(F: EscortMap, p) -> np.ndarray:
    p = as_pmf(p)
    if F.kind == "identity":
        return p
    if F.kind == "alpha-escort":
        return escort(p, F.alpha)
    if F.kind == "custom":
        out = F.transform(p)
        try:
            return as_pmf(out)
        except PmfError as exc:
            raise EscortMapContractError(f"escort map {F.name!r} broke the pmf contract: {exc}") from exc
    raise ValueError(f"unknown escort map kind {F.kind!r}")


class ParametricModel:
    """A differentiable family theta -> p_theta on the alphabet {0..size-1}.

    ``jacobian(theta)`` has shape (k, size) with entry [i, x] = d_i p_theta(x).
    When no analytic Jacobian is supplied, central differences are used with
    step max(1e-6, 1e-6 |theta_i|) and ``jacobian_source`` says so.
    """

    def __init__(self, k, size, eval_fn, domain=None, jacobian_fn=None,
                 hessian_fn=None, name="model"):
        self.k = int(k)
        self.size = int(size)
        self._eval = eval_fn
        self._domain = domain or (lambda theta: True)
        self._jacobian = jacobian_fn
        self._hessian = hessian_fn
        self.name = name

    def __repr__(self):
        return f"ParametricModel({self.name!r}, k={self.k}, size={self.size})"

    @property
    def jacobian_source(self):
        return "analytic" if self._jacobian is not None else "finite_difference"

    def _theta(self, theta):
        t = np.atleast_1d(np.asarray(theta, dtype=float))
        if t.shape != (self.k,):
            raise DomainError(f"{self.name}: expected {self.k} parameters, got shape {t.shape}")
        return t

    def in_domain(self, theta) -> bool:
        t = np.atleast_1d(np.asarray(theta, dtype=float))
        return t.shape == (self.k,) and bool(np.all(np.isfinite(t))) and bool(self._domain(t))

    def eval(self, theta) -> np.ndarray:
        t = self._theta(theta)
        if not self.in_domain(t):
            raise DomainError(f"{self.name}: theta={t.tolist()} outside the domain")
        return as_pmf(self._eval(t))

    def jacobian(self, theta) -> np.ndarray:
        t = self._theta(theta)
        if self._jacobian is not None:
            if not self.in_domain(t):
                raise DomainError(f"{self.name}: theta={t.tolist()} outside the domain")
            return np.asarray(self._jacobian(t), dtype=float).reshape(self.k, self.size)
        return _fd.central_jacobian(self.eval, t, self.in_domain)

    def hessian(self, theta, h=1e-5) -> np.ndarray:
        """Second derivatives, shape (k, k, size).

        Analytic if supplied; otherwise central differences of an analytic Jacobian
        (step h), or a direct second-difference stencil on eval (step 1e-4).
        """
        t = self._theta(theta)
        if self._hessian is not None:
            return np.asarray(self._hessian(t), dtype=float).reshape(self.k, self.k, self.size)
        if self._jacobian is None:
            return _fd.central_hessian(self.eval, t, self.in_domain, h=1e-4)
        d = _fd.central_jacobian(self.jacobian, t, self.in_domain, rel=h, floor=h)
        return 0.5 * (d + d.transpose(1, 0, 2))

    def score(self, theta) -> np.ndarray:
        """d_i log p_theta(x), shape (k, size)."""
        return self.jacobian(theta) / self.eval(theta)


def simplex_chart(M: int) -> ParametricModel:
    """Full simplex on {0..M}: p(x) = theta_x for x >= 1 and p(0) = 1 - sum(theta)."""
    if int(M) != M or M < 1:
        raise InvalidAlphabetError(f"alphabet size parameter M must be an integer >= 1, got {M}")
    M = int(M)

    def eval_fn(t):
        return np.concatenate(([1.0 - t.sum()], t))

    def domain(t):
        return bool(np.all(t > 0) and t.sum() < 1)

    jac = np.hstack([-np.ones((M, 1)), np.eye(M)])

    return ParametricModel(M, M + 1, eval_fn, domain,
                           jacobian_fn=lambda t: jac.copy(),
                           hessian_fn=lambda t: np.zeros((M, M, M + 1)),
                           name=f"simplex({M})")


def escort_map_model(S: ParametricModel, F: EscortMap) -> ParametricModel:
    """The model theta -> F(p_theta).

    The alpha-escort uses the chain rule through S's Jacobian; custom maps fall
    back to central differences of the composite.
    """
    if F.kind == "identity":
        return S
    if F.kind == "alpha-escort":
        return escort_model(S, F.alpha)
    return ParametricModel(S.k, S.size, lambda t: apply_escort_map(F, S.eval(t)),
                           S.in_domain, name=f"{F.name}({S.name})")


def escort_model(S: ParametricModel, alpha: float) -> ParametricModel:
    _check_order(alpha)

    def eval_fn(t):
        return escort(S.eval(t), alpha)

    def jacobian_fn(t):
        p = S.eval(t)
        return _escort_jacobian(p, escort(p, alpha), S.jacobian(t), alpha)

    return ParametricModel(S.k, S.size, eval_fn, S.in_domain, jacobian_fn=jacobian_fn,
                           name=f"escort({S.name}, {alpha:g})")
