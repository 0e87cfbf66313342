"""Divergences and entropies between pmfs on a common finite alphabet (natural logs)."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .distributions import EscortMap, apply_escort_map, as_pmf, escort
from .errors import GeneratorError, InvalidOrderError, SizeMismatchError, UseKLError

PROBE_GRID = np.linspace(0.1, 10.0, 100)


def _pair(p, q):
    p, q = as_pmf(p), as_pmf(q)
    if p.shape != q.shape:
        raise SizeMismatchError(f"alphabet sizes differ: {p.size} vs {q.size}")
    return p, q


def _order(a, what="order"):
    if not np.isfinite(a) or a <= 0:
        raise InvalidOrderError(f"{what} must be positive, got {a}")
    if a == 1:
        raise UseKLError(f"{what} 1 is a 0/0 limit here; use kl / shannon_entropy")


@dataclass(frozen=True)
class ConvexGenerator:
    """Convex f on [0, inf) with f(1) = 0; ``f_second_at_1`` is stored exactly, never estimated."""

    f: Callable = field(compare=False)
    f_second_at_1: float
    name: str

    def __post_init__(self):
        if abs(float(self.f(np.array([1.0]))[0])) > 1e-12:
            raise GeneratorError(f"{self.name}: f(1) != 0")
        if self.f_second_at_1 == 0:
            raise GeneratorError(f"{self.name}: f''(1) must be nonzero")
        d = 1e-3
        second = self.f(PROBE_GRID + d) - 2 * self.f(PROBE_GRID) + self.f(PROBE_GRID - d)
        if np.min(second) < -1e-9:
            raise GeneratorError(f"{self.name}: convexity probe failed")

    def __call__(self, u):
        return self.f(u)


def _xlogx(u):
    u = np.asarray(u, dtype=float)
    return np.where(u > 0, u * np.log(np.where(u > 0, u, 1.0)), 0.0)


KL_GENERATOR = ConvexGenerator(_xlogx, 1.0, "kl")
REVERSE_KL_GENERATOR = ConvexGenerator(lambda u: -np.log(u), 1.0, "reverse_kl")
CHI2_GENERATOR = ConvexGenerator(lambda u: (np.asarray(u) - 1.0) ** 2, 2.0, "chi2")
HELLINGER_GENERATOR = ConvexGenerator(lambda u: (np.sqrt(u) - 1.0) ** 2, 0.5, "hellinger")


def power_generator(alpha: float) -> ConvexGenerator:
    """sgn(1-a) (u^(1/a) - 1): ties the relative alpha-entropy to a Csiszar divergence of escorts."""
    _order(alpha, "alpha")
    sgn = float(np.sign(1.0 - alpha))
    return ConvexGenerator(lambda u: sgn * (np.asarray(u, dtype=float) ** (1.0 / alpha) - 1.0),
                           sgn * (1.0 / alpha) * (1.0 / alpha - 1.0), f"pow{alpha:g}")


GENERATORS = {g.name: g for g in (KL_GENERATOR, REVERSE_KL_GENERATOR, CHI2_GENERATOR,
                                   HELLINGER_GENERATOR)}


def get_generator(name: str) -> ConvexGenerator:
    if name in GENERATORS:
        return GENERATORS[name]
    if name.startswith("pow"):
        return power_generator(float(name[3:]))
    raise KeyError(f"unknown generator {name!r}; known: {sorted(GENERATORS)} or pow<alpha>")


def kl(p, q) -> float:
    p, q = _pair(p, q)
    return float(np.sum(p * np.log(p / q)))


def shannon_entropy(p) -> float:
    p = as_pmf(p)
    return float(-np.sum(p * np.log(p)))


def renyi_entropy(p, alpha: float) -> float:
    _order(alpha)
    p = as_pmf(p)
    return float(np.log(np.sum(p ** alpha)) / (1.0 - alpha))


def relative_alpha_entropy(p, q, alpha: float) -> float:
    """Relative alpha-entropy I_a(p, q); tends to kl(p, q) as alpha -> 1."""
    _order(alpha, "alpha")
    p, q = _pair(p, q)
    a = alpha
    val = (np.log(np.sum(p * q ** (a - 1.0))) / (1.0 - a)
           - np.log(np.sum(p ** a)) / (a * (1.0 - a))
           + np.log(np.sum(q ** a)) / a)
    return float(val)


def renyi_divergence(p, q, order: float) -> float:
    _order(order)
    p, q = _pair(p, q)
    return float(np.log(np.sum(p ** order * q ** (1.0 - order))) / (order - 1.0))


def csiszar_f_divergence(p, q, f: ConvexGenerator) -> float:
    p, q = _pair(p, q)
    return float(np.sum(q * f(p / q)))


def generalized_f_divergence(p, q, f: ConvexGenerator, F: EscortMap) -> float:
    """(1/f''(1)) sum F(q) f(F(p)/F(q))."""
    p, q = _pair(p, q)
    Fp, Fq = apply_escort_map(F, p), apply_escort_map(F, q)
    return float(np.sum(Fq * f(Fp / Fq)) / f.f_second_at_1)


@dataclass(frozen=True)
class DivergenceSpec:
    """A selectable divergence D(p, q); call it like a function."""

    kind: str
    order: Optional[float] = None
    generator: Optional[ConvexGenerator] = None
    escort_map: Optional[EscortMap] = None

    def __post_init__(self):
        if self.kind in ("relative_alpha", "renyi"):
            _order(self.order, "alpha" if self.kind == "relative_alpha" else "order")
        elif self.kind == "csiszar":
            if self.generator is None:
                raise ValueError("csiszar divergence needs a generator")
        elif self.kind == "generalized":
            if self.generator is None or self.escort_map is None:
                raise ValueError("generalized divergence needs a generator and an escort map")
        elif self.kind != "kl":
            raise ValueError(f"unknown divergence kind {self.kind!r}")

    @classmethod
    def kl(cls):
        return cls("kl")

    @classmethod
    def relative_alpha(cls, alpha):
        return cls("relative_alpha", order=float(alpha))

    @classmethod
    def renyi(cls, order):
        return cls("renyi", order=float(order))

    @classmethod
    def csiszar(cls, f):
        return cls("csiszar", generator=f)

    @classmethod
    def generalized(cls, f, F):
        return cls("generalized", generator=f, escort_map=F)

    @classmethod
    def parse(cls, name: str):
        """Registry names: kl, alpha:<a>, renyi:<l>, csiszar:<f>, gen:<f>:<F>."""
        head, _, rest = name.partition(":")
        if head == "kl" and not rest:
            return cls.kl()
        if head == "alpha" and rest:
            return cls.relative_alpha(float(rest))
        if head == "renyi" and rest:
            return cls.renyi(float(rest))
        if head == "csiszar" and rest:
            return cls.csiszar(get_generator(rest))
        if head == "gen":
            fname, _, fspec = rest.partition(":")
            if fname and fspec:
                return cls.generalized(get_generator(fname), EscortMap.parse(fspec))
        raise ValueError(f"unknown divergence name {name!r}")

    @property
    def name(self):
        if self.kind == "kl":
            return "kl"
        if self.kind == "relative_alpha":
            return f"alpha:{self.order:g}"
        if self.kind == "renyi":
            return f"renyi:{self.order:g}"
        if self.kind == "csiszar":
            return f"csiszar:{self.generator.name}"
        return f"gen:{self.generator.name}:{self.escort_map}"

    def __call__(self, p, q) -> float:
        if self.kind == "kl":
            return kl(p, q)
        if self.kind == "relative_alpha":
            return relative_alpha_entropy(p, q, self.order)
        if self.kind == "renyi":
            return renyi_divergence(p, q, self.order)
        if self.kind == "csiszar":
            return csiszar_f_divergence(p, q, self.generator)
        return generalized_f_divergence(p, q, self.generator, self.escort_map)


def escort_renyi_form(p, q, alpha):
    """(1/alpha) D_{1/alpha}(p^(a), q^(a)), which equals relative_alpha_entropy(p, q, alpha).

    The Renyi divergence of order 1/alpha between the escorts is alpha times the
    relative alpha-entropy as normalized here; the 1/alpha restores equality.
    """
    return renyi_divergence(escort(p, alpha), escort(q, alpha), 1.0 / alpha) / alpha


def escort_csiszar_form(p, q, alpha):
    """(1/(1-a)) log[sgn(1-a) D_f(p^(a), q^(a)) + 1] with f = pow<alpha>."""
    f = power_generator(alpha)
    d = csiszar_f_divergence(escort(p, alpha), escort(q, alpha), f)
    return float(np.log(np.sign(1.0 - alpha) * d + 1.0) / (1.0 - alpha))
