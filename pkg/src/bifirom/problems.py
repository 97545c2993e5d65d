"""Registry of parametric benchmark problems.

Every problem supplies its coefficients at quadrature points through
:meth:`ProblemSpec.coefficients`, which returns diffusion, reaction and
source arrays consumed by :func:`bifirom.fem.assemble`.  Nonlinear problems
receive the previous iterate interpolated to quadrature points and return
the Picard (frozen-coefficient) or Newton (Jacobian) linearization.
"""
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from .errors import ContractError, DomainError, UnknownProblemError
from .fem import StructuredGrid

__all__ = [
    "Coefficients",
    "ProblemSpec",
    "HighContrastField",
    "high_contrast_alphas",
    "eval_kappa",
    "get_problem",
    "list_problems",
    "PROBLEMS",
]


@dataclass
class Coefficients:
    """Quadrature-point data; each entry broadcasts to its kernel shape.

    ``dx, dy``: ``(nf, ne, nq)``; ``react``: ``(nf, nf, ne, nq)``;
    ``source``: ``(nf, ne, nq)``.
    """

    dx: object
    dy: object
    react: object
    source: object


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    id: str
    description: str
    param_domain: tuple
    nonlinearity: str = "linear"
    rhs_parametric: bool = False
    n_fields: int = 1
    spatial_domain: tuple = (0.0, 1.0, 0.0, 1.0)
    exact_solution: Optional[Callable] = None
    linearizations: tuple = ()

    @property
    def param_dim(self):
        return len(self.param_domain)

    @property
    def param_bounds(self):
        return np.asarray(self.param_domain, dtype=float)

    def check_mu(self, mu):
        mu = np.atleast_1d(np.asarray(mu, dtype=float))
        if mu.shape != (self.param_dim,):
            raise DomainError(f"{self.id}: expected {self.param_dim} parameters, got shape {mu.shape}")
        b = self.param_bounds
        if not np.all(np.isfinite(mu)) or np.any(mu < b[:, 0]) or np.any(mu > b[:, 1]):
            raise DomainError(f"{self.id}: mu={mu.tolist()} outside {b.tolist()}")
        return mu

    def grid(self, nx, ny=None):
        return StructuredGrid(nx, nx if ny is None else ny, *self.spatial_domain)

    def coefficients(self, mu, space, u_q, linearization):
        raise NotImplementedError

    def _check_linearization(self, linearization):
        if self.nonlinearity != "linear" and linearization not in self.linearizations:
            raise ContractError(f"{self.id}: linearization {linearization!r} not available, use one of {self.linearizations}")


# --------------------------------------------------------------------------
# high-contrast channel fields


def high_contrast_alphas(mu):
    m1, m2, m3 = mu
    return np.array(
        [
            (0.8 + 1.6 * m1**4) / (1 + m1**4),
            1.1 + 0.8 * np.sin(m1 + m2 + m3),
            1.1 + 0.7 * np.cos(m1**2 + m2**2 + m3**2),
            1.2 - 0.3 * m3**2 / (1 + m2**2 * m3**2),
            1.0,
        ]
    )


@dataclass(frozen=True)
class HighContrastField:
    """Channel classes ``kappa_1..kappa_m`` plus a background class.

    ``channels[i]`` lists rectangles ``(x0, x1, y0, y1)`` in unit coordinates,
    mapped affinely onto ``bounds``.  Where classes overlap the lower index
    wins, so every point belongs to exactly one class.  ``alpha(mu)`` returns
    ``m + 1`` weights (the last one for the background).
    """

    channels: tuple
    inside: float = 1e4
    background: float = 1.0
    bounds: tuple = (0.0, 1.0, 0.0, 1.0)
    alpha: Callable = high_contrast_alphas

    @property
    def n_classes(self):
        return len(self.channels) + 1

    def region(self, x, y):
        x0, x1, y0, y1 = self.bounds
        s = (np.asarray(x, dtype=float) - x0) / (x1 - x0)
        t = (np.asarray(y, dtype=float) - y0) / (y1 - y0)
        region = np.full(np.broadcast(s, t).shape, len(self.channels), dtype=np.int64)
        for i in reversed(range(len(self.channels))):
            hit = np.zeros(region.shape, dtype=bool)
            for a, b, c, d in self.channels[i]:
                hit |= (s >= a) & (s <= b) & (t >= c) & (t <= d)
            region[hit] = i
        return region

    def class_values(self):
        return np.array([self.inside] * len(self.channels) + [self.background])

    def fractions(self, space):
        """Area fraction of each class inside each element, ``(n_classes, ne)``."""
        return _fractions(self, space.grid)

    def cell_average(self, mu, space):
        w = self.alpha(mu) * self.class_values()
        return w @ self.fractions(space)


@lru_cache(maxsize=128)
def _fractions(hc_field, grid):
    from .fem import fem_space

    xs, ys = fem_space(grid, 1).cell_samples
    region = hc_field.region(xs, ys)
    return np.stack([(region == i).mean(axis=1) for i in range(hc_field.n_classes)])


def eval_kappa(hc_field, mu, x, y):
    """Pointwise ``sum_i alpha_i(mu) kappa_i(x, y)``."""
    w = hc_field.alpha(np.asarray(mu, dtype=float)) * hc_field.class_values()
    return w[hc_field.region(x, y)]


# Isolated channels: horizontal strips over x in [0.1, 0.9], vertical strips
# shortened to fit between them so that no two channels touch each other or
# the boundary.
CHANNELS = (
    ((0.10, 0.90, 0.20, 0.25), (0.10, 0.90, 0.70, 0.75)),
    ((0.30, 0.35, 0.28, 0.42), (0.80, 0.85, 0.53, 0.67)),
    ((0.10, 0.90, 0.45, 0.50),),
    ((0.55, 0.60, 0.78, 0.92),),
)


def _single(mu):
    return np.array([1.0, 1.0])


def _segments(orientation, *intervals, extent=(0.10, 0.90)):
    """Parallel strips that stop short of the boundary."""
    e0, e1 = extent
    if orientation == "h":
        return tuple((e0, e1, a, b) for a, b in intervals)
    return tuple((a, b, e0, e1) for a, b in intervals)


# one channel class each; the parametric blend lives in the coupled problem
COUPLED_CHANNELS = {
    (1, 1): HighContrastField((_segments("h", (0.15, 0.20), (0.55, 0.60)),), alpha=_single),
    (1, 2): HighContrastField((_segments("v", (0.25, 0.30), (0.65, 0.70)),), alpha=_single),
    (2, 1): HighContrastField((_segments("h", (0.35, 0.40), (0.80, 0.85)),), alpha=_single),
    (2, 2): HighContrastField((_segments("v", (0.45, 0.50), (0.85, 0.90)),), alpha=_single),
}


# --------------------------------------------------------------------------
# problems


@dataclass(frozen=True, eq=False)
class Wavespeed(ProblemSpec):
    def coefficients(self, mu, space, u_q, linearization):
        source = -10.0 * np.sin(8.0 * space.xq * (space.yq - 1.0))
        return Coefficients(1.0, mu[0], -mu[1], source[None])


@dataclass(frozen=True, eq=False)
class NonlinearElliptic(ProblemSpec):
    def coefficients(self, mu, space, u_q, linearization):
        self._check_linearization(linearization)
        d = 2.0 + np.sin(2.0 * np.pi * mu[1] * u_q + mu[0])
        source = np.sin(4.0 * space.xq) / (1.0 + mu[2] ** 2) + mu[1] * space.yq
        return Coefficients(d, d, 0.0, source[None])


@dataclass(frozen=True, eq=False)
class CubicReaction(ProblemSpec):
    def coefficients(self, mu, space, u_q, linearization):
        self._check_linearization(linearization)
        m1, m2 = mu
        f = 100.0 * np.sin(2 * np.pi * space.xq) * np.cos(2 * np.pi * space.xq)
        u = u_q[0]
        if linearization == "newton":
            # A = J(u), g = J(u) u - R(u)
            react = (u - m1) * (3 * u - m1)
            source = f + 2 * u**2 * (u - m1)
        else:
            react = (u - m1) ** 2
            source = f
        return Coefficients(m2, m2, react[None, None], source[None])


@dataclass(frozen=True, eq=False)
class HighContrast(ProblemSpec):
    kappa: HighContrastField = field(default_factory=lambda: HighContrastField(CHANNELS))

    def coefficients(self, mu, space, u_q, linearization):
        k = self.kappa.cell_average(mu, space)
        source = np.sin(np.pi * space.xq) * np.sin(np.pi * space.yq)
        return Coefficients(k[None, :, None], k[None, :, None], 0.0, source[None])


@dataclass(frozen=True, eq=False)
class NonlinearMultiscale(ProblemSpec):
    kappa: HighContrastField = field(default_factory=lambda: HighContrastField(CHANNELS))

    def coefficients(self, mu, space, u_q, linearization):
        self._check_linearization(linearization)
        d = self.kappa.cell_average(mu, space)[None, :, None] * np.exp(u_q)
        source = 2.0 + np.sin(space.xq) * np.cos(space.yq)
        return Coefficients(d, d, 0.0, source[None])


@dataclass(frozen=True, eq=False)
class CoupledSystem(ProblemSpec):
    coupling: float = 1e5

    def coefficients(self, mu, space, u_q, linearization):
        self._check_linearization(linearization)
        m1, m2 = mu
        blend = (m1 * m2, m1 * m2**2)
        p1, p2 = u_q
        d = np.empty_like(u_q)
        for f, (t, p) in enumerate(zip(blend, (p1, p2))):
            k = t * COUPLED_CHANNELS[(f + 1, 1)].cell_average(mu, space) + (1 - t) * COUPLED_CHANNELS[
                (f + 1, 2)
            ].cell_average(mu, space)
            d[f] = k[:, None] / (1.0 + np.abs(p))
        c = self.coupling / (1.0 + np.abs(p1 + p2))
        react = np.stack([np.stack([c, -c]), np.stack([-c, c])])
        return Coefficients(d, d, react, 1.0)


@dataclass(frozen=True, eq=False)
class Manufactured(ProblemSpec):
    def coefficients(self, mu, space, u_q, linearization):
        source = 2 * np.pi**2 * np.sin(np.pi * space.xq) * np.sin(np.pi * space.yq)
        return Coefficients(1.0, 1.0, 0.0, source[None])


_HALF_PI = np.pi / 2

PROBLEMS = {
    p.id: p
    for p in (
        Wavespeed(
            "wavespeed",
            "-u_xx - mu1 u_yy - mu2 u = -10 sin(8x(y-1)) on [-1,1]^2",
            ((0.1, 4.0), (0.0, 2.0)),
            spatial_domain=(-1.0, 1.0, -1.0, 1.0),
        ),
        NonlinearElliptic(
            "nl-elliptic",
            "-div[(2+sin(2 pi mu2 u + mu1)) grad u] = sin(4x1)/(1+mu3^2) + mu2 x2 on [-pi/2,pi/2]^2",
            ((0.0, 1.0),) * 3,
            nonlinearity="picard",
            rhs_parametric=True,
            spatial_domain=(-_HALF_PI, _HALF_PI, -_HALF_PI, _HALF_PI),
            linearizations=("picard",),
        ),
        CubicReaction(
            "cubic",
            "-mu2 lap u + u(u-mu1)^2 = 100 sin(2 pi x1) cos(2 pi x1) on [0,1]^2",
            ((0.4, 5.0), (0.4, 2.0)),
            nonlinearity="newton",
            linearizations=("newton", "picard"),
        ),
        HighContrast(
            "high-contrast",
            "-div(kappa(x,mu) grad u) = sin(pi x1) sin(pi x2), channel permeability",
            ((-1.0, 1.0),) * 3,
        ),
        NonlinearMultiscale(
            "nl-multiscale",
            "-div(kappa(x,mu) e^p grad p) = 2 + sin(x1) cos(x2)",
            ((0.0, 1.0),) * 3,
            nonlinearity="picard",
            linearizations=("picard",),
        ),
        CoupledSystem(
            "coupled",
            "two-field channel system with coupling 1e5/(1+|p1+p2|), rhs 1",
            ((0.0, 1.0),) * 2,
            nonlinearity="picard",
            n_fields=2,
            linearizations=("picard",),
        ),
        Manufactured(
            "manufactured",
            "-lap u = 2 pi^2 sin(pi x) sin(pi y), exact u = sin(pi x) sin(pi y)",
            ((0.0, 1.0),),
            exact_solution=lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y),
        ),
    )
}


def get_problem(problem_id):
    try:
        return PROBLEMS[problem_id]
    except KeyError:
        raise UnknownProblemError(problem_id, PROBLEMS) from None


def list_problems():
    return list(PROBLEMS.values())
