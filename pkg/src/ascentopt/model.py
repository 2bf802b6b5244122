"""Problem model: separable convex objectives under ascending constraints.

A problem instance asks to minimize F(y) subject to

    sum_{i<=k} y_i <= sum_{i<=k} alpha_i   for k = 1..n   (last may be ==),
    0 <= y_i <= beta_i,

with F either a sum of strictly convex scalar pieces f_i on [0, beta_i] or a
general smooth convex function given by value and gradient callables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import InputValidationError, UnsupportedProblemError
from .rootfind import invert_increasing

Array = np.ndarray

# Vectorized hooks receive (values, indices) and return one value per index.
VecFn = Callable[[Array, Array], Array]


class LastConstraint(Enum):
    """Flavor of the last ascending constraint."""

    EQUALITY = "eq"
    INEQUALITY = "ineq"


@dataclass(frozen=True)
class ScalarConvexPiece:
    """One scalar term f_i of a separable objective, defined on [0, beta_i].

    Attributes:
        eval: f_i, strictly convex and differentiable on the interior.
        deriv: g_i = f_i', strictly increasing.
        deriv_inv: inverse of g_i on [l, h].
        l: g_i(0+), may be -inf for barrier-like pieces.
        h: g_i(beta_i-), may be +inf when beta_i is infinite.
        ubar: argmin of f_i over [0, beta_i]; equals clamp_h(piece, 0).
        quad_center: set to c when f_i(y) = (y - c)^2 exactly, enabling the
            piecewise-linear equation fast path.
    """

    eval: Callable[[float], float]
    deriv: Callable[[float], float]
    deriv_inv: Callable[[float], float]
    l: float
    h: float
    ubar: float
    quad_center: Optional[float] = None


def clamp_h(piece: ScalarConvexPiece, x: float) -> float:
    """Clamped inverse H_i(x) = g_i^{-1}(max(l, min(x, h))).

    Total on the extended reals: arguments at or below l map to 0, at or
    above h map to beta_i (infinite when beta_i is).
    """
    u = max(piece.l, min(x, piece.h))
    if u == -math.inf:
        return 0.0
    if u == math.inf:
        return math.inf
    return float(piece.deriv_inv(u))


def piece_from_functions(
    f: Callable[[float], float],
    deriv: Callable[[float], float],
    deriv_inv: Optional[Callable[[float], float]] = None,
    *,
    beta: float = math.inf,
    l: Optional[float] = None,
    h: Optional[float] = None,
    quad_center: Optional[float] = None,
) -> ScalarConvexPiece:
    """Build a piece, synthesizing missing fields.

    A missing deriv_inv is replaced by safeguarded bisection on deriv over
    [0, beta] with tolerance 1e-12 and a 200-iteration cap.  Missing l, h
    are evaluated from deriv at the interval ends (h defaults to +inf when
    beta is infinite and not supplied).
    """
    if l is None:
        try:
            with np.errstate(divide="ignore", invalid="ignore"):
                l = float(deriv(0.0))
        except ZeroDivisionError:
            l = -math.inf
        if math.isnan(l):
            l = -math.inf
    if h is None:
        if math.isinf(beta):
            h = math.inf
        else:
            h = float(deriv(beta))
    if deriv_inv is None:
        def deriv_inv(u: float, _g=deriv, _beta=beta) -> float:
            return invert_increasing(_g, u, 0.0, _beta, tol=1e-12)

    u0 = max(l, min(0.0, h))
    if u0 == -math.inf:
        ubar = 0.0
    elif u0 == math.inf:
        ubar = beta
    else:
        ubar = float(deriv_inv(u0))
    return ScalarConvexPiece(f, deriv, deriv_inv, l, h, ubar, quad_center)


def quadratic_piece(center: float, beta: float = math.inf) -> ScalarConvexPiece:
    """Piece f(y) = (y - center)^2 on [0, beta]."""
    c = float(center)
    h = math.inf if math.isinf(beta) else 2.0 * (beta - c)
    return ScalarConvexPiece(
        eval=lambda y, c=c: (y - c) ** 2,
        deriv=lambda y, c=c: 2.0 * (y - c),
        deriv_inv=lambda u, c=c: c + 0.5 * u,
        l=-2.0 * c,
        h=h,
        ubar=min(max(c, 0.0), beta),
        quad_center=c,
    )


@dataclass(frozen=True)
class SeparableObjective:
    """Sum of scalar convex pieces, with optional vectorized hooks.

    The hooks take (values, indices) and evaluate piece `indices[k]` at
    `values[k]`; they exist so solvers can evaluate whole blocks without a
    Python-level loop.  `deriv_inv_vec` receives arguments already clamped
    into [l_i, h_i].
    """

    pieces: tuple[ScalarConvexPiece, ...]
    eval_vec: Optional[VecFn] = None
    deriv_vec: Optional[VecFn] = None
    deriv_inv_vec: Optional[VecFn] = None

    def __post_init__(self) -> None:
        if not self.pieces:
            raise InputValidationError("objective needs at least one piece")

    @property
    def n(self) -> int:
        return len(self.pieces)

    @cached_property
    def l_arr(self) -> Array:
        a = np.array([p.l for p in self.pieces], dtype=float)
        a.flags.writeable = False
        return a

    @cached_property
    def h_arr(self) -> Array:
        a = np.array([p.h for p in self.pieces], dtype=float)
        a.flags.writeable = False
        return a

    @cached_property
    def ubar_arr(self) -> Array:
        a = np.array([p.ubar for p in self.pieces], dtype=float)
        a.flags.writeable = False
        return a

    @cached_property
    def quad_centers(self) -> Optional[Array]:
        """Centers when every piece is a unit quadratic, else None."""
        cs = [p.quad_center for p in self.pieces]
        if any(c is None for c in cs):
            return None
        a = np.array(cs, dtype=float)
        a.flags.writeable = False
        return a

    @cached_property
    def _idx(self) -> Array:
        a = np.arange(self.n, dtype=np.int64)
        a.flags.writeable = False
        return a

    def h_values(self, x, start: int = 0, stop: Optional[int] = None) -> Array:
        """Clamped inverses H_i(x) for i in [start, stop); x scalar or array."""
        lo = self.l_arr[start:stop]
        hi = self.h_arr[start:stop]
        u = np.clip(x, lo, hi)
        if self.deriv_inv_vec is not None:
            return np.asarray(self.deriv_inv_vec(u, self._idx[start:stop]), dtype=float)
        out = np.empty(len(u))
        for k, piece in enumerate(self.pieces[start:stop]):
            uk = u[k] if u.ndim else float(u)
            if uk == -math.inf:
                out[k] = 0.0
            elif uk == math.inf:
                out[k] = math.inf
            else:
                out[k] = piece.deriv_inv(uk)
        return out

    def value(self, y: Array) -> float:
        y = np.asarray(y, dtype=float)
        if self.eval_vec is not None:
            return float(np.sum(self.eval_vec(y, self._idx)))
        return float(sum(p.eval(float(yi)) for p, yi in zip(self.pieces, y)))

    def gradient(self, y: Array) -> Array:
        y = np.asarray(y, dtype=float)
        if self.deriv_vec is not None:
            return np.asarray(self.deriv_vec(y, self._idx), dtype=float)
        return np.array([p.deriv(float(yi)) for p, yi in zip(self.pieces, y)])


@dataclass(frozen=True)
class GeneralObjective:
    """Smooth convex objective given by value and gradient callables."""

    eval: Callable[[Array], float]
    gradient: Callable[[Array], Array]


Objective = Union[SeparableObjective, GeneralObjective]


@dataclass(frozen=True)
class AscendingProblem:
    """Instance data: per-step RHS alpha, bounds beta, objective, last flavor."""

    alpha: Array
    beta: Array
    objective: Objective
    last_constraint: LastConstraint = LastConstraint.INEQUALITY

    def __post_init__(self) -> None:
        alpha = np.asarray(self.alpha, dtype=float)
        beta = np.asarray(self.beta, dtype=float)
        if alpha.ndim != 1 or alpha.size == 0:
            raise InputValidationError("alpha must be a nonempty 1-d array")
        if beta.shape != alpha.shape:
            raise InputValidationError(
                "beta shape %s does not match alpha shape %s"
                % (beta.shape, alpha.shape)
            )
        if not np.all(np.isfinite(alpha)):
            raise InputValidationError("alpha must be finite")
        if np.any(alpha < 0):
            k = int(np.argmax(alpha < 0))
            raise InputValidationError("alpha[%d] is negative" % k)
        if np.any(beta <= 0) or np.any(np.isnan(beta)):
            k = int(np.argmax(~(beta > 0)))
            raise InputValidationError("beta[%d] must be positive (or inf)" % k)
        if isinstance(self.objective, SeparableObjective):
            if self.objective.n != alpha.size:
                raise InputValidationError(
                    "objective has %d pieces for n=%d"
                    % (self.objective.n, alpha.size)
                )
        alpha.flags.writeable = False
        beta.flags.writeable = False
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)

    @property
    def n(self) -> int:
        return self.alpha.size

    @property
    def is_separable(self) -> bool:
        return isinstance(self.objective, SeparableObjective)

    @cached_property
    def prefix_alpha(self) -> Array:
        """A[k] = sum_{i<=k} alpha_i with A[0] = 0, length n+1."""
        a = np.concatenate(([0.0], np.cumsum(self.alpha)))
        a.flags.writeable = False
        return a

    def value(self, y: Array) -> float:
        if self.is_separable:
            return self.objective.value(y)
        return float(self.objective.eval(np.asarray(y, dtype=float)))

    def gradient(self, y: Array) -> Array:
        if self.is_separable:
            return self.objective.gradient(y)
        return np.asarray(self.objective.gradient(np.asarray(y, dtype=float)), dtype=float)


def unconstrained_minimizers(problem: AscendingProblem) -> Array:
    """ybar_i = argmin of f_i over [0, beta_i], read off the pieces."""
    if not problem.is_separable:
        raise UnsupportedProblemError(
            "unconstrained minimizers need a separable objective"
        )
    return problem.objective.ubar_arr.copy()


@dataclass(frozen=True)
class FeasibilityCheck:
    """Outcome of a feasibility test: flag, worst violation, its location."""

    feasible: bool
    violation: float
    where: Optional[str] = None


def check_feasibility(
    problem: AscendingProblem, y: Array, tol: float = 1e-9
) -> FeasibilityCheck:
    """Check bounds and prefix constraints; report the worst violation."""
    y = np.asarray(y, dtype=float)
    if y.shape != problem.alpha.shape:
        raise InputValidationError("y shape does not match problem dimension")
    worst, where = 0.0, None
    low = float(np.max(-y, initial=0.0))
    if low > worst:
        worst, where = low, "lower[%d]" % int(np.argmax(-y))
    up_gap = y - problem.beta
    up = float(np.max(up_gap, initial=0.0))
    if up > worst:
        worst, where = up, "upper[%d]" % int(np.argmax(up_gap))
    gaps = np.cumsum(y) - problem.prefix_alpha[1:]
    if problem.last_constraint is LastConstraint.EQUALITY:
        slack = gaps.copy()
        slack[-1] = abs(slack[-1])
        k = int(np.argmax(slack))
        pv = float(slack[k])
    else:
        k = int(np.argmax(gaps))
        pv = float(gaps[k])
    if pv > worst:
        worst, where = pv, "prefix[%d]" % (k + 1)
    return FeasibilityCheck(worst <= tol, worst, where)


@dataclass(frozen=True)
class KktCertificate:
    """Primal/dual point with residuals of the optimality system.

    `lam` holds the ascending-constraint multipliers (one per prefix), `eta`
    and `delta` the lower/upper bound multipliers reconstructed from the
    clamp decomposition.  Residual conventions are documented at
    `ascentopt.oracles.kkt_residual`.
    """

    y: Array
    lam: Array
    eta: Array
    delta: Array
    stationarity_residual: float
    feasibility_residual: float
    complementarity_residual: float

    @property
    def max_residual(self) -> float:
        return max(
            self.stationarity_residual,
            self.feasibility_residual,
            self.complementarity_residual,
        )


@dataclass
class SolveReport:
    """Method metadata for one solve: counts, timing, termination reason."""

    method: str
    objective: float
    iterations: int
    inner_solves: int
    wall_time: float
    termination: str
    n: int
    breakpoint_count: Optional[int] = None
    counters: dict = field(default_factory=dict)
