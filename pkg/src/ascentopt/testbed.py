"""Seeded instance generators and the problem-dictionary format.

All randomness comes from numpy's default_rng (PCG64), so a (kind, n, seed)
triple pins an instance bitwise.  Draw orders are part of the contract and
are documented per generator; changing them would silently change every
seeded suite.

The tp1 and tp2 families are stated in covering form (prefix sums >= demand)
and are shipped here already flipped into the ascending form: tp1 gets the
artificial common bound equal to the total demand, tp2's natural bound is 1.
tp3 is native ascending form with unbounded variables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InputValidationError
from .model import (
    AscendingProblem,
    LastConstraint,
    ScalarConvexPiece,
    SeparableObjective,
    piece_from_functions,
    quadratic_piece,
)
from .projection import quadratic_objective

Array = np.ndarray

KINDS = ("tp1", "tp2", "tp3", "quadratic", "separable")


def tp1_objective(v: Array, bound: float) -> SeparableObjective:
    """Pieces f(z) = (bound - z)^4 / 4 + v (bound - z) on [0, bound].

    Decreasing quartic cost of the covering variable y = bound - z; the
    derivative is g(z) = -(bound - z)^3 - v with inverse
    bound - cbrt(-x - v).
    """
    v = np.asarray(v, dtype=float)
    b = float(bound)

    def make(vi: float) -> ScalarConvexPiece:
        return piece_from_functions(
            lambda z: 0.25 * (b - z) ** 4 + vi * (b - z),
            lambda z: -((b - z) ** 3) - vi,
            lambda x: b - np.cbrt(-x - vi),
            beta=b,
            l=-(b ** 3) - vi,
            h=-vi,
        )

    return SeparableObjective(
        pieces=tuple(make(float(vi)) for vi in v),
        eval_vec=lambda z, idx: 0.25 * (b - z) ** 4 + v[idx] * (b - z),
        deriv_vec=lambda z, idx: -((b - z) ** 3) - v[idx],
        deriv_inv_vec=lambda x, idx: b - np.cbrt(-x - v[idx]),
    )


def tp2_objective(v: Array) -> SeparableObjective:
    """Pieces f(z) = v / z on (0, 1]; g(z) = -v/z^2, inverse sqrt(-v/x).

    The derivative range is unbounded below, so the lower clamp is -inf and
    evaluations at z = 0 return infinities rather than raising.
    """
    v = np.asarray(v, dtype=float)

    def make(vi: float) -> ScalarConvexPiece:
        return piece_from_functions(
            lambda z: vi / z if z > 0.0 else math.inf,
            lambda z: -vi / (z * z) if z > 0.0 else -math.inf,
            lambda x: math.sqrt(-vi / x),
            beta=1.0,
            l=-math.inf,
            h=-vi,
        )

    def ev(z: Array, idx: Array) -> Array:
        with np.errstate(divide="ignore"):
            return v[idx] / z

    def dv(z: Array, idx: Array) -> Array:
        with np.errstate(divide="ignore"):
            return -v[idx] / (z * z)

    return SeparableObjective(
        pieces=tuple(make(float(vi)) for vi in v),
        eval_vec=ev,
        deriv_vec=dv,
        deriv_inv_vec=lambda x, idx: np.sqrt(v[idx] / (-x)),
    )


def tp3_objective(o: Array, u: Array, rate: Array) -> SeparableObjective:
    """Pieces f(y) = ((u + o)/rate) e^(-rate y) + o y on [0, inf).

    Overage cost o, underage cost u, exponentially distributed demand with
    the given rate.  g(y) = -(u + o) e^(-rate y) + o rises from -u toward o,
    so the upper clamp is o and is only approached.
    """
    o = np.asarray(o, dtype=float)
    u = np.asarray(u, dtype=float)
    rate = np.asarray(rate, dtype=float)

    def make(oi: float, ui: float, ri: float) -> ScalarConvexPiece:
        def inv(s: float) -> float:
            gap = oi - s
            if gap <= 0.0:
                return math.inf
            return -math.log(gap / (ui + oi)) / ri

        return piece_from_functions(
            lambda y: ((ui + oi) / ri) * math.exp(-ri * y) + oi * y,
            lambda y: -(ui + oi) * math.exp(-ri * y) + oi,
            inv,
            beta=math.inf,
            l=-ui,
            h=oi,
        )

    def iv(s: Array, idx: Array) -> Array:
        with np.errstate(divide="ignore"):
            return -np.log((o[idx] - s) / (u[idx] + o[idx])) / rate[idx]

    return SeparableObjective(
        pieces=tuple(
            make(float(oi), float(ui), float(ri)) for oi, ui, ri in zip(o, u, rate)
        ),
        eval_vec=lambda y, idx: ((u[idx] + o[idx]) / rate[idx]) * np.exp(-rate[idx] * y)
        + o[idx] * y,
        deriv_vec=lambda y, idx: -(u[idx] + o[idx]) * np.exp(-rate[idx] * y) + o[idx],
        deriv_inv_vec=iv,
    )


def gen_tp1(n: int, seed: int) -> AscendingProblem:
    """Quartic covering family.  Draws: alpha ~ U[0,1]^n, then v ~ U[0,1]^n
    sorted ascending.  Flipped with the artificial bound sum(alpha); every
    unconstrained minimizer sits at the bound, so all n prefixes break."""
    rng = np.random.default_rng(seed)
    alpha = rng.uniform(0.0, 1.0, n)
    v = np.sort(rng.uniform(0.0, 1.0, n))
    bound = float(np.sum(alpha))
    return AscendingProblem(
        alpha=bound - alpha,
        beta=np.full(n, bound),
        objective=tp1_objective(v, bound),
    )


def gen_tp2(n: int, seed: int) -> AscendingProblem:
    """Reciprocal-barrier covering family.  Draws: alpha ~ U[0,1]^n, then
    v ~ U[0,1]^n sorted ascending.  Flipped with the natural bound 1; the
    unconstrained minimizers all sit at 1, so all n prefixes break."""
    rng = np.random.default_rng(seed)
    alpha = rng.uniform(0.0, 1.0, n)
    v = np.sort(rng.uniform(0.0, 1.0, n))
    return AscendingProblem(
        alpha=1.0 - alpha,
        beta=np.ones(n),
        objective=tp2_objective(v),
    )


def gen_tp3(n: int, seed: int) -> AscendingProblem:
    """Newsvendor family, native ascending form, unbounded variables.

    Draws, in order: o ~ U[5,10]^n, u ~ U[20,25]^n, alpha ~ U[0,20]^n,
    rate ~ U[0.1,0.2]^n.  Unconstrained minimizers lie in
    [5 ln 3, 10 ln 6] ~ [5.49, 17.92], so only a fraction of prefixes
    break on random demands."""
    rng = np.random.default_rng(seed)
    o = rng.uniform(5.0, 10.0, n)
    u = rng.uniform(20.0, 25.0, n)
    alpha = rng.uniform(0.0, 20.0, n)
    rate = rng.uniform(0.1, 0.2, n)
    return AscendingProblem(
        alpha=alpha,
        beta=np.full(n, math.inf),
        objective=tp3_objective(o, u, rate),
    )


def random_quadratic(n: int, seed: int) -> AscendingProblem:
    """Random projection instance.  Draws, in order: alpha ~ U[0,1]^n,
    centers ~ U[-0.5,2]^n, bound values ~ U[0.2,2]^n, and a uniform coin
    per coordinate keeping the bound with probability 1/2 (else inf)."""
    rng = np.random.default_rng(seed)
    alpha = rng.uniform(0.0, 1.0, n)
    centers = rng.uniform(-0.5, 2.0, n)
    bvals = rng.uniform(0.2, 2.0, n)
    coin = rng.random(n)
    beta = np.where(coin < 0.5, bvals, math.inf)
    return AscendingProblem(
        alpha=alpha, beta=beta, objective=quadratic_objective(centers, beta)
    )


def _quartic_piece(c: float, beta: float) -> ScalarConvexPiece:
    return piece_from_functions(
        lambda y: 0.25 * (y - c) ** 4,
        lambda y: (y - c) ** 3,
        lambda s: c + np.cbrt(s),
        beta=beta,
    )


def _barrier_piece(v: float, beta: float) -> ScalarConvexPiece:
    return piece_from_functions(
        lambda y: v / y if y > 0.0 else math.inf,
        lambda y: -v / (y * y) if y > 0.0 else -math.inf,
        lambda s: math.sqrt(-v / s),
        beta=beta,
        l=-math.inf,
        h=-v / (beta * beta),
    )


def random_separable(n: int, seed: int) -> AscendingProblem:
    """Mixed-family instance for oracle comparisons.

    Draws, in order: alpha ~ U[0,1.5]^n, family codes ~ integers {0,1,2}^n
    (quadratic, quartic, reciprocal barrier), centers ~ U[-0.5,2]^n,
    barrier weights ~ U[0.2,1]^n, bound values ~ U[0.3,2.5]^n, and a coin
    per coordinate; barrier pieces always keep their finite bound, others
    keep it with probability 1/2."""
    rng = np.random.default_rng(seed)
    alpha = rng.uniform(0.0, 1.5, n)
    kinds = rng.integers(0, 3, n)
    centers = rng.uniform(-0.5, 2.0, n)
    weights = rng.uniform(0.2, 1.0, n)
    bvals = rng.uniform(0.3, 2.5, n)
    coin = rng.random(n)
    beta = np.where((kinds == 2) | (coin < 0.5), bvals, math.inf)
    pieces = []
    for i in range(n):
        if kinds[i] == 0:
            pieces.append(quadratic_piece(float(centers[i]), float(beta[i])))
        elif kinds[i] == 1:
            pieces.append(_quartic_piece(float(centers[i]), float(beta[i])))
        else:
            pieces.append(_barrier_piece(float(weights[i]), float(beta[i])))
    return AscendingProblem(
        alpha=alpha, beta=beta, objective=SeparableObjective(pieces=tuple(pieces))
    )


@dataclass(frozen=True)
class InstanceSpec:
    """Reproducible instance handle: (kind, n, seed) rebuilds the problem.

    Cheap to pickle, so benchmark workers ship specs instead of problems.
    """

    kind: str
    n: int
    seed: int

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise InputValidationError("unknown instance kind %r" % (self.kind,))
        if self.n < 1:
            raise InputValidationError("n must be >= 1")

    def build(self) -> AscendingProblem:
        maker = {
            "tp1": gen_tp1,
            "tp2": gen_tp2,
            "tp3": gen_tp3,
            "quadratic": random_quadratic,
            "separable": random_separable,
        }[self.kind]
        return maker(self.n, self.seed)


def _np_list(a: Array) -> list:
    return [None if not math.isfinite(x) else float(x) for x in a]


def instance_to_dict(spec: InstanceSpec) -> dict:
    """Problem-file dictionary for a seeded instance.

    The separable mixed family has no compact parameter story, so only the
    tp and quadratic kinds serialize.
    """
    problem = spec.build()
    rng = np.random.default_rng(spec.seed)
    base = {
        "n": spec.n,
        "alpha": [float(x) for x in problem.alpha],
        "beta": _np_list(problem.beta),
        "last_constraint": "ineq",
    }
    if spec.kind == "tp1":
        rng.uniform(0.0, 1.0, spec.n)
        v = np.sort(rng.uniform(0.0, 1.0, spec.n))
        base["objective"] = {
            "kind": "tp1",
            "v": [float(x) for x in v],
            "bound": float(problem.beta[0]),
        }
    elif spec.kind == "tp2":
        rng.uniform(0.0, 1.0, spec.n)
        v = np.sort(rng.uniform(0.0, 1.0, spec.n))
        base["objective"] = {"kind": "tp2", "v": [float(x) for x in v]}
    elif spec.kind == "tp3":
        o = rng.uniform(5.0, 10.0, spec.n)
        u = rng.uniform(20.0, 25.0, spec.n)
        rng.uniform(0.0, 20.0, spec.n)
        rate = rng.uniform(0.1, 0.2, spec.n)
        base["objective"] = {
            "kind": "tp3",
            "o": [float(x) for x in o],
            "u": [float(x) for x in u],
            "rate": [float(x) for x in rate],
        }
    elif spec.kind == "quadratic":
        rng.uniform(0.0, 1.0, spec.n)
        centers = rng.uniform(-0.5, 2.0, spec.n)
        base["objective"] = {
            "kind": "quadratic",
            "centers": [float(x) for x in centers],
        }
    else:
        raise InputValidationError("kind %r has no file form" % (spec.kind,))
    return base


def problem_from_dict(data: dict) -> AscendingProblem:
    """Build a problem from the problem-file dictionary.

    Raises InputValidationError with a field-specific message on anything
    malformed; null bounds mean unbounded.
    """
    if not isinstance(data, dict):
        raise InputValidationError("problem file must hold a JSON object")
    for key in ("alpha", "beta", "objective"):
        if key not in data:
            raise InputValidationError("missing field %r" % key)
    alpha = _field_array(data, "alpha")
    beta_raw = data["beta"]
    if not isinstance(beta_raw, list):
        raise InputValidationError("field 'beta' must be a list")
    beta = np.array(
        [math.inf if x is None else float(x) for x in beta_raw], dtype=float
    )
    n = int(data.get("n", alpha.size))
    if n != alpha.size:
        raise InputValidationError(
            "field 'n' is %d but alpha has %d entries" % (n, alpha.size)
        )
    flavor = data.get("last_constraint", "ineq")
    if flavor not in ("eq", "ineq"):
        raise InputValidationError("field 'last_constraint' must be 'eq' or 'ineq'")
    obj = data["objective"]
    if not isinstance(obj, dict) or "kind" not in obj:
        raise InputValidationError("field 'objective' must carry a 'kind'")
    kind = obj["kind"]
    if kind == "quadratic":
        centers = _field_array(obj, "centers", n)
        objective = quadratic_objective(centers, beta)
    elif kind == "tp1":
        v = _field_array(obj, "v", n)
        if "bound" not in obj:
            raise InputValidationError("tp1 objective needs field 'bound'")
        objective = tp1_objective(v, float(obj["bound"]))
    elif kind == "tp2":
        objective = tp2_objective(_field_array(obj, "v", n))
    elif kind == "tp3":
        objective = tp3_objective(
            _field_array(obj, "o", n),
            _field_array(obj, "u", n),
            _field_array(obj, "rate", n),
        )
    else:
        raise InputValidationError("unknown objective kind %r" % (kind,))
    return AscendingProblem(
        alpha=alpha,
        beta=beta,
        objective=objective,
        last_constraint=LastConstraint.EQUALITY
        if flavor == "eq"
        else LastConstraint.INEQUALITY,
    )


def _field_array(data: dict, key: str, n: Optional[int] = None) -> Array:
    raw = data.get(key)
    if not isinstance(raw, list) or not raw:
        raise InputValidationError("field %r must be a nonempty list" % key)
    try:
        arr = np.array([float(x) for x in raw], dtype=float)
    except (TypeError, ValueError):
        raise InputValidationError("field %r holds a non-numeric entry" % key)
    if n is not None and arr.size != n:
        raise InputValidationError(
            "field %r has %d entries, expected %d" % (key, arr.size, n)
        )
    return arr
