"""Model ingredients: config parsing, assumption checks, grid sampling.

The seven rate functions and the domain length m are supplied as text
expressions.  Nonnegativity of beta0, beta1, beta2, b0, b2, mu and strict
positivity of d are certified by sampling; smoothness is assumed, not
checked.  The population-level fertility factors beta0 and b0 get two
advisory flags used by the steady-state machinery: strict decrease on the
sample set, and near-vanishing at a large argument.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .expr import EvalError, ParseError, evaluate, free_variables, parse
from .grid_state import Grid

# Argument used for the heuristic "vanishes at infinity" certificate, and
# the threshold the value must fall below there.
LARGE_ARGUMENT = 1.0e6
VANISH_THRESHOLD = 1.0e-6

_EXPR_KEYS = ("beta0", "beta1", "beta2", "b0", "b2", "mu", "gamma", "d")
_ALL_KEYS = ("m",) + _EXPR_KEYS

# Allowed free variables per ingredient; anything else is rejected when
# validating, not when evaluating.
_INGREDIENT_VARS = {
    "beta0": frozenset("x"),
    "b0": frozenset("x"),
    "beta2": frozenset("x"),
    "b2": frozenset("x"),
    "beta1": frozenset(("x", "y")),
    "mu": frozenset("x"),
    "gamma": frozenset("x"),
    "d": frozenset("x"),
}


class ConfigError(ValueError):
    """Malformed config text."""


class ValidationError(ValueError):
    """An ingredient violates a sign or finiteness requirement."""


@dataclass(frozen=True)
class ModelDefinition:
    """Parsed but not yet validated ingredients."""

    m: float
    beta0: object
    beta1: object
    beta2: object
    b0: object
    b2: object
    mu: object
    gamma: object
    d: object


@dataclass(frozen=True)
class ValidatedModel:
    """Definition plus the sample-based certificates that were checked.

    mu_min and d_min are minima over the validation samples; the monotone
    and vanishing flags are advisory (a limit cannot be decided from
    finitely many points) and the steady solver fails gracefully when they
    are optimistic.
    """

    definition: ModelDefinition
    samples: int
    mu_min: float
    d_min: float
    monotone_beta0: bool
    monotone_b0: bool
    vanishing_beta0: bool
    vanishing_b0: bool

    @property
    def m(self):
        return self.definition.m

    @property
    def mu_positive(self):
        return self.mu_min > 0.0


@dataclass(frozen=True, eq=False)
class SampledIngredients:
    """Ingredients evaluated on a grid, plus the scalar-rate closures.

    mu lives at cell centers (with mu0 separately at x=0), gamma and d at
    the N+1 interfaces, and the birth kernel beta1 holds the boundary row
    beta1(0, y_j) on top of the N center rows.  beta2 and b2 clamp their
    argument to [-1, 1] to guard float drift in the tail ratios.
    """

    grid: Grid
    mu0: float
    mu: np.ndarray
    gamma: np.ndarray
    d: np.ndarray
    beta1: np.ndarray
    beta0: Callable[[float], float]
    beta2: Callable[[float], float]
    b0: Callable[[float], float]
    b2: Callable[[float], float]


def _parse_quoted(key, value, lineno):
    if not value.startswith('"'):
        raise ConfigError(f"line {lineno}: {key}: expected a quoted expression")
    end = value.find('"', 1)
    if end < 0:
        raise ConfigError(f"line {lineno}: {key}: unterminated quote")
    rest = value[end + 1:].strip()
    if rest and not rest.startswith("#"):
        raise ConfigError(f"line {lineno}: {key}: trailing text after quote")
    try:
        return parse(value[1:end])
    except ParseError as err:
        raise ConfigError(f"{key}: {err}") from None


def load_config(text):
    """Parse the line-based ``key = value`` config format."""
    entries = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _ALL_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in entries:
            raise ConfigError(f"duplicate key {key}")
        entries[key] = (value, lineno)
    for key in _ALL_KEYS:
        if key not in entries:
            raise ConfigError(f"missing key {key}")

    value, lineno = entries["m"]
    try:
        m = float(value.split("#", 1)[0].strip())
    except ValueError:
        raise ConfigError(f"line {lineno}: m: not a number") from None
    if not m > 0:
        raise ConfigError("m must be positive")

    exprs = {
        key: _parse_quoted(key, *entries[key]) for key in _EXPR_KEYS
    }
    return ModelDefinition(m=m, **exprs)


def _sample_1d(key, e, points, arg="x"):
    out = np.empty(len(points))
    for i, p in enumerate(points):
        try:
            out[i] = evaluate(e, x=p)
        except EvalError as err:
            raise ValidationError(f"{key}: {err} at {arg}={p:.6g}") from None
        if not np.isfinite(out[i]):
            raise ValidationError(f"{key} non-finite at {arg}={p:.6g}")
    return out


def _require_nonnegative(key, values, points):
    bad = np.nonzero(values < 0.0)[0]
    if bad.size:
        raise ValidationError(f"{key} negative at x={points[bad[0]]:.6g}")


def validate(definition, samples=128):
    """Certify the sign assumptions by sampling; return a ValidatedModel.

    Each ingredient is evaluated on `samples` equispaced points of its
    domain (two scales, [0, 10] and [0, 1e6], for the unbounded arguments
    of beta0 and b0).  Continuity and C1 smoothness are assumed.
    """
    if samples < 2:
        raise ValueError("samples must be at least 2")
    for key, allowed in _INGREDIENT_VARS.items():
        extra = free_variables(getattr(definition, key)) - allowed
        if extra:
            names = ", ".join(sorted(extra))
            raise ValidationError(f"{key} must not depend on {names}")

    m = definition.m
    xs = np.linspace(0.0, m, samples)
    mu_vals = _sample_1d("mu", definition.mu, xs)
    _require_nonnegative("mu", mu_vals, xs)
    d_vals = _sample_1d("d", definition.d, xs)
    bad = np.nonzero(d_vals <= 0.0)[0]
    if bad.size:
        raise ValidationError(f"d not positive at x={xs[bad[0]]:.6g}")
    _sample_1d("gamma", definition.gamma, xs)

    qs = np.linspace(-1.0, 1.0, samples)
    for key in ("beta2", "b2"):
        vals = _sample_1d(key, getattr(definition, key), qs)
        _require_nonnegative(key, vals, qs)

    pop = np.unique(np.concatenate([
        np.linspace(0.0, 10.0, samples),
        np.linspace(0.0, LARGE_ARGUMENT, samples),
    ]))
    flags = {}
    for key in ("beta0", "b0"):
        vals = _sample_1d(key, getattr(definition, key), pop)
        _require_nonnegative(key, vals, pop)
        flags[f"monotone_{key}"] = bool((np.diff(vals) < 0.0).all())
        try:
            at_large = evaluate(getattr(definition, key), x=LARGE_ARGUMENT)
        except EvalError as err:
            raise ValidationError(f"{key}: {err}") from None
        flags[f"vanishing_{key}"] = bool(abs(at_large) < VANISH_THRESHOLD)

    for i, xi in enumerate(xs):
        for j, yj in enumerate(xs):
            try:
                v = evaluate(definition.beta1, x=xi, y=yj)
            except EvalError as err:
                raise ValidationError(
                    f"beta1: {err} at x={xi:.6g}, y={yj:.6g}"
                ) from None
            if not np.isfinite(v):
                raise ValidationError(f"beta1 non-finite at x={xi:.6g}, y={yj:.6g}")
            if v < 0.0:
                raise ValidationError(f"beta1 negative at x={xi:.6g}, y={yj:.6g}")

    return ValidatedModel(
        definition=definition,
        samples=samples,
        mu_min=float(mu_vals.min()),
        d_min=float(d_vals.min()),
        **flags,
    )


def sample_ingredients(vm, grid):
    """Evaluate a validated model on a grid (pure; arrays are frozen)."""
    definition = vm.definition
    if grid.m != definition.m:
        raise ValueError(
            f"grid domain length {grid.m} differs from the model's {definition.m}"
        )
    centers = grid.centers
    interfaces = grid.interfaces
    mu = _sample_1d("mu", definition.mu, centers)
    mu0 = float(_sample_1d("mu", definition.mu, [0.0])[0])
    gamma = _sample_1d("gamma", definition.gamma, interfaces)
    d = _sample_1d("d", definition.d, interfaces)

    beta1 = np.empty((grid.N + 1, grid.N))
    rows_x = np.concatenate(([0.0], centers))
    for i, xi in enumerate(rows_x):
        for j, yj in enumerate(centers):
            beta1[i, j] = evaluate(definition.beta1, x=xi, y=yj)

    def beta0f(s):
        return evaluate(definition.beta0, x=float(s))

    def b0f(s):
        return evaluate(definition.b0, x=float(s))

    def beta2f(q):
        return evaluate(definition.beta2, x=min(1.0, max(-1.0, float(q))))

    def b2f(q):
        return evaluate(definition.b2, x=min(1.0, max(-1.0, float(q))))

    for arr in (mu, gamma, d, beta1):
        arr.flags.writeable = False
    return SampledIngredients(
        grid=grid, mu0=mu0, mu=mu, gamma=gamma, d=d, beta1=beta1,
        beta0=beta0f, beta2=beta2f, b0=b0f, b2=b2f,
    )
