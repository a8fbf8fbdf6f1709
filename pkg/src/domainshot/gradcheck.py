"""Finite-difference verification of every hand-written gradient.

The oracle is central differences in float64 at step 1e-6, touching only the
forward/loss value functions, never the analytic backward paths it checks.
Relative error per coordinate is |a - f| / max(|a| + |f|, 1e-5); the floor
keeps coordinates whose true gradient sits below the finite-difference noise
floor (~1e-10 absolute) from reading as spurious mismatches. A suite passes
when the max over all coordinates and trials stays below 1e-4.

Random instances are drawn away from the two non-smooth spots (ReLU kinks
closer than 1e-4 to zero, coincident query/prototype pairs), where a
subgradient convention rather than a derivative applies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .baseline import BaselineModel, ce_loss
from .losses import EpisodeBatch, LossConfig, mn_loss, pn_loss, sc_loss
from .projection import ProjectionModel, backward, forward
from .rng import stream

FD_STEP = 1e-6
TOLERANCE = 1e-4


def finite_difference(f, x: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    """Central-difference gradient of scalar f at x, coordinate by coordinate."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = grad.reshape(-1)
    xf = x.copy().reshape(-1)
    for i in range(xf.size):
        orig = xf[i]
        xf[i] = orig + step
        hi = f(xf.reshape(x.shape))
        xf[i] = orig - step
        lo = f(xf.reshape(x.shape))
        xf[i] = orig
        flat[i] = (hi - lo) / (2 * step)
    return grad


def max_rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    a = np.asarray(analytic, dtype=np.float64).reshape(-1)
    n = np.asarray(numeric, dtype=np.float64).reshape(-1)
    denom = np.maximum(np.abs(a) + np.abs(n), 1e-5)
    return float(np.max(np.abs(a - n) / denom))


@dataclass(frozen=True)
class GradcheckResult:
    name: str
    dim: int
    trials: int
    max_error: float

    @property
    def passed(self) -> bool:
        return self.max_error < TOLERANCE


def _unit_rows(rng, n, dim):
    v = rng.standard_normal((n, dim))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _random_batch(rng, dim, n_way=3, k_shot=2, q_query=2) -> EpisodeBatch:
    classes = np.arange(n_way)
    return EpisodeBatch(
        support_r=_unit_rows(rng, n_way * k_shot, dim),
        support_y=np.repeat(classes, k_shot),
        query_r=_unit_rows(rng, n_way * q_query, dim),
        query_y=np.repeat(classes, q_query),
    )


def _check_loss(loss_fn, name, dim, trials, seed) -> GradcheckResult:
    worst = 0.0
    rng = stream(seed, f"gradcheck-{name}", dim)
    for _ in range(trials):
        batch = _random_batch(rng, dim)
        res = loss_fn(batch)
        fd_q = finite_difference(
            lambda q: loss_fn(
                EpisodeBatch(batch.support_r, batch.support_y, q, batch.query_y)
            ).loss,
            batch.query_r,
        )
        fd_s = finite_difference(
            lambda s: loss_fn(
                EpisodeBatch(s, batch.support_y, batch.query_r, batch.query_y)
            ).loss,
            batch.support_r,
        )
        worst = max(worst, max_rel_error(res.d_query, fd_q), max_rel_error(res.d_support, fd_s))
    return GradcheckResult(name=name, dim=dim, trials=trials, max_error=worst)


def check_pn(dim, trials=50, seed=0, config=LossConfig()) -> GradcheckResult:
    return _check_loss(lambda b: pn_loss(b, config), "pn_loss", dim, trials, seed)


def check_mn(dim, trials=50, seed=0) -> GradcheckResult:
    return _check_loss(lambda b: mn_loss(b), "mn_loss", dim, trials, seed)


def check_sc(dim, trials=50, seed=0, config=LossConfig()) -> GradcheckResult:
    return _check_loss(lambda b: sc_loss(b, config), "sc_loss", dim, trials, seed)


def _projection_instance(rng, dim):
    """A model/input pair whose pre-activations sit clear of the ReLU kink."""
    while True:
        model = ProjectionModel(W=rng.standard_normal((dim, dim)), b=rng.standard_normal(dim) * 0.1)
        x = rng.standard_normal(dim)
        pre = model.W @ x + model.b
        if np.all(np.abs(pre) > 1e-4) and np.any(pre > 0):
            return model, x


def check_projection(dim, trials=50, seed=0) -> GradcheckResult:
    """Backward pass of the head against FD on L = v . r."""
    worst = 0.0
    rng = stream(seed, "gradcheck-projection", dim)
    for _ in range(trials):
        model, x = _projection_instance(rng, dim)
        v = rng.standard_normal(dim)
        r, cache = forward(model, x)
        grads = backward(model, cache, v)

        def loss_of(W=None, b=None):
            m = ProjectionModel(
                W=model.W if W is None else W, b=model.b if b is None else b
            )
            out, _ = forward(m, x)
            return float(v @ out)

        fd_W = finite_difference(lambda W: loss_of(W=W), model.W)
        fd_b = finite_difference(lambda b: loss_of(b=b), model.b)
        worst = max(worst, max_rel_error(grads.dW, fd_W), max_rel_error(grads.db, fd_b))
    return GradcheckResult(name="projection_backward", dim=dim, trials=trials, max_error=worst)


def _baseline_instance(rng, dim, batch):
    while True:
        model = BaselineModel(
            projection=ProjectionModel(
                W=rng.standard_normal((dim, dim)), b=rng.standard_normal(dim) * 0.1
            ),
            V=rng.standard_normal((2, dim)),
            c=rng.standard_normal(2) * 0.1,
        )
        X = rng.standard_normal((batch, dim))
        pre = X @ model.projection.W.T + model.projection.b
        if np.all(np.abs(pre) > 1e-4) and np.all(np.any(pre > 0, axis=1)):
            return model, X


def check_baseline_ce(dim, trials=50, seed=0, batch=8) -> GradcheckResult:
    worst = 0.0
    rng = stream(seed, "gradcheck-baseline", dim)
    for _ in range(trials):
        model, X = _baseline_instance(rng, dim, batch)
        y = rng.integers(0, 2, size=batch)
        _, grads = ce_loss(model, X, y)

        def loss_of(field, value):
            m = BaselineModel(
                projection=ProjectionModel(
                    W=value if field == "W" else model.projection.W,
                    b=value if field == "b" else model.projection.b,
                ),
                V=value if field == "V" else model.V,
                c=value if field == "c" else model.c,
            )
            return ce_loss(m, X, y)[0]

        for field, analytic, current in (
            ("V", grads.dV, model.V),
            ("c", grads.dc, model.c),
            ("W", grads.dW, model.projection.W),
            ("b", grads.db, model.projection.b),
        ):
            fd = finite_difference(lambda v, f=field: loss_of(f, v), current)
            worst = max(worst, max_rel_error(analytic, fd))
    return GradcheckResult(name="baseline_ce", dim=dim, trials=trials, max_error=worst)


def run_all(dims=(3, 8, 32), trials=50, seed=0) -> list[GradcheckResult]:
    results = []
    for dim in dims:
        results.append(check_pn(dim, trials, seed))
        results.append(check_mn(dim, trials, seed))
        results.append(check_sc(dim, trials, seed))
        results.append(check_projection(dim, trials, seed))
        results.append(check_baseline_ce(dim, trials, seed))
    return results
