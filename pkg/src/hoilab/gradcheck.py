"""Finite-difference verification of reverse-mode gradients."""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .errors import InvalidArgumentError, NonFiniteError


def grad_check(function, params, eps: float = 1e-5, seed: int = 0) -> float:
    """Compare analytic gradients against central differences.

    ``function`` is a zero-argument callable returning a Tensor computed
    from the entries of ``params`` (a name → Tensor mapping, typically a
    ParamStore subset). Tensor-valued outputs are reduced to a scalar with
    a fixed random linear functional so a single backward pass covers them;
    scalar outputs get a functional of 1.

    Returns the maximum over all parameter entries of
    |analytic − central difference| / max(1, |central difference|).
    """
    if not (1e-7 <= eps <= 1e-4):
        raise InvalidArgumentError(f"eps must lie in [1e-7, 1e-4], got {eps}")
    names = sorted(params)
    if not names:
        raise InvalidArgumentError("grad_check needs at least one parameter")

    out = function()
    if out.size == 1:
        functional = np.ones(out.shape)  # exact; keeps linear cases error-free
    else:
        functional = np.random.default_rng(seed).normal(size=out.shape)

    reduced = T.tsum(T.mul(out, functional))
    if not np.isfinite(reduced.item()):
        raise NonFiniteError("non-finite value at the base point")
    reduced.backward()
    analytic = {
        name: (
            np.zeros_like(params[name].data)
            if params[name].grad is None
            else np.array(params[name].grad, copy=True)
        )
        for name in names
    }

    def probe(name: str) -> float:
        # non-finite probes are reported, not warned about
        with np.errstate(divide="ignore", invalid="ignore"):
            value = float((function().data * functional).sum())
        if not np.isfinite(value):
            raise NonFiniteError(f"non-finite value while probing parameter {name!r}")
        return value

    worst = 0.0
    for name in names:
        flat = params[name].data.reshape(-1)
        grads = analytic[name].reshape(-1)
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + eps
            up = probe(name)
            flat[i] = original - eps
            down = probe(name)
            flat[i] = original
            fd = (up - down) / (2.0 * eps)
            err = abs(grads[i] - fd) / max(1.0, abs(fd))
            worst = max(worst, err)
    return worst
