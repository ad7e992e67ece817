import numpy as np
import pytest

from fagcn.autodiff import Tape, backward
from fagcn.graph import build_graph


def er_graph(rng, n, p):
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(iu.shape[0]) < p
    return build_graph(np.stack([iu[keep], ju[keep]], axis=1), n)


def dense_norm_adj(g):
    """Direct dense D^{-1/2} A D^{-1/2}, zero rows/cols for isolated nodes."""
    a = g.to_dense()
    d = a.sum(axis=1)
    s = np.where(d > 0, 1.0 / np.sqrt(np.where(d > 0, d, 1.0)), 0.0)
    return s[:, None] * a * s[None, :]


def fd_gradient_error(loss_fn, tensors, h=1e-5):
    """Worst relative error between tape gradients and central differences.

    ``loss_fn()`` must rebuild the scalar loss from the current values of
    ``tensors``; entries are perturbed in place and restored.  The error of a
    tensor is ``max|num - ana| / max(max|num|, max|ana|, 1e-8)``.
    """
    for t in tensors:
        t.zero_grad()
    with Tape() as tape:
        loss = loss_fn()
    backward(tape, loss)
    analytic = [t.grad.copy() for t in tensors]
    worst = 0.0
    for t, ana in zip(tensors, analytic):
        num = np.zeros_like(t.value)
        for idx in np.ndindex(t.value.shape):
            orig = t.value[idx]
            t.value[idx] = orig + h
            up = loss_fn().item()
            t.value[idx] = orig - h
            down = loss_fn().item()
            t.value[idx] = orig
            num[idx] = (up - down) / (2 * h)
        denom = max(np.abs(num).max(), np.abs(ana).max(), 1e-8)
        worst = max(worst, float(np.abs(num - ana).max() / denom))
    return worst


@pytest.fixture
def rng():
    return np.random.default_rng(20240613)


@pytest.fixture
def k2():
    return build_graph([(0, 1)], 2)


@pytest.fixture
def k3():
    return build_graph([(0, 1), (1, 2), (0, 2)], 3)
