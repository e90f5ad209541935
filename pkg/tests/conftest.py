import numpy as np
import pytest

from acca.tensor import Tensor, backward


def numeric_grad(f, params, h=1e-5):
    """Central differences of scalar f() w.r.t. each parameter's data."""
    out = []
    for p in params:
        g = np.zeros_like(p.data)
        it = np.nditer(p.data, flags=["multi_index"])
        for _ in it:
            i = it.multi_index
            old = p.data[i]
            p.data[i] = old + h
            up = f().item()
            p.data[i] = old - h
            down = f().item()
            p.data[i] = old
            g[i] = (up - down) / (2 * h)
        out.append(g)
    return out


def rel_error(a, b):
    a = np.concatenate([np.ravel(x) for x in a])
    b = np.concatenate([np.ravel(x) for x in b])
    return np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-8)


def grad_check(f, params, h=1e-5):
    """Relative error between autodiff and central-difference gradients."""
    analytic = backward(f(), params)
    return rel_error([analytic[p] for p in params], numeric_grad(f, params, h))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def param(rng, *shape, scale=1.0):
    return Tensor(scale * rng.standard_normal(shape), requires_grad=True)
