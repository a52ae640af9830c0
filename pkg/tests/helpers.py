"""Shared test utilities: finite-difference oracles and error measures."""

import numpy as np


def fd_grad(f, x, h=1e-5):
    """Central finite-difference gradient of a scalar function of an array.

    `f` must not mutate its argument and must be deterministic.
    """
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat = x.ravel()
    gf = g.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(x)
        flat[i] = orig - h
        fm = f(x)
        flat[i] = orig
        gf[i] = (fp - fm) / (2.0 * h)
    return g


def rel_err(a, b):
    """Max-norm relative error between two gradient arrays."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    scale = max(np.abs(a).max(), np.abs(b).max(), 1e-8)
    return np.abs(a - b).max() / scale


def check_grad(build_loss, x0, h=1e-5, tol=1e-4):
    """Assert autodiff and finite differences agree on d loss / d x0.

    `build_loss(x_array)` must construct the loss tensor from a fresh
    input tensor each call and return (loss_tensor, input_tensor) when
    given requires_grad=True input, or a float when probed for FD.
    """
    from lumitrack.autodiff import Tensor

    x = Tensor(x0, requires_grad=True)
    loss = build_loss(x)
    loss.backward()
    got = x.grad.copy()

    def f(arr):
        return build_loss(Tensor(arr)).item()

    want = fd_grad(f, x0, h=h)
    err = rel_err(got, want)
    assert err < tol, f"gradient mismatch: rel err {err:.3g} >= {tol}"
    return err
