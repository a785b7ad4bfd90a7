"""Central finite-difference gradient checking against the tape engine."""

import numpy as np

from dpgnn import autodiff as ad


def numerical_grad(f, x: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Central differences of a scalar function, one coordinate at a time."""
    g = np.zeros_like(x, dtype=np.float64)
    flat, gf = x.reshape(-1), g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        fp = f()
        flat[i] = orig - eps
        fm = f()
        flat[i] = orig
        gf[i] = (fp - fm) / (2.0 * eps)
    return g


def rel_error(a: np.ndarray, b: np.ndarray) -> float:
    denom = max(np.abs(a).max(initial=0.0), np.abs(b).max(initial=0.0), 1e-8)
    return float(np.abs(a - b).max(initial=0.0) / denom)


def check_gradients(build, inputs: dict[str, np.ndarray], seed: int = 0, tol: float = 1e-4, eps: float = 1e-5) -> float:
    """Compare tape gradients of sum(proj * build(...)) with finite differences.

    build(tape, tensors) returns the op output; `proj` is a fixed random
    projection so every output entry influences the scalar. Returns the worst
    relative error across all inputs.
    """
    arrays = {k: np.array(v, dtype=np.float64) for k, v in inputs.items()}

    def forward():
        tape = ad.Tape()
        tensors = {k: tape.variable(v) for k, v in arrays.items()}
        return tape, tensors, build(tape, tensors)

    _, _, probe = forward()
    proj = np.random.default_rng(seed ^ 0x5EED).standard_normal(probe.values.shape)

    tape, tensors, out = forward()
    loss = ad.sum_all(ad.mul_elem(out, tape.constant(proj)))
    grads = ad.backward(tape, loss)

    worst = 0.0
    for name, arr in arrays.items():
        analytic = grads.get(tensors[name].node_id)
        assert analytic is not None, f"no gradient reached input {name!r}"

        def scalar():
            _, _, o = forward()
            return float((o.values * proj).sum())

        numeric = numerical_grad(scalar, arr, eps=eps)
        err = rel_error(analytic, numeric)
        assert err < tol, f"gradient of {name!r}: rel error {err:.3e} >= {tol}"
        worst = max(worst, err)
    return worst
