import numpy as np
import pytest

from dpgnn import autodiff as ad
from dpgnn.episodic import Prototypes
from dpgnn.errors import NumericError, ShapeError
from dpgnn.graph import build_graph
from dpgnn.ssl import SslConfig, proto_separation_loss, smoothing_loss

from .conftest import random_graph
from .gradcheck import check_gradients, numerical_grad, rel_error
from .oracles import dense_smoothing


def separation(p: np.ndarray) -> float:
    tape = ad.Tape()
    return proto_separation_loss(Prototypes(tape.variable(p))).values[0, 0]


def test_orthogonal_prototypes_zero_loss():
    assert abs(separation(np.array([[3.0, 0.0], [0.0, -2.0]]))) < 1e-12


def test_identical_prototypes_loss_two():
    p = np.array([[1.0, 2.0], [1.0, 2.0]])
    assert separation(p) == pytest.approx(2.0)


def test_antipodal_prototypes_loss_minus_two():
    p = np.array([[1.0, -0.5], [-1.0, 0.5]])
    assert separation(p) == pytest.approx(-2.0)


def test_separation_scale_invariance(rng):
    p = rng.standard_normal((4, 6))
    scales = np.array([[0.1], [3.0], [7.5], [0.01]])
    assert separation(p * scales) == pytest.approx(separation(p))


def test_separation_zero_norm_error():
    with pytest.raises(NumericError):
        separation(np.array([[0.0, 0.0], [1.0, 1.0]]))


def test_separation_gradients(rng):
    for seed in range(5):
        p = np.random.default_rng(seed).standard_normal((3, 4))
        p += 0.3 * np.sign(p)

        def build(tape, t):
            return proto_separation_loss(Prototypes(t["p"]))

        check_gradients(build, {"p": p}, seed)


def test_smoothing_constant_field_on_regular_graph():
    # 4-cycle: all degrees equal, identical rows -> zero loss
    g = build_graph([(0, 1), (1, 2), (2, 3), (3, 0)], 4)
    tape = ad.Tape()
    loss = smoothing_loss(tape.variable(np.ones((4, 3)) * 2.5), g)
    assert abs(loss.values[0, 0]) < 1e-12


def test_smoothing_hand_case():
    g = build_graph([(0, 1)], 2)
    tape = ad.Tape()
    loss = smoothing_loss(tape.variable(np.array([[1.0], [0.0]])), g)
    # both directions of the single edge: 2 * (1/sqrt(2) - 0)^2 = 1
    assert loss.values[0, 0] == pytest.approx(1.0)


def test_smoothing_matches_dense_quadratic_form(rng):
    g, edges = random_graph(rng, 20, 0.2)
    gm = rng.standard_normal((20, 5))
    tape = ad.Tape()
    loss = smoothing_loss(tape.variable(gm), g).values[0, 0]
    assert abs(loss - dense_smoothing(edges, 20, gm)) < 1e-8


def test_smoothing_nonnegative_and_zero_iff_scaled_constant(rng):
    g, _ = random_graph(rng, 15, 0.3)
    tape = ad.Tape()
    val = smoothing_loss(tape.variable(rng.standard_normal((15, 4))), g).values[0, 0]
    assert val >= 0.0
    # a field with g_i proportional to sqrt(d~_i) is flat after scaling
    flat = np.sqrt(g.self_loop_degrees)[:, None] * np.ones((15, 2))
    tape = ad.Tape()
    assert abs(smoothing_loss(tape.variable(flat), g).values[0, 0]) < 1e-10


def test_smoothing_gradients(rng):
    g, _ = random_graph(np.random.default_rng(11), 8, 0.4)
    for seed in range(5):
        gm = np.random.default_rng(seed).standard_normal((8, 3))

        def scalar():
            tape = ad.Tape()
            return smoothing_loss(tape.variable(gm), g).values[0, 0]

        tape = ad.Tape()
        t = tape.variable(gm)
        grads = ad.backward(tape, smoothing_loss(t, g))
        numeric = numerical_grad(scalar, gm)
        assert rel_error(grads[t.node_id], numeric) < 1e-4


def test_smoothing_shape_error(rng):
    g, _ = random_graph(rng, 6, 0.4)
    tape = ad.Tape()
    with pytest.raises(ShapeError):
        smoothing_loss(tape.variable(np.ones((5, 2))), g)


def test_ssl_config_validation():
    SslConfig(lambda1=0.0, lambda2=10.0)
    with pytest.raises(Exception):
        SslConfig(lambda1=-1.0, lambda2=0.0)
    with pytest.raises(Exception):
        SslConfig(lambda1=float("inf"), lambda2=0.0)
