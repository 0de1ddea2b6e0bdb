"""Loss programs: evaluation, first and second derivatives, and the
finite-difference audit that anchors everything else."""

import numpy as np
import pytest

import hypergrad.tape as tape
from hypergrad import (
    Dataset,
    DimensionError,
    FlatVector,
    LossProgram,
    check_grad_fd,
    empty_dataset,
    evaluate,
    grad_lam,
    grad_w,
    hvp,
    mixed_vjp,
)

# f(lam, w) = 0.5*||w||^2 * exp(lam_0) + dot(lam, w):
# closed forms for every derivative the interface exposes.


def _build(lam_node, w_node, data, seed):
    scale = tape.exp(tape.slice1d(lam_node, 0, 1))
    quad = tape.multiply(
        tape.multiply(tape.constant(np.array(0.5)), tape.reduce_sum(tape.multiply(w_node, w_node))),
        tape.reduce_sum(scale),
    )
    return tape.add(quad, tape.dot(lam_node, w_node))


PROG = LossProgram(_build, lam_dim=3, w_dim=3, name="closed_form")
LAM = FlatVector.single("lam", np.array([0.2, -0.4, 1.1]))
W = FlatVector.single("w", np.array([1.0, -2.0, 0.5]))
DATA = empty_dataset()


def test_evaluate_matches_closed_form():
    expected = 0.5 * np.sum(W.data**2) * np.exp(0.2) + LAM.data @ W.data
    assert evaluate(PROG, LAM, W, DATA) == pytest.approx(expected, rel=1e-14)


def test_grad_w_closed_form():
    expected = W.data * np.exp(0.2) + LAM.data
    np.testing.assert_allclose(grad_w(PROG, LAM, W, DATA).data, expected, rtol=1e-14)


def test_grad_lam_closed_form():
    expected = np.array([0.5 * np.sum(W.data**2) * np.exp(0.2), 0.0, 0.0]) + W.data
    np.testing.assert_allclose(grad_lam(PROG, LAM, W, DATA).data, expected, rtol=1e-14)


def test_hvp_closed_form():
    # Hessian in w is exp(lam_0) * I
    v = FlatVector.single("w", np.array([2.0, 0.0, -1.0]))
    np.testing.assert_allclose(
        hvp(PROG, LAM, W, DATA, v).data, np.exp(0.2) * v.data, rtol=1e-14
    )


def test_mixed_vjp_closed_form():
    # d2f/dw dlam: column 0 is exp(lam_0)*w, rest identity
    v = FlatVector.single("w", np.array([1.0, 1.0, 1.0]))
    expected = np.array([np.exp(0.2) * np.sum(W.data * v.data), 0.0, 0.0]) + v.data
    np.testing.assert_allclose(mixed_vjp(PROG, LAM, W, DATA, v).data, expected, rtol=1e-14)


def test_gradient_layouts_follow_inputs():
    gw = grad_w(PROG, LAM, W, DATA)
    gl = grad_lam(PROG, LAM, W, DATA)
    assert gw.same_layout(W)
    assert gl.same_layout(LAM)


def test_dimension_validation():
    bad_w = FlatVector.single("w", np.zeros(2))
    with pytest.raises(DimensionError):
        evaluate(PROG, LAM, bad_w, DATA)
    with pytest.raises(DimensionError):
        hvp(PROG, LAM, W, DATA, FlatVector.single("v", np.zeros(2)))
    with pytest.raises(DimensionError):
        mixed_vjp(PROG, LAM, W, DATA, FlatVector.single("v", np.zeros(2)))


def test_non_scalar_program_rejected():
    vec_prog = LossProgram(lambda l, w, d, s: tape.multiply(w, w), lam_dim=3, w_dim=3)
    with pytest.raises(DimensionError):
        evaluate(vec_prog, LAM, W, DATA)


def test_check_grad_fd_passes_on_correct_program():
    report = check_grad_fd(PROG, LAM, W, DATA)
    assert report.max_err < 1e-8
    assert report.grad_w_err < 1e-8
    assert report.grad_lam_err < 1e-8
    assert report.hvp_err < 1e-8
    assert report.mixed_err < 1e-8


def test_check_grad_fd_flags_a_wrong_gradient():
    # forward value says w^2 but a detach makes the gradient drop a factor
    def broken(lam_node, w_node, data, seed):
        return tape.reduce_sum(tape.multiply(tape.detach(w_node), w_node))

    prog = LossProgram(broken, lam_dim=3, w_dim=3, name="broken")
    report = check_grad_fd(prog, LAM, W, DATA)
    assert report.grad_w_err > 1e-2


def test_check_grad_fd_eps_domain():
    with pytest.raises(DimensionError):
        check_grad_fd(PROG, LAM, W, DATA, eps=0.0)
    with pytest.raises(DimensionError):
        check_grad_fd(PROG, LAM, W, DATA, eps=0.5)


def test_data_slot_reaches_the_loss():
    def with_data(lam_node, w_node, data, seed):
        x = tape.constant(data.inputs)
        return tape.squared_error(tape.matmul(x, w_node), tape.constant(data.float_targets()))

    prog = LossProgram(with_data, lam_dim=0, w_dim=2)
    rng = np.random.default_rng(0)
    d1 = Dataset(rng.standard_normal((5, 2)), rng.standard_normal(5), "d1")
    d2 = Dataset(rng.standard_normal((5, 2)), rng.standard_normal(5), "d2")
    lam = FlatVector.single("lam", np.zeros(0))
    w = FlatVector.single("w", np.array([0.3, -0.7]))
    assert evaluate(prog, lam, w, d1) != evaluate(prog, lam, w, d2)
