import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gazecomp import autodiff as ad
from gazecomp.errors import NonFiniteError, OptimizationError, ShapeError

import gradcases


@pytest.mark.parametrize("name", sorted(gradcases.OP_CASES))
def test_op_gradients_match_finite_differences(name):
    for seed in range(2):
        assert gradcases.check_case(gradcases.OP_CASES[name], seed) < gradcases.REL_TOL


@pytest.mark.parametrize("name", sorted(gradcases.END_TO_END_CASES))
def test_model_loss_gradient_per_parameter_group(name):
    errs = gradcases.per_group_errors(gradcases.END_TO_END_CASES[name], 3)
    bad = {k: v for k, v in errs.items() if v >= gradcases.REL_TOL}
    assert not bad


def test_matmul_shape_error_names_both_shapes():
    a = ad.tensor(np.ones((2, 3)))
    b = ad.tensor(np.ones((4, 5)))
    with pytest.raises(ShapeError, match=r"\(2, 3\).*\(4, 5\)"):
        ad.matmul(a, b)


def test_non_finite_forward_raises():
    x = ad.tensor([-1.0], requires_grad=True)
    with pytest.raises(NonFiniteError):
        x.log()
    with pytest.raises(NonFiniteError), np.errstate(over="ignore"):
        ad.tensor([1e300]) * ad.tensor([1e300])


def test_gradients_accumulate_without_aliasing():
    x = ad.tensor([1.0, 2.0], requires_grad=True)
    y = (x * x).sum() + (x * 3.0).sum()
    y.backward()
    np.testing.assert_allclose(x.grad, 2 * x.data + 3.0)


def test_no_grad_builds_no_graph():
    x = ad.tensor([1.0], requires_grad=True)
    with ad.no_grad():
        y = x * 2.0
    assert not y.requires_grad and y._parents == ()


def test_backward_needs_scalar():
    with pytest.raises(ShapeError):
        (ad.tensor([1.0, 2.0], requires_grad=True) * 2.0).backward()


def test_softmax_rows_sum_to_one_for_large_logits():
    x = ad.tensor(np.array([[1000.0, 1001.0, 999.0], [-5.0, 0.0, 5.0]]))
    out = ad.softmax(x).data
    np.testing.assert_allclose(out.sum(axis=-1), 1.0, atol=1e-15)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-30, 30), min_size=2, max_size=12), st.floats(-50, 50))
def test_softmax_shift_invariant(logits, shift):
    x = np.array(logits)
    a = ad.softmax(ad.tensor(x)).data
    b = ad.softmax(ad.tensor(x + shift)).data
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_kl_zero_for_identical_distributions():
    p = np.full((2, 4), 0.25)
    assert ad.kl_loss(ad.tensor(p), p).item() == 0.0


def test_kl_matches_direct_formula_both_directions():
    rng = np.random.default_rng(0)
    p = rng.random((3, 5)) + 0.1
    q = rng.random((3, 5)) + 0.1
    p /= p.sum(-1, keepdims=True)
    q /= q.sum(-1, keepdims=True)
    assert np.isclose(ad.kl_loss(ad.tensor(p), q).item(), np.sum(p * np.log(p / q)), atol=1e-14)
    assert np.isclose(ad.kl_loss(ad.tensor(p), q, reverse=True).item(), np.sum(q * np.log(q / p)), atol=1e-14)


def test_kl_clamps_zero_cells():
    p = np.array([1.0, 0.0])
    q = np.array([0.5, 0.5])
    expected = 1.0 * np.log(1.0 / 0.5) + 0.0
    assert np.isclose(ad.kl_loss(ad.tensor(p), q).item(), expected)
    assert np.isfinite(ad.kl_loss(ad.tensor(q), p).item())


def test_kl_shape_mismatch():
    with pytest.raises(ShapeError):
        ad.kl_loss(ad.tensor(np.ones(3) / 3), np.ones(4) / 4)


def test_adamw_single_step_hand_computed():
    p = ad.Parameter(np.array([1.0, -2.0]), "w")
    p.grad = np.array([0.5, -0.25])
    lr, wd = 0.1, 0.07
    ad.adamw_step([p], lr, wd, (0.9, 0.999), step_count=1)
    # first bias-corrected step: m_hat = g, v_hat = g^2 -> update = sign(g) (up to eps)
    expected = np.array([1.0, -2.0]) * (1 - lr * wd) - lr * np.array([0.5, -0.25]) / (np.abs([0.5, -0.25]) + 1e-8)
    np.testing.assert_allclose(p.data, expected, rtol=1e-12)


def test_adamw_decay_is_decoupled():
    p = ad.Parameter(np.array([3.0]), "w")
    p.grad = np.zeros(1)
    ad.adamw_step([p], 0.01, 0.07, step_count=1)
    assert p.data[0] == pytest.approx(3.0 * (1 - 0.01 * 0.07))


def test_adamw_non_finite_gradient_names_parameter():
    good = ad.Parameter(np.ones(2), "good")
    bad = ad.Parameter(np.ones(2), "bad.weight")
    good.grad = np.ones(2)
    bad.grad = np.array([np.nan, 0.0])
    with pytest.raises(OptimizationError, match="bad.weight"):
        ad.adamw_step([good, bad], 0.1, 0.0)
    np.testing.assert_array_equal(good.data, 1.0)  # nothing updated


def test_adamw_reduces_quadratic():
    p = ad.Parameter(np.array([2.0, -3.0]), "w")
    opt = ad.AdamW([p], lr=0.1, weight_decay=0.0)
    for _ in range(200):
        opt.zero_grad()
        (p * p).sum().backward()
        opt.step()
    assert np.abs(p.data).max() < 0.05
    assert opt.step_count == 200
