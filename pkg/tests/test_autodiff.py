import math

import numpy as np
import pytest

from hyperagg import autodiff as ad
from hyperagg.autodiff import GradientTape, Tensor, gradient_check, gradient_check_multi
from hyperagg.errors import DimensionError, DomainError


def test_matmul_identity():
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    out = ad.matmul(Tensor(np.eye(2)), Tensor(a))
    np.testing.assert_array_equal(out.data, a)


def test_matmul_hand_oracle():
    # [[1,2]] x [[3],[4]] -> [[11]] by hand multiplication
    out = ad.matmul(Tensor([[1.0, 2.0]]), Tensor([[3.0], [4.0]]))
    np.testing.assert_array_equal(out.data, [[11.0]])


def test_matmul_shape_error_names_both_shapes():
    with pytest.raises(DimensionError) as err:
        ad.matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros((2, 3))))
    assert "(2, 3)" in str(err.value)


def test_matmul_gradient_matches_finite_differences():
    # grad of sum(a @ b) w.r.t. a at a=[[1,2]], b=[[3],[4]] is [[3,4]]
    b = np.array([[3.0], [4.0]])
    tape = GradientTape()
    a = tape.tensor([[1.0, 2.0]])
    loss = ad.matmul(a, Tensor(b)).sum()
    tape.backward(loss)
    np.testing.assert_allclose(tape.grad(a), [[3.0, 4.0]])
    err = gradient_check(lambda x: ad.matmul(x, Tensor(b)).sum(),
                         np.array([[1.0, 2.0]]), h=1e-5)
    assert err < 1e-7


def test_softmax_symmetry_and_oracle():
    np.testing.assert_allclose(ad.softmax_rows(Tensor([[0.0, 0.0]])).data,
                               [[0.5, 0.5]])
    # independent scalar exp/sum oracle for [[1,-1]]
    e1, e2 = math.exp(1.0), math.exp(-1.0)
    expect = [e1 / (e1 + e2), e2 / (e1 + e2)]
    np.testing.assert_allclose(ad.softmax_rows(Tensor([[1.0, -1.0]])).data,
                               [expect], rtol=0, atol=1e-12)
    np.testing.assert_allclose(expect, [0.88079708, 0.11920292], atol=1e-8)


def test_softmax_huge_entries_do_not_overflow():
    out = ad.softmax_rows(Tensor([[1000.0, 1000.0]]))
    np.testing.assert_allclose(out.data, [[0.5, 0.5]])


def test_softmax_rows_sum_to_one():
    rng = np.random.default_rng(0)
    x = rng.normal(scale=1e3, size=(20, 7))
    out = ad.softmax_rows(Tensor(x))
    np.testing.assert_allclose(out.data.sum(axis=1), np.ones(20), rtol=0, atol=1e-12)


def test_arcosh_values_and_derivative():
    assert ad.arcosh(Tensor(1.0)).item() == 0.0
    # high-precision reference: arcosh(2) = ln(2 + sqrt(3))
    assert abs(ad.arcosh(Tensor(2.0)).item() - math.log(2.0 + math.sqrt(3.0))) < 1e-15
    assert abs(ad.arcosh(Tensor(2.0)).item() - 1.3169579) < 1e-7

    tape = GradientTape()
    x = tape.tensor(2.0)
    tape.backward(ad.arcosh(x))
    assert abs(tape.grad(x) - 1.0 / math.sqrt(3.0)) < 1e-12
    err = gradient_check(lambda t: ad.arcosh(t), np.array(2.0), h=1e-5)
    assert err < 1e-8


def test_arcosh_domain_error():
    with pytest.raises(DomainError):
        ad.arcosh(Tensor(0.5))


def test_max_over_rows():
    out = ad.tmax(Tensor([[1.0, 5.0], [3.0, 2.0]]), axis=0)
    np.testing.assert_array_equal(out.data, [3.0, 5.0])


def test_relu_values_and_subgradient_at_zero():
    assert ad.relu(Tensor(-2.0)).item() == 0.0
    assert ad.relu(Tensor(3.0)).item() == 3.0
    tape = GradientTape()
    x = tape.tensor(0.0)
    tape.backward(ad.relu(x))
    assert tape.grad(x) == 0.0


def test_fanout_sums_adjoints_exactly():
    tape = GradientTape()
    x = tape.tensor(3.5)
    tape.backward(x + x)
    assert float(tape.grad(x)) == 2.0


def test_unused_input_gradient_is_exactly_zero():
    tape = GradientTape()
    x = tape.tensor([1.0, 2.0])
    y = tape.tensor([3.0, 4.0])
    tape.backward(x.sum())
    np.testing.assert_array_equal(tape.grad(y), [0.0, 0.0])


def test_gradient_check_sum_of_squares():
    err = gradient_check(lambda x: (x * x).sum(), np.array([1.0, 2.0, 3.0]), h=1e-5)
    assert err < 1e-7


def test_gradient_check_constant_function():
    err = gradient_check(lambda x: x.sum() * 0.0, np.array([1.0, 2.0]), h=1e-5)
    assert err == 0.0


def test_tapes_are_isolated():
    t1, t2 = GradientTape(), GradientTape()
    x1, x2 = t1.tensor([1.0, 2.0]), t2.tensor([1.0, 2.0])
    with pytest.raises(ValueError):
        _ = x1 + x2


OPS_FOR_RANDOM_CHECK = [
    ("add", lambda xs: (xs[0] + xs[1]).sum(), 2, (3, 4)),
    ("sub", lambda xs: (xs[0] - xs[1]).sum(), 2, (3, 4)),
    ("mul", lambda xs: (xs[0] * xs[1]).sum(), 2, (3, 4)),
    ("div", lambda xs: (xs[0] / (xs[1] * xs[1] + 1.0)).sum(), 2, (3, 4)),
    ("matmul", lambda xs: ad.matmul(xs[0], ad.transpose(xs[1])).sum(), 2, (3, 4)),
    ("exp", lambda xs: ad.exp(xs[0]).sum(), 1, (3, 4)),
    ("log", lambda xs: ad.log(xs[0] * xs[0] + 1.0).sum(), 1, (3, 4)),
    ("sqrt", lambda xs: ad.sqrt(xs[0] * xs[0] + 1.0).sum(), 1, (3, 4)),
    ("relu", lambda xs: ad.relu(xs[0]).sum(), 1, (3, 4)),
    ("sigmoid", lambda xs: ad.sigmoid(xs[0]).sum(), 1, (3, 4)),
    ("softmax", lambda xs: (ad.softmax_rows(xs[0]) * ad.softmax_rows(xs[0])).sum(), 1, (3, 4)),
    ("mean_axis", lambda xs: (xs[0].mean(axis=1) * xs[0].mean(axis=1)).sum(), 1, (3, 4)),
    ("max_axis", lambda xs: (xs[0].max(axis=1) * xs[0].max(axis=1)).sum(), 1, (3, 4)),
    ("concat", lambda xs: (ad.concat([xs[0], xs[1]], axis=0) ** 2.0).sum(), 2, (3, 4)),
    ("slice", lambda xs: (xs[0][1:, :3] * xs[0][:2, 1:]).sum(), 1, (3, 4)),
    ("reshape", lambda xs: (xs[0].reshape(4, 3) @ Tensor(np.arange(6.0).reshape(3, 2))).sum(), 1, (3, 4)),
    ("take", lambda xs: (ad.take(xs[0], [2, 0, 0], axis=0) ** 2.0).sum(), 1, (3, 4)),
    ("power", lambda xs: ((xs[0] * xs[0] + 1.0) ** 1.5).sum(), 1, (3, 4)),
    ("sigmoid_gate", lambda xs: (ad.sigmoid(xs[0][:, :1]) * xs[1]).sum(), 2, (3, 4)),
]


@pytest.mark.parametrize("name,f,arity,shape", OPS_FOR_RANDOM_CHECK,
                         ids=[o[0] for o in OPS_FOR_RANDOM_CHECK])
def test_registered_op_gradients(name, f, arity, shape):
    rng = np.random.default_rng(hash(name) % 2**32)
    xs = [rng.normal(size=shape) for _ in range(arity)]
    assert gradient_check_multi(f, xs, h=1e-5) < 1e-4
