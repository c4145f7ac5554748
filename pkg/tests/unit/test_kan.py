import numpy as np
import pytest

from src.kan import (
    BSplineGrid,
    KanLayer,
    MultiKanLayer,
    basis_derivatives,
    basis_values,
    edge_function,
    kan_layer_forward,
    kan_stack,
    multikan_forward,
    multikan_layer_forward,
    multiply_groups,
    refine_grid,
)
from src.tensor import Tape, Tensor, backward, grad_of, ops
from src.utils.errors import GridError, ShapeError
from src.verify.gradcheck import audit_kan


def recursive_basis(i, p, x, t):
    if p == 0:
        return 1.0 if t[i] <= x < t[i + 1] else 0.0
    left = (x - t[i]) / (t[i + p] - t[i]) * recursive_basis(i, p - 1, x, t)
    right = (t[i + p + 1] - x) / (t[i + p + 1] - t[i + 1]) * recursive_basis(i + 1, p - 1, x, t)
    return left + right


def silu(x):
    return x / (1.0 + np.exp(-x))


class TestGrid:
    @pytest.mark.parametrize("g,k", [(1, 0), (5, 3), (7, 2)])
    def test_knot_count_and_order(self, g, k):
        knots = BSplineGrid(grid_size=g, degree=k).knots
        assert len(knots) == g + 2 * k + 1
        assert np.all(np.diff(knots) > 0)

    @pytest.mark.parametrize("kwargs", [{"grid_size": 0}, {"degree": -1}, {"lo": 1.0, "hi": 1.0}])
    def test_invalid_grid(self, kwargs):
        with pytest.raises(GridError):
            BSplineGrid(**kwargs)

    def test_with_size_keeps_degree_and_range(self):
        grid = BSplineGrid(grid_size=3, degree=2, lo=-2.0, hi=0.5).with_size(9)
        assert (grid.grid_size, grid.degree, grid.lo, grid.hi) == (9, 2, -2.0, 0.5)


class TestBasis:
    def test_degree_zero_is_indicator(self):
        grid = BSplineGrid(grid_size=4, degree=0)
        values = basis_values(np.array([-0.9, -0.3, 0.1, 0.7]), grid)
        np.testing.assert_array_equal(values, np.eye(4))

    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_partition_of_unity(self, k):
        grid = BSplineGrid(grid_size=6, degree=k)
        xs = np.linspace(-1.0, 1.0, 257)
        np.testing.assert_allclose(basis_values(xs, grid).sum(axis=-1), 1.0, atol=1e-5)

    def test_matches_recursive_oracle(self):
        grid = BSplineGrid(grid_size=5, degree=3)
        x = 0.5 * (grid.lo + grid.hi)
        expected = [recursive_basis(i, 3, x, grid.knots) for i in range(grid.n_basis)]
        np.testing.assert_allclose(basis_values(np.array([x]), grid)[0], expected, rtol=1e-12, atol=1e-15)

    def test_inputs_are_clamped(self):
        grid = BSplineGrid(grid_size=4, degree=2)
        np.testing.assert_array_equal(basis_values(np.array([5.0]), grid), basis_values(np.array([1.0]), grid))
        np.testing.assert_array_equal(basis_derivatives(np.array([-3.0, 3.0]), grid), 0.0)

    def test_derivative_matches_finite_difference(self):
        grid = BSplineGrid(grid_size=5, degree=3)
        xs = np.array([-0.77, -0.1, 0.33, 0.9])
        fd = (basis_values(xs + 1e-6, grid) - basis_values(xs - 1e-6, grid)) / 2e-6
        np.testing.assert_allclose(basis_derivatives(xs, grid), fd, atol=1e-6)


class TestKanLayer:
    def test_zero_parameters_give_zero_output(self, rng):
        layer = KanLayer(3, 2, rng=rng).zero_()
        out = kan_layer_forward(Tensor(rng.uniform(-1, 1, (4, 3))), layer)
        np.testing.assert_array_equal(out.data, 0.0)

    def test_base_path_isolation(self, rng, float64):
        layer = KanLayer(3, 3, rng=rng)
        layer.spline_weight.assign(np.zeros((3, 3)))
        layer.base_weight.assign(np.eye(3))
        x = rng.uniform(-2, 2, (5, 3))
        np.testing.assert_allclose(layer(Tensor(x)).data, silu(x), rtol=1e-12)

    def test_scalar_oracle(self, rng, float64):
        grid = BSplineGrid(grid_size=4, degree=3)
        layer = KanLayer(1, 1, grid=grid, rng=rng)
        layer.spline_weight.assign(np.array([[1.7]]))
        xs = np.linspace(-1.0, 1.0, 11)
        out = layer(Tensor(xs[:, None])).data[:, 0]
        coeffs = layer.spline_coeffs.data[0, 0]
        for x, y in zip(xs, out):
            spline = 0.0
            for b in range(grid.n_basis):
                spline += coeffs[b] * recursive_basis(b, 3, min(x, 1.0 - 1e-12), grid.knots)
            expected = layer.base_weight.data[0, 0] * silu(x) + 1.7 * spline
            assert y == pytest.approx(expected, rel=1e-9, abs=1e-10)

    def test_edge_function_matches_forward(self, rng, float64):
        layer = KanLayer(1, 2, rng=rng)
        xs = np.linspace(-1.0, 1.0, 9)
        out = layer(Tensor(xs[:, None])).data
        np.testing.assert_allclose(edge_function(layer, 1, 0, xs), out[:, 1], rtol=1e-10, atol=1e-12)

    def test_dim_mismatch(self, rng):
        with pytest.raises(ShapeError, match="trailing dim"):
            KanLayer(3, 2, rng=rng)(Tensor(np.zeros((4, 2))))


class TestMultiKan:
    def test_no_products_is_plain_kan(self, rng):
        layer = MultiKanLayer.build(4, 3, 0, rng=rng)
        x = Tensor(rng.uniform(-1, 1, (6, 4)))
        np.testing.assert_array_equal(
            multikan_layer_forward(x, layer).data, kan_layer_forward(x, layer.kan).data
        )

    def test_single_product_node(self, float64):
        a, b = 1.5, -0.25
        kan = KanLayer(1, 2).zero_()
        kan.base_weight.assign(np.array([[a], [b]]))
        layer = MultiKanLayer(kan, n_add=0, n_mul=1)
        x = 0.8
        out = multikan_layer_forward(Tensor([[x]]), layer).data
        assert out.shape == (1, 1)
        assert out[0, 0] == pytest.approx(a * b * silu(x) ** 2, rel=1e-12)

    def test_product_groups_oracle(self, rng, float64):
        layer = MultiKanLayer.build(3, 2, 2, mul_arity=3, rng=rng)
        x = Tensor(rng.uniform(-1, 1, (5, 3)))
        y = kan_layer_forward(x, layer.kan).data
        expected = np.empty((5, 4))
        expected[:, :2] = y[:, :2]
        for m in range(2):
            prod = np.ones(5)
            for a in range(3):
                prod = prod * y[:, 2 + 3 * m + a]
            expected[:, 2 + m] = prod
        np.testing.assert_allclose(multikan_layer_forward(x, layer).data, expected, rtol=1e-12)

    def test_width_invariant(self, rng):
        with pytest.raises(ShapeError, match="does not equal"):
            MultiKanLayer(KanLayer(2, 5, rng=rng), n_add=2, n_mul=2)

    def test_product_gradient(self, float64):
        y = Tensor([[2.0, 3.0, 5.0]], requires_grad=True)
        with Tape() as tape:
            out = multiply_groups(y, 1, 1, 2)
            loss = ops.sum(out)
        np.testing.assert_allclose(grad_of(backward(tape, loss), y), [[1.0, 5.0, 3.0]])

    def test_stack_of_one_equals_layer(self, rng):
        layer = MultiKanLayer.build(3, 2, 1, rng=rng)
        x = Tensor(rng.uniform(-1, 1, (2, 3)))
        np.testing.assert_array_equal(multikan_forward(x, [layer]).data, multikan_layer_forward(x, layer).data)

    def test_all_additive_stack_is_kan_composition(self, rng):
        stack = kan_stack([3, 4, 2], rng=rng)
        x = Tensor(rng.uniform(-1, 1, (5, 3)))
        manual = kan_layer_forward(kan_layer_forward(x, stack.layers[0].kan), stack.layers[1].kan)
        np.testing.assert_array_equal(stack(x).data, manual.data)

    def test_two_layer_sequential(self, rng):
        stack = kan_stack([3, 4, 2], rng=rng, n_mul=[1, 1])
        x = Tensor(rng.uniform(-1, 1, (5, 3)))
        manual = multikan_layer_forward(multikan_layer_forward(x, stack.layers[0]), stack.layers[1])
        np.testing.assert_array_equal(stack(x).data, manual.data)

    def test_broken_chain(self, rng):
        first = MultiKanLayer.build(3, 4, 0, rng=rng)
        second = MultiKanLayer.build(5, 2, 0, rng=rng)
        with pytest.raises(ShapeError, match="width chain"):
            multikan_forward(Tensor(np.zeros((1, 3))), [first, second])


class TestRefineGrid:
    def test_finer_grid_reproduces_coarse_spline(self, rng, float64):
        layer = KanLayer(2, 3, grid=BSplineGrid(grid_size=3, degree=3), rng=rng)
        refined = refine_grid(layer, 9)
        assert refined.grid.grid_size == 9
        xs = np.linspace(-1.0, 1.0, 41)
        for j in range(3):
            for i in range(2):
                np.testing.assert_allclose(
                    edge_function(refined, j, i, xs), edge_function(layer, j, i, xs), atol=1e-10
                )

    def test_new_range(self, rng):
        refined = refine_grid(KanLayer(1, 1, rng=rng), 4, lo=-2.0, hi=3.0)
        assert (refined.grid.lo, refined.grid.hi) == (-2.0, 3.0)


def test_kan_gradients_match_finite_differences():
    results = audit_kan(seed=2)
    assert all(r.max_rel_error < 1e-5 for r in results.values())
