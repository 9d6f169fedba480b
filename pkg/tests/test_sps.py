"""Sign-perturbed sums: aggregates, membership, tie handling, region grids."""

import numpy as np
import pytest

from spsnet.model import FieldConfig, NoiseSpec, RegressorSample, generate_measurements
from spsnet.rng import derive_seed, substream
from spsnet.sps import (
    AggregateSums,
    RegionResult,
    SignMatrix,
    SingularMatrixError,
    WrapUpWeights,
    batch_aggregate,
    draw_sign_matrix,
    evaluate_region,
    local_aggregate,
    ls_estimate,
    membership,
    sum_aggregates,
    truncated_aggregate,
    uniform_order,
    z_values,
)
from spsnet.sps import _z_values_grid


def make_samples(seed, n_nodes, n_p=2, scale=0.1):
    cfg = FieldConfig(
        n_p=n_p,
        p_true=np.array([(-0.5) ** k for k in range(n_p)]),
        noise=NoiseSpec(scale=scale),
    )
    positions = substream(seed, "pos").uniform(0, 1, size=(n_nodes, 2))
    return generate_measurements(positions, cfg, substream(seed, "noise")), cfg


def two_node_hand_aggregate():
    """N=2, phi=(1) both, y=(1,-1), perturbed signs (+1,-1): Z0=4p^2, Z1=4."""
    samples = [
        RegressorSample(node_id=0, position=[0.0, 0.0], phi=[1.0], y=1.0),
        RegressorSample(node_id=1, position=[1.0, 1.0], phi=[1.0], y=-1.0),
    ]
    signs = SignMatrix(np.array([[1, 1], [1, -1]]))
    return batch_aggregate(samples, signs)


# ---------------------------------------------------------------------------
# sign matrices


def test_sign_matrix_shape_and_row0():
    signs = draw_sign_matrix(5, 8, sign_seed=3)
    assert signs.m == 5 and signs.n_nodes == 8
    assert np.all(signs.entries[0] == 1)
    assert np.all(np.abs(signs.entries) == 1)
    again = draw_sign_matrix(5, 8, sign_seed=3)
    assert np.array_equal(signs.entries, again.entries)
    assert not np.array_equal(signs.entries, draw_sign_matrix(5, 8, sign_seed=4).entries)


def test_sign_matrix_validation():
    with pytest.raises(ValueError):
        draw_sign_matrix(1, 5, 0)
    with pytest.raises(ValueError):
        SignMatrix(np.array([[1, 2], [1, 1]]))
    with pytest.raises(ValueError):
        SignMatrix(np.array([[1, -1], [1, 1]]))  # row 0 not all ones


def test_perturbed_rows_average_out():
    signs = draw_sign_matrix(10, 10000, sign_seed=77)
    row_means = np.abs(signs.entries[1:].mean(axis=1))
    assert np.all(row_means < 0.04)


# ---------------------------------------------------------------------------
# aggregates


def test_local_aggregate_hand_values():
    s = RegressorSample(node_id=0, position=[0, 0], phi=[1.0, 0.0], y=2.0)
    agg = local_aggregate(s, [1.0, -1.0])
    assert np.allclose(agg.vec, [[2.0, 0.0], [-2.0, 0.0]])
    assert np.allclose(agg.mat[0], [[1.0, 0.0], [0.0, 0.0]])
    assert np.allclose(agg.mat[1], -agg.mat[0])
    zero_y = local_aggregate(
        RegressorSample(node_id=0, position=[0, 0], phi=[1.0, 0.5], y=0.0), [1.0, -1.0]
    )
    assert np.all(zero_y.vec == 0.0)


def test_sum_of_locals_equals_batch():
    samples, _ = make_samples(21, 9, n_p=3)
    signs = draw_sign_matrix(6, 9, sign_seed=2)
    total = local_aggregate(samples[0], signs.column(0))
    for i in range(1, 9):
        total = sum_aggregates(total, local_aggregate(samples[i], signs.column(i)))
    assert total.allclose(batch_aggregate(samples, signs))


def test_aggregate_algebra():
    samples, _ = make_samples(22, 4)
    signs = draw_sign_matrix(3, 4, sign_seed=5)
    a = local_aggregate(samples[0], signs.column(0))
    b = local_aggregate(samples[1], signs.column(1))
    assert (a + b).allclose(b + a)
    zero = AggregateSums.zeros(3, 2)
    assert (a + zero).allclose(a)
    assert a.scaled(2.0).allclose(a + a)
    with pytest.raises(ValueError):
        sum_aggregates(a, AggregateSums.zeros(3, 3))
    assert a.payload_scalar_count == 3 * (2 + 3)
    assert AggregateSums.zeros(10, 2).payload_scalar_count == 50


def test_truncated_aggregate_weight_cases():
    samples, _ = make_samples(23, 7)
    signs = draw_sign_matrix(4, 7, sign_seed=9)
    assert truncated_aggregate(samples, signs, np.ones(7)).allclose(batch_aggregate(samples, signs))
    onehot = np.zeros(7)
    onehot[3] = 1.0
    assert truncated_aggregate(samples, signs, onehot).allclose(
        local_aggregate(samples[3], signs.column(3))
    )
    zero = truncated_aggregate(samples, signs, np.zeros(7))
    assert np.all(zero.vec == 0.0) and np.all(zero.mat == 0.0)
    wrapped = truncated_aggregate(samples, signs, WrapUpWeights(np.ones(7)))
    assert wrapped.allclose(batch_aggregate(samples, signs))
    with pytest.raises(ValueError):
        truncated_aggregate(samples, signs, np.ones(6))


# ---------------------------------------------------------------------------
# Z values and membership


def test_z_values_hand_example():
    agg = two_node_hand_aggregate()
    assert np.allclose(agg.vec, [[0.0], [2.0]])
    assert np.allclose(agg.mat, [[[2.0]], [[0.0]]])
    for p in (-1.5, -0.3, 0.0, 0.5, 2.0):
        z = z_values(agg, [p])
        assert z[0] == pytest.approx(4 * p * p, abs=1e-12)
        assert z[1] == pytest.approx(4.0, abs=1e-12)
    assert np.all(z_values(AggregateSums.zeros(3, 1), [0.7]) == 0.0)
    with pytest.raises(ValueError):
        z_values(agg, [0.0, 0.0])


def test_z_values_grid_matches_scalar_path():
    samples, _ = make_samples(31, 6, n_p=2)
    signs = draw_sign_matrix(5, 6, sign_seed=1)
    agg = batch_aggregate(samples, signs)
    points = substream(31, "grid").uniform(-1, 1, size=(17, 2))
    grid = _z_values_grid(agg, points)
    for c in range(17):
        assert np.allclose(grid[:, c], z_values(agg, points[c]), rtol=1e-12)


def test_membership_strict_orderings():
    rng = substream(0, "ties")
    assert membership([1.0, 5.0, 6.0], 1, rng) is True
    assert membership([9.0, 1.0, 2.0], 1, rng) is False
    with pytest.raises(ValueError):
        membership([1.0, 2.0, 3.0], 3, rng)
    with pytest.raises(ValueError):
        membership([1.0, 2.0, 3.0], 0, rng)


def test_membership_consumes_exactly_m_uniforms():
    z = np.arange(6, dtype=float)
    active = substream(8, "tie-consumption")
    shadow = substream(8, "tie-consumption")
    shadow.uniform(size=6)
    membership(z, 2, active)
    assert active.uniform() == shadow.uniform()


def test_membership_all_ties_hits_nominal_level():
    # fully degenerate Z vector: inclusion decided by the tie-break alone
    z = np.full(10, 4.0)
    rng = substream(12, "degenerate")
    hits = sum(membership(z, 1, rng) for _ in range(20000))
    assert abs(hits / 20000 - 0.9) < 0.012


def test_uniform_order_strict_values():
    rng = substream(2, "order")
    assert np.array_equal(uniform_order([3.0, 1.0, 2.0], rng), [1, 2, 0])
    # ties permuted uniformly enough for a coarse check
    counts = {}
    rng = substream(3, "order-ties")
    for _ in range(6000):
        perm = tuple(uniform_order([1.0, 1.0, 1.0], rng))
        counts[perm] = counts.get(perm, 0) + 1
    assert len(counts) == 6
    for v in counts.values():
        assert abs(v / 6000 - 1 / 6) < 0.03


# ---------------------------------------------------------------------------
# weights


def test_wrapup_weights_clamping():
    w = WrapUpWeights(np.array([0.0, 1.0, 0.5]))
    assert not w.complete
    assert WrapUpWeights(np.ones(4)).complete
    snapped = WrapUpWeights(np.array([1.0 + 5e-10, -5e-10]))
    assert snapped.c[0] == 1.0 and snapped.c[1] == 0.0
    with pytest.raises(ValueError):
        WrapUpWeights(np.array([1.1]))
    with pytest.raises(ValueError):
        WrapUpWeights(np.array([-0.01]))
    with pytest.raises(ValueError):
        WrapUpWeights(np.zeros((2, 2)))


# ---------------------------------------------------------------------------
# region evaluation


def test_region_hand_example_volume_two():
    # members are exactly the cells whose center satisfies 4p^2 < 4
    agg = two_node_hand_aggregate()
    res = evaluate_region(agg, [(-2.0, 2.0)], 8, q=1, tie_seed=123)
    assert np.array_equal(res.member_mask, [False, False, True, True, True, True, False, False])
    assert res.volume == 2.0
    assert res.member_count == 4
    assert res.bounding_box == [(-1.0, 1.0)]
    # no ties at these cell centers, so the tie seed is irrelevant
    other = evaluate_region(agg, [(-2.0, 2.0)], 8, q=1, tie_seed=99999)
    assert np.array_equal(res.member_mask, other.member_mask)


def test_region_refinement_stays_within_boundary_layer():
    agg = two_node_hand_aggregate()
    v8 = evaluate_region(agg, [(-2.0, 2.0)], 8, q=1, tie_seed=1).volume
    v64 = evaluate_region(agg, [(-2.0, 2.0)], 64, q=1, tie_seed=1).volume
    assert abs(v8 - v64) <= 2 * (4.0 / 8)


def test_region_shrinks_as_q_grows():
    samples, cfg = make_samples(41, 8, n_p=2)
    signs = draw_sign_matrix(6, 8, sign_seed=4)
    agg = batch_aggregate(samples, signs)
    box = [(p - 1, p + 1) for p in cfg.p_true]
    loose = evaluate_region(agg, box, 10, q=1, tie_seed=7)
    tight = evaluate_region(agg, box, 10, q=5, tie_seed=7)
    assert np.all(tight.member_mask <= loose.member_mask)
    assert tight.volume <= loose.volume


def test_region_tie_seed_determinism():
    agg = AggregateSums.zeros(10, 1)  # all cells fully tied
    a = evaluate_region(agg, [(0.0, 1.0)], 64, q=1, tie_seed=5)
    b = evaluate_region(agg, [(0.0, 1.0)], 64, q=1, tie_seed=5)
    c = evaluate_region(agg, [(0.0, 1.0)], 64, q=1, tie_seed=6)
    assert np.array_equal(a.member_mask, b.member_mask)
    assert not np.array_equal(a.member_mask, c.member_mask)


def test_region_argument_validation():
    agg = two_node_hand_aggregate()
    with pytest.raises(ValueError):
        evaluate_region(agg, [(-1, 1), (-1, 1)], 4, q=1, tie_seed=0)
    with pytest.raises(ValueError):
        evaluate_region(agg, [(1, -1)], 4, q=1, tie_seed=0)
    with pytest.raises(ValueError):
        evaluate_region(agg, [(-1, 1)], 0, q=1, tie_seed=0)
    with pytest.raises(ValueError):
        evaluate_region(agg, [(-1, 1)], 4, q=2, tie_seed=0)
    big = AggregateSums.zeros(4, 4)
    box4 = [(-1, 1)] * 4
    with pytest.raises(ValueError):
        evaluate_region(big, box4, 2, q=1, tie_seed=0)
    res = evaluate_region(big, box4, 2, q=1, tie_seed=0, allow_high_dim=True)
    assert res.grid_shape == (2, 2, 2, 2)


def test_region_json_roundtrip():
    samples, cfg = make_samples(43, 6)
    signs = draw_sign_matrix(8, 6, sign_seed=6)
    agg = batch_aggregate(samples, signs)
    box = [(p - 1, p + 1) for p in cfg.p_true]
    res = evaluate_region(agg, box, (9, 7), q=2, tie_seed=55)
    back = RegionResult.from_json_dict(res.to_json_dict())
    assert np.array_equal(res.member_mask, back.member_mask)
    assert back.volume == res.volume
    assert back.bounding_box == res.bounding_box
    assert back.grid_shape == res.grid_shape
    rows = res.csv_summary_rows()
    assert len(rows) == 2
    assert all(r[0] == res.volume for r in rows)


def test_region_empty_sentinel():
    # huge q far from the data: make an empty region by shifting the box
    agg = two_node_hand_aggregate()
    res = evaluate_region(agg, [(5.0, 6.0)], 4, q=1, tie_seed=3)
    assert res.member_count == 0
    assert res.volume == 0.0
    assert res.bounding_box is None
    back = RegionResult.from_json_dict(res.to_json_dict())
    assert back.bounding_box is None and back.member_count == 0
    rows = res.csv_summary_rows()
    assert rows[0][2] == "" and rows[0][3] == ""


# ---------------------------------------------------------------------------
# least squares


def test_ls_estimate_hand_and_noiseless():
    agg = two_node_hand_aggregate()
    assert ls_estimate(agg) == pytest.approx([0.0], abs=1e-12)
    samples, cfg = make_samples(51, 12, n_p=3, scale=0.0)
    signs = draw_sign_matrix(4, 12, sign_seed=8)
    batch = batch_aggregate(samples, signs)
    p_hat = ls_estimate(batch)
    assert np.allclose(p_hat, cfg.p_true, atol=1e-9)
    assert z_values(batch, p_hat)[0] == pytest.approx(0.0, abs=1e-9)


def test_ls_estimate_rejects_singular():
    s = RegressorSample(node_id=0, position=[0, 0], phi=[1.0, 2.0], y=1.0)
    agg = local_aggregate(s, [1.0, 1.0])  # rank-one normal matrix
    with pytest.raises(SingularMatrixError):
        ls_estimate(agg)
