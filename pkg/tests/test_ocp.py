import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from helpers import (
    DEFAULT_WEIGHTS,
    central_difference_extended,
    extended_objective,
    random_controls,
    random_pose,
    random_spec,
    reference_objective,
)
from shootnmpc.model import Control, ControlBounds, ModelParams, Pose, euler_step
from shootnmpc.ocp import (
    ControlSequence,
    Obstacle,
    OcpSpec,
    Reference,
    Weights,
    controls_array,
    euler_rollout_reference,
    max_violation,
    objective_gradient,
    obstacle_violations,
    penalized_objective,
    rollout,
    stage_cost,
    total_cost,
)


def make_spec(n=2, dt=0.5, target=Pose(0, 0, 0), obstacles=(), **kw):
    return OcpSpec(n, ModelParams(dt), ControlBounds(), DEFAULT_WEIGHTS, Reference(target), tuple(obstacles), **kw)


def test_weights_validation():
    with pytest.raises(ValueError):
        Weights((0.0, 0.0, 0.0), (1.0, 1.0))
    with pytest.raises(ValueError):
        Weights((1.0, -1.0, 0.0), (1.0, 1.0))
    with pytest.raises(ValueError):
        Obstacle((0.0, 0.0), -0.1)


def test_rollout_examples():
    spec = make_spec(3)
    assert rollout(spec, Pose(1, 2, 0.3), ControlSequence.zeros(3)) == [Pose(1, 2, 0.3)] * 4
    spec = make_spec(2)
    assert rollout(spec, Pose(0, 0, 0), [(1, 0), (1, 0)]) == [Pose(0, 0, 0), Pose(0.5, 0, 0), Pose(1, 0, 0)]


def test_rollout_matches_plain_loop_bitwise():
    spec = make_spec(20)
    w = [Control(0.5 * math.sin(0.3 * k), math.cos(0.7 * k)) for k in range(20)]
    assert rollout(spec, Pose(0.1, -0.2, 0.4), w) == euler_rollout_reference(spec, Pose(0.1, -0.2, 0.4), w)


def test_length_mismatch_rejected():
    with pytest.raises(ValueError):
        controls_array(np.zeros((3, 2)), 4)


def test_stage_cost_hand_values():
    ref = Reference(Pose(0, 0, 0))
    assert stage_cost(Pose(0, 0, 0), Control(0, 0), ref, DEFAULT_WEIGHTS) == 0.0
    assert stage_cost(Pose(1, 0, 0), Control(0, 0), ref, DEFAULT_WEIGHTS) == pytest.approx(1.0)
    assert stage_cost(Pose(0, 0, 0), Control(0, 1), ref, DEFAULT_WEIGHTS) == pytest.approx(0.05)
    assert stage_cost(Pose(0, 0, 2 * math.pi), Control(0, 0), ref, DEFAULT_WEIGHTS) == pytest.approx(0.0, abs=1e-20)


def test_total_cost_sums_stages_without_terminal_term():
    target = Pose(1.0, 0.5, 0.2)
    spec = make_spec(2, target=target)
    x0 = Pose(0.1, -0.3, 0.7)
    u0, u1 = Control(0.4, 0.3), Control(-0.2, 1.1)
    x1 = euler_step(x0, u0, spec.params)
    expected = stage_cost(x0, u0, spec.reference, DEFAULT_WEIGHTS) + stage_cost(x1, u1, spec.reference, DEFAULT_WEIGHTS)
    assert total_cost(spec, x0, [u0, u1]) == pytest.approx(expected, rel=1e-13)
    spec1 = make_spec(1, target=target)
    assert total_cost(spec1, x0, [u0]) == pytest.approx(stage_cost(x0, u0, spec1.reference, DEFAULT_WEIGHTS))
    assert total_cost(make_spec(4, target=target), target, ControlSequence.zeros(4)) == 0.0


def test_obstacle_violation_examples():
    ob = Obstacle((1.0, 2.0), 0.1)
    spec = make_spec(1, obstacles=[ob])
    keep = 0.15 + 0.1 + 0.05
    boundary = Pose(1.0 + keep, 2.0, 0.0)
    assert obstacle_violations(spec, [boundary]) == [pytest.approx(0.0, abs=1e-15)]
    assert obstacle_violations(spec, [Pose(1.0, 2.0, 0.0)]) == [pytest.approx(keep)]
    assert obstacle_violations(make_spec(1), [Pose(0, 0, 0)]) == []


def test_penalty_single_violation_depth():
    spec = make_spec(1, target=Pose(0, 0, 0), obstacles=[Obstacle((0.2, 0.0), 0.1)])
    x0 = Pose(0, 0, 0)
    w = [(0.0, 0.0)]
    depth = 0.3 - 0.2
    base = total_cost(spec, x0, w)
    # both poses (k = 0 and k = 1) sit at the same spot
    assert penalized_objective(spec, x0, w, 7.0) == pytest.approx(base + 7.0 * 2 * depth**2)
    assert penalized_objective(spec, x0, w, 0.0) == base
    assert max_violation(spec, x0, w) == pytest.approx(depth)


def test_gradient_zero_at_optimum_and_sign():
    spec = make_spec(3, target=Pose(0.5, 0.2, 0.1))
    assert np.all(objective_gradient(spec, spec.reference.x_ref, ControlSequence.zeros(3), 100.0) == 0.0)
    ahead = make_spec(1, target=Pose(2.0, 0.0, 0.0))
    # N = 1: the only control affects no costed state, so the gradient reduces to R * u
    g = objective_gradient(ahead, Pose(0, 0, 0), [(0.3, 0.0)], 0.0)
    assert g[0, 0] > 0
    ahead2 = make_spec(2, target=Pose(2.0, 0.0, 0.0))
    g2 = objective_gradient(ahead2, Pose(0, 0, 0), [(0.3, 0.0), (0.0, 0.0)], 0.0)
    assert g2[0, 0] < 0


def _fd_instance(seed):
    rng = np.random.default_rng(seed)
    n = [1, 5, 20][seed % 3]
    spec = random_spec(rng, n, n_obstacles=(seed // 3) % 3)
    x0 = random_pose(rng)
    W = random_controls(rng, spec)
    if spec.obstacles and seed % 2:
        # drive the rollout through an obstacle so the hinge is active
        c = spec.obstacles[0].center
        x0 = Pose(c[0] - 0.3, c[1], 0.0)
        W[:, 0] = 0.2
        W[:, 1] = rng.uniform(-0.1, 0.1, n)
    mu = float(rng.choice([0.0, 10.0, 1000.0]))
    return spec, x0, W, mu


@pytest.mark.parametrize("seed", range(120))
def test_gradient_matches_central_differences(seed):
    spec, x0, W, mu = _fd_instance(seed)
    adj = objective_gradient(spec, x0, W, mu)
    fd = central_difference_extended(lambda V: extended_objective(spec, x0, V, mu), W)
    np.testing.assert_allclose(adj, fd, rtol=1e-5, atol=1e-8)


@pytest.mark.parametrize("seed", range(10))
def test_kernel_objective_matches_reference(seed):
    spec, x0, W, mu = _fd_instance(seed)
    assert penalized_objective(spec, x0, W, mu) == pytest.approx(reference_objective(spec, x0, W, mu), rel=1e-12)


seeds = st.integers(0, 2**32 - 1)


@given(seeds, st.integers(1, 8))
def test_cost_nonnegative(seed, n):
    rng = np.random.default_rng(seed)
    spec = random_spec(rng, n)
    assert total_cost(spec, random_pose(rng), random_controls(rng, spec)) >= 0.0


@given(seeds, st.integers(1, 8), st.integers(0, 2))
def test_cost_zero_iff_at_reference(seed, n, which):
    rng = np.random.default_rng(seed)
    spec = random_spec(rng, n)
    ref = spec.reference.x_ref
    W = np.zeros((n, 2))
    x0 = Pose(ref.x, ref.y, ref.theta + 2 * math.pi * (seed % 3 - 1))
    assert total_cost(spec, x0, W) == pytest.approx(0.0, abs=1e-20)
    bump = [Pose(ref.x + 1e-3, ref.y, ref.theta), Pose(ref.x, ref.y - 1e-3, ref.theta), ref][which]
    if which == 2:
        W[rng.integers(n)] = (1e-3, 0.0)
    assert total_cost(spec, bump, W) > 0.0


@given(seeds, st.integers(1, 6), st.floats(0, 1e4), st.floats(0, 1e4))
def test_penalty_monotone_in_mu(seed, n, a, b):
    rng = np.random.default_rng(seed)
    spec = random_spec(rng, n, n_obstacles=3)
    x0, W = random_pose(rng), random_controls(rng, spec)
    lo, hi = sorted((a, b))
    assert penalized_objective(spec, x0, W, lo) <= penalized_objective(spec, x0, W, hi)


@given(seeds, st.integers(1, 6))
def test_rollout_starts_at_x0(seed, n):
    rng = np.random.default_rng(seed)
    spec = random_spec(rng, n)
    x0 = random_pose(rng, 100.0)
    assert rollout(spec, x0, random_controls(rng, spec))[0] == x0


@given(seeds, st.floats(-50, 50), st.floats(-50, 50))
def test_violations_translation_equivariant(seed, tx, ty):
    rng = np.random.default_rng(seed)
    spec = random_spec(rng, 4, n_obstacles=3)
    traj = rollout(spec, random_pose(rng), random_controls(rng, spec))
    moved_spec = make_spec(
        4, obstacles=[Obstacle((o.center[0] + tx, o.center[1] + ty), o.radius) for o in spec.obstacles]
    )
    moved = [Pose(p.x + tx, p.y + ty, p.theta) for p in traj]
    np.testing.assert_allclose(obstacle_violations(moved_spec, moved), obstacle_violations(spec, traj), atol=1e-12)


def test_control_sequence_shift_duplicates_last():
    seq = ControlSequence.from_array(np.array([[0.1, 0.2], [0.3, 0.4], [0.5, 0.6]]))
    shifted = seq.shifted()
    assert list(shifted) == [Control(0.3, 0.4), Control(0.5, 0.6), Control(0.5, 0.6)]
    assert len(shifted) == len(seq)
