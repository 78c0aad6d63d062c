import numpy as np
import pytest

from oceanplastic import world as w
from oceanplastic.errors import SteppedTerminatedError
from oceanplastic.scenario import ScenarioSpec
from oceanplastic.world import AgentAction, PlasticEnv


def zero_actions(n=3):
    return [AgentAction(0.0, 0.0, False) for _ in range(n)]


def random_actions(rng, n=3):
    return [
        AgentAction(
            float(rng.uniform(-1, 1)), float(rng.uniform(-1, 1)), bool(rng.integers(2))
        )
        for _ in range(n)
    ]


def test_reset_deterministic(small_spec):
    a = w.reset(small_spec, 7)
    b = w.reset(small_spec, 7)
    assert np.array_equal(a.pebbles, b.pebbles)
    for va, vb in zip(a.vessels, b.vessels):
        assert np.array_equal(va.position, vb.position)
        assert np.array_equal(va.heading, vb.heading)


def test_reset_fresh_state(small_spec):
    world = w.reset(small_spec, 7)
    assert world.step == 0
    assert not world.terminated
    assert all(v.collected_count == 0 for v in world.vessels)
    assert all(not v.raised_signal for v in world.vessels)
    assert world.pebble_active.sum() == small_spec.pebble_count


def test_zero_actions_no_motion_no_reward(small_spec):
    world = w.reset(small_spec, 7)
    world.pebble_active[:] = False  # nothing to collect
    before = world.positions()
    _, outcome = w.step(world, zero_actions())
    assert np.allclose(world.positions(), before)  # velocity starts at zero
    assert outcome.local_rewards.sum() == 0.0
    assert outcome.global_reward == 0.0


def test_pebble_within_radius_collected(small_spec):
    world = w.reset(small_spec, 7)
    world.pebble_active[:] = False
    world.pebble_active[0] = True
    world.pebbles[0] = world.vessels[0].position + np.array([0.5, 0.0])
    _, outcome = w.step(world, zero_actions())
    assert outcome.collected_events == [(0, 0)]
    assert outcome.local_rewards[0] == 1.0
    assert world.vessels[0].collected_count == 1


def test_boundary_termination_matches_1d_kinematics():
    # Full thrust straight at the wall; the step count to cross must match
    # an independent scalar integration of the same drag model.
    spec = ScenarioSpec(seed=2, area_size=50.0, pebble_count=0, max_steps=5000)
    world = w.reset(spec, 1)
    vessel = world.vessels[0]
    vessel.position = np.array([spec.area_size - 0.1, spec.area_size / 2])
    vessel.heading = np.array([1.0, 0.0])
    vessel.linear_velocity = np.zeros(2)
    world.vessels[1].position = np.array([10.0, 10.0])
    world.vessels[2].position = np.array([10.0, 40.0])

    x, v = spec.area_size - 0.1, 0.0
    oracle_steps = 0
    while x <= spec.area_size:
        v = v + w.DT * (w.THRUST_SCALE - w.DRAG * v)
        x = x + w.DT * v
        oracle_steps += 1

    actions = [AgentAction(1.0, 0.0, False), *zero_actions(2)]
    steps = 0
    done = False
    while not done:
        _, outcome = w.step(world, actions)
        steps += 1
        done = outcome.done
    assert outcome.cause == "boundary"
    assert steps == oracle_steps


def test_compute_rewards_paper_example():
    local, global_reward = w.compute_rewards([(1, 17)], np.array([5, 3, 8]))
    assert list(local) == [0.0, 1.0, 0.0]
    assert global_reward == pytest.approx(0.03)


def test_compute_rewards_no_events():
    local, global_reward = w.compute_rewards([], np.array([4, 4, 4]))
    assert local.sum() == 0.0 and global_reward == 0.0


def test_compute_rewards_sequential_events():
    # Two pickups in one step: the global bonus re-reads min() after each.
    # counts before: (0, 0, 0); agent 0 collects, then agent 1 collects.
    local, global_reward = w.compute_rewards([(0, 1), (1, 2)], np.array([1, 1, 0]))
    assert list(local) == [1.0, 1.0, 0.0]
    assert global_reward == pytest.approx(0.0)  # min stays 0 both times
    local, global_reward = w.compute_rewards(
        [(0, 1), (1, 2)], np.array([2, 2, 1])
    )
    assert global_reward == pytest.approx(0.01 + 0.01)


def test_step_after_termination_rejected(small_spec):
    world = w.reset(small_spec, 7)
    world.terminated = True
    world.cause = "boundary"
    with pytest.raises(SteppedTerminatedError):
        w.step(world, zero_actions())


def test_episode_accounting_and_conservation(small_spec, rng):
    # Replay-log style accounting: team local reward == pebbles collected,
    # active + collected == pebble_count after every step.
    world = w.reset(small_spec, 7)
    total_local = 0.0
    done = False
    while not done:
        _, outcome = w.step(world, random_actions(rng))
        total_local += outcome.local_rewards.sum()
        collected = sum(v.collected_count for v in world.vessels)
        assert world.pebble_active.sum() + collected == small_spec.pebble_count
        done = outcome.done
    assert total_local == sum(v.collected_count for v in world.vessels)


def test_terminal_speed_under_constant_thrust():
    spec = ScenarioSpec(seed=2, area_size=100000.0, pebble_count=0, max_steps=2000)
    world = w.reset(spec, 1)
    world.vessels[0].position = np.array([50000.0, 50000.0])
    world.vessels[1].position = np.array([100.0, 100.0])
    world.vessels[2].position = np.array([200.0, 200.0])
    actions = [AgentAction(1.0, 0.0, False), *zero_actions(2)]
    speeds = []
    for _ in range(500):
        w.step(world, actions)
        speeds.append(np.linalg.norm(world.vessels[0].linear_velocity))
    assert np.all(np.diff(speeds) > -1e-9)  # monotone approach
    assert speeds[-1] == pytest.approx(w.THRUST_SCALE / w.DRAG, rel=1e-2)


def test_heading_stays_unit(small_spec, rng):
    world = w.reset(small_spec, 7)
    for _ in range(50):
        if world.terminated:
            break
        w.step(world, random_actions(rng))
        for vessel in world.vessels:
            assert abs(np.linalg.norm(vessel.heading) - 1.0) < 1e-6


def test_trajectory_deterministic(small_spec, rng):
    actions = [random_actions(np.random.default_rng(5)) for _ in range(30)]
    trajectories = []
    for _ in range(2):
        world = w.reset(small_spec, 7)
        track = []
        for step_actions in actions:
            if world.terminated:
                break
            w.step(world, step_actions)
            track.append(world.positions().copy())
        trajectories.append(np.array(track))
    assert np.array_equal(trajectories[0], trajectories[1])


def test_observation_shape_and_stacking(small_spec):
    world = w.reset(small_spec, 7)
    obs, frame = w.observe(world, 0)
    assert obs.vector.shape == (14,)
    assert obs.visual.shape == (1250,)
    assert obs.flat().shape == (1264,)
    # First step duplicates the current frame.
    assert np.array_equal(obs.vector[:7], obs.vector[7:])
    assert np.array_equal(obs.visual[:625], obs.visual[625:])
    w.step(world, zero_actions())
    obs2, _ = w.observe(world, 0, prev_frame=frame)
    assert np.array_equal(obs2.vector[:7], obs.vector[7:])  # carried forward


def test_observation_empty_window(small_spec):
    world = w.reset(small_spec, 7)
    world.pebble_active[:] = False
    obs, _ = w.observe(world, 0)
    assert obs.visual.sum() == 0.0


def test_observation_center_cell(small_spec):
    world = w.reset(small_spec, 7)
    world.pebble_active[:] = False
    world.pebble_active[0] = True
    world.pebbles[0] = world.vessels[0].position.copy()
    obs, _ = w.observe(world, 0)
    current = obs.visual[625:].reshape(25, 25)
    assert current[12, 12] == 1.0
    assert current.sum() == 1.0


def test_observation_visual_binary(small_spec):
    world = w.reset(small_spec, 7)
    obs, _ = w.observe(world, 0)
    assert set(np.unique(obs.visual)) <= {0.0, 1.0}


def test_vector_observation_content(small_spec):
    world = w.reset(small_spec, 7)
    world.vessels[0].raised_signal = False
    world.vessels[1].raised_signal = True
    # Put vessel 1 nearest to vessel 0 and inside comm range.
    world.vessels[0].position = np.array([20.0, 20.0])
    world.vessels[1].position = np.array([25.0, 20.0])
    world.vessels[2].position = np.array([45.0, 45.0])
    obs, _ = w.observe(world, 0, communication=True)
    current = obs.vector[7:]
    area = small_spec.area_size
    assert current[0] == pytest.approx(20.0 / area)
    assert current[4] == pytest.approx(25.0 / area)
    assert current[6] == 1.0
    obs_ma, _ = w.observe(world, 0, communication=False)
    assert obs_ma.vector[13] == 0.0


def test_env_signal_visibility_next_step(small_spec):
    env = PlasticEnv(communication=True)
    env.reset(small_spec, 7)
    env.world.vessels[0].position = np.array([20.0, 20.0])
    env.world.vessels[1].position = np.array([24.0, 20.0])
    env.world.vessels[2].position = np.array([48.0, 48.0])
    actions = [
        AgentAction(0.0, 0.0, False),
        AgentAction(0.0, 0.0, True),  # nearest neighbour of agent 0 signals
        AgentAction(0.0, 0.0, False),
    ]
    obs, _ = env.step(actions)
    assert obs[0].vector[13] == 1.0


def test_collision_termination(small_spec):
    world = w.reset(small_spec, 7)
    world.vessels[0].position = np.array([20.0, 20.0])
    world.vessels[1].position = np.array([23.0, 20.0])  # inside 2 disc radii
    world.vessels[2].position = np.array([45.0, 45.0])
    _, outcome = w.step(world, zero_actions())
    assert outcome.done and outcome.cause == "collision"


def test_step_cap_termination():
    spec = ScenarioSpec(seed=4, area_size=50.0, pebble_count=0, max_steps=3)
    world = w.reset(spec, 1)
    causes = []
    for _ in range(3):
        _, outcome = w.step(world, zero_actions())
        causes.append(outcome.cause)
    assert causes == ["running", "running", "step_cap"]
