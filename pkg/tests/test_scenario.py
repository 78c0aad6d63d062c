import numpy as np
import pytest

from oceanplastic import scenario as sc
from oceanplastic.errors import SpawnStallError
from oceanplastic.scenario import DensityField, ScenarioSpec

# chi-square critical value, df=24, p=0.01
CHI2_CRIT_DF24_P01 = 42.98


def test_perlin_zero_on_integer_lattice():
    for seed in (0, 1, 42):
        for x, y in [(3.0, 7.0), (0.0, 0.0), (-5.0, 11.0)]:
            assert sc.perlin2(x, y, seed) == 0.0


def test_perlin_deterministic():
    assert sc.perlin2(0.5, 0.5, 42) == sc.perlin2(0.5, 0.5, 42)
    a = sc.perlin2(np.linspace(0, 9, 100), np.linspace(-3, 3, 100), 7)
    b = sc.perlin2(np.linspace(0, 9, 100), np.linspace(-3, 3, 100), 7)
    assert np.array_equal(a, b)


def test_perlin_bounded_over_large_sweep(rng):
    xs = rng.uniform(-1000, 1000, 1_000_000)
    ys = rng.uniform(-1000, 1000, 1_000_000)
    values = sc.perlin2(xs, ys, 99)
    assert np.abs(values).max() <= 1.0


def test_perlin_seed_changes_values():
    xs = np.linspace(0.1, 7.9, 50)
    assert not np.allclose(sc.perlin2(xs, xs, 1), sc.perlin2(xs, xs, 2))


def test_density_field_y_shift_separates_windows():
    a = sc.density_field(ScenarioSpec(seed=0, y_shift=0.0))
    b = sc.density_field(ScenarioSpec(seed=0, y_shift=200.0))
    differing = np.abs(a.values - b.values) > 1e-12
    assert differing.mean() >= 0.99


def test_density_field_split_property_seeds_0_to_9():
    for seed in range(10):
        train = sc.density_field(ScenarioSpec(seed=seed, y_shift=0.0))
        test = sc.density_field(ScenarioSpec(seed=seed, y_shift=200.0))
        assert np.abs(train.values - test.values).max() > 0.1


def test_density_field_degenerate_uniform():
    field = sc.density_field(ScenarioSpec(seed=5), octaves=1, frequency=0.0)
    assert np.allclose(field.values, 0.5)


def test_density_field_bit_identical_regeneration():
    a = sc.density_field(ScenarioSpec(seed=5))
    b = sc.density_field(ScenarioSpec(seed=5))
    assert np.array_equal(a.values, b.values)


def test_density_field_values_in_unit_interval():
    for seed in range(5):
        field = sc.density_field(ScenarioSpec(seed=seed))
        assert field.values.min() >= 0.0 and field.values.max() <= 1.0


def test_spawn_uniform_field_is_uniform():
    # Accept-all field: positions must be indistinguishable from uniform
    # over a 5x5 binning (chi-square below the df=24, p=0.01 critical value).
    spec = ScenarioSpec(seed=11, pebble_count=2000)
    field = DensityField(resolution=10, values=np.ones((10, 10)), area_size=200.0)
    positions = sc.spawn_pebbles(field, spec)
    bins = np.histogram2d(
        positions[:, 0], positions[:, 1], bins=5, range=[[0, 200], [0, 200]]
    )[0]
    expected = len(positions) / 25.0
    chi2 = ((bins - expected) ** 2 / expected).sum()
    assert chi2 < CHI2_CRIT_DF24_P01


def test_spawn_zero_count():
    spec = ScenarioSpec(seed=1, pebble_count=0)
    field = sc.density_field(spec)
    assert len(sc.spawn_pebbles(field, spec)) == 0


def test_spawn_deterministic_and_inside(small_spec):
    field = sc.density_field(small_spec)
    a = sc.spawn_pebbles(field, small_spec)
    b = sc.spawn_pebbles(field, small_spec)
    assert np.array_equal(a, b)
    assert (a > 0).all() and (a < small_spec.area_size).all()


def test_spawn_stalls_on_zero_field():
    spec = ScenarioSpec(seed=1, pebble_count=1)
    field = DensityField(resolution=4, values=np.zeros((4, 4)), area_size=200.0)
    with pytest.raises(SpawnStallError):
        sc.spawn_pebbles(field, spec)


def test_spawn_vessels_constraints(small_spec):
    for episode_seed in range(20):
        poses = sc.spawn_vessels(small_spec, episode_seed)
        assert len(poses) == 3
        positions = np.array([p for p, _ in poses])
        assert (positions > 0).all() and (positions < small_spec.area_size).all()
        for i in range(3):
            for j in range(i + 1, 3):
                assert np.linalg.norm(positions[i] - positions[j]) >= 10.0
        for _, heading in poses:
            assert abs(np.linalg.norm(heading) - 1.0) < 1e-12


def test_spawn_vessels_deterministic(small_spec):
    a = sc.spawn_vessels(small_spec, 7)
    b = sc.spawn_vessels(small_spec, 7)
    for (pa, ha), (pb, hb) in zip(a, b):
        assert np.array_equal(pa, pb) and np.array_equal(ha, hb)


def test_spec_validation():
    with pytest.raises(ValueError):
        ScenarioSpec(seed=0, area_size=0.0)
    with pytest.raises(ValueError):
        ScenarioSpec(seed=0, comm_range=-1.0)
    with pytest.raises(ValueError):
        ScenarioSpec(seed=0, pebble_count=-1)
    with pytest.raises(ValueError):
        ScenarioSpec(seed=0, max_steps=0)


def test_dump_roundtrip(small_spec):
    field = sc.density_field(small_spec)
    positions = sc.spawn_pebbles(field, small_spec)
    text = sc.dump_scenario(small_spec, positions)
    header, parsed = sc.parse_scenario_dump(text)
    assert header["seed"] == str(small_spec.seed)
    assert int(header["count"]) == len(positions)
    assert np.allclose(parsed, positions, atol=1e-6)
