import itertools
import json

import numpy as np
import pytest

from wfpsnr import (
    BlockGrid,
    FeatureMaps,
    GrayImage,
    MembershipFunction,
    Rule,
    build_edge_memberships,
    compute_feature_maps,
    default_memberships,
    default_rules,
    default_system,
    fcm,
    fuzzy_map,
    infer,
    load_fuzzy_config,
    weight_map,
)
from wfpsnr.fuzzy_engine import (
    LEVEL_NAMES,
    OUTPUT_NAMES,
    FuzzySystem,
    FuzzyVariable,
    system_to_config_dict,
)


def analytic_centroid(vertices, lo, hi, samples=2_000_001):
    """Independent high-resolution centroid of a piecewise-linear set on [lo, hi]."""
    xs = np.linspace(lo, hi, samples)
    f = MembershipFunction.from_vertices(vertices)(xs)
    return float((xs * f).sum() / f.sum())


class TestMembershipFunction:
    def test_requires_increasing_vertices(self):
        with pytest.raises(ValueError):
            MembershipFunction(np.array([0.0, 0.0]), np.array([0.0, 1.0]))

    def test_clamps_outside_span(self):
        mf = MembershipFunction.from_vertices([(0.2, 1.0), (0.6, 0.0)])
        assert mf(0.0) == 1.0
        assert mf(1.0) == 0.0

    def test_triangular_shoulders(self):
        low = MembershipFunction.triangular(0.0, 0.0, 0.5)
        assert low(0.0) == 1.0
        assert low(0.5) == 0.0


class TestDefaultMemberships:
    def test_medium_peaks_at_half(self):
        low, medium, high = default_memberships("saliency")
        assert medium(0.5) == 1.0

    def test_linear_interpolation_values(self):
        low, medium, high = default_memberships("intensity")
        assert low(0.25) == pytest.approx(0.5)
        assert high(0.25) == 0.0

    def test_partition_of_unity(self):
        levels = default_memberships("edge")
        xs = np.linspace(0.0, 1.0, 257)
        total = sum(mf(xs) for mf in levels)
        assert np.allclose(total, 1.0, atol=1e-12)

    def test_unknown_variable_rejected(self):
        with pytest.raises(ValueError):
            default_memberships("contrast")


class TestDefaultRules:
    def test_covers_all_combinations_once(self):
        rules = default_rules()
        assert len(rules) == 27
        assert len({r.antecedent for r in rules}) == 27

    def test_spec_corner_cells(self):
        table = {r.antecedent: r.output for r in default_rules()}
        assert table[("high", "low", "low")] == "VH"
        assert table[("low", "high", "high")] == "VL"
        assert table[("medium", "medium", "medium")] == "M"

    def test_matches_clamp_formula(self):
        table = {r.antecedent: r.output for r in default_rules()}
        for s, e, i in itertools.product(range(3), repeat=3):
            idx = min(max(2 * s - e - i + 2, 0), 4)
            key = (LEVEL_NAMES[s], LEVEL_NAMES[e], LEVEL_NAMES[i])
            assert table[key] == OUTPUT_NAMES[idx]


class TestFcm:
    def test_symmetric_two_cluster_fixed_point(self):
        result = fcm([0.0, 0.0, 1.0, 1.0], k=2, m=2.0)
        centers = np.sort(result.centers)
        assert abs(centers[0] - 0.0) < 1e-3
        assert abs(centers[1] - 1.0) < 1e-3
        nearest = np.max(result.memberships, axis=1)
        assert np.all(nearest > 0.99)

    def test_single_cluster_degenerates_to_mean(self):
        data = np.array([0.1, 0.4, 0.7])
        result = fcm(data, k=1)
        assert result.centers[0] == pytest.approx(data.mean())
        assert np.allclose(result.memberships, 1.0)

    def test_membership_rows_sum_to_one(self):
        rng = np.random.default_rng(31)
        result = fcm(rng.random(200), k=5)
        assert np.allclose(result.memberships.sum(axis=1), 1.0, atol=1e-9)

    def test_objective_never_increases(self):
        rng = np.random.default_rng(32)
        result = fcm(rng.random(300), k=4, tol=0.0, max_iter=60)
        path = np.array(result.objective_path)
        assert np.all(np.diff(path) <= 1e-12)

    def test_errors(self):
        with pytest.raises(ValueError):
            fcm([], k=1)
        with pytest.raises(ValueError):
            fcm([0.1, 0.2], k=3)
        with pytest.raises(ValueError):
            fcm([0.1, 0.2], k=1, m=1.0)


class TestEdgeMembershipFitting:
    def sample_spikes(self):
        rng = np.random.default_rng(33)
        return np.clip(
            np.concatenate(
                [
                    rng.normal(0.1, 0.015, 300),
                    rng.normal(0.5, 0.015, 300),
                    rng.normal(0.9, 0.015, 300),
                ]
            ),
            0.0,
            1.0,
        )

    def test_recovers_separated_modes(self):
        functions = build_edge_memberships(self.sample_spikes())
        peaks = [float(mf.xs[np.argmax(mf.degrees)]) for mf in functions]
        for peak, target in zip(peaks, (0.1, 0.5, 0.9)):
            assert abs(peak - target) < 0.05

    def test_every_function_peaks_at_one(self):
        for mf in build_edge_memberships(self.sample_spikes()):
            assert mf.peak == 1.0

    def test_joint_coverage_of_sample_hull(self):
        samples = self.sample_spikes()
        functions = build_edge_memberships(samples)
        xs = np.linspace(samples.min(), samples.max(), 512)
        best = np.maximum.reduce([mf(xs) for mf in functions])
        assert np.all(best > 0.0)

    def test_insufficient_samples_rejected(self):
        with pytest.raises(ValueError):
            build_edge_memberships(np.linspace(0, 1, 26))


class TestInference:
    def test_single_rule_centroids_match_analytic_oracle(self):
        system = default_system()
        lo, hi = system.output_domain
        # prototypes fire exactly one rule at strength 1
        cases = {
            (1.0, 0.0, 0.0): "VH",
            (0.0, 1.0, 1.0): "VL",
            (0.5, 0.5, 0.5): "M",
        }
        by_name = dict(zip(OUTPUT_NAMES, system.output_sets))
        for inputs, expected_set in cases.items():
            got = infer(system, *inputs)
            oracle = analytic_centroid(by_name[expected_set].vertices(), lo, hi)
            assert abs(got - oracle) < 1e-3

    def test_range_over_random_triples(self):
        system = default_system()
        rng = np.random.default_rng(34)
        for _ in range(200):
            out = infer(system, *rng.random(3))
            assert 0.1 <= out <= 0.27

    def test_constant_consequent_collapses_output(self):
        variables = tuple(
            FuzzyVariable(name, default_memberships(name)) for name in ("saliency", "edge", "intensity")
        )
        rules = tuple(
            Rule(saliency=a, edge=b, intensity=c, output="M")
            for a, b, c in itertools.product(LEVEL_NAMES, repeat=3)
        )
        system = FuzzySystem(variables, rules)
        rng = np.random.default_rng(35)
        outs = {round(infer(system, *rng.random(3)), 12) for _ in range(50)}
        assert outs == {round(0.185, 12)}

    def test_rejects_out_of_range_inputs(self):
        system = default_system()
        with pytest.raises(ValueError):
            infer(system, 1.2, 0.0, 0.0)
        with pytest.raises(ValueError):
            infer(system, 0.5, -0.1, 0.0)

    def test_continuity_under_small_perturbations(self):
        system = default_system()
        xs = np.linspace(0.0, 1.0, 1001)
        from wfpsnr.fuzzy_engine import _infer_array

        for var in range(3):
            cols = [np.full(xs.size, 0.3)] * 3
            cols = list(cols)
            cols[var] = xs
            out = _infer_array(system, *cols)
            assert np.max(np.abs(np.diff(out))) < 2e-3

    def test_monotone_along_prototype_sweeps(self):
        system = default_system()
        from wfpsnr.fuzzy_engine import _infer_array

        xs = np.linspace(0.0, 1.0, 101)
        for var in range(3):
            for a, b in itertools.product((0.0, 0.5, 1.0), repeat=2):
                others = [a, b]
                cols = []
                for v in range(3):
                    cols.append(xs if v == var else np.full(xs.size, others.pop(0)))
                diffs = np.diff(_infer_array(system, *cols))
                if var == 0:
                    assert np.all(diffs >= -1e-12)
                else:
                    assert np.all(diffs <= 1e-12)


class TestFuzzyMap:
    def test_uniform_features_give_uniform_map(self):
        grid = BlockGrid(8, np.full((3, 3), 0.4))
        maps = FeatureMaps(grid, grid, grid)
        out = fuzzy_map(maps, default_system())
        assert np.allclose(out.values, out.values[0, 0])

    def test_constant_image_end_to_end(self):
        c = 0.7
        img = GrayImage(np.full((32, 32), c))
        maps = compute_feature_maps(img)
        out = fuzzy_map(maps, default_system())
        expected = infer(default_system(), 0.0, 0.0, c)
        assert np.allclose(out.values, expected, atol=1e-12)

    def test_values_in_output_domain(self):
        rng = np.random.default_rng(36)
        maps = FeatureMaps(
            BlockGrid(8, rng.random((4, 4))),
            BlockGrid(8, rng.random((4, 4))),
            BlockGrid(8, rng.random((4, 4))),
        )
        out = fuzzy_map(maps, default_system())
        assert out.values.min() >= 0.1
        assert out.values.max() <= 0.27


class TestWeightMap:
    def test_uniform_map_gives_unit_weights(self):
        wm = weight_map(BlockGrid(8, np.full((2, 2), 0.2)), 16, 16)
        assert np.all(wm.weights == 1.0)

    def test_two_block_hand_case(self):
        wm = weight_map(BlockGrid(8, np.array([[0.1, 0.27]])), 16, 8)
        assert wm.weights[0, 0] == pytest.approx(0.2 / 0.37, abs=1e-12)
        assert wm.weights[0, 15] == pytest.approx(0.54 / 0.37, abs=1e-12)

    def test_mean_one_and_positive(self):
        rng = np.random.default_rng(37)
        values = 0.1 + 0.17 * rng.random((5, 7))
        wm = weight_map(BlockGrid(8, values), 56, 40)
        assert abs(wm.weights.mean() - 1.0) < 1e-9
        assert wm.weights.min() > 0.0

    def test_orientation_flip_reverses_ordering(self):
        values = np.array([[0.1, 0.18, 0.27]])
        imp = weight_map(BlockGrid(8, values), 24, 8, "importance")
        emb = weight_map(BlockGrid(8, values), 24, 8, "embedding")
        # argmax moves from the max-fmap block to the min-fmap block
        assert np.argmax(imp.weights[0]) // 8 == 2
        assert np.argmax(emb.weights[0]) // 8 == 0
        # reflection preserves the multiset of pre-normalization value gaps
        flipped = (values.max() + values.min()) - values
        gaps = np.diff(np.sort(values.ravel()))
        flipped_gaps = np.diff(np.sort(flipped.ravel()))
        assert np.allclose(np.sort(gaps), np.sort(flipped_gaps), atol=1e-12)

    def test_unknown_orientation_rejected(self):
        with pytest.raises(ValueError):
            weight_map(BlockGrid(8, np.full((1, 1), 0.2)), 8, 8, "sideways")


class TestConfig:
    def test_shipped_default_reproduces_builtins(self):
        from wfpsnr.cli import default_config_path

        config = load_fuzzy_config(default_config_path())
        base = default_system()
        assert config.orientation == "importance"
        assert config.system.rules == base.rules
        assert config.system.output_peaks == base.output_peaks
        for loaded_var, base_var in zip(config.system.variables, base.variables):
            for loaded_mf, base_mf in zip(loaded_var.levels, base_var.levels):
                assert loaded_mf.vertices() == base_mf.vertices()

    def test_round_trip_through_json(self, tmp_path):
        base = default_system()
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(system_to_config_dict(base, "embedding")))
        loaded = load_fuzzy_config(path)
        assert loaded.orientation == "embedding"
        assert loaded.system.rules == base.rules

    def test_custom_rule_table_honored(self, tmp_path):
        cfg = system_to_config_dict(default_system())
        for entry in cfg["rules"]:
            entry["output"] = "VL"
        path = tmp_path / "flat.json"
        path.write_text(json.dumps(cfg))
        system = load_fuzzy_config(path).system
        assert {r.output for r in system.rules} == {"VL"}

    def test_missing_key_rejected(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text(json.dumps({"rules": []}))
        with pytest.raises(ValueError):
            load_fuzzy_config(path)
