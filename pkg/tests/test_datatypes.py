import json

import numpy as np
import pytest

from igranger.datatypes import (
    ConfigError,
    DataError,
    FitConfig,
    GrangerGraph,
    InterventionalFamily,
    MultiEnvDataset,
    load_dataset,
    save_dataset,
    standardize,
)


def write_csv(path, matrix, header=None):
    lines = []
    if header:
        lines.append(",".join(header))
    for row in matrix:
        lines.append(",".join(repr(float(v)) for v in row))
    path.write_text("\n".join(lines) + "\n")


def write_manifest(path, d, files, names=None):
    spec = {"d": d, "environments": files}
    if names:
        spec["names"] = names
    path.write_text(json.dumps(spec))


class TestLoadDataset:
    def test_shape_passthrough(self, tmp_path):
        rng = np.random.default_rng(0)
        files = []
        for k in range(3):
            m = rng.standard_normal((500, 5))
            write_csv(tmp_path / f"e{k}.csv", m)
            files.append(f"e{k}.csv")
        write_manifest(tmp_path / "manifest.json", 5, files)
        data = load_dataset(tmp_path / "manifest.json")
        assert data.n_envs == 3
        assert data.d == 5
        assert data.lengths == (500, 500, 500)

    def test_non_numeric_cell_names_location(self, tmp_path):
        (tmp_path / "bad.csv").write_text("1.0,2.0\n3.0,abc\n5.0,6.0\n")
        write_manifest(tmp_path / "manifest.json", 2, ["bad.csv"])
        with pytest.raises(DataError) as err:
            load_dataset(tmp_path / "manifest.json")
        msg = str(err.value)
        assert "abc" in msg and "row 2" in msg and "column 2" in msg
        assert "bad.csv" in msg

    def test_dimension_mismatch_across_envs(self, tmp_path):
        write_csv(tmp_path / "a.csv", np.zeros((10, 5)) + np.arange(5))
        write_csv(tmp_path / "b.csv", np.zeros((10, 6)) + np.arange(6))
        write_manifest(tmp_path / "manifest.json", 5, ["a.csv", "b.csv"])
        with pytest.raises(DataError) as err:
            load_dataset(tmp_path / "manifest.json")
        assert "columns" in str(err.value)

    def test_too_short_environment(self, tmp_path):
        write_csv(tmp_path / "a.csv", np.ones((2, 3)) * np.arange(3))
        write_manifest(tmp_path / "manifest.json", 3, ["a.csv"])
        with pytest.raises(DataError):
            load_dataset(tmp_path / "manifest.json")

    def test_nan_rejected(self, tmp_path):
        (tmp_path / "a.csv").write_text("1.0,2.0\nnan,4.0\n5.0,6.0\n")
        write_manifest(tmp_path / "manifest.json", 2, ["a.csv"])
        with pytest.raises(DataError):
            load_dataset(tmp_path / "manifest.json")

    def test_header_row_accepted(self, tmp_path):
        (tmp_path / "a.csv").write_text("x,y\n1.0,2.0\n3.0,4.0\n5.0,6.0\n")
        write_manifest(tmp_path / "manifest.json", 2, ["a.csv"])
        data = load_dataset(tmp_path / "manifest.json")
        assert data.environments[0].shape == (3, 2)

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(DataError):
            load_dataset(tmp_path / "nope.json")


class TestRoundTrip:
    def test_save_load_reproduces_values(self, tmp_path):
        rng = np.random.default_rng(1)
        envs = tuple(rng.standard_normal((40, 4)) * 10 ** rng.integers(-6, 6)
                     for _ in range(3))
        data = MultiEnvDataset(environments=envs, d=4,
                               names=["a", "b", "c", "d"])
        manifest = save_dataset(data, tmp_path / "out")
        loaded = load_dataset(manifest)
        assert loaded.names == ("a", "b", "c", "d")
        for orig, back in zip(data.environments, loaded.environments):
            assert np.max(np.abs(orig - back)) < 1e-12

    def test_second_save_identical_bytes(self, tmp_path):
        rng = np.random.default_rng(2)
        data = MultiEnvDataset(environments=(rng.standard_normal((20, 3)),), d=3)
        save_dataset(data, tmp_path / "one")
        save_dataset(data, tmp_path / "two")
        a = (tmp_path / "one" / "env0.csv").read_bytes()
        b = (tmp_path / "two" / "env0.csv").read_bytes()
        assert a == b


class TestStandardize:
    def test_constant_series_maps_to_zero(self):
        env = np.column_stack([np.full(10, 7.0), np.arange(10.0)])
        data = MultiEnvDataset(environments=(env,), d=2)
        out = standardize(data)
        assert np.array_equal(out.environments[0][:, 0], np.zeros(10))

    def test_already_standardized_pair(self):
        env = np.array([[-1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [1.0, -1.0]])
        data = MultiEnvDataset(environments=(env,), d=2)
        out = standardize(data)
        assert np.allclose(out.environments[0], env, atol=1e-15)

    def test_hand_arithmetic(self):
        # column (0, 2, 4): mean 2, population std sqrt(8/3)
        env = np.array([[0.0], [2.0], [4.0]])
        data = MultiEnvDataset(environments=(env,), d=1)
        out = standardize(data)
        expected = (env - 2.0) / np.sqrt(8.0 / 3.0)
        assert np.allclose(out.environments[0], expected, atol=1e-14)

    def test_idempotent(self):
        rng = np.random.default_rng(3)
        envs = tuple(3 + 5 * rng.standard_normal((60, 4)) for _ in range(2))
        once = standardize(MultiEnvDataset(environments=envs, d=4))
        twice = standardize(once)
        for a, b in zip(once.environments, twice.environments):
            assert np.max(np.abs(a - b)) < 1e-12

    def test_per_environment_statistics(self):
        rng = np.random.default_rng(4)
        envs = (rng.standard_normal((50, 2)) + 10, rng.standard_normal((70, 2)))
        out = standardize(MultiEnvDataset(environments=envs, d=2))
        for env in out.environments:
            assert np.allclose(env.mean(axis=0), 0.0, atol=1e-12)
            assert np.allclose(env.std(axis=0), 1.0, atol=1e-12)


class TestGrangerGraph:
    def test_entries_validated(self):
        with pytest.raises(DataError):
            GrangerGraph(adjacency=np.array([[0, 2], [0, 1]]))

    def test_scores_validated(self):
        with pytest.raises(DataError):
            GrangerGraph(adjacency=np.eye(2, dtype=int),
                         scores=-np.ones((2, 2)))

    def test_threshold_monotonicity(self):
        rng = np.random.default_rng(5)
        scores = rng.uniform(0, 1, (6, 6))
        previous = None
        for threshold in np.linspace(0, 1, 21):
            g = GrangerGraph.from_scores(scores, threshold)
            if previous is not None:
                # raising the threshold never adds edges
                assert np.all(g.adjacency <= previous)
            previous = g.adjacency

    def test_immutable(self):
        g = GrangerGraph(adjacency=np.eye(3, dtype=int))
        with pytest.raises(ValueError):
            g.adjacency[0, 1] = 1


class TestInterventionalFamily:
    def test_zero_matrix_is_non_intervened(self):
        fam = InterventionalFamily(targets=(np.zeros((3, 3)),
                                            np.eye(3, dtype=int)))
        assert not fam.is_intervened(0)
        assert fam.is_intervened(1)

    def test_entry_validation(self):
        with pytest.raises(DataError):
            InterventionalFamily(targets=(np.full((2, 2), 0.5),))


class TestFitConfig:
    def test_alpha_strictly_inside(self):
        with pytest.raises(ConfigError):
            FitConfig(alpha=0.0)
        with pytest.raises(ConfigError):
            FitConfig(alpha=1.0)

    def test_step_size_positive(self):
        with pytest.raises(ConfigError):
            FitConfig(step_size=0.0)

    def test_thresholds_nonnegative(self):
        with pytest.raises(ConfigError):
            FitConfig(edge_threshold=-1.0)

    def test_warmup_default_tracks_max_iters(self):
        assert FitConfig(max_iters=123).effective_warmup == 123
        assert FitConfig(max_iters=123, warmup_iters=7).effective_warmup == 7
