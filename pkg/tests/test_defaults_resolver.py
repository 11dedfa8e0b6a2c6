import pytest

from defaults_resolver import DefaultsResolver


class TestDefaultsResolver:

    def test_singleton(self):
        assert DefaultsResolver().instance is DefaultsResolver().instance

    def test_run_defaults(self):
        assert DefaultsResolver().run("n_subjects") == 10000
        assert DefaultsResolver().run("n_reps") == 1000
        assert DefaultsResolver().run("tolerance") == 0.005

    def test_intercepts(self):
        assert DefaultsResolver().intercepts(0.25) == {"alpha0": -1.1392, "gamma0": -1.7233}
        assert DefaultsResolver().intercepts("0.50")["gamma0"] == -0.1
        assert DefaultsResolver().prevalences() == [0.25, 0.5]
        with pytest.raises(ValueError):
            DefaultsResolver().intercepts(0.3)

    def test_alternate_file(self, tmp_path, monkeypatch):
        path = tmp_path / "defaults.yaml"
        path.write_text("run:\n  n_reps: 7\nprevalence: {}\ncalibration: []\n")
        monkeypatch.setenv("RECURWEIGHT_DEFAULTS", str(path))
        DefaultsResolver.reset()
        assert DefaultsResolver().run("n_reps") == 7
        assert DefaultsResolver().calibration() == []

    def test_override(self):
        DefaultsResolver().set_run_default("n_reps", 3)
        assert DefaultsResolver().run("n_reps") == 3
        DefaultsResolver.reset()
        assert DefaultsResolver().run("n_reps") == 1000
