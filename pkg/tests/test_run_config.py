import json

import pytest

from rei_qnd.config.presets import TWO_PI
from rei_qnd.config.run_config import DEFAULT_PRESET, RunConfig
from rei_qnd.errors import ConfigValidationError


def _write(tmp_path, payload):
    path = tmp_path / "run.json"
    path.write_text(json.dumps(payload), encoding="utf-8")
    return str(path)


class TestLoading:
    def test_defaults(self):
        config = RunConfig.load()
        assert config.preset is None
        assert config.preset_name == DEFAULT_PRESET
        assert (config.alpha, config.n_m, config.p_det) == (2.0, 2, 0.9)

    def test_file_then_flags(self, tmp_path):
        path = _write(tmp_path, {"preset": "nd_yvo4_subkelvin", "alpha": 3.0, "n_m": 4})
        config = RunConfig.load(path, {"alpha": 1.5, "n_m": None})
        assert config.preset == "nd_yvo4_subkelvin"
        assert config.alpha == 1.5
        assert config.n_m == 4

    def test_unknown_key(self, tmp_path):
        with pytest.raises(ConfigValidationError) as excinfo:
            RunConfig.load(_write(tmp_path, {"finesse": 3}))
        assert excinfo.value.field == "finesse"

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigValidationError) as excinfo:
            RunConfig.load(str(tmp_path / "absent.json"))
        assert excinfo.value.field == "config"

    def test_malformed_file(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{", encoding="utf-8")
        with pytest.raises(ConfigValidationError, match="not valid JSON"):
            RunConfig.load(str(path))

    def test_file_must_hold_an_object(self, tmp_path):
        with pytest.raises(ConfigValidationError, match="JSON object"):
            RunConfig.load(_write(tmp_path, [1, 2]))


class TestValidation:
    @pytest.mark.parametrize(
        "values, field",
        [
            ({"alpha": 0.5}, "alpha"),
            ({"p_det": 1.0}, "p_det"),
            ({"n_m": 0}, "n_m"),
            ({"n_m": 2.5}, "n_m"),
            ({"phi_p": 1.0}, "phi_p"),
            ({"grid_points": 0}, "grid_points"),
            ({"points": 1}, "points"),
            ({"delta_min_g": 5.0, "delta_max_g": 5.0}, "delta_max_g"),
            ({"t_p_us": -1.0}, "t_p_us"),
            ({"preset": "er_yso"}, "preset"),
            ({"alpha": "two"}, "alpha"),
            ({"alpha": float("inf")}, "alpha"),
            ({"output_format": "xml"}, "output_format"),
            ({"timestamp": "yes"}, "timestamp"),
            ({"preset": ["nd_yvo4_demonstrated"]}, "preset"),
            ({"output": 3}, "output"),
            ({"output_format": ["csv"]}, "output_format"),
        ],
    )
    def test_invalid_fields(self, values, field):
        with pytest.raises(ConfigValidationError) as excinfo:
            RunConfig.from_mapping(values)
        assert excinfo.value.field == field

    def test_unknown_override(self):
        with pytest.raises(ConfigValidationError) as excinfo:
            RunConfig.from_mapping({"overrides": {"finesse": 3.0}})
        assert excinfo.value.field == "overrides.finesse"

    def test_non_numeric_override(self):
        with pytest.raises(ConfigValidationError) as excinfo:
            RunConfig.from_mapping({"overrides": {"quality_factor": "high"}})
        assert excinfo.value.field == "overrides.quality_factor"

    def test_unphysical_override(self):
        with pytest.raises(ConfigValidationError) as excinfo:
            RunConfig.from_mapping({"overrides": {"quality_factor": -5.0}})
        assert excinfo.value.field == "overrides"

    def test_single_point_grid(self):
        config = RunConfig.from_mapping({"grid_points": 1, "t_p_min_us": 13.0})
        assert list(config.t_p_grid()) == pytest.approx([13e-6])

    def test_with_values_revalidates(self):
        with pytest.raises(ConfigValidationError):
            RunConfig().with_values(alpha=0.0)


class TestDerivedObjects:
    def test_override_changes_the_system(self):
        config = RunConfig.from_mapping({"overrides": {"quality_factor": 300_000.0}})
        system = config.system()
        assert system.derived.cooperativity == pytest.approx(280.64, rel=1e-3)
        assert not any(note.startswith("cooperativity") for note in system.derived.notes)

    def test_preset_system_carries_quotes(self):
        system = RunConfig.from_mapping({"preset": "nd_yvo4_demonstrated"}).system()
        assert any(note.startswith("cooperativity") for note in system.derived.notes)

    def test_units(self):
        config = RunConfig.from_mapping({"rabi_frequency_hz": 5.9e3, "t_p_us": 13.0, "phi_p": 0.1})
        assert config.rabi_frequency == pytest.approx(TWO_PI * 5.9e3)
        assert config.t_p == pytest.approx(13e-6)
        assert config.protocol_errors().prep_angle_error == 0.1

    def test_scan_grid(self):
        grid = RunConfig().t_p_grid()
        assert grid.size == 199
        assert grid[0] == pytest.approx(1e-6)
        assert grid[-1] == pytest.approx(100e-6)
        assert all(later > earlier for earlier, later in zip(grid, grid[1:]))

    def test_policy(self, subkelvin):
        policy = RunConfig.from_mapping({"alpha": 3.0}).dephasing_policy(subkelvin)
        assert policy.superposition_time_multiplier == 3.0
        assert policy.spin_dephasing_rate == pytest.approx(TWO_PI * 34.0)
