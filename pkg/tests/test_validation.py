"""
Tests for scenario parsing, validation and plausibility warnings.
"""

import copy
import json
import logging
from pathlib import Path

import numpy as np
import pytest

from config.isac_config import SPEED_OF_LIGHT
from src.core.errors import ConfigurationError
from src.core.scenario import ScenarioConfig, load_scenario, save_scenario
from src.utils import validation
from src.utils.validation import check_scenario_warnings, max_expected_doppler_hz, validate_scenario
from tests.benchmark.scenario_library import ScenarioLibrary

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"


def config_error_path(doc):
    with pytest.raises(ConfigurationError) as info:
        ScenarioConfig.from_dict(doc)
    return info.value.path


class TestScenarioParsing:
    """Test construction of scenarios from JSON documents."""

    @pytest.mark.parametrize("name", ["minimal_static.json", "rooftop.json", "rotor_drone.json"])
    def test_bundled_scenarios_load(self, name):
        """Every shipped scenario file parses and validates."""
        scenario = load_scenario(SCENARIO_DIR / name)
        is_valid, errors = validate_scenario(scenario)
        assert is_valid, f"{name} should validate: {errors}"

    def test_round_trip_through_file(self, tmp_path):
        """Saving and loading gives the same document."""
        scenario = ScenarioConfig.from_dict(ScenarioLibrary.single_target(with_clutter=True))
        save_scenario(scenario, tmp_path / "scene.json")
        reloaded = load_scenario(tmp_path / "scene.json")
        assert reloaded.to_dict() == scenario.to_dict()

    def test_derived_quantities(self):
        """Test snapshot count, wavelength and unambiguous delay."""
        scenario = ScenarioConfig.from_dict(ScenarioLibrary.minimal_static(duration_s=0.5))
        assert scenario.n_snapshots == 500
        assert scenario.wavelength_m == pytest.approx(SPEED_OF_LIGHT / 3e9)
        assert scenario.max_unambiguous_delay_s == pytest.approx(64 / 50e6)

    def test_with_seed(self):
        """A reseeded copy keeps everything else."""
        scenario = ScenarioConfig.from_dict(ScenarioLibrary.minimal_static())
        other = scenario.with_seed(99)
        assert other.rng_seed == 99
        assert other.to_dict()['nodes'] == scenario.to_dict()['nodes']

    def test_missing_file(self, tmp_path):
        """Test error for a scenario file that does not exist."""
        with pytest.raises(ConfigurationError):
            load_scenario(tmp_path / "absent.json")

    def test_invalid_json(self, tmp_path):
        """Test error for a file that is not JSON."""
        path = tmp_path / "broken.json"
        path.write_text("{nodes: ")
        with pytest.raises(ConfigurationError) as info:
            load_scenario(path)
        assert info.value.path == "$"


class TestConfigurationPaths:
    """Errors name the offending JSON path."""

    @pytest.fixture
    def doc(self):
        return copy.deepcopy(ScenarioLibrary.single_target())

    def test_missing_required_scalar(self, doc):
        """Test missing carrier frequency."""
        del doc['carrier_hz']
        assert config_error_path(doc) == "$.carrier_hz"

    def test_bad_role(self, doc):
        """Test unknown node role."""
        doc['nodes'][1]['role'] = 'relay'
        assert config_error_path(doc) == "$.nodes[1].role"

    def test_unsorted_waypoints(self, doc):
        """Test non-increasing waypoint times."""
        doc['targets'][0]['trajectory']['waypoints'][1]['t'] = 0.0
        assert config_error_path(doc) == "$.targets[0].trajectory"

    def test_short_position(self, doc):
        """Test a waypoint position with two coordinates."""
        doc['nodes'][0]['trajectory']['waypoints'][0]['position'] = [1.0, 2.0]
        assert config_error_path(doc) == "$.nodes[0].trajectory.waypoints[0].position"

    def test_unknown_link_node(self, doc):
        """Test link to a node that does not exist."""
        doc['links'][1]['rx_id'] = 'rx9'
        assert config_error_path(doc) == "$.links[1].rx_id"

    def test_receiver_cannot_transmit(self, doc):
        """Test link whose transmitter is receive-only."""
        doc['links'][0] = {'tx_id': 'rx1', 'rx_id': 'rx2'}
        assert config_error_path(doc) == "$.links[0].tx_id"

    def test_monostatic_needs_txrx(self, doc):
        """A tx-only node cannot close a link on itself."""
        doc['links'][0] = {'tx_id': 'tx', 'rx_id': 'tx'}
        path = config_error_path(doc)
        assert path.startswith("$.links[0]")

    def test_unknown_signature(self, doc):
        """Test target referencing a missing signature."""
        doc['targets'][0]['signature_id'] = 'bird'
        assert config_error_path(doc) == "$.targets[0].signature_id"

    def test_bad_rotor(self, doc):
        """Test rotor with zero blades."""
        doc['targets'][0]['rotor'] = {'n_blades': 0, 'blade_radius_m': 0.2, 'rotation_hz': 50.0}
        assert config_error_path(doc) == "$.targets[0].rotor.n_blades"

    def test_duplicate_node(self, doc):
        """Test duplicate node ids."""
        doc['nodes'][2]['id'] = 'rx1'
        assert config_error_path(doc) == "$.nodes[2].id"

    def test_signature_needs_gain_or_table(self, doc):
        """Test signature without a source."""
        doc['signatures']['uav'] = {'scale': 2.0}
        assert config_error_path(doc) == "$.signatures.uav"

    def test_no_links(self, doc):
        """Test a scenario without links."""
        doc['links'] = []
        assert config_error_path(doc) == "$.links"

    def test_non_numeric_cluster_count(self, doc):
        """A clutter count that is not a number names its key."""
        doc['clutter'] = dict(ScenarioLibrary.single_target(with_clutter=True)['clutter'], n_clusters="many")
        assert config_error_path(doc) == "$.clutter.n_clusters"

    def test_fractional_blade_count(self, doc):
        """Blade counts must be integers."""
        doc['targets'][0]['rotor'] = {'n_blades': 2.5, 'blade_radius_m': 0.2, 'rotation_hz': 50.0}
        assert config_error_path(doc) == "$.targets[0].rotor.n_blades"

    def test_non_numeric_rotation_rate(self, doc):
        """Test a rotor rate given as text."""
        doc['targets'][0]['rotor'] = {'n_blades': 2, 'blade_radius_m': 0.2, 'rotation_hz': "fast"}
        assert config_error_path(doc) == "$.targets[0].rotor.rotation_hz"

    def test_non_numeric_waypoint_time(self, doc):
        """Test a waypoint time given as text."""
        doc['targets'][0]['trajectory']['waypoints'][0]['t'] = "start"
        assert config_error_path(doc) == "$.targets[0].trajectory.waypoints[0].t"

    def test_boolean_is_not_a_number(self, doc):
        """JSON true is rejected where a number is expected."""
        doc['nodes'][0]['tx_power_dbm'] = True
        assert config_error_path(doc) == "$.nodes[0].tx_power_dbm"

    def test_non_numeric_seed(self, doc):
        """Test a top-level seed given as text."""
        doc['rng_seed'] = "seven"
        assert config_error_path(doc) == "$.rng_seed"


class TestPlausibilityWarnings:
    """Test soft checks that do not stop a run."""

    def test_clean_scenario(self):
        """The rooftop scene triggers no warning."""
        scenario = ScenarioConfig.from_dict(ScenarioLibrary.rooftop(noise_power_dbm=-100.0))
        is_clean, warnings = check_scenario_warnings(scenario)
        assert is_clean, warnings

    def test_max_expected_doppler(self):
        """A 5*sqrt(2) m/s target bounds Doppler at 2 v f_c / c."""
        scenario = ScenarioConfig.from_dict(ScenarioLibrary.single_target())
        expected = 2 * 5 * np.sqrt(2) * 3e9 / SPEED_OF_LIGHT
        assert max_expected_doppler_hz(scenario) == pytest.approx(expected, rel=1e-6)

    def test_rotor_tip_speed_counts(self):
        """Blade tips add 2 pi f_rot r to the speed bound."""
        scenario = load_scenario(SCENARIO_DIR / "rotor_drone.json")
        expected = 2 * (2 * np.pi * 50.0 * 0.2) * 3e9 / SPEED_OF_LIGHT
        assert max_expected_doppler_hz(scenario) == pytest.approx(expected, rel=1e-6)

    def test_doppler_aliasing(self):
        """Test warning when the snapshot rate cannot hold the Doppler span."""
        doc = ScenarioLibrary.single_target()
        doc['snapshot_rate_hz'] = 200.0
        is_clean, warnings = check_scenario_warnings(ScenarioConfig.from_dict(doc))
        assert not is_clean
        assert any("alias" in w for w in warnings)

    def test_delay_wrap(self):
        """Test warning when echoes exceed the unambiguous delay span."""
        doc = ScenarioLibrary.single_target()
        doc['bandwidth_hz'] = 200e6
        is_clean, warnings = check_scenario_warnings(ScenarioConfig.from_dict(doc))
        assert not is_clean
        assert any("wrap" in w for w in warnings)

    def test_trajectory_shorter_than_run(self):
        """Test warning when a target stops before the run ends."""
        doc = ScenarioLibrary.single_target(duration_s=0.5)
        doc['duration_s'] = 1.0
        is_clean, warnings = check_scenario_warnings(ScenarioConfig.from_dict(doc))
        assert not is_clean
        assert any("held" in w for w in warnings)

    def test_warning_logged_once(self, monkeypatch, caplog):
        """Repeated checks return the warnings but log each one once."""
        monkeypatch.setattr(validation, "_warned", set())
        doc = ScenarioLibrary.single_target()
        doc['snapshot_rate_hz'] = 200.0
        scenario = ScenarioConfig.from_dict(doc)
        with caplog.at_level(logging.WARNING, logger="src.utils.validation"):
            _, first = check_scenario_warnings(scenario)
            n_logged = len(caplog.records)
            _, second = check_scenario_warnings(scenario)
        assert n_logged == len(first) > 0
        assert second == first
        assert len(caplog.records) == n_logged


if __name__ == "__main__":
    pytest.main([__file__])
