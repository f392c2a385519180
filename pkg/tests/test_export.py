"""Tests for record export and reload."""
import json

import pytest

from robust_game.errors import ConfigurationError, InputError
from robust_game.export import export_comparison, export_record, load_record
from robust_game.harness import run_algorithm1
from robust_game.schemas import ComparisonRecord, ExperimentRecord


@pytest.fixture
def short_record(contact_config):
    return run_algorithm1(contact_config, max_iterations=1)


class TestExportRecord:
    """Test suite for experiment exports."""

    def test_empty_record(self, tmp_path):
        """Test that an empty record is valid JSON with no iterations."""
        out = export_record(ExperimentRecord(), tmp_path / "empty")
        data = json.loads((out / "summary.json").read_text())
        assert data["iterations"] == []
        assert (out / "gains.csv").read_text() == "iteration,time\n"
        assert not (out / "trajectory.csv").exists()

    def test_files_and_headers(self, short_record, tmp_path):
        """Test the exported tables and one polytope file per iteration."""
        out = export_record(short_record, tmp_path / "run")
        gains = (out / "gains.csv").read_text().splitlines()
        assert gains[0] == "iteration,time,K1_11,K1_12,K1_star_11,K1_star_12"
        assert len(gains) == 3
        volume = (out / "volume.csv").read_text().splitlines()
        assert volume[0] == "iteration,volume,volume_raw,volume_stderr,n_vertices,n_constraints"
        trajectory = (out / "trajectory.csv").read_text().splitlines()
        assert trajectory[0] == "t,x1,x2,u1_1,u2_1,w_1,w_2"
        assert len(trajectory) == len(short_record.trajectory.times) + 1
        assert sorted(p.name for p in (out / "polytopes").iterdir()) == ["iter_0.json", "iter_1.json"]

    def test_round_trip(self, short_record, tmp_path):
        """Test that parsing summary.json gives back the record."""
        out = export_record(short_record, tmp_path / "run")
        assert load_record(out) == short_record
        assert load_record(out / "summary.json") == short_record

    def test_byte_stable(self, short_record, tmp_path):
        """Test that exporting the same record twice writes identical bytes."""
        a = export_record(short_record, tmp_path / "a")
        b = export_record(short_record, tmp_path / "b")
        for f in sorted(a.rglob("*")):
            if f.is_file():
                assert f.read_bytes() == (b / f.relative_to(a)).read_bytes()

    def test_unwritable_target(self, tmp_path):
        """Test that a file in place of the output directory is an input error."""
        blocked = tmp_path / "blocked"
        blocked.write_text("")
        with pytest.raises(InputError, match="Cannot write results"):
            export_record(ExperimentRecord(), blocked)


class TestExportComparison:
    """Test suite for comparison exports."""

    def test_traces(self, tmp_path):
        """Test one trace column per vertex and gain."""
        rec = ComparisonRecord(
            n_samples=9,
            theta_true=[0.36, 0.18],
            ls_estimate=[0.35, 0.2],
            ls_inside_omega=True,
            vertices=[[0.3, 0.1], [0.4, 0.3]],
            robust_gain=[[13.0, 12.0]],
            ls_gain=[[14.0, 11.0]],
            robust_abscissa=[-0.5, -0.4],
            ls_abscissa=[-0.3, 0.1],
            robust_all_stable=True,
            ls_all_stable=False,
            trace_times=[0.0, 0.01, 0.02],
            robust_traces=[[-3.0, -2.9, -2.8], [-3.0, -2.95, -2.9]],
            ls_traces=[[-3.0, -2.9, -2.7], [-3.0, -3.1, -3.2]],
        )
        out = export_comparison(rec, tmp_path / "cmp")
        lines = (out / "traces.csv").read_text().splitlines()
        assert lines[0] == "t,robust_v1,robust_v2,ls_v1,ls_v2"
        assert lines[1] == "0.0,-3.0,-3.0,-3.0,-3.0"
        assert len(lines) == 4
        assert ComparisonRecord.model_validate_json((out / "comparison.json").read_text()) == rec


class TestLoadRecord:
    """Test suite for reading records back."""

    def test_missing(self, tmp_path):
        """Test that a missing summary is a configuration error."""
        with pytest.raises(ConfigurationError, match="not found"):
            load_record(tmp_path)

    def test_invalid(self, tmp_path):
        """Test that a malformed summary is a configuration error."""
        (tmp_path / "summary.json").write_text('{"iterations": 3}')
        with pytest.raises(ConfigurationError, match="Invalid record"):
            load_record(tmp_path)
