"""Tests for the command-line verbs."""
import json
from pathlib import Path

import pytest

from robust_game.main import build_parser, main

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


class TestParser:
    """Test suite for argument parsing."""

    def test_verbs(self):
        """Test that every verb is registered."""
        parser = build_parser()
        for argv in (["run", "--config", "c.json"], ["nash", "--config", "c.json"],
                     ["compare-ls", "--config", "c.json"], ["certify", "--record", "out"]):
            assert parser.parse_args(argv).command == argv[0]

    def test_defaults(self):
        """Test compare-ls defaults of nine samples and one seed."""
        args = build_parser().parse_args(["compare-ls", "--config", "c.json"])
        assert args.samples == 9
        assert args.seeds == 1
        assert args.seed is None

    def test_max_iters_flag(self):
        """Test that --max-iters maps onto max_iters."""
        args = build_parser().parse_args(["run", "--config", "c.json", "--max-iters", "4"])
        assert args.max_iters == 4

    def test_verb_required(self):
        """Test that a missing verb is a usage error."""
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2


class TestVerbs:
    """Test suite for running verbs end to end."""

    def test_nash(self, capsys):
        """Test that nash prints the contact-robot equilibrium."""
        assert main(["nash", "--config", str(SCENARIOS / "contact_robot.json")]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["K1_star"][0] == pytest.approx([13.81, 12.05], abs=0.05)
        assert out["K2_star"][0] == pytest.approx([2.69, 1.37], abs=0.05)
        assert max(out["residuals"]) <= 1e-8

    def test_missing_config(self, tmp_path):
        """Test that a missing scenario file exits with the configuration code."""
        assert main(["nash", "--config", str(tmp_path / "nope.json")]) == 2

    def test_invalid_config(self, tmp_path):
        """Test that an invalid scenario exits with the configuration code."""
        bad = tmp_path / "bad.json"
        bad.write_text('{"A": [[0]]}')
        assert main(["nash", "--config", str(bad)]) == 2

    def test_run_then_certify(self, tmp_path, capsys):
        """Test a short run export followed by offline certification."""
        out = tmp_path / "run"
        argv = ["run", "--config", str(SCENARIOS / "contact_robot.json"), "--out", str(out), "--max-iters", "2"]
        assert main(argv) == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["iterations"] == 2
        assert (out / "summary.json").exists()

        assert main(["certify", "--record", str(out)]) == 0
        cert = json.loads(capsys.readouterr().out)
        assert cert["epsilon"] >= 0
