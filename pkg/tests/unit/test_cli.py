"""Unit tests for the command line entry point."""

from pathlib import Path
from unittest.mock import patch

import pytest
import yaml

from cellfree_mec import __version__
from cellfree_mec.cli import EXIT_CONFIG, EXIT_IO, EXIT_OK, build_parser, main
from cellfree_mec.errors import StoreError
from cellfree_mec.store import write_metrics


@pytest.fixture
def config_file(small_campaign_data, tmp_path):
    path = tmp_path / "campaign.yml"
    path.write_text(yaml.safe_dump(small_campaign_data))
    return path


class TestParser:
    """Test class for argument parsing."""

    def test_defaults(self):
        """Test every option defaults to None except the log level."""
        args = build_parser().parse_args([])
        assert args.config is None
        assert args.mode is None
        assert args.log_level == "WARNING"

    def test_options(self):
        """Test typed options."""
        args = build_parser().parse_args(
            ["--mode", "cellular", "--snapshots", "5", "--out", "runs", "--report-from", "a.db"]
        )
        assert args.mode == "cellular"
        assert args.snapshots == 5
        assert args.out == Path("runs")
        assert args.report_from == Path("a.db")

    def test_bad_mode(self):
        """Test an unknown mode exits with usage error."""
        with pytest.raises(SystemExit) as error:
            build_parser().parse_args(["--mode", "macro"])
        assert error.value.code == 2

    def test_version(self, capsys):
        """Test --version prints the package version."""
        with pytest.raises(SystemExit) as error:
            main(["--version"])
        assert error.value.code == 0
        assert __version__ in capsys.readouterr().out


class TestMain:
    """Test class for exit codes and wiring."""

    def test_bad_config(self, tmp_path, capsys):
        """Test an invalid configuration returns 2."""
        path = tmp_path / "bad.yml"
        path.write_text("snapshots: 0\n")
        assert main(["--config", str(path)]) == EXIT_CONFIG
        assert "Configuration error" in capsys.readouterr().err

    def test_unparsable_config(self, tmp_path):
        """Test broken YAML returns 2."""
        path = tmp_path / "broken.yml"
        path.write_text("snapshots: [1,\n")
        assert main(["--config", str(path)]) == EXIT_CONFIG

    def test_missing_config(self, tmp_path):
        """Test a missing configuration file returns 3."""
        assert main(["--config", str(tmp_path / "missing.yml")]) == EXIT_IO

    @patch("cellfree_mec.cli.emit_report")
    @patch("cellfree_mec.cli.run_campaign")
    def test_run(self, mock_run, mock_emit, config_file, tmp_path):
        """Test overrides reach the campaign and reports go to --out."""
        out = tmp_path / "out"
        code = main(
            ["--config", str(config_file), "--mode", "cellfree", "--seed", "9", "--out", str(out)]
        )
        assert code == EXIT_OK
        config = mock_run.call_args.args[0]
        assert config.modes == ("cellfree",)
        assert config.seed == 9
        assert config.cellular.seed == 9
        assert config.output_dir == out
        mock_emit.assert_called_once_with(mock_run.return_value, out, database=None)

    @patch("cellfree_mec.cli.emit_report", side_effect=StoreError("locked"))
    @patch("cellfree_mec.cli.run_campaign")
    def test_store_error(self, mock_run, mock_emit, config_file, tmp_path):
        """Test a database failure returns 3."""
        code = main(["--config", str(config_file), "--db", str(tmp_path / "results.db")])
        assert code == EXIT_IO

    def test_report_from_invalid(self, config_file, tmp_path):
        """Test --report-from on a non-database file returns 3."""
        path = tmp_path / "results.db"
        path.write_text("plain text")
        assert main(["--config", str(config_file), "--report-from", str(path)]) == EXIT_IO

    @patch("cellfree_mec.cli.run_campaign")
    def test_report_from(self, mock_run, config_file, sample_metrics, tmp_path):
        """Test stored metrics are re-reported without running a campaign."""
        database = tmp_path / "results.db"
        write_metrics(database, sample_metrics)
        out = tmp_path / "again"
        code = main(
            ["--config", str(config_file), "--report-from", str(database), "--out", str(out)]
        )
        assert code == EXIT_OK
        mock_run.assert_not_called()
        assert (out / "summary.csv").exists()
        assert (out / "cdf" / "power_mw__cellfree.csv").exists()
