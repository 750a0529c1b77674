"""
Tests for the twist-census command line.
"""

import json
import os

import pytest
from typer.testing import CliRunner

from app.calculations.errors import NotUnimodularError
from app.commands.runners import run
from app.main import EXIT_FAIL, EXIT_PASS, EXIT_USAGE, app, run_command

runner = CliRunner()


def invoke(*args):
    return runner.invoke(app, list(args))


@pytest.fixture(autouse=True)
def isolated_settings(monkeypatch, tmp_path):
    from app.config import get_settings
    monkeypatch.setenv("TWIST_CACHE_DIR", str(tmp_path / "settings-cache"))
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


class TestCommands:

    def test_enumerate(self, cache_dir):
        result = invoke("enumerate", "--p", "3", "--ext", "sqrt-pi", "--nmax", "2", "--cache-dir", cache_dir)
        assert result.exit_code == EXIT_PASS, result.output
        assert "verdict" in result.output

    def test_verify(self, cache_dir, tmp_path):
        out = str(tmp_path / "verify")
        result = invoke("verify", "--p", "3", "--ext", "sqrt-pi", "--nmax", "2", "--samples", "2",
                        "--cache-dir", cache_dir, "--output", out, "--format", "json", "--format", "csv")
        assert result.exit_code == EXIT_PASS, result.output
        with open(out + ".json") as fh:
            doc = json.load(fh)
        assert doc["verdict"] == "PASS"
        assert doc["config"]["command"] == "verify"
        assert "cache_dir" not in doc["config"]

    def test_census_selected_suite(self, cache_dir):
        result = invoke("verify", "--p", "2", "--ext", "sqrt(-1)", "--nmax", "4", "--suite", "census",
                        "--ratio-conductor", "2", "--count", "1", "--cache-dir", cache_dir)
        assert result.exit_code == EXIT_PASS, result.output

    def test_epsilon(self, cache_dir, tmp_path):
        out = str(tmp_path / "listing")
        invoke("enumerate", "--p", "3", "--ext", "sqrt-pi", "--nmax", "2",
               "--cache-dir", cache_dir, "--output", out)
        with open(out + ".json") as fh:
            encoding = json.load(fh)["extensions"][0]["characters"][0]["encoding"]
        result = invoke("epsilon", "--p", "3", "--ext", "sqrt-pi", "--char", encoding, "--cache-dir", cache_dir)
        assert result.exit_code == EXIT_PASS, result.output
        assert "sign eps" in result.output

    def test_no_cache_same_report(self, cache_dir, tmp_path):
        a, b = str(tmp_path / "a"), str(tmp_path / "b")
        args = ["census", "--p", "3", "--ext", "sqrt-pi", "--nmax", "4", "--ratio-conductor", "2",
                "--count", "2", "--cache-dir", cache_dir]
        assert invoke(*args, "--output", a).exit_code == EXIT_PASS
        assert invoke(*args, "--no-cache", "--output", b).exit_code == EXIT_PASS
        with open(a + ".json", "rb") as fa, open(b + ".json", "rb") as fb:
            assert fa.read() == fb.read()


class TestUsageErrors:
    """Exit status 2."""

    @pytest.mark.parametrize("args", [
        ["enumerate", "--p", "3", "--ext", "sqrt(-1)", "--nmax", "2"],
        ["enumerate", "--p", "4", "--ext", "unramified", "--nmax", "2"],
        ["enumerate", "--p", "3", "--ext", "sqrt-pi", "--nmax", "9"],
        ["census", "--p", "3", "--ext", "sqrt-pi", "--nmax", "2", "--ratio-conductor", "3"],
        ["verify", "--p", "3", "--ext", "sqrt-pi", "--nmax", "2", "--suite", "everything"],
        ["enumerate", "--p", "3", "--ext", "sqrt-pi", "--nmax", "2", "--format", "xlsx"],
        ["epsilon", "--p", "3", "--ext", "sqrt-pi", "--char", "chi"],
        ["identities", "--p", "3", "--ext", "unramified", "--nmax", "2"],
    ])
    def test_exit_two(self, cache_dir, args):
        result = invoke(*args, "--cache-dir", cache_dir)
        assert result.exit_code == EXIT_USAGE, result.output

    def test_missing_option(self):
        assert invoke("census", "--p", "3").exit_code == EXIT_USAGE

    def test_run_command(self, cache_dir):
        assert run_command(["enumerate", "--p", "3", "--ext", "sqrt-pi", "--nmax", "1",
                            "--cache-dir", cache_dir]) == EXIT_PASS
        assert run_command(["enumerate", "--bogus"]) == EXIT_USAGE


class TestFailures:
    """Exit status 1."""

    def test_sign_certification_error(self, cache_dir, monkeypatch):
        def not_unimodular(G, chi_c, a, q, f=1):
            raise NotUnimodularError("|eps| != 1")

        monkeypatch.setattr("app.calculations.epsilon.epsilon_normalize", not_unimodular)
        assert run_command(["enumerate", "--p", "3", "--ext", "sqrt-pi", "--nmax", "2",
                            "--cache-dir", cache_dir, "--no-cache"]) == EXIT_FAIL

    def test_flipped_census(self, cache_dir, tmp_path, monkeypatch, flip_after):
        listing = str(tmp_path / "listing")
        assert run_command(["enumerate", "--p", "3", "--ext", "sqrt-pi", "--nmax", "4",
                            "--cache-dir", cache_dir, "--output", listing]) == EXIT_PASS
        with open(listing + ".json") as fh:
            flip = flip_after(len(json.load(fh)["extensions"][0]["characters"]))
        monkeypatch.setattr("app.main.run", lambda config: run(config, flip=flip))

        out = str(tmp_path / "census")
        status = run_command(["census", "--p", "3", "--ext", "sqrt-pi", "--nmax", "4",
                              "--ratio-conductor", "2", "--count", "2", "--workers", "1",
                              "--cache-dir", cache_dir, "--output", out])
        assert status == EXIT_FAIL
        with open(out + ".json") as fh:
            doc = json.load(fh)
        assert doc["verdict"] == "FAIL"
        last = doc["extensions"][0]["censuses"][-1]["rows"][-1]
        assert last["verdict"] == "FAIL"
        assert last["counterexample"]


def test_cli_packages_are_declared():
    root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    with open(os.path.join(root, "requirements.txt")) as fh:
        declared = {line.split(">=")[0].strip() for line in fh if line.strip() and not line.startswith("#")}
    assert {"typer", "click", "rich"} <= declared
