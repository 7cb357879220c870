"""Tests for the command-line surface."""

import argparse
import json

import pytest

from src.cli import build_parser, main, parse_cell, parse_eps, parse_levels, parse_number


class TestParsers:
    """Test argument converters."""

    def test_numbers(self):
        assert parse_number("2^-6") == pytest.approx(1 / 64)
        assert parse_number("0.5") == 0.5
        with pytest.raises(argparse.ArgumentTypeError):
            parse_number("half")

    def test_eps_list(self):
        assert parse_eps("1,2^-2") == [1.0, 0.25]
        with pytest.raises(argparse.ArgumentTypeError):
            parse_eps("1,-1")

    def test_levels(self):
        assert parse_levels("2..4") == [2, 3, 4]
        assert parse_levels("2,5") == [2, 5]
        with pytest.raises(argparse.ArgumentTypeError):
            parse_levels("two")

    def test_cell(self):
        assert parse_cell("2,3") == (2, 3)
        with pytest.raises(argparse.ArgumentTypeError):
            parse_cell("2")

    def test_inspect_needs_one_dump(self):
        args = build_parser().parse_args(["inspect", "--dump-basis", "1,1"])
        assert args.dump_basis == (1, 1)
        assert not args.dump_mesh


class TestMain:
    """Test exit codes and output of main."""

    def test_usage_errors(self):
        assert main([]) == 1
        assert main(["verify", "--suite", "nope"]) == 1
        assert main(["inspect"]) == 1

    def test_help(self, capsys):
        assert main(["--help"]) == 0
        assert "convergence" in capsys.readouterr().out

    def test_convergence(self, capsys, fresh_cache):
        code = main(["convergence", "--example", "1", "--eps", "1", "--levels", "2..3"])
        out = capsys.readouterr().out
        assert code == 0
        assert out.startswith("eps,h,rel_energy,rel_h1,rel_h2,rel_l2\n")
        assert "# rate eps=" in out

    def test_numerical_failure(self, capsys, fresh_cache):
        assert main(["convergence", "--example", "1", "--eps", "1", "--levels", "1"]) == 2
        assert "error:" in capsys.readouterr().err

    def test_inspect_mesh(self, capsys):
        assert main(["inspect", "--dump-mesh", "--level", "1"]) == 0
        out = capsys.readouterr().out.splitlines()
        assert out[0] == "kind square"
        assert out[-2:] == ["11", "11"]

    def test_inspect_bad_center(self):
        assert main(["inspect", "--dump-basis", "0,0"]) == 1

    def test_projection_json(self, capsys):
        assert main(["projection", "--family", "cr", "--selection", "s1"]) == 0
        result = json.loads(capsys.readouterr().out)
        assert result["representable"] == 0
        assert result["functions"] == 56

    def test_projection_bad_pair(self):
        assert main(["projection", "--family", "cr", "--selection", "patch"]) == 1
