import re
import argparse
from pathlib import Path

from expression_gan.cli import SUBCOMMANDS, build_parser

CLI_REFERENCE = Path(__file__).resolve().parent.parent / "docs" / "cli-reference.md"


def _read_status_rows() -> list[list[str]]:
    # Capture implemented rows like: | ✓ | `train` | `--manifest`, ... | ... |
    rows = []
    for line in CLI_REFERENCE.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line.startswith("|") and "✓" in line:
            rows.append([cell.strip() for cell in line.strip("|").split("|")])
    return rows


def _subparsers(parser: argparse.ArgumentParser) -> dict:
    action = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    return dict(action.choices)


def _documented_subcommands() -> dict[str, list[str]]:
    documented = {}
    for row in _read_status_rows():
        names = re.findall(r"`([a-z][a-z-]+)`", row[1])
        if names and not names[0].startswith("-"):
            documented[names[0]] = re.findall(r"`(--[a-z-]+)`", row[2])
    return documented


def test_documented_subcommands_exist_in_cli():
    documented = _documented_subcommands()
    assert sorted(documented) == sorted(SUBCOMMANDS)
    assert sorted(_subparsers(build_parser())) == sorted(SUBCOMMANDS)


def test_documented_options_exist_in_cli():
    subparsers = _subparsers(build_parser())
    missing = []
    for command, flags in _documented_subcommands().items():
        known = set(subparsers[command]._option_string_actions)
        missing += [f"{command} {flag}" for flag in flags if flag not in known]
    assert not missing, f"Documented options not found in CLI: {missing}"


def test_documented_global_flags_exist_in_cli():
    known = set(build_parser()._option_string_actions)
    flags = [re.findall(r"`(--[a-z-]+)`", row[1]) for row in _read_status_rows()]
    documented = {f for found in flags for f in found}
    assert documented
    assert documented <= known
