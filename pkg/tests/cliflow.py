"""Shared helpers that drive the command-line interface in-process."""

import json
from pathlib import Path

from gazecomp.cli import main

PIPELINE = ("generate", "train", "score", "eval", "report")


def run(out, command, *extra, preset="tiny", capsys=None):
    rc = main([command, "--preset", preset, "--out", str(out), *extra])
    return rc


def run_pipeline(out, *extra, preset="tiny"):
    for cmd in PIPELINE:
        rc = main([cmd, "--preset", preset, "--out", str(out), *extra])
        if rc != 0:
            raise AssertionError(f"{cmd} exited with {rc}")
    return Path(out)


def tree_bytes(root):
    root = Path(root)
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def last_json(text):
    return json.loads(text.strip().splitlines()[-1])
