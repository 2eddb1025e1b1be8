#!/usr/bin/env python3
# Copyright (c) 2026, FedCluster simulator contributors
# SPDX-License-Identifier: Apache-2.0
"""Validates every shipped config against configs/schema.json."""
import json
import pathlib
import sys

import jsonschema


def main(root: str) -> int:
    base = pathlib.Path(root)
    schema = json.loads((base / "schema.json").read_text())
    jsonschema.Draft202012Validator.check_schema(schema)
    validator = jsonschema.Draft202012Validator(schema)
    failures = 0
    configs = sorted(p for p in base.rglob("*.json") if p.name != "schema.json")
    for path in configs:
        errors = list(validator.iter_errors(json.loads(path.read_text())))
        for e in errors:
            print(f"{path}: {'/'.join(map(str, e.path))}: {e.message}")
        failures += bool(errors)
    # The schema must also reject what the parser rejects.
    if validator.is_valid({"engine": {"bogus": 1}}) or validator.is_valid({"clustering": {"M": 0}}):
        print("schema accepts an invalid config")
        failures += 1
    print(f"{len(configs)} configs checked, {failures} failing")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1]))
