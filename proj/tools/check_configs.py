#!/usr/bin/env python3
"""Validate experiment configs against configs/schema.json."""
import json
import sys
from pathlib import Path

import jsonschema


def main(argv):
    root = Path(argv[1]) if len(argv) > 1 else Path(__file__).resolve().parent.parent / "configs"
    schema = json.loads((root / "schema.json").read_text())
    jsonschema.Draft202012Validator.check_schema(schema)
    validator = jsonschema.Draft202012Validator(schema)
    failed = 0
    for path in sorted(root.glob("*.json")):
        if path.name == "schema.json":
            continue
        errors = list(validator.iter_errors(json.loads(path.read_text())))
        for e in errors:
            print(f"{path.name}: {e.json_path}: {e.message}")
        failed += bool(errors)
        print(f"{path.name}: {'invalid' if errors else 'ok'}")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
