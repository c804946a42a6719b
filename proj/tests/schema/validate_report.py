"""Validate sample evaluation reports against the JSON schema.

usage: validate_report.py SCHEMA TEST_EVAL_BINARY
"""
import json
import os
import subprocess
import sys
import tempfile

import jsonschema


def main() -> int:
    schema_path, test_binary = sys.argv[1], sys.argv[2]
    with open(schema_path) as f:
        schema = json.load(f)
    jsonschema.Draft202012Validator.check_schema(schema)
    validator = jsonschema.Draft202012Validator(schema)

    with tempfile.TemporaryDirectory() as tmp:
        env = dict(os.environ, IHPE_REPORT_DIR=tmp)
        subprocess.run([test_binary, "--gtest_filter=ReportJson.SchemaSamples"], env=env, check=True,
                       stdout=subprocess.DEVNULL)
        reports = sorted(p for p in os.listdir(tmp) if p.endswith(".json"))
        if not reports:
            print("no reports written", file=sys.stderr)
            return 1
        failed = 0
        for name in reports:
            with open(os.path.join(tmp, name)) as f:
                report = json.load(f)
            errors = list(validator.iter_errors(report))
            for e in errors:
                print(f"{name}: {'/'.join(map(str, e.path))}: {e.message}", file=sys.stderr)
            failed += bool(errors)
            print(f"{name}: {'invalid' if errors else 'ok'}")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
