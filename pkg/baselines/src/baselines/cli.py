"""Baselines CLI.

`baselines run --data train.csv --split test.csv --spec spec.json --out ...`

--spec may hold one spec object or a list.  With a list, --out is a
directory and each model writes report_<k>_<family>.json; a model whose
library is unavailable is reported on stderr and the run continues, failing
only if every model failed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .reporting import canonical_json
from .runner import BaselineSpec, HarnessError, LibraryUnavailable, run_baseline


def _load_specs(path) -> list[BaselineSpec]:
    with open(path) as fh:
        raw = json.load(fh)
    if isinstance(raw, dict):
        return [BaselineSpec.from_dict(raw)]
    return [BaselineSpec.from_dict(d) for d in raw]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="baselines",
                                     description="Library-model comparison "
                                                 "harness")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="train library model(s), emit run reports")
    p.add_argument("--data", required=True, help="preprocessed training CSV")
    p.add_argument("--split", required=True, help="preprocessed held-out CSV")
    p.add_argument("--spec", required=True, help="BaselineSpec JSON file "
                                                 "(object or list)")
    p.add_argument("--out", required=True,
                   help="report path (single spec) or directory (list)")
    p.add_argument("--target", default="class", help="target column name")
    args = parser.parse_args(argv)

    try:
        specs = _load_specs(args.spec)
    except (OSError, json.JSONDecodeError, HarnessError) as exc:
        print(f"baselines: error: {exc}", file=sys.stderr)
        return 2

    single = len(specs) == 1 and not os.path.isdir(args.out) \
        and not args.out.endswith(os.sep)
    if not single:
        os.makedirs(args.out, exist_ok=True)

    succeeded = 0
    for k, spec in enumerate(specs):
        try:
            report = run_baseline(args.data, args.split, spec,
                                  target_column=args.target)
        except LibraryUnavailable as exc:
            print(f"baselines: {spec.family}: {exc}", file=sys.stderr)
            continue
        except (HarnessError, OSError) as exc:
            print(f"baselines: error: {spec.family}: {exc}", file=sys.stderr)
            continue
        out_path = args.out if single else os.path.join(
            args.out, f"report_{k}_{spec.family}.json")
        with open(out_path, "w") as fh:
            fh.write(canonical_json(report))
        print(f"{report['model']}: macro F1 = "
              f"{report['metrics']['macro_f1']:.5f} -> {out_path}")
        succeeded += 1

    return 0 if succeeded else 2


if __name__ == "__main__":
    sys.exit(main())
