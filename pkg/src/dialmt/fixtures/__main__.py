import argparse
import sys

from . import FIXTURE_DIR, regenerate, verify_fixtures


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="python -m dialmt.fixtures")
    parser.add_argument("--dir", default=str(FIXTURE_DIR))
    parser.add_argument("--regenerate", action="store_true", help="rewrite expected outputs from the oracles")
    args = parser.parse_args(argv)
    if args.regenerate:
        for path in regenerate(args.dir):
            print(f"wrote {path}")
    failed = 0
    for r in verify_fixtures(args.dir):
        print(f"{'PASS' if r.ok else 'FAIL'} {r.name}")
        for line in r.diff:
            print(f"    {line}")
        failed += not r.ok
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
