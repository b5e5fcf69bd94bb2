"""Regenerate the synthetic fixture datasets under tests/fixtures/.

    python scripts/make_fixtures.py [--out tests/fixtures] [--n 200]
"""
import argparse
from pathlib import Path

from vulnlex.corpus import VulnClass, save_dataset
from vulnlex.synthetic import make_dataset


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="tests/fixtures")
    ap.add_argument("--n", type=int, default=200)
    ap.add_argument("--seed", type=int, default=2024)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i, vc in enumerate(VulnClass):
        path = out / f"{vc.value}.jsonl"
        save_dataset(make_dataset(vc, args.n, seed=args.seed + i), path)
        print(path)


if __name__ == "__main__":
    main()
