"""Convert labeled code into the JSONL interchange format.

Two input layouts are accepted:

    python scripts/convert_dataset.py --class xss --csv rows.csv out.jsonl
        CSV with columns ``code`` and ``label`` (0/1), optionally ``id`` and ``origin``.

    python scripts/convert_dataset.py --class xss --dirs vulnerable/ clean/ out.jsonl
        every file under the first directory is labeled 1, under the second 0.
"""
import argparse
import csv
import sys
from pathlib import Path

from vulnlex.corpus import LabeledSample, VulnClass, load_dataset, save_dataset


def from_csv(path, vc):
    with open(path, encoding="utf-8", newline="") as fh:
        for i, row in enumerate(csv.DictReader(fh)):
            if row.get("code"):
                yield LabeledSample(row.get("id") or f"{vc.value}-{i:06d}", row["code"], int(row["label"]),
                                    vc, row.get("origin") or path)


def from_dirs(bad, good, vc):
    for label, root in ((1, Path(bad)), (0, Path(good))):
        for p in sorted(root.rglob("*")):
            if not p.is_file():
                continue
            try:
                code = p.read_text(encoding="utf-8")
            except (OSError, UnicodeDecodeError) as e:
                print(f"skip {p}: {e}", file=sys.stderr)
                continue
            if code.strip():
                yield LabeledSample(f"{label}:{p.relative_to(root).as_posix()}", code, label, vc, str(p))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--class", dest="vuln_class", required=True, choices=[v.value for v in VulnClass])
    src = ap.add_mutually_exclusive_group(required=True)
    src.add_argument("--csv")
    src.add_argument("--dirs", nargs=2, metavar=("VULNERABLE", "CLEAN"))
    ap.add_argument("out")
    args = ap.parse_args()
    vc = VulnClass(args.vuln_class)
    rows = from_csv(args.csv, vc) if args.csv else from_dirs(*args.dirs, vc)
    save_dataset(rows, args.out)
    samples = load_dataset(args.out)  # re-read to validate
    pos = sum(s.label for s in samples)
    print(f"{args.out}: {len(samples)} samples, {pos} vulnerable")


if __name__ == "__main__":
    main()
