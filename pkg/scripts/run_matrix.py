"""Train and evaluate every model kind on every class dataset found in a
directory, then print the per-class table and macro averages.

    python scripts/run_matrix.py --data tests/fixtures --work runs/fixtures --quick
    python scripts/run_matrix.py --data data/ --work runs/full --compare

``--quick`` shrinks the embedding and the sequence model so the whole matrix
finishes in a few minutes on the fixtures. Without it the defaults are used
(300-dim vectors, 200 embedding passes, a 3x50 BiLSTM for 50 epochs), which
is only practical on a full dataset with time to spare.

``--compare`` lines up test-set accuracy against ``vulnlex.reference`` and
flags classes outside +/-3 percentage points. The comparison is informational.
"""
import argparse
import json
from pathlib import Path

from vulnlex import cli, reference
from vulnlex.evaluation import EvaluationReport, aggregate, render_text, to_percent
from vulnlex.pipeline import MODEL_KINDS

QUICK_EMBED = ["--vector_dim", "16", "--iterations", "5"]
QUICK_BILSTM = ["--hidden", "8", "--layers", "1", "--max_len", "60", "--epochs", "10"]


def call(*argv):
    code = cli.main([str(a) for a in argv])
    if code != 0:
        raise SystemExit(f"vulnlex {argv[0]} failed with exit code {code}")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--data", required=True, help="directory holding <class>.jsonl files")
    ap.add_argument("--work", required=True)
    ap.add_argument("--models", nargs="+", default=list(MODEL_KINDS), choices=MODEL_KINDS)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--quick", action="store_true")
    ap.add_argument("--compare", action="store_true")
    args = ap.parse_args()

    work = Path(args.work)
    work.mkdir(parents=True, exist_ok=True)
    reports: dict[str, list[EvaluationReport]] = {k: [] for k in args.models}
    for vc in reference.CLASSES:
        data = Path(args.data) / f"{vc}.jsonl"
        if not data.exists():
            print(f"no dataset for {vc}, skipping")
            continue
        emb = work / vc / "embedding.txt"
        emb.parent.mkdir(parents=True, exist_ok=True)
        if not emb.exists():
            call("embed", "--dataset", data, "--embedding", emb, "--seed", args.seed,
                 *(QUICK_EMBED if args.quick else []))
        for kind in args.models:
            out = work / vc / kind
            extra = QUICK_BILSTM if args.quick and kind == "bilstm" else []
            call("train", "--dataset", data, "--embedding", emb, "--model", kind, "--out", out,
                 "--seed", args.seed, *extra)
            call("evaluate", "--dataset", data, "--model", out / "model.json", "--out", out,
                 "--partition", "test", "--seed", args.seed)
            doc = json.loads((out / "report_test.json").read_text())
            reports[kind].append(EvaluationReport.from_dict(doc))

    print()
    for kind, reps in reports.items():
        if not reps:
            continue
        print(render_text(reps))
        avg = aggregate(reps)
        print(f"{kind} macro average: accuracy {to_percent(avg['accuracy'])}%  "
              f"f_score {to_percent(avg['f_score'])}%\n")

    if args.compare:
        print("test accuracy vs reference (percentage points)")
        for kind, reps in reports.items():
            for r in reps:
                ref = reference.ACCURACY_F[kind][r.vuln_class][0]
                gap = 100 * (r.accuracy - ref)
                flag = "within" if abs(gap) <= 3 else "outside"
                print(f"  {kind:7s} {r.vuln_class:22s} {100 * r.accuracy:6.2f} vs {100 * ref:5.1f}"
                      f"  {gap:+6.2f}  {flag} +/-3")


if __name__ == "__main__":
    main()
