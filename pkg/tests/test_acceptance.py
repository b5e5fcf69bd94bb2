"""Acceptance criteria, one test each, with a PASS/FAIL line per criterion.

Run ``pytest tests/test_acceptance.py -v`` to see the summary lines; they are
written around pytest's capture so they show up in a plain run as well.
"""
import itertools
import time
from fractions import Fraction

import numpy as np
import pytest

from vulnlex import bilstm, cli, reference
from vulnlex.artifacts import load_model, save_model
from vulnlex.baselines import best_split, gnb_fit, gnb_predict, logreg_fit, logreg_objective
from vulnlex.corpus import SplitSpec, load_dataset, split
from vulnlex.embedding import Word2vecConfig, load_embedding, train
from vulnlex.evaluation import ConfusionCounts, aggregate, confusion, metrics, roc, to_percent
from vulnlex.lexer import tokenize
from vulnlex.numerics import Rng
from vulnlex.pipeline import ModelParams, score_samples, score_streams, train_model
from vulnlex.synthetic import designated_token_task, mean_cosines, two_clique_corpus

from conftest import FIXTURES
from helpers import bilstm_gradient_error, tiny_bilstm_case
from test_baselines import brute_split
from test_evaluation import pair_count_auc


@pytest.fixture
def verdict(capsys):
    def emit(number, name, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {number}] {'PASS' if ok else 'FAIL'} {name}: {detail}")
        assert ok, detail
    return emit


def test_criterion_1_bilstm_gradients(verdict):
    start = time.perf_counter()
    worst = max(bilstm_gradient_error(*tiny_bilstm_case(seed)) for seed in range(20))
    elapsed = time.perf_counter() - start
    verdict(1, "BPTT gradient check", worst < 1e-5 and elapsed < 60,
            f"max rel error {worst:.2e} over 20 configs in {elapsed:.1f}s")


def _hand_metrics(c):
    tp, fp, tn, fn = (Fraction(v) for v in (c.tp, c.fp, c.tn, c.fn))
    p = tp / (tp + fp) if tp + fp else Fraction(0)
    r = tp / (tp + fn) if tp + fn else Fraction(0)
    f = 2 * p * r / (p + r) if p + r else Fraction(0)
    return (tp + tn) / (tp + fp + tn + fn), p, r, f


def test_criterion_2_metric_oracles(verdict):
    rng = Rng(2024)
    worst, exact = 0.0, True
    for case in range(100):
        n = 2 + int(rng.integers(199, 1)[0])
        y = (rng.random(n) < 0.3 + 0.4 * rng.random(1)[0]).astype(np.int64)
        y[0], y[1] = 0, 1
        s = rng.random(n)
        if case % 2:
            s = np.round(s, 1)  # plenty of ties
        worst = max(worst, abs(roc(s, y).auc - pair_count_auc(s.tolist(), y.tolist())))
        for t in (0.25, 0.5, 0.75):
            c = confusion(s, y, t)
            pred = [int(v >= t) for v in s]
            hand = ConfusionCounts(
                tp=sum(p & q for p, q in zip(pred, y)), fp=sum(p & (1 - q) for p, q in zip(pred, y)),
                tn=sum((1 - p) & (1 - q) for p, q in zip(pred, y)),
                fn=sum((1 - p) & q for p, q in zip(pred, y)))
            m = metrics(c)
            exact &= c == hand and (m.accuracy, m.precision, m.recall, m.f_score) == tuple(
                float(v) for v in _hand_metrics(hand))
    verdict(2, "metric oracles", worst <= 1e-12 and exact,
            f"max AUC gap {worst:.1e} over 100 sets, confusion arithmetic exact={exact}")


def test_criterion_3_reference_aggregation(verdict):
    avg = aggregate(reference.bilstm_reports())
    acc, f = to_percent(avg["accuracy"]), to_percent(avg["f_score"])
    verdict(3, "aggregation of reference per-class values", (acc, f) == ("98.6", "94.7"),
            f"average accuracy {acc}%, average F-score {f}%")


def test_criterion_4_baseline_oracles(verdict):
    import math

    # GNB against a closed-form posterior
    X = [[1.0, 2.0], [2.0, 1.0], [3.0, 3.0], [5.0, 4.0], [6.0, 6.0], [4.5, 5.5]]
    y = [0, 0, 0, 1, 1, 1]
    eps = 1e-9 * max(np.var([r[j] for r in X]) for j in range(2))

    def density(rows, q):
        out = 1.0
        for j in range(2):
            col = [r[j] for r in rows]
            mu = sum(col) / len(col)
            var = sum((c - mu) ** 2 for c in col) / len(col) + eps
            out *= math.exp(-(q[j] - mu) ** 2 / (2 * var)) / math.sqrt(2 * math.pi * var)
        return out

    model = gnb_fit(X, y)
    gnb_gap = 0.0
    for q in [(4.0, 3.5), (2.0, 2.0), (5.0, 5.0), (3.5, 4.5)]:
        p0, p1 = 0.5 * density(X[:3], q), 0.5 * density(X[3:], q)
        gnb_gap = max(gnb_gap, abs(gnb_predict(model, list(q)) - p1 / (p0 + p1)))

    # depth-1 tree split against exhaustive search
    rng = Rng(4)
    splits_ok = True
    for _ in range(25):
        Xs = np.round(rng.normal((12, 3)), 1)
        ys = (rng.random(12) < 0.5).astype(np.int64)
        ys[:2] = [0, 1]
        got, want = best_split(Xs, ys), brute_split(Xs, ys)
        splits_ok &= got[:2] == want[:2] and abs(got[2] - want[2]) < 1e-12

    # logistic regression against a grid search on 2-D toys
    logreg_gap = -np.inf
    grid = np.linspace(-3, 3, 61)
    for seed in range(3):
        r = Rng(seed)
        Xl = r.normal((10, 2))
        yl = (Xl[:, 0] + 0.8 * r.normal(10) > 0).astype(np.int64)
        yl[:2] = [0, 1]
        m = logreg_fit(Xl, yl)
        best = min(logreg_objective(np.array(p[:2]), p[2], Xl, yl)
                   for p in itertools.product(grid, grid, grid))
        logreg_gap = max(logreg_gap, logreg_objective(m.weights, m.bias, Xl, yl) - best)

    ok = gnb_gap < 1e-9 and splits_ok and logreg_gap <= 1e-4
    verdict(4, "baseline oracles", ok,
            f"GNB gap {gnb_gap:.1e}, tree splits match={splits_ok}, logistic excess {logreg_gap:.1e}")


def test_criterion_5_word2vec_cliques(verdict):
    start = time.perf_counter()
    corpus, a, b = two_clique_corpus()
    model = train(corpus, Word2vecConfig(vector_dim=16, min_count=10, iterations=200))
    intra, inter = mean_cosines(model, a, b)
    elapsed = time.perf_counter() - start
    verdict(5, "two-clique embedding separation", intra - inter >= 0.2 and elapsed < 120,
            f"intra {intra:.3f}, inter {inter:.3f}, gap {intra - inter:.3f} in {elapsed:.1f}s")


def test_criterion_6_bilstm_learnability(verdict):
    start = time.perf_counter()
    streams, y, emb = designated_token_task(n=60)
    X, lengths = bilstm.embed_batch(streams, emb, 12)
    net = bilstm.init_network(emb.dim, 50, 3, dropout_rate=0.2, seed=0)
    _, history = bilstm.fit(net, (X, lengths, y), config=bilstm.TrainConfig(epochs=200),
                            track_train_accuracy=True)
    elapsed = time.perf_counter() - start
    reached = next((e["epoch"] for e in history if e["train_accuracy"] >= 0.99), None)
    best = max(e["train_accuracy"] for e in history)
    verdict(6, "designated-token learnability", reached is not None and elapsed < 300,
            f"first epoch at >= 99% train accuracy: {reached} (best {best:.3f}) in {elapsed:.1f}s")


def _cli_run(root):
    emb = root / "emb.txt"
    data = FIXTURES / "command_injection.jsonl"
    assert cli.main(["embed", "--dataset", str(data), "--embedding", str(emb),
                     "--vector_dim", "8", "--iterations", "3"]) == 0
    for kind in ("gnb", "tree", "logreg", "mlp", "bilstm"):
        out = root / kind
        extra = ["--hidden", "4", "--layers", "1", "--max_len", "40", "--epochs", "3"] if kind == "bilstm" else []
        assert cli.main(["train", "--dataset", str(data), "--embedding", str(emb), "--model", kind,
                         "--out", str(out), *extra]) == 0
        assert cli.main(["evaluate", "--dataset", str(data), "--model", str(out / "model.json"),
                         "--out", str(out)]) == 0
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_criterion_7_determinism_and_round_trips(verdict, tmp_path, capsys):
    runs = []
    for name in ("a", "b"):
        (tmp_path / name).mkdir()
        runs.append(_cli_run(tmp_path / name))
    capsys.readouterr()
    identical = runs[0] == runs[1] and len(runs[0]) > 10

    emb = load_embedding(tmp_path / "a" / "emb.txt")
    rows = split(load_dataset(FIXTURES / "command_injection.jsonl"), SplitSpec()).test
    probe = [tokenize(FIXTURES.joinpath("probe.py").read_text(), "probe")] + [tokenize(s.code) for s in rows]
    params = ModelParams(bilstm_hidden=4, bilstm_layers=1, bilstm_max_len=40,
                         bilstm=bilstm.TrainConfig(epochs=2))
    round_trip = True
    for kind in ("gnb", "tree", "logreg", "mlp", "bilstm"):
        model, _ = train_model(kind, rows, emb, "command_injection", params)
        path = tmp_path / f"{kind}.json"
        save_model(model, path)
        loaded, _ = load_model(path)
        round_trip &= np.array_equal(score_streams(model, probe, emb, 40),
                                     score_streams(loaded, probe, emb, 40))
        round_trip &= np.array_equal(score_samples(model, rows, emb, 40), score_samples(loaded, rows, emb, 40))
    verdict(7, "determinism and round trips", identical and round_trip,
            f"{len(runs[0])} artifacts byte-identical={identical}, save/load/predict bit-identical={round_trip}")


def test_criterion_8_full_scale_is_informational(verdict):
    # gating would need a full labeled dataset; only the reference table is checked for shape
    sql = reference.ACCURACY_F["bilstm"]["sql_injection"][0]
    verdict(8, "full-scale comparison (informational, see scripts/run_matrix.py --compare)",
            abs(sql - 0.982) < 1e-12 and set(reference.ACCURACY_F) == {"gnb", "tree", "logreg", "mlp", "bilstm"},
            "reference table loaded; tolerance for a full run is +/-3 percentage points")
