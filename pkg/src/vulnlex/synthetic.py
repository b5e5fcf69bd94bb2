"""Synthetic data: labeled snippets for fixtures and smoke runs, plus the
small constructed tasks the test suites train on.

Each class has vulnerable and fixed statement templates embedded in shared
filler code, mimicking the before/after shape of security-fix commits. The
data is only meant to exercise the pipeline, not to stand in for a mined
dataset.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .corpus import LabeledSample, VulnClass
from .embedding import EmbeddingModel, Vocabulary, Word2vecConfig
from .lexer import Token, TokenKind, TokenStream
from .numerics import Rng

_NAMES = ["user", "name", "query", "item", "path", "target", "data", "value", "req", "token"]

_FILLER = [
    "{a} = {b}.strip()",
    "if not {a}:\n        return None",
    "logger.info('handling %s', {a})",
    "{a} = int({b}) + 1",
    "for x in {a}:\n        {b}.append(x)",
    "result = helper({a}, {b})",
    "{a} = {{'key': {b}}}",
    "# {a} comes from the caller",
]

_TEMPLATES: dict[VulnClass, tuple[list[str], list[str]]] = {
    VulnClass.SQL_INJECTION: (
        ["cursor.execute(\"SELECT * FROM t WHERE id = '%s'\" % {a})",
         "cursor.execute(\"DELETE FROM t WHERE name = \" + {a})",
         "db.execute(f\"UPDATE t SET v = {{{a}}}\")"],
        ["cursor.execute(\"SELECT * FROM t WHERE id = %s\", ({a},))",
         "cursor.execute(\"DELETE FROM t WHERE name = ?\", [{a}])",
         "db.execute(\"UPDATE t SET v = :v\", {{'v': {a}}})"],
    ),
    VulnClass.XSS: (
        ["return HttpResponse('<p>' + {a} + '</p>')",
         "return Markup('<b>%s</b>' % {a})",
         "html = '<div>{{}}</div>'.format({a})\n    return html"],
        ["return HttpResponse('<p>' + escape({a}) + '</p>')",
         "return render_template('page.html', value={a})",
         "html = '<div>{{}}</div>'.format(escape({a}))\n    return html"],
    ),
    VulnClass.COMMAND_INJECTION: (
        ["os.system('ls ' + {a})",
         "subprocess.call('grep ' + {a}, shell=True)",
         "os.popen('ping -c 1 %s' % {a})"],
        ["subprocess.run(['ls', {a}])",
         "subprocess.call(['grep', {a}], shell=False)",
         "subprocess.run(['ping', '-c', '1', shlex.quote({a})])"],
    ),
    VulnClass.XSRF: (
        ["@csrf_exempt\ndef view({a}):\n    return save({a})",
         "app.config['WTF_CSRF_ENABLED'] = False",
         "@csrf_exempt\ndef update({a}):\n    return change({a})"],
        ["@csrf_protect\ndef view({a}):\n    return save({a})",
         "app.config['WTF_CSRF_ENABLED'] = True",
         "@require_POST\ndef update({a}):\n    return change({a})"],
    ),
    VulnClass.REMOTE_CODE_EXECUTION: (
        ["return eval({a})",
         "exec({a})",
         "obj = pickle.loads({a})"],
        ["return ast.literal_eval({a})",
         "json.loads({a})",
         "obj = json.loads({a})"],
    ),
    VulnClass.PATH_DISCLOSURE: (
        ["return open('/srv/files/' + {a}).read()",
         "return send_file(os.path.join(base, {a}))",
         "return traceback.format_exc()"],
        ["return open(safe_join('/srv/files/', {a})).read()",
         "return send_from_directory(base, secure_filename({a}))",
         "return 'internal error'"],
    ),
    VulnClass.OPEN_REDIRECT: (
        ["return redirect(request.args.get('next'))",
         "return redirect({a})",
         "return HttpResponseRedirect({a})"],
        ["return redirect(url_for('index'))",
         "return redirect(url_for('home', q={a}))",
         "return HttpResponseRedirect(reverse('index'))"],
    ),
}


def snippet(vuln_class: VulnClass, vulnerable: bool, rng: Rng) -> str:
    bad, good = _TEMPLATES[vuln_class]
    pool = bad if vulnerable else good
    a, b = (_NAMES[i] for i in rng.integers(len(_NAMES), 2))
    body = []
    for i in rng.integers(len(_FILLER), int(rng.integers(3, 1)[0]) + 1):
        body.append(_FILLER[i].format(a=a, b=b))
    core = pool[int(rng.integers(len(pool), 1)[0])].format(a=a)
    body.insert(int(rng.integers(len(body) + 1, 1)[0]), core)
    if core.startswith("@") or core.startswith("app."):
        return core + "\n"
    fn = ["handle", "process", "view", "run", "serve"][int(rng.integers(5, 1)[0])]
    return f"def {fn}({a}, {b}):\n" + "".join(f"    {line}\n" for line in body)


def make_dataset(vuln_class: VulnClass | str, n: int, seed: int = 0,
                 positive_fraction: float = 0.5) -> list[LabeledSample]:
    vuln_class = VulnClass(vuln_class)
    rng = Rng(seed)
    n_pos = int(round(n * positive_fraction))
    labels = [1] * n_pos + [0] * (n - n_pos)
    labels = [labels[i] for i in rng.permutation(n)]
    return [LabeledSample(f"{vuln_class.value}-{i:05d}", snippet(vuln_class, bool(lab), rng), lab,
                          vuln_class, "synthetic")
            for i, lab in enumerate(labels)]


# --------------------------------------------------------------------------
# small constructed tasks used by the test and acceptance suites

def _ident_stream(words: Sequence[str]) -> TokenStream:
    return TokenStream([Token(TokenKind.IDENTIFIER, w) for w in words])


def designated_token_task(n: int = 60, vocab_size: int = 12, dim: int = 8, seed: int = 3,
                          min_len: int = 6, max_len: int = 12):
    """Separable sequence task: label 1 iff the stream contains ``tok0``.

    Returns ``(streams, labels, embedding)`` where the embedding holds one
    random Gaussian vector per token. Every other sample is positive.
    """
    rng = Rng(seed)
    words = [f"tok{i}" for i in range(vocab_size)]
    vectors = rng.normal((vocab_size, dim))
    emb = EmbeddingModel(Vocabulary(words, [1] * vocab_size), vectors, None,
                         Word2vecConfig(vector_dim=dim, min_count=1, seed=seed))
    streams, labels = [], []
    for s in range(n):
        length = min_len + int(rng.integers(max_len - min_len + 1, 1)[0])
        toks = 1 + rng.integers(vocab_size - 1, length)
        label = int(s % 2 == 0)
        if label:
            toks[int(rng.integers(length, 1)[0])] = 0
        streams.append(_ident_stream([words[t] for t in toks]))
        labels.append(label)
    return streams, np.array(labels, dtype=np.int64), emb


def two_clique_corpus(clique_size: int = 5, n_streams: int = 40, stream_len: int = 12,
                      seed: int = 7) -> tuple[list[TokenStream], list[str], list[str]]:
    """Streams drawn from one of two disjoint token sets, alternating.

    Tokens only ever co-occur with members of their own clique.
    """
    rng = Rng(seed)
    a = [f"a{i}" for i in range(clique_size)]
    b = [f"b{i}" for i in range(clique_size)]
    corpus = []
    for s in range(n_streams):
        group = a if s % 2 == 0 else b
        corpus.append(_ident_stream([group[i] for i in rng.integers(clique_size, stream_len)]))
    return corpus, a, b


def mean_cosines(model: EmbeddingModel, a: Sequence[str], b: Sequence[str]) -> tuple[float, float]:
    """Mean pairwise cosine similarity within the two groups and across them."""
    def unit(w):
        v = model.vector(w)
        return v / np.linalg.norm(v)

    intra = [unit(x) @ unit(y) for g in (a, b) for i, x in enumerate(g) for y in g[i + 1:]]
    inter = [unit(x) @ unit(y) for x in a for y in b]
    return float(np.mean(intra)), float(np.mean(inter))
