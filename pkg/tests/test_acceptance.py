"""Release gate: ten numbered criteria, one test each.

Each test prints a live "[criterion NN] PASS/FAIL" line with the measured
numbers.  Criteria 5, 6, 8, and 10 share six full benchmark trainings
(three seeds, both template strategies) through a session fixture, so this
file costs roughly an hour of CPU; everything else in the suite is fast.
"""

import itertools
import json
import math
import time

import numpy as np
import pytest

from lmmtc import autodiff as ad
from lmmtc.analysis import attention_label_matrix, attention_summary, correlation_matrix
from lmmtc.autodiff import Tensor
from lmmtc.cli import main as cli_main
from lmmtc.data import GenSpec, benchmark_spec, generate_synthetic
from lmmtc.inference import predict_proba_batch, threshold_proba
from lmmtc.metrics import accuracy, full_report, hamming_loss, micro_f1, micro_jaccard
from lmmtc.model import (
    ModelConfig,
    forward,
    init_params,
    label_logits,
    mlm_logits,
    param_manifest,
    stack_batch,
)
from lmmtc.rng import Prng
from lmmtc.template import (
    STATE_MASK,
    STATE_NO,
    STATE_YES,
    encode_for_inference,
    encode_for_training,
    render_template,
)
from lmmtc.trainer import TrainConfig, bce_loss, joint_loss, mlm_ce_loss, pretrain_mlm, train
from lmmtc.vocab import DIFF, SAME, build_base_vocab, extend_with_label_tokens, tokenize

SEEDS = (42, 43, 44)  # fixed and recorded; the stochastic criteria use all three
BENCH_CPU_BUDGET = 600.0  # seconds


@pytest.fixture
def verdict(capsys):
    def emit(num: int, ok: bool, detail: str):
        line = f"[criterion {num:02d}] {'PASS' if ok else 'FAIL'}  {detail}"
        with capsys.disabled():
            print(line, flush=True)
        assert ok, line

    return emit


# ---------------------------------------------------------------------------
# shared small task (criteria 2, 3, 10)
# ---------------------------------------------------------------------------


def small_task(seed: int = 11):
    spec = GenSpec(n_labels=4, co_groups=[[0, 1]], topic_words_per_label=3,
                   noise_vocab_size=20, doc_len_range=(8, 14),
                   n_train=64, n_test=1, seed=seed)
    train_ex, _, labels = generate_synthetic(spec)
    vocab = extend_with_label_tokens(
        build_base_vocab(ex.text for ex in train_ex), labels, DIFF)
    model_cfg = ModelConfig(vocab_size=vocab.size, n_labels=labels.size,
                            strategy=DIFF, d_model=32, n_heads=4, n_layers=2,
                            d_ffn=64, max_len=32, dropout=0.1)
    return train_ex, labels, vocab, model_cfg


def small_train_cfg(**overrides) -> TrainConfig:
    base = dict(learning_rate=3e-3, batch_size=16, epochs=2, seed=3,
                strategy=DIFF, log_every_batches=1)
    base.update(overrides)
    return TrainConfig(**base)


# ---------------------------------------------------------------------------
# benchmark fixture (criteria 5, 6, 8, 10)
# ---------------------------------------------------------------------------


@pytest.fixture(scope="session")
def bench_datasets():
    return {seed: generate_synthetic(benchmark_spec(seed)) for seed in SEEDS}


@pytest.fixture(scope="session")
def bench_runs(bench_datasets):
    """Six full trainings at the pinned benchmark config."""
    runs = {}
    for seed in SEEDS:
        train_ex, test_ex, labels = bench_datasets[seed]
        texts = [ex.text for ex in test_ex]
        gold = [ex.labels for ex in test_ex]
        for strategy in (DIFF, SAME):
            t0 = time.process_time()
            vocab = extend_with_label_tokens(
                build_base_vocab(ex.text for ex in train_ex), labels, strategy)
            model_cfg = ModelConfig(vocab_size=vocab.size,
                                    n_labels=labels.size, strategy=strategy)
            result = train(train_ex, labels, vocab, model_cfg,
                           TrainConfig(seed=seed, strategy=strategy))
            proba = predict_proba_batch(result.params, model_cfg, vocab,
                                        labels, texts, 32)
            report = full_report(gold, threshold_proba(proba))
            runs[strategy, seed] = {
                "params": result.params,
                "history": result.history,
                "report": report,
                "vocab": vocab,
                "model_cfg": model_cfg,
                "labels": labels,
                "test_texts": texts,
                "cpu_secs": time.process_time() - t0,
            }
    return runs


# ---------------------------------------------------------------------------
# criterion 1: metrics against brute-force reimplementations
# ---------------------------------------------------------------------------


def brute_counts(yt, yp):
    tp = fp = fn = tn = 0
    for rt, rp in zip(yt, yp):
        for t, p in zip(rt, rp):
            if t == 1 and p == 1:
                tp += 1
            elif t == 0 and p == 1:
                fp += 1
            elif t == 1 and p == 0:
                fn += 1
            else:
                tn += 1
    return tp, fp, fn, tn


def brute_accuracy(yt, yp):
    return sum(1 for rt, rp in zip(yt, yp) if list(rt) == list(rp)) / len(yt)


def brute_micro_f1(yt, yp):
    tp, fp, fn, _ = brute_counts(yt, yp)
    return 1.0 if 2 * tp + fp + fn == 0 else 2 * tp / (2 * tp + fp + fn)


def brute_micro_jaccard(yt, yp):
    tp, fp, fn, _ = brute_counts(yt, yp)
    return 1.0 if tp + fp + fn == 0 else tp / (tp + fp + fn)


def brute_hamming(yt, yp):
    tp, fp, fn, tn = brute_counts(yt, yp)
    return (fp + fn) / (tp + fp + fn + tn)


def test_criterion_01_metrics_match_brute_force(verdict):
    rng = np.random.default_rng(0)
    t0 = time.perf_counter()
    mismatches = 0
    for _ in range(200):
        rows = int(rng.integers(1, 9))
        cols = int(rng.integers(1, 7))
        density = rng.uniform(0.0, 1.0)
        yt = (rng.random((rows, cols)) < density).astype(int).tolist()
        yp = (rng.random((rows, cols)) < density).astype(int).tolist()
        mismatches += accuracy(yt, yp) != brute_accuracy(yt, yp)
        mismatches += micro_f1(yt, yp) != brute_micro_f1(yt, yp)
        mismatches += micro_jaccard(yt, yp) != brute_micro_jaccard(yt, yp)
        mismatches += hamming_loss(yt, yp) != brute_hamming(yt, yp)
    yt = [[1, 0], [0, 1]]
    yp = [[1, 1], [0, 1]]
    hand = (accuracy(yt, yp), micro_f1(yt, yp), micro_jaccard(yt, yp),
            hamming_loss(yt, yp))
    hand_ok = hand == (0.5, 0.8, 2 / 3, 0.25)
    elapsed = time.perf_counter() - t0
    verdict(1, mismatches == 0 and hand_ok and elapsed < 1.0,
            f"200 random pairs, {mismatches} metric mismatches, "
            f"hand example {hand}, {elapsed:.3f}s")


# ---------------------------------------------------------------------------
# criterion 2: finite-difference gradient suite
# ---------------------------------------------------------------------------


def fd_grad(value_fn, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    g = np.zeros_like(x)
    flat, gf = x.reshape(-1), g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = value_fn()
        flat[i] = orig - h
        fm = value_fn()
        flat[i] = orig
        gf[i] = (fp - fm) / (2.0 * h)
    return g


def rel_err(got: np.ndarray, want: np.ndarray) -> float:
    return float(np.max(np.abs(got - want) / (np.abs(want) + 1e-8)))


def kernel_cases(rng):
    """One scalarized loss per differentiable kernel."""

    def t(*shape, grad=True):
        return Tensor(rng.normal(size=shape), requires_grad=grad)

    w46 = Tensor(rng.normal(size=(4, 6)))
    cases = []

    a, b = t(4, 6), t(4, 6)
    cases.append(("add", lambda: ad.sum_all(ad.mul(ad.add(a, b), w46)), [a, b]))
    c, d = t(4, 6), t(4, 6)
    cases.append(("mul", lambda: ad.sum_all(ad.mul(ad.mul(c, d), w46)), [c, d]))
    e = t(4, 6)
    cases.append(("add_const", lambda: ad.sum_all(ad.mul(ad.add_const(e, 1.7), w46)), [e]))
    f = t(4, 6)
    cases.append(("mul_const", lambda: ad.sum_all(ad.mul(ad.mul_const(f, -2.3), w46)), [f]))
    g = t(4, 6)
    w212 = Tensor(rng.normal(size=(2, 12)))
    cases.append(("reshape", lambda: ad.sum_all(ad.mul(ad.reshape(g, (2, 12)), w212)), [g]))
    h = t(2, 3, 4)
    w423 = Tensor(rng.normal(size=(4, 2, 3)))
    cases.append(("transpose", lambda: ad.sum_all(ad.mul(ad.transpose(h, (2, 0, 1)), w423)), [h]))
    m1, m2 = t(4, 5), t(5, 6)
    cases.append(("matmul", lambda: ad.sum_all(ad.mul(ad.matmul(m1, m2), w46)), [m1, m2]))
    b1, b2 = t(2, 3, 4), t(2, 4, 5)
    w235 = Tensor(rng.normal(size=(2, 3, 5)))
    cases.append(("matmul_batched", lambda: ad.sum_all(ad.mul(ad.matmul(b1, b2), w235)), [b1, b2]))
    table = t(7, 5)
    ids = np.array([0, 3, 3, 6, 1, 2])
    w65 = Tensor(rng.normal(size=(6, 5)))
    cases.append(("gather_rows", lambda: ad.sum_all(ad.mul(ad.gather_rows(table, ids), w65)), [table]))
    x = t(2, 7, 3)
    bi = np.array([0, 1, 1, 0, 1])
    pi = np.array([2, 0, 5, 6, 3])
    w53 = Tensor(rng.normal(size=(5, 3)))
    cases.append(("take_positions", lambda: ad.sum_all(ad.mul(ad.take_positions(x, bi, pi), w53)), [x]))
    s1 = t(5, 5)
    cases.append(("sum_all", lambda: ad.sum_all(s1), [s1]))
    s2 = t(4, 6)
    w4 = Tensor(rng.normal(size=(4,)))
    cases.append(("sum_last", lambda: ad.sum_all(ad.mul(ad.sum_last(s2), w4)), [s2]))
    s3 = t(4, 6)
    cases.append(("mean_all", lambda: ad.mean_all(s3), [s3]))
    p1 = t(4, 6)
    cases.append(("sigmoid", lambda: ad.sum_all(ad.mul(ad.sigmoid(p1), w46)), [p1]))
    p2 = t(4, 6)
    cases.append(("gelu", lambda: ad.sum_all(ad.mul(ad.gelu(p2), w46)), [p2]))
    p3 = t(4, 6)
    cases.append(("softmax_rows", lambda: ad.sum_all(ad.mul(ad.softmax_rows(p3), w46)), [p3]))
    ln_x, ln_g, ln_b = t(4, 6), t(6), t(6)
    cases.append(("layer_norm",
                  lambda: ad.sum_all(ad.mul(ad.layer_norm(ln_x, ln_g, ln_b), w46)),
                  [ln_x, ln_g, ln_b]))
    bl = t(5, 4)
    bt = (rng.random((5, 4)) < 0.5).astype(float)
    cases.append(("bce_with_logits", lambda: ad.bce_with_logits(bl, bt), [bl]))
    cl = t(6, 5)
    ct = rng.integers(0, 5, size=6)
    cases.append(("softmax_cross_entropy", lambda: ad.softmax_cross_entropy(cl, ct), [cl]))
    return cases


def test_criterion_02_gradients_match_finite_differences(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    worst = 0.0
    coords = 0
    kernels = 0
    for name, build, params in kernel_cases(rng):
        loss = build()
        ad.backward(loss)
        for p in params:
            fd = fd_grad(lambda: _value(build), p.data)
            worst = max(worst, rel_err(p.grad, fd))
            coords += p.size
        kernels += 1

    # end-to-end joint loss, dropout off, fixed label masking
    train_ex, labels, vocab, _ = small_task()
    model_cfg = ModelConfig(vocab_size=vocab.size, n_labels=labels.size,
                            strategy=DIFF, d_model=16, n_heads=2, n_layers=2,
                            d_ffn=32, max_len=32, dropout=0.0)
    mask_rng = Prng.for_purpose(9, "label-mask")
    encs = [encode_for_training(tokenize(ex.text), list(ex.labels), vocab,
                                model_cfg.max_len, 0.6, mask_rng)
            for ex in train_ex[:4]]
    ids, attn = stack_batch(encs, model_cfg.max_len, trim=True)
    golds = [list(ex.labels) for ex in train_ex[:4]]
    b_idx, p_idx, targets = [], [], []
    for bi, enc in enumerate(encs):
        for pos, tgt in zip(enc.masked_positions, enc.mlm_targets):
            b_idx.append(bi)
            p_idx.append(pos)
            targets.append(tgt)
    assert len(targets) >= 1
    b_idx, p_idx, targets = map(np.asarray, (b_idx, p_idx, targets))
    params = init_params(model_cfg, Prng.for_purpose(9, "init"))

    def build_joint():
        out = forward(params, model_cfg, ids, attn, train_mode=True)
        l_mtc = bce_loss(label_logits(out, params, encs[0].label_state_positions), golds)
        l_mlm = mlm_ce_loss(mlm_logits(out, params, b_idx, p_idx), targets)
        return joint_loss(l_mtc, l_mlm, 0.05)

    ad.backward(build_joint())
    names = [name for name, _ in param_manifest(model_cfg)]
    crng = np.random.default_rng(2)
    e2e_worst = 0.0
    for _ in range(24):
        name = names[int(crng.integers(len(names)))]
        p = params[name]
        k = int(crng.integers(p.size))
        orig = p.data.reshape(-1)[k]
        h = 1e-5
        p.data.reshape(-1)[k] = orig + h
        fp = _value(build_joint)
        p.data.reshape(-1)[k] = orig - h
        fm = _value(build_joint)
        p.data.reshape(-1)[k] = orig
        fd = (fp - fm) / (2.0 * h)
        an = p.grad.reshape(-1)[k]
        e2e_worst = max(e2e_worst, abs(an - fd) / (abs(fd) + 1e-8))
        coords += 1
    elapsed = time.perf_counter() - t0
    worst = max(worst, e2e_worst)
    verdict(2, worst <= 1e-4 and elapsed < 30.0,
            f"{kernels} kernels + joint loss, {coords} coordinates, "
            f"worst rel err {worst:.2e}, {elapsed:.1f}s")


def _value(build) -> float:
    with ad.no_grad():
        return build().item()


# ---------------------------------------------------------------------------
# criterion 3: joint-loss identity on logged history
# ---------------------------------------------------------------------------


def test_criterion_03_joint_loss_identity(verdict):
    train_ex, labels, vocab, model_cfg = small_task()
    lam = 0.05
    res = train(train_ex, labels, vocab, model_cfg,
                small_train_cfg(lambda_mlm=lam))
    rows = res.history.losses
    exact = all(r.l_joint == r.l_mtc + lam * r.l_mlm for r in rows)

    res0 = train(train_ex, labels, vocab, model_cfg,
                 small_train_cfg(lambda_mlm=0.0))
    rows0 = res0.history.losses
    bitwise = all(r.l_joint == r.l_mtc for r in rows0)
    verdict(3, exact and len(rows) > 0 and bitwise and len(rows0) > 0,
            f"identity exact on {len(rows)} steps, "
            f"lambda=0 bitwise on {len(rows0)} steps")


# ---------------------------------------------------------------------------
# criterion 4: template golden strings
# ---------------------------------------------------------------------------


def test_criterion_04_template_golden_strings(verdict):
    states = [STATE_YES, STATE_NO, STATE_MASK]
    diff = "".join(render_template(states, DIFF))
    same = "".join(render_template(states, SAME))
    want_diff = "[LS-1][YES-1][LE-1][LS-2][NO-2][LE-2][LS-3][MASK-3][LE-3]"
    want_same = "[LS][YES][LE][LS][NO][LE][LS][MASK][LE]"
    verdict(4, diff == want_diff and same == want_same,
            f"diff={diff} same={same}")


# ---------------------------------------------------------------------------
# criterion 5: benchmark reaches the pinned targets
# ---------------------------------------------------------------------------


def test_criterion_05_benchmark_reaches_targets(verdict, bench_runs):
    run = bench_runs[DIFF, 42]
    rep = run["report"]
    ok = (rep.micro_f1 >= 0.90 and rep.hamming_loss <= 0.05
          and run["cpu_secs"] <= BENCH_CPU_BUDGET)
    verdict(5, ok,
            f"diff seed 42: micro_f1={rep.micro_f1:.4f} (>=0.90), "
            f"hamming={rep.hamming_loss:.4f} (<=0.05), "
            f"cpu={run['cpu_secs']:.0f}s (<= {BENCH_CPU_BUDGET:.0f}s)")


# ---------------------------------------------------------------------------
# criterion 6: diff beats same by >= 2 F1 points in >= 2 of 3 seeds
# ---------------------------------------------------------------------------


def test_criterion_06_diff_beats_same(verdict, bench_runs):
    deltas = {}
    for seed in SEEDS:
        d = bench_runs[DIFF, seed]["report"].micro_f1
        s = bench_runs[SAME, seed]["report"].micro_f1
        deltas[seed] = d - s
    wins = sum(1 for v in deltas.values() if v >= 0.02)
    shown = ", ".join(f"seed {s}: {v:+.4f}" for s, v in deltas.items())
    verdict(6, wins >= 2, f"{shown} -> {wins}/3 wins (need >= 2)")


# ---------------------------------------------------------------------------
# criterion 7: planted pairs correlate perfectly
# ---------------------------------------------------------------------------


def test_criterion_07_planted_pairs_correlate_perfectly(verdict, bench_datasets):
    worst = 0.0
    pairs = 0
    for seed in SEEDS:
        train_ex, _, _ = bench_datasets[seed]
        corr = correlation_matrix([ex.labels for ex in train_ex], "pearson")
        for group in benchmark_spec(seed).co_groups:
            for i, j in itertools.combinations(group, 2):
                worst = max(worst, abs(corr.values[i, j] - 1.0))
                pairs += 1
    verdict(7, pairs == 9 and worst <= 1e-9,
            f"{pairs} planted pairs over {len(SEEDS)} seeds, "
            f"worst |r - 1| = {worst:.2e}")


# ---------------------------------------------------------------------------
# criterion 8: attention summary integrity + directional check
# ---------------------------------------------------------------------------


def test_criterion_08_attention_summary_integrity(verdict, bench_runs):
    # oracle equivalence on single examples, random-weight model
    train_ex, labels, vocab, model_cfg = small_task()
    params = init_params(model_cfg, Prng.for_purpose(21, "init"))
    texts = [ex.text for ex in train_ex[:3]]
    oracle_exact = True
    for text in texts:
        summary = attention_summary(params, model_cfg, vocab, labels, [text])
        enc = encode_for_inference(tokenize(text), labels.size, vocab,
                                   model_cfg.max_len)
        ids, attn = stack_batch([enc], model_cfg.max_len, trim=True)
        pos = np.asarray(enc.label_state_positions)
        with ad.no_grad():
            out = forward(params, model_cfg, ids, attn)
        for k, probs in enumerate(out.attentions):
            head_mean = probs.data[0].mean(axis=0)
            want = head_mean[pos[:, None], pos[None, :]]
            if not np.array_equal(summary.per_layer[k], want):
                oracle_exact = False

    # additivity over three examples
    whole = attention_summary(params, model_cfg, vocab, labels, texts)
    parts = [attention_summary(params, model_cfg, vocab, labels, [t]) for t in texts]
    add_err = max(
        float(np.max(np.abs(whole.per_layer[k]
                            - sum(p.per_layer[k] for p in parts))))
        for k in range(model_cfg.n_layers)
    )
    additive = add_err <= 1e-10

    # directional: planted pairs vs the median unordered off-diagonal pair score
    wins = 0
    seed_notes = []
    for seed in SEEDS:
        run = bench_runs[DIFF, seed]
        cfg = run["model_cfg"]
        M = attention_label_matrix(run["params"], cfg, run["vocab"],
                                   run["labels"], run["test_texts"],
                                   layer=cfg.n_layers - 1)
        S = M + M.T
        n = S.shape[0]
        scores = {frozenset((i, j)): S[i, j]
                  for i, j in itertools.combinations(range(n), 2)}
        med = float(np.median(list(scores.values())))
        planted = [tuple(g) for g in benchmark_spec(seed).co_groups]
        hit = all(scores[frozenset(p)] > med for p in planted)
        wins += hit
        seed_notes.append(f"seed {seed}: {'above' if hit else 'below'}")
    verdict(8, oracle_exact and additive and wins >= 2,
            f"oracle exact={oracle_exact}, additivity err={add_err:.1e}, "
            f"planted-pair attention {'; '.join(seed_notes)} -> {wins}/3 "
            f"(need >= 2)")


# ---------------------------------------------------------------------------
# criterion 9: byte-identical reruns for every artifact-writing command
# ---------------------------------------------------------------------------

SMALL_SPEC = {
    "n_labels": 4, "co_groups": [[0, 1]], "activation_prob": 0.35,
    "topic_words_per_label": 3, "noise_vocab_size": 20,
    "doc_len_range": [8, 14], "n_train": 48, "n_test": 16, "seed": 11,
}

FAST_FLAGS = ["--learning-rate", "3e-3", "--d-model", "32", "--n-layers", "2",
              "--d-ffn", "64", "--max-len", "32", "--seed", "3"]


def _run(args):
    rc = cli_main([str(a) for a in args])
    assert rc == 0, f"command failed: {args}"


def _diff_dirs(a, b):
    """Names of artifacts that differ between two run dirs (manifests excluded)."""
    names = sorted(p.relative_to(a).as_posix() for p in a.rglob("*")
                   if p.is_file() and p.name != "manifest.json")
    differing = []
    for name in names:
        if (a / name).read_bytes() != (b / name).read_bytes():
            differing.append(name)
    return names, differing


def test_criterion_09_reruns_are_byte_identical(verdict, tmp_path):
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps(SMALL_SPEC))
    checked, differing = [], []

    def compare(tag, a, b):
        names, diff = _diff_dirs(a, b)
        assert names, f"{tag}: no artifacts"
        checked.extend(f"{tag}/{n}" for n in names)
        differing.extend(f"{tag}/{n}" for n in diff)

    for d in ("a", "b"):
        _run(["gen-data", "--spec", spec_path, "--out", tmp_path / f"data-{d}"])
    compare("gen-data", tmp_path / "data-a", tmp_path / "data-b")

    data = tmp_path / "data-a"
    for d in ("a", "b"):
        _run(["train", "--data", data, "--out", tmp_path / f"train-{d}",
              "--epochs", 2, *FAST_FLAGS])
    compare("train", tmp_path / "train-a", tmp_path / "train-b")

    for d in ("a", "b"):
        _run(["pretrain", "--data", data, "--out", tmp_path / f"pre-{d}",
              "--epochs", 1, *FAST_FLAGS])
    compare("pretrain", tmp_path / "pre-a", tmp_path / "pre-b")

    ckpt = tmp_path / "train-a" / "model_final.ckpt"
    vocab = tmp_path / "train-a" / "vocab.json"
    labels = data / "labels.json"
    for d in ("a", "b"):
        out = tmp_path / f"eval-{d}"
        out.mkdir()
        _run(["eval", "--ckpt", ckpt, "--vocab", vocab, "--labels", labels,
              "--data", data / "test.jsonl", "--out", out / "report.json"])
    compare("eval", tmp_path / "eval-a", tmp_path / "eval-b")

    for d in ("a", "b"):
        out = tmp_path / f"pred-{d}"
        out.mkdir()
        _run(["predict", "--ckpt", ckpt, "--vocab", vocab, "--labels", labels,
              "--data", data / "test.jsonl", "--out", out / "predictions.jsonl"])
    compare("predict", tmp_path / "pred-a", tmp_path / "pred-b")

    for d in ("a", "b"):
        _run(["analyze", "attention", "--ckpt", ckpt, "--vocab", vocab,
              "--labels", labels, "--data", data / "test.jsonl",
              "--out", tmp_path / f"att-{d}", "--fmt", "both"])
    compare("analyze-attention", tmp_path / "att-a", tmp_path / "att-b")

    for d in ("a", "b"):
        _run(["analyze", "correlation", "--data", data / "train.jsonl",
              "--labels", labels, "--out", tmp_path / f"corr-{d}",
              "--fmt", "both"])
    compare("analyze-correlation", tmp_path / "corr-a", tmp_path / "corr-b")

    for d in ("a", "b"):
        _run(["compare-strategies", "--data", data,
              "--out", tmp_path / f"cmp-{d}", "--epochs", 1, *FAST_FLAGS])
    compare("compare-strategies", tmp_path / "cmp-a", tmp_path / "cmp-b")

    verdict(9, not differing,
            f"{len(checked)} artifacts byte-compared across 8 commands, "
            f"{len(differing)} differ"
            + (f" ({', '.join(differing[:4])})" if differing else ""))


# ---------------------------------------------------------------------------
# criterion 10: MLM machinery
# ---------------------------------------------------------------------------


def test_criterion_10_mlm_machinery(verdict, bench_runs):
    # empirical masked fraction per epoch at the benchmark scale
    fractions = [rec["masked_fraction"]
                 for rec in bench_runs[DIFF, 42]["history"].epochs]
    frac_err = max(abs(f - 0.15) for f in fractions)
    frac_ok = frac_err <= 0.01

    # mask_prob = 0 keeps the MLM loss at exactly zero
    train_ex, labels, vocab, model_cfg = small_task()
    res = train(train_ex, labels, vocab, model_cfg,
                small_train_cfg(epochs=1, mask_prob=0.0))
    zero_ok = all(r.l_mlm == 0.0 for r in res.history.losses)

    # pretrain initial loss close to the uniform-guess entropy ln |V'|
    pre = pretrain_mlm([ex.text for ex in train_ex], vocab, model_cfg,
                       small_train_cfg(epochs=1))
    first = pre.history.losses[0].l_mlm
    ln_v = math.log(vocab.size)
    init_ok = abs(first - ln_v) <= 0.1 * ln_v
    verdict(10, frac_ok and zero_ok and init_ok,
            f"masked fraction within {frac_err:.4f} of 0.15 over "
            f"{len(fractions)} epochs, mask_prob=0 -> l_mlm==0 on "
            f"{len(res.history.losses)} steps, pretrain first loss "
            f"{first:.3f} vs ln|V'|={ln_v:.3f}")
