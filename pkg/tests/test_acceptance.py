"""End-to-end acceptance checks, one test per criterion.

Each test reports a single PASS/FAIL line (collected in the terminal summary)
and fails if any of its sub-checks miss their stated tolerance.
"""

import json
import os
import time
import zlib

import numpy as np
import pytest

from lokiforge.cli import main
from lokiforge.datapipe import (
    BenchmarkRegistry,
    CurationConfig,
    Document,
    curate,
    decontaminate,
    embed_doc,
    semdedup,
    write_shards,
)
from lokiforge.distill import kd_schedule, min_ce_loss, topk_distribution
from lokiforge.distill.objective import winner_targets
from lokiforge.evalharness import UniformModel, perplexity, run_mc_eval, seal_run
from lokiforge.errors import SealedRunExists
from lokiforge.evalharness import contamination_audit
from lokiforge.model import TransformerModel, alibi_slopes, preset, rmsnorm, swiglu_ff
from lokiforge.model.config import ModelConfig
from lokiforge.numerics import Tape, Tensor, backward, cross_entropy, gradcheck, mul
from lokiforge.numerics import sum as tsum
from lokiforge.synthetic import make_balanced_task, make_benchmark_passages, make_capital_task, make_corpus, plant
from lokiforge.tokenizer import encoded_length, prune_vocab, train_bpe
from lokiforge.trainer import SpikeDetector, TokenWindows, TrainConfig, Trainer, detect_spike, hash64, load_checkpoint

from test_evalharness import OracleModel
from test_numerics import CASES

pytestmark = pytest.mark.acceptance


def full_model_gradcheck(seed, n_coords=20, h=1e-5):
    """Desk model in float64, T=4, B=1: worst relative error over random coordinates."""
    rng = np.random.default_rng(seed)
    m = TransformerModel(preset("desk"), seed=seed).astype(np.float64)
    for p in m.parameters():
        p.data = p.data + rng.normal(scale=0.05, size=p.shape)
    tokens = rng.integers(0, 512, size=(1, 5))
    x, y = tokens[:, :-1], tokens[:, 1:]
    with Tape() as tape:
        loss = cross_entropy(m(x), y)
    backward(loss, tape)
    names = [n for n, _ in m.named_parameters()]
    worst = 0.0
    for _ in range(n_coords):
        name = names[int(rng.integers(len(names)))]
        p = m.params[name]
        if name == "tok_emb":
            idx = (int(x[0, int(rng.integers(4))]), int(rng.integers(p.shape[1])))
        else:
            idx = tuple(int(rng.integers(s)) for s in p.shape)
        g = float(p.grad[idx])
        old = p.data[idx]
        p.data[idx] = old + h
        fp = float(cross_entropy(m(x), y).data)
        p.data[idx] = old - h
        fm = float(cross_entropy(m(x), y).data)
        p.data[idx] = old
        num = (fp - fm) / (2 * h)
        worst = max(worst, abs(g - num) / max(abs(g), abs(num), 1e-6))
    return worst


def test_criterion_1_gradient_fidelity(acceptance):
    t0 = time.time()
    rng = np.random.default_rng(0)
    ops = dict(CASES)

    def case_rmsnorm(rng):
        shape = tuple(int(d) for d in rng.integers(1, 5, size=int(rng.integers(0, 3)))) + (int(rng.integers(2, 7)),)
        w = rng.normal(size=shape)
        return lambda x, g: tsum(mul(rmsnorm(x, g, 1e-5), w)), [rng.normal(size=shape), rng.normal(size=shape[-1:])]

    def case_swiglu(rng):
        d, f = (int(v) for v in rng.integers(1, 7, size=2))
        lead = tuple(int(v) for v in rng.integers(1, 4, size=int(rng.integers(1, 3))))
        w = rng.normal(size=lead + (d,))
        arrays = [rng.normal(size=lead + (d,)), rng.normal(size=(d, f)), rng.normal(size=(d, f)), rng.normal(size=(f, d))]
        return lambda x, a, b, c: tsum(mul(swiglu_ff(x, a, b, c), w)), arrays

    ops["rmsnorm"] = case_rmsnorm
    ops["swiglu"] = case_swiglu
    worst_op = {}
    for op, make in sorted(ops.items()):
        r = np.random.default_rng(zlib.crc32(op.encode()) + 1)
        worst = 0.0
        for _ in range(30):
            fn, arrays = make(r)
            worst = max(worst, gradcheck(fn, arrays, n_coords=10, rng=r))
        worst_op[op] = worst
        acceptance.check(worst < 1e-3, f"{op} rel err {worst:.2e}")
    model_worst = max(full_model_gradcheck(s) for s in range(3))
    acceptance.check(model_worst < 1e-2, f"full model rel err {model_worst:.2e}")
    elapsed = time.time() - t0
    acceptance.check(elapsed < 120, f"runtime {elapsed:.1f}s")
    acceptance.note(f"{len(ops)} ops, worst op err {max(worst_op.values()):.1e}, model err {model_worst:.1e}, "
                    f"{elapsed:.1f}s")
    acceptance.verdict(1, "gradient fidelity")


def test_criterion_2_architecture_invariants(acceptance):
    t0 = time.time()
    cfg = preset("desk")
    m = TransformerModel(cfg, seed=1)
    rng = np.random.default_rng(5)
    causal_ok = 0
    for _ in range(100):
        T = int(rng.integers(2, 32))
        tokens = rng.integers(0, 512, size=(1, T))
        t = int(rng.integers(0, T - 1))
        other = tokens.copy()
        other[0, t + 1 :] = rng.integers(0, 512, size=T - t - 1)
        causal_ok += np.array_equal(m.logits(tokens)[:, : t + 1], m.logits(other)[:, : t + 1])
    acceptance.check(causal_ok == 100, f"causality {causal_ok}/100")

    # fixed-QK single layer: scores are exactly the bias
    small = ModelConfig(n_layers=1, n_heads=4, d_model=16, vocab_size=8, max_seq_len=16)
    fm = TransformerModel(small, seed=0)
    fm.params["layers.0.wq"].data[:] = 0
    fm.params["layers.0.wk"].data[:] = 0
    cap = {}
    T = 12
    fm.forward(np.full((1, T), 3), capture=cap)
    scores = cap["scores.0"][0]
    slopes = alibi_slopes(4)
    diag = all(scores[h, i, i] == 0 for h in range(4) for i in range(T))
    diffs = all(
        scores[h, i, j] - scores[h, i, j + 1] == np.float32(-slopes[h])
        for h in range(4) for i in range(T) for j in range(i)
    )
    masked = all(np.all(np.isneginf(scores[h, i, i + 1 :])) for h in range(4) for i in range(T))
    acceptance.check(diag, "alibi diagonal not zero")
    acceptance.check(diffs, "alibi adjacent differences != -slope")
    acceptance.check(masked, "future positions not masked")

    worst_scale = 0.0
    for _ in range(100):
        x = rng.normal(size=(3, 64))
        g = rng.normal(size=64)
        alpha = float(rng.uniform(0.1, 10))
        a = rmsnorm(Tensor(x), Tensor(g), 0.0).data
        b = rmsnorm(Tensor(alpha * x), Tensor(g), 0.0).data
        worst_scale = max(worst_scale, float(np.max(np.abs(a - b))))
    acceptance.check(worst_scale <= 1e-6, f"rmsnorm scale drift {worst_scale:.1e}")

    wg, wu, wd = rng.normal(size=(64, 176)), rng.normal(size=(64, 176)), rng.normal(size=(176, 64))
    x = rng.normal(size=(4, 64))
    zero_gate = swiglu_ff(Tensor(x), Tensor(np.zeros((64, 176))), Tensor(wu), Tensor(wd)).data
    zero_in = swiglu_ff(Tensor(np.zeros((4, 64))), Tensor(wg), Tensor(wu), Tensor(wd)).data
    acceptance.check(np.all(zero_gate == 0), "swiglu zero gate")
    acceptance.check(np.all(zero_in == 0), "swiglu zero input")
    elapsed = time.time() - t0
    acceptance.check(elapsed < 60, f"runtime {elapsed:.1f}s")
    acceptance.note(f"causality {causal_ok}/100, rmsnorm drift {worst_scale:.1e}, {elapsed:.1f}s")
    acceptance.verdict(2, "architecture invariants")


def test_criterion_3_kd_objective(acceptance):
    rng = np.random.default_rng(2024)
    bad_bound = 0
    worst_grad = 0.0
    for _ in range(10_000):
        B, T = (int(v) for v in rng.integers(1, 4, size=2))
        V = int(rng.integers(2, 12))
        logits = rng.normal(size=(B, T, V)) * rng.uniform(0.1, 5)
        targets = rng.integers(0, V, size=(B, T))
        dists = [topk_distribution(rng.normal(size=(B, T, V)) * rng.uniform(0.1, 5), k=int(rng.integers(1, V + 1)))
                 for _ in range(3)]
        granularity = ("token", "sequence", "batch")[int(rng.integers(3))]
        x = Tensor(logits, requires_grad=True)
        with Tape() as tape:
            loss, branch, plain = min_ce_loss(x, targets, dists, granularity)
        backward(loss, tape)
        bad_bound += not float(loss.data) <= plain
        y = Tensor(logits, requires_grad=True)
        with Tape() as tape:
            ref = cross_entropy(y, winner_targets(branch, targets, dists, V))
        backward(ref, tape)
        worst_grad = max(worst_grad, float(np.max(np.abs(x.grad - y.grad))))
    acceptance.check(bad_bound == 0, f"{bad_bound} cases with loss > plain CE")
    acceptance.check(worst_grad <= 1e-6, f"branch gradient diff {worst_grad:.1e}")

    logits = np.log(np.array([[[0.7, 0.1, 0.1, 0.1]]]))
    uniform = topk_distribution(np.zeros((1, 1, 4)), k=4)
    loss, branch, _ = min_ce_loss(logits, np.array([[1]]), [uniform])
    worked = float(loss.data)
    acceptance.check(abs(worked - 1.816113) < 1e-5 and branch.tolist() == [[1]], f"worked example {worked:.6f}")

    sched_ok = all(sum(kd_schedule(s) for s in range(1, n + 1)) == n // 4 for n in range(1, 2001))
    acceptance.check(sched_ok, "kd_schedule count != floor(N/4)")
    acceptance.note(f"10000 fuzz cases, max grad diff {worst_grad:.1e}, worked example {worked:.6f}")
    acceptance.verdict(3, "KD objective")


SMOKE_DOCS = 35_010  # 2 epochs at T=64 under the 8 -> 32 ramp is exactly 2,000 steps


@pytest.fixture(scope="module")
def smoke_shards(tmp_path_factory):
    root = tmp_path_factory.mktemp("smoke")
    docs = make_corpus(SMOKE_DOCS, seed=0)
    tok = train_bpe([d.text for d in docs[:2000]], 512)
    paths, stats = write_shards(docs, tok, 1 << 20, str(root / "shards"))
    return root, paths, stats


def _smoke_run(root, name, paths):
    cfg = TrainConfig(seq_len=64, batch_size_initial=8, batch_size_max=32, warmup_token_fraction=0.1,
                      epochs=2, max_steps=2000, checkpoint_interval=500, seed=0)
    windows = TokenWindows.from_shards(paths, 64)
    with Trainer(preset("desk"), cfg, windows, str(root / name)) as tr:
        summary = tr.run()
        return summary, list(tr.losses), windows.n


@pytest.mark.slow
def test_criterion_4_training_smoke(acceptance, smoke_shards):
    root, paths, stats = smoke_shards
    t0 = time.time()
    a, losses, n_windows = _smoke_run(root, "a", paths)
    b, losses_b, _ = _smoke_run(root, "b", paths)
    elapsed = time.time() - t0
    first, last = float(np.mean(losses[:100])), float(np.mean(losses[-100:]))
    acceptance.check(a["steps"] == 2000, f"steps {a['steps']}")
    acceptance.check(a["tokens_seen"] == 2 * n_windows * 64, "did not cover 2 epochs")
    acceptance.check(last < 0.5 * first, f"loss {first:.3f} -> {last:.3f}")
    same = open(a["final_checkpoint"], "rb").read() == open(b["final_checkpoint"], "rb").read()
    acceptance.check(same and losses == losses_b, "identical-seed runs differ")
    acceptance.check(elapsed < 900, f"runtime {elapsed:.0f}s")
    acceptance.note(f"{stats['total_tokens']} tokens, {a['steps']} steps, first-100 {first:.3f}, "
                    f"last-100 {last:.3f}, bit-identical={same}, 2 runs {elapsed:.0f}s")
    acceptance.verdict(4, "training smoke")


def test_criterion_5_rollback_drill(acceptance, tmp_path, tokenizer, corpus):
    det = SpikeDetector(history=[2.0] * 100)
    acceptance.check(det.threshold() == 2.5 and det.check(2.6) and not det.check(2.4), "threshold example")
    acceptance.check(detect_spike([2.0] * 100, float("nan")), "NaN not a spike")

    stream = np.concatenate([np.append(tokenizer.encode_array(d.text), 0) for d in corpus])
    windows = TokenWindows(stream, 32, 512)
    mcfg = ModelConfig(n_layers=1, n_heads=2, d_model=32, vocab_size=512, max_seq_len=32)

    def cfg(**kw):
        return TrainConfig(seq_len=32, batch_size_initial=4, batch_size_max=8, max_steps=60,
                           checkpoint_interval=20, spike_window=20, **kw)

    ref_first = {}
    with Trainer(mcfg, cfg(), windows, str(tmp_path / "ref")) as ref:
        ref.save()
        while ref.step < 30:
            ids, _ = ref.next_batch()
            ref_first[ref.step + 1] = ids.tolist()
            ref.step_once()

    with Trainer(mcfg, cfg(inject_spike_steps=[30]), windows, str(tmp_path / "drill")) as tr:
        tr.save()
        while tr.step < 29:
            tr.step_once()
        ck = load_checkpoint(tr.checkpoints[-1])
        m = tr.step_once()
        acceptance.check(m["spike"], "injected spike not detected")
        acceptance.check(tr.model.digest() == ck.params_digest() and tr.step == ck.step == 20,
                         "parameters not restored to checkpoint")
        ids, _ = tr.next_batch()
        acceptance.check(tr.seed == hash64(ck.seed, 1) and ids.tolist() != ref_first[21],
                         "post-rollback batch order unchanged")
        s = tr.run()
        acceptance.check(s["steps"] == 60 and s["rollbacks"] == 1, f"run ended at {s['steps']}")

    base = tmp_path / "cfg.json"
    base.write_text(json.dumps({"corpus": {"synthetic_docs": 200}, "tokenizer": {"vocab_size": 300}}))
    assert main(["tok-train", "--config", str(base), "--out", str(tmp_path / "tok")]) == 0
    tok_path = str(tmp_path / "tok" / "tokenizer.json")
    assert main(["curate", "--config", str(base), "--set", f"tokenizer.path={tok_path}",
                 "--out", str(tmp_path / "cur")]) == 0
    args = ["train", "--config", str(base), "--set", f"tokenizer.path={tok_path}",
            "--set", f"data.shards={tmp_path / 'cur' / 'shards'}", "--set", "model.n_layers=1",
            "--set", "model.d_model=16", "--set", "model.n_heads=2", "--set", "trainer.seq_len=16",
            "--set", "trainer.batch_size_initial=2", "--set", "trainer.batch_size_max=4",
            "--set", "trainer.max_steps=30", "--set", "trainer.checkpoint_interval=10",
            "--set", "trainer.spike_window=10", "--set", "trainer.max_rollbacks=3",
            "--set", "trainer.inject_spike_repeats=4", "--inject-spike", "15", "--out", str(tmp_path / "limit")]
    code = main(args)
    acceptance.check(code == 3, f"R+1 spikes exit code {code}")
    acceptance.note(f"rolled back to step {ck.step}, R+1 exit code {code}")
    acceptance.verdict(5, "rollback drill")


def test_criterion_6_curation(acceptance, tmp_path, tokenizer):
    pool = make_corpus(150, seed=42)
    unique, hosts = pool[:100], pool[100:]
    copies = [Document.from_text(d.text, "copy") for d in unique]
    passages = make_benchmark_passages(50, seed=6)
    registry = BenchmarkRegistry(passages)
    rng = np.random.default_rng(3)
    planted = [Document.from_text(plant(h.text.decode(), p, rng), "planted") for h, p in zip(hosts, passages)]

    dup_set = unique + copies
    kept, _ = semdedup(dup_set, k_clusters=8, tau=0.95, seed=0)
    x = np.stack([embed_doc(d.text) for d in dup_set])
    groups = []
    for i in range(len(dup_set)):
        for g in groups:
            if float(x[i] @ x[g[0]]) >= 0.95 - 1e-9:
                g.append(i)
                break
        else:
            groups.append([i])
    acceptance.check(len(kept) == 100, f"semdedup kept {len(kept)}")
    acceptance.check(len(groups) == 100, f"brute force found {len(groups)} groups")

    _, report = decontaminate(unique + planted, registry)
    acceptance.check(len(report) == 50, f"decontaminate removed {len(report)}")

    docs = unique + copies + planted
    cfg = CurationConfig(prune_fraction=0.0, shard_token_budget=4000)
    a = curate(docs, tokenizer, registry, cfg, str(tmp_path / "a"))
    b = curate(docs, tokenizer, registry, cfg, str(tmp_path / "b"))
    acceptance.check(a["contaminated_documents"] == 50, f"pipeline removed {a['contaminated_documents']}")
    acceptance.check(a["stage_counts"]["decontaminate"] == 100, f"stage counts {a['stage_counts']}")
    matches = contamination_audit(a["shard_paths"], registry, tokenizer)
    acceptance.check(matches == [], f"audit found {len(matches)}")
    same = [os.path.basename(p) for p in a["shard_paths"]] == [os.path.basename(p) for p in b["shard_paths"]]
    same = same and all(open(p, "rb").read() == open(q, "rb").read() for p, q in zip(a["shard_paths"], b["shard_paths"]))
    rep_a = json.load(open(tmp_path / "a" / "curation_report.json"))
    rep_b = json.load(open(tmp_path / "b" / "curation_report.json"))
    acceptance.check(same and rep_a == rep_b, "rerun not byte-identical")
    acceptance.note(f"stage counts {a['stage_counts']}")
    acceptance.verdict(6, "curation")


def test_criterion_7_tokenizer(acceptance, tokenizer, corpus):
    rng = np.random.default_rng(7)
    bad = 0
    for _ in range(10_000):
        data = rng.integers(0, 256, size=int(rng.integers(0, 200)), dtype=np.uint8).tobytes()
        bad += tokenizer.decode(tokenizer.encode(data)) != data
    acceptance.check(bad == 0, f"{bad} round-trip failures")

    texts = [d.text for d in corpus[:80]]
    sizes = [512, 480, 440, 400, 360, 320, 290, 270, 257]
    lengths = []
    tok = tokenizer
    for s in sizes:
        tok = prune_vocab(tok, texts, s)
        lengths.append(encoded_length(tok, texts))
    acceptance.check(all(x <= y for x, y in zip(lengths, lengths[1:])), f"sweep not monotone {lengths}")
    same = prune_vocab(tokenizer, texts, tokenizer.vocab_size)
    acceptance.check(all(same.encode(t) == tokenizer.encode(t) for t in texts), "prune to same size changed encodings")
    acceptance.note(f"sweep {dict(zip(sizes, lengths))}")
    acceptance.verdict(7, "tokenizer")


def test_criterion_8_evaluation(acceptance, tmp_path, tokenizer):
    task = make_capital_task(n_items=100, seed=8, shots=2)
    acc_oracle, _ = run_mc_eval(OracleModel(tokenizer, task, shots=2, seed=1), tokenizer, task, seed=1)
    acceptance.check(acc_oracle == 1.0, f"oracle accuracy {acc_oracle}")

    balanced = make_balanced_task(1000, seed=8)
    acc_uniform, _ = run_mc_eval(UniformModel(512), tokenizer, balanced)
    acceptance.check(abs(acc_uniform - 0.25) <= 0.05, f"uniform accuracy {acc_uniform}")

    toks = np.random.default_rng(8).integers(0, 512, 5000)
    ppl = perplexity(UniformModel(512, 128), toks)
    acceptance.check(ppl == 512.0, f"uniform perplexity {ppl!r}")

    mcfg = ModelConfig(n_layers=1, n_heads=2, d_model=16, vocab_size=512, max_seq_len=128)
    with Trainer(mcfg, TrainConfig(seq_len=16, max_steps=1, batch_size_initial=2, batch_size_max=2),
                 TokenWindows(toks, 16, 512), str(tmp_path / "run")) as tr:
        ckpt = tr.run()["final_checkpoint"]
    small = make_capital_task(n_items=4, seed=0, shots=1)
    seal_run(ckpt, [small], str(tmp_path / "m"), tokenizer)
    try:
        seal_run(ckpt, [small], str(tmp_path / "m"), tokenizer)
        refused = False
    except SealedRunExists:
        refused = True
    acceptance.check(refused, "second seal_run was not refused")
    acceptance.note(f"oracle {acc_oracle}, uniform {acc_uniform:.3f}, perplexity {ppl}")
    acceptance.verdict(8, "evaluation")
