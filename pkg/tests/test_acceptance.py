"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line."""

import subprocess
import sys
import time
from pathlib import Path

import numpy as np

from conftest import record_criterion
from gradcheck import check_cell, random_case
from oracles import (
    alg1_replay,
    alg2_replay,
    confusion_pr,
    elementwise_min_sim,
    lp_emd,
    naive_weight_response,
    random_kos_instance,
    roc_enumeration_auc,
    two_pass_cc,
)
from ksora.convlstm import ConvLSTMParams, ConvLSTMState, cell_step
from ksora.harness import SceneSpec, synth_scene
from ksora.harness.codecs import (
    decode_ksal,
    decode_pgm,
    decode_snapshot,
    encode_ksal,
    encode_pgm,
    encode_proposals,
    encode_snapshot,
    read_ksal,
    read_pgm,
    read_proposals,
)
from ksora.kos import GlobalRanking, Proposal, global_ranking, proposal_score, select_and_augment
from ksora.metrics import auc_judd, cc, emd, pr_curve, pr_thresholds, sim
from ksora.tensor import ConvParams
from ksora.wfe import pyramid_fuse, weight_response

GOLDEN = Path(__file__).parent / "golden"


def _props(pairs):
    return [Proposal(c, b) for c, b in pairs]


def test_criterion_1_metric_oracles():
    rng = np.random.default_rng(1001)
    start = time.perf_counter()
    worst = dict(cc=0.0, emd=0.0, auc=0.0)
    mismatches = dict(sim=0, pr=0)
    for _ in range(200):
        h, w = (int(v) for v in rng.integers(2, 7, 2))
        a, b = rng.random((2, h, w)) ** 2
        worst["cc"] = max(worst["cc"], abs(cc(a, b) - two_pass_cc(a, b)))
        mismatches["sim"] += sim(a, b) != elementwise_min_sim(a, b)
        worst["emd"] = max(worst["emd"], abs(emd(a, b, "exact") - lp_emd(a, b)))
        s = rng.integers(0, 8, size=(h, w)) / 7.0
        fx = rng.random((h, w)) < 0.3
        fx.reshape(-1)[rng.integers(h * w)] = True
        worst["auc"] = max(worst["auc"], abs(auc_judd(s, fx) - roc_enumeration_auc(s, fx)))
        n = int(rng.integers(2, 25))
        mismatches["pr"] += pr_curve(s, fx, n) != confusion_pr(s, fx, pr_thresholds(n))
    elapsed = time.perf_counter() - start
    # ROC areas are summed in a different order by the two routes; 1e-12 absorbs rounding only.
    ok = (worst["cc"] < 1e-10 and worst["emd"] < 1e-6 and worst["auc"] < 1e-12
          and not any(mismatches.values()) and elapsed < 60)
    detail = (f"cc {worst['cc']:.1e}, sim mismatches {mismatches['sim']}, emd vs LP {worst['emd']:.1e}, "
              f"auc {worst['auc']:.1e}, pr mismatches {mismatches['pr']}, {elapsed:.1f} s")
    assert record_criterion(1, "metric oracles on 200 instances", ok, detail), detail


def test_criterion_2_metric_axioms():
    rng = np.random.default_rng(2002)
    violations = 0
    for _ in range(500):
        a, b, c = rng.random((3, 5, 5)) ** 2
        ab, ba = emd(a, b, "exact"), emd(b, a, "exact")
        violations += not (ab >= 0 and abs(ab - ba) < 1e-9)
        violations += not (ab <= emd(a, c, "exact") + emd(c, b, "exact") + 1e-9)
        violations += not (emd(a, a * 3.0, "exact") < 1e-12)
    cc_worst = 0.0
    sim_bad = 0
    for _ in range(200):
        a, b = rng.random((2, 6, 6))
        alpha, beta = rng.uniform(0.01, 50), rng.uniform(-20, 20)
        cc_worst = max(cc_worst, abs(cc(alpha * a + beta, b) - cc(a, b)), abs(cc(a, alpha * b + beta) - cc(a, b)))
        v = sim(a, b)
        sim_bad += not (0.0 <= v < 1.0)
        sim_bad += abs(sim(a, alpha * a) - 1.0) > 1e-12
    s = rng.random((200, 200))
    fx = np.zeros(s.size, dtype=bool)
    fx[rng.choice(s.size, 10_000, replace=False)] = True
    auc = auc_judd(s, fx.reshape(s.shape))
    ok = violations == 0 and cc_worst < 1e-10 and sim_bad == 0 and abs(auc - 0.5) < 0.02
    detail = (f"emd axiom violations {violations}/1500, cc affine drift {cc_worst:.1e}, "
              f"sim bound/iff failures {sim_bad}, uniform auc {auc:.4f}")
    assert record_criterion(2, "metric axioms", ok, detail), detail


def test_criterion_3_pseudocode_equivalence():
    index_bad = order_bad = 0
    gss_worst = 0.0
    for seed in range(1000):
        rng = np.random.default_rng(seed)
        history, (s, props) = random_kos_instance(rng)
        ranking = global_ranking([(hs, _props(hp)) for hs, hp in history], 0.5)
        gsc, gss = alg2_replay(history, 0.5)
        order_bad += list(ranking.gsc) != gsc or set(ranking.gss) != set(gss)
        for k in gss:
            gss_worst = max(gss_worst, abs(ranking.gss.get(k, np.inf) - gss[k]))
        f = rng.integers(0, 256, size=s.shape, dtype=np.uint8)
        _, rep = select_and_augment(f, s, _props(props), ranking)
        index_bad += rep.index != alg1_replay(s, props, gsc, gss, 0.5)
    ok = index_bad == 0 and order_bad == 0 and gss_worst <= 1e-9
    detail = f"winner mismatches {index_bad}/1000, GSC mismatches {order_bad}, GSS max error {gss_worst:.1e}"
    assert record_criterion(3, "selection and ranking vs pseudocode replay", ok, detail), detail


def test_criterion_4_kos_properties():
    rng = np.random.default_rng(4004)
    nbo_bad = mono_bad = outside_bad = 0
    n_cases = 0
    for _ in range(300):
        g = float(rng.uniform(0.1, 50))
        rank = int(rng.integers(1, 5))
        gsc = tuple(range(1, rank + 1))
        r = GlobalRanking(gsc, {k: g for k in gsc})
        top = GlobalRanking((1,), {1: g})
        cs = np.sort(rng.uniform(0, 3 * g, 20))
        cs = np.append(cs, g)
        for c in cs:
            n_cases += 1
            nbo_bad += (proposal_score(c, 99, top) > proposal_score(c, 1, top)) != (c < g)
        known = [proposal_score(c, rank, r) for c in np.unique(cs)]
        new = [proposal_score(c, 99, r) for c in np.unique(cs)]
        mono_bad += not (np.all(np.diff(known) > 0) and np.all(np.diff(new) > 0))
    for seed in range(300):
        srng = np.random.default_rng(seed + 50_000)
        history, (s, props) = random_kos_instance(srng)
        ranking = global_ranking([(hs, _props(hp)) for hs, hp in history], 0.5)
        if not len(ranking):
            ranking = GlobalRanking((1,), {1: 1.0})
        f = srng.integers(0, 256, size=s.shape, dtype=np.uint8)
        out, rep = select_and_augment(f, s, _props(props), ranking)
        x1, y1, x2, y2 = rep.bbox
        inside = np.zeros(s.shape, dtype=bool)
        inside[y1:y2, x1:x2] = True
        outside_bad += not np.array_equal(out[~inside], f[~inside])
    ok = nbo_bad == 0 and mono_bad == 0 and outside_bad == 0
    detail = (f"new-beats-old disagreements {nbo_bad}/{n_cases}, non-monotone sweeps {mono_bad}/300, "
              f"outside-roi changes {outside_bad}/300")
    assert record_criterion(4, "selection behavioural properties", ok, detail), detail


def test_criterion_5_convlstm():
    worst = {}
    for seed in range(3):
        for name, err in check_cell(*random_case(seed, channels=4, size=8)).items():
            worst[name] = max(worst.get(name, 0.0), err)
    max_h = 0.0
    for seed in range(5):
        rng = np.random.default_rng(seed)
        p = ConvLSTMParams.random(4, 4, 8, 8, rng, scale=1.0)
        state = ConvLSTMState.zeros(4, 8, 8)
        for _ in range(100):
            state = cell_step(rng.normal(size=(4, 8, 8)) * 2, state, p)
            max_h = max(max_h, float(np.abs(state.H).max()))
    name, err = max(worst.items(), key=lambda kv: kv[1])
    ok = err < 1e-4 and max_h < 1.0 and len(worst) == 18
    detail = f"worst relative gradient error {err:.1e} ({name}) over 15 tensors + inputs, max |H| {max_h:.6f}"
    assert record_criterion(5, "convLSTM gradients and bounded hidden state", ok, detail), detail


def test_criterion_6_wfe():
    zero = weight_response(np.zeros((8, 6, 6)), ConvParams(np.zeros((8, 8, 3, 3)), np.zeros(8)))
    zero_ok = np.all(zero == 0.5)
    rng = np.random.default_rng(6006)
    worst = 0.0
    range_ok = True
    for _ in range(30):
        c, h, w = (int(v) for v in rng.integers(1, 7, 3))
        x = rng.normal(size=(c, h, w)) * 4
        p = ConvParams.random(c, c, rng, scale=1.5)
        wr = weight_response(x, p)
        range_ok &= bool(np.all((wr > 0) & (wr < 1)) and wr.shape == x.shape)
        worst = max(worst, float(np.abs(wr - naive_weight_response(x, p.kernels, p.bias)).max()))
    shape_ok = pyramid_fuse(np.zeros((8, 14, 14)), np.zeros((8, 14, 14)), np.zeros((8, 28, 28)), np.zeros((8, 28, 28))).shape == (8, 14, 14)
    try:
        pyramid_fuse(np.zeros((8, 14, 14)), np.zeros((8, 14, 14)), np.zeros((8, 27, 28)), np.zeros((8, 27, 28)))
        shape_ok = False
    except ValueError:
        pass
    ok = zero_ok and range_ok and shape_ok and worst < 1e-12
    detail = f"zero input -> 0.5 {zero_ok}, weights in (0,1) {range_ok}, shape contract {shape_ok}, oracle error {worst:.1e}"
    assert record_criterion(6, "weighted feature extraction", ok, detail), detail


def _selection_hits(bundle):
    hits = total = 0
    history = []
    for t in range(len(bundle)):
        ranking = global_ranking(history, 0.5)
        _, rep = select_and_augment(bundle.frames[t], bundle.saliency[t], bundle.proposals[t], ranking)
        if t >= 2:  # warm ranking: third frame onwards (0-based index 2)
            total += 1
            hits += rep.class_id == bundle.meta["attractors"][t]
        history.append((bundle.saliency[t], bundle.proposals[t]))
    return hits, total


def test_criterion_7_synthetic_end_to_end(tmp_path):
    start = time.perf_counter()
    specs = [SceneSpec(), SceneSpec(late_frame=6, n_static=3), SceneSpec(mover_entry=4),
             SceneSpec(mover=False), SceneSpec(late_frame=3, n_static=4)]
    hits = total = 0
    for i, spec in enumerate(specs):
        for seed in range(4):
            h, n = _selection_hits(synth_scene(spec, seed=100 * i + seed))
            hits += h
            total += n
    rate = hits / total
    cli = [sys.executable, "-m", "ksora"]
    scene = tmp_path / "scene"
    subprocess.run(cli + ["synth", "--out", str(scene), "--seed", "7", "--late-frame", "6"], check=True)
    trees = []
    for name in ("r1", "r2"):
        subprocess.run(cli + ["run", str(scene), "--out", str(tmp_path / name), "--seed", "7"], check=True)
        root = tmp_path / name
        trees.append({str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()})
    identical = trees[0] == trees[1] and len(trees[0]) >= 10
    elapsed = time.perf_counter() - start
    ok = rate >= 0.9 and identical and elapsed < 30
    detail = f"attractor selected on {hits}/{total} warm frames ({rate:.1%}), run byte-identical {identical}, {elapsed:.1f} s"
    assert record_criterion(7, "synthetic scenes end to end", ok, detail), detail


def test_criterion_8_codec_golden_files():
    checks = {
        "pgm": np.array_equal(read_pgm(GOLDEN / "gray3x2.pgm"), [[0, 128, 255], [1, 2, 3]])
        and np.array_equal(read_pgm(GOLDEN / "commented.pgm"), [[0, 128, 255], [1, 2, 3]]),
        "ksal": read_ksal(GOLDEN / "map2x2.ksal").tolist() == [[1.0, -2.5], [0.25, 3.0]],
        "jsonl": read_proposals(GOLDEN / "proposals.jsonl")
        == {0: [Proposal(3, (1, 2, 5, 6), 0.75), Proposal(7, (0, 0, 2, 2), 1.0)], 2: [Proposal(3, (4, 4, 8, 7), 0.5)]},
    }
    trips = True
    for name in ("gray3x2.pgm", "map2x2.ksal", "tiny.snap"):
        data = (GOLDEN / name).read_bytes()
        if name.endswith(".pgm"):
            trips &= encode_pgm(decode_pgm(data)) == data
        elif name.endswith(".ksal"):
            trips &= encode_ksal(decode_ksal(data)) == data
        else:
            trips &= encode_snapshot(decode_snapshot(data)) == data
    text = (GOLDEN / "proposals.jsonl").read_text()
    trips &= encode_proposals(read_proposals(GOLDEN / "proposals.jsonl")) == text.replace("\n\n", "\n")
    rng = np.random.default_rng(8008)
    for _ in range(50):
        arr = rng.normal(size=tuple(rng.integers(1, 20, 2))).astype(np.float32)
        trips &= decode_ksal(encode_ksal(arr)).tobytes() == arr.tobytes()
    ok = all(checks.values()) and trips
    detail = ", ".join(f"{k} {v}" for k, v in checks.items()) + f", round-trips bit-exact {trips}"
    assert record_criterion(8, "codec golden files", ok, detail), detail
