"""Acceptance criteria 1-8; each test logs one PASS/FAIL line."""

import json
import math
import time

import numpy as np

from tinysv import cli
from tinysv.bench import run_bench
from tinysv.budget import REFERENCE, count_flops, count_params
from tinysv.config import FeatureConfig, ModelConfig, SequenceNetConfig, VladConfig, toy_config
from tinysv.features import write_wav
from tinysv.objectives import (ArcFaceConfig, arcface_focal_loss, focal_cross_entropy,
                               numeric_gradient)
from tinysv.pipeline import Model
from tinysv.scoring import ScoreSet, compute_eer
from tinysv.store import load_model, random_init, save_model
from tinysv.vlad import VladAccumulator, VladParams, embed_frames, finalize_embedding, param_count

from conftest import noise_pcm
from eer_oracle import dense_sweep_eer


def random_chunks(rng, n):
    cap = int(rng.choice([40, 400, 4000, 40000]))
    sizes = []
    while sum(sizes) < n:
        sizes.append(int(rng.integers(1, cap + 1)))
    return np.cumsum(sizes)[:-1]


def test_1_stream_batch_equivalence(criterion, default_cfg):
    with criterion(1, "stream/batch equivalence, 20 models x 50 chunkings") as notes:
        rng = np.random.default_rng(2024)
        t0 = time.perf_counter()
        worst_cos, worst_diff = 1.0, 0.0
        for seed in range(20):
            model = Model.random(default_cfg, seed=100 + seed)
            for j in range(50):
                pcm = noise_pcm(int(rng.integers(8000, 32000)), seed=1000 * seed + j,
                                scale=float(rng.uniform(100, 8000)))
                ref_frames = model.sequence_batch(pcm)
                ref = model.embed_batch(pcm)
                session = model.stream(keep_frames=True)
                for part in np.split(pcm, random_chunks(rng, len(pcm))):
                    session.push(part)
                emb = session.finish()
                frames = session.sequence_frames()
                assert frames.shape == ref_frames.shape
                worst_diff = max(worst_diff, float(np.max(np.abs(frames - ref_frames))))
                worst_cos = min(worst_cos, float(ref @ emb / (np.linalg.norm(ref)
                                                              * np.linalg.norm(emb))))
        elapsed = time.perf_counter() - t0
        notes += [f"min cosine {worst_cos:.9f}", f"max diff {worst_diff:.2e}",
                  f"{elapsed:.1f}s"]
        assert worst_cos >= 1 - 1e-6
        assert worst_diff <= 1e-4
        assert elapsed < 120


def test_2_architecture_bookkeeping(criterion, default_cfg, tmp_path, capsys):
    with criterion(2, "architecture bookkeeping") as notes:
        path = tmp_path / "m.svw"
        save_model(path, default_cfg, random_init(default_cfg, 0))
        assert cli.main(["inspect", "--model", str(path), "--json"]) == 0
        rep = json.loads(capsys.readouterr().out)
        assert rep["n_tcs"] == 22 and len(rep["schedule"]) == 22
        assert (rep["clusters"], rep["ghosts"], rep["embed_dim"]) == (32, 3, 96)

        cfg, weights = load_model(path)
        enumerated = sum(int(np.prod(w.shape)) for w in weights.values())
        assert count_params(cfg).stage_total().params == enumerated

        for stage, t in rep["totals"].items():
            ref = REFERENCE[stage]["params"]
            line = (f"{stage}: learnable {t['learnable']} vs reference {ref} "
                    f"({100 * t['deviation']['learnable_rel']:+.1f}%)")
            print(line)
            notes.append(line)

        for k in (1, 2, 31, 32, 64):
            assert param_count(VladConfig(clusters=k + 1)) - param_count(VladConfig(clusters=k)) \
                == 2 * 96 + 1


# Hand-derived sequence FMA per second of audio (100 input frames, 50 pooled).
TOY_FLOPS = [
    (toy_config(), {"seq.stem": (24 + 64) * 100, "seq.block0.conv0": (24 + 64) * 50,
                    "seq.block0.close": (12 + 32) * 50, "seq.head": (24 + 64) * 50}),
    (ModelConfig(
        features=FeatureConfig(n_mels=4),
        sequence=SequenceNetConfig(in_channels=4, filters=4, kernel=5, blocks=1, repeats=2,
                                   mfm_variant="doubling", head=False),
        vlad=VladConfig(clusters=2, ghosts=0, in_channels=4, embed_dim=3)).validate(),
     {"seq.stem": 3600, "seq.block0.conv0": 2600, "seq.block0.conv1": 2600,
      "seq.block0.close": 1800, "vlad.assign": 400, "vlad.accumulate": 500,
      "vlad.finalize": 50}),
    (ModelConfig(
        features=FeatureConfig(n_mels=10),
        sequence=SequenceNetConfig(in_channels=10, filters=6, kernel=7, blocks=2, repeats=1),
        vlad=VladConfig(clusters=3, ghosts=1, in_channels=6, embed_dim=5)).validate(),
     {"seq.stem": 13000, "seq.block0.conv0": 78 * 50, "seq.block1.close": 39 * 50}),
]


def test_3_flops_accounting(criterion, default_cfg):
    with criterion(3, "FLOPs accounting") as notes:
        for cfg in [default_cfg] + [c for c, _ in TOY_FLOPS]:
            one = count_flops(cfg, 1.0)
            for secs in (0.5, 2.0, 7.0):
                other = count_flops(cfg, secs)
                for a, b in zip(one.lines, other.lines):
                    if a.name != "vlad.finalize":
                        assert b.fma == secs * a.fma and b.div == secs * a.div
                    else:
                        assert (b.fma, b.div) == (a.fma, a.div)
        for cfg, expected in TOY_FLOPS:
            lines = {ln.name: ln.fma for ln in count_flops(cfg, 1.0).lines}
            for name, fma in expected.items():
                assert lines[name] == fma, name
        totals = count_flops(default_cfg, 1.0).totals()
        for stage, t in totals.items():
            ref = REFERENCE[stage]
            line = (f"{stage}: FMA/s {t.fma:.0f} vs {ref['fma']:.0f} "
                    f"({100 * (t.fma - ref['fma']) / ref['fma']:+.1f}%), "
                    f"FLOPS {t.flops:.0f} vs {ref['flops']:.0f}")
            print(line)
            notes.append(line)


def test_4_eer_oracle(criterion):
    with criterion(4, "EER vs dense sweep oracle, 1000 sets") as notes:
        rng = np.random.default_rng(77)
        worst = 0.0
        for _ in range(1000):
            n = int(rng.integers(10, 501))
            nt = int(rng.integers(1, n))
            if rng.random() < 0.3:
                s = rng.integers(0, 15, size=n) / 10.0  # heavy ties
            else:
                s = rng.normal(size=n)
                s[:nt] += rng.uniform(0, 3)
            t, nn = list(s[:nt]), list(s[nt:])
            got = compute_eer(ScoreSet.from_lists(t, nn))[0]
            worst = max(worst, abs(got - dense_sweep_eer(t, nn, densify=1)))
        notes.append(f"max deviation {worst:.1e}")
        assert worst <= 1e-9

        def eer(t, n):
            return compute_eer(ScoreSet.from_lists(t, n))[0]

        assert eer([0.9, 0.8], [0.2, 0.1]) == 0.0
        assert eer([0.1], [0.9]) == 1.0
        assert eer([0.9, 0.8, 0.7], [0.75, 0.6, 0.1]) == 1 / 3


def vlad_params(rng, k=32, g=3, c=96, d=96):
    f = np.float32
    return VladParams(rng.normal(size=(k + g, c)).astype(f) * 0.1,
                      rng.normal(size=k + g).astype(f) * 0.1,
                      rng.normal(size=(k, c)).astype(f),
                      rng.normal(size=(d, c)).astype(f) * 0.1,
                      rng.normal(size=d).astype(f) * 0.1)


def test_5_gvlad_incremental(criterion):
    with criterion(5, "GVLAD incremental, permutation, ghost neutrality") as notes:
        rng = np.random.default_rng(5)
        inc = perm = ghost = 0.0
        for _ in range(100):
            p = vlad_params(rng)
            x = rng.normal(size=(int(rng.integers(1, 120)), 96)).astype(np.float32)
            acc = VladAccumulator.for_params(p)
            for row in x:
                acc.push(row[None, :], p)
            single = embed_frames(x, p)
            inc = max(inc, float(np.max(np.abs(finalize_embedding(acc, p) - single))))
            perm = max(perm, float(np.max(np.abs(embed_frames(x[rng.permutation(len(x))], p)
                                                 - single))))
            extra = VladParams(
                np.vstack([p.assign_weights, rng.normal(size=(1, 96))]).astype(np.float32),
                np.append(p.assign_bias, -np.inf).astype(np.float32),
                p.centroids, p.projection, p.projection_bias)
            ghost = max(ghost, float(np.max(np.abs(embed_frames(x, extra) - single))))
        notes += [f"incremental {inc:.1e}", f"permutation {perm:.1e}", f"ghost {ghost:.1e}"]
        assert inc <= 1e-5 and perm <= 1e-5 and ghost <= 1e-6


def test_6_loss_semantics(criterion):
    with criterion(6, "loss semantics") as notes:
        rng = np.random.default_rng(6)
        worst = 0.0
        for _ in range(100):
            e, w = rng.normal(size=16), rng.normal(size=(7, 16))
            target = int(rng.integers(7))
            cos = (w / np.linalg.norm(w, axis=1, keepdims=True)) @ (e / np.linalg.norm(e))
            z = 15 * cos
            ce = -(z[target] - math.log(sum(math.exp(v) for v in z)))
            got = arcface_focal_loss(e, w, target, ArcFaceConfig(7, margin=0.0, gamma=0.0))
            worst = max(worst, abs(got - ce), abs(focal_cross_entropy(z, target, 0.0) - ce))
        assert worst <= 1e-7

        checked = 0
        for _ in range(100):
            e, w = rng.normal(size=8), rng.normal(size=(4, 8))
            cos_t = float(w[0] @ e / (np.linalg.norm(w[0]) * np.linalg.norm(e)))
            if math.acos(cos_t) >= math.pi - 0.5:
                continue
            losses = [arcface_focal_loss(e, w, 0, ArcFaceConfig(4, margin=m))
                      for m in (0.0, 0.1, 0.2, 0.3, 0.4, 0.5)]
            assert all(b >= a for a, b in zip(losses, losses[1:]))
            checked += 1

        cfg = ArcFaceConfig(10)
        for _ in range(100):
            e, w = rng.normal(size=16), rng.normal(size=(10, 16))
            target = int(rng.integers(10))

            def loss(x):
                return arcface_focal_loss(x, w, target, cfg)

            g = numeric_gradient(loss, e)
            assert loss(e - 1e-3 * g / np.linalg.norm(g)) < loss(e)
        notes += [f"CE reduction error {worst:.1e}", f"margin grid on {checked} points"]


def test_7_latency_ordering(criterion, default_model):
    with criterion(7, "stream latency < batch latency at 5 s, stream RTF < 1") as notes:
        recs = {r.mode: r for r in run_bench(default_model, [5.0], runs=3, pacing=True)}
        b, s = recs["batch"], recs["stream"]
        notes += [f"batch {b.latency_ms:.2f} ms", f"stream {s.latency_ms:.2f} ms",
                  f"stream RTF {s.rtf:.4f}", b.device_label]
        assert s.latency_ms < b.latency_ms
        assert s.rtf < 1


def test_8_eval_eer_smoke(criterion, default_cfg, tmp_path, capsys):
    with criterion(8, "eval-eer smoke test, 20 synthetic trials") as notes:
        save_model(tmp_path / "m.svw", default_cfg, random_init(default_cfg, 3))
        wavs = tmp_path / "wavs"
        wavs.mkdir()
        rng = np.random.default_rng(8)
        for i in range(10):
            write_wav(wavs / f"u{i}.wav", noise_pcm(int(rng.integers(8000, 24000)), seed=i,
                                                    scale=500 + 300 * i))
        lines = []
        for j in range(20):
            a, b = rng.choice(10, size=2, replace=False)
            lines.append(f"{j % 2} u{a}.wav u{b if j % 2 == 0 else a}.wav")
        (tmp_path / "trials.txt").write_text("\n".join(lines) + "\n")
        code = cli.main(["eval-eer", "--model", str(tmp_path / "m.svw"), "--trials",
                         str(tmp_path / "trials.txt"), "--wav-root", str(wavs)])
        res = json.loads(capsys.readouterr().out)
        notes.append(f"EER {res['eer_percent']}%")
        assert code == 0 and res["trials"] == 20
        assert 0.0 <= res["eer"] <= 1.0
