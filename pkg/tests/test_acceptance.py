"""Exit criteria.  Each test records one PASS/FAIL line, printed in the terminal summary."""

import os
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager

import numpy as np
import pytest

from melsmooth.augment import (FilterSizeDistribution, SmoothingPolicy, augment_step, draw_sizes, make_kernel,
                               sample_size, smooth_mel, triangular_profile)
from melsmooth.cli import main
from melsmooth.demo import make_demo_corpus
from melsmooth.dsp import Waveform
from melsmooth.features import (AcousticFeature, BadMagicError, TruncatedFileError, UnsupportedVersionError,
                                decode_afv1, encode_afv1, list_feature_files, read_afv1)
from melsmooth.metrics import msd
from melsmooth.pitch import pyin_track
from melsmooth.rng import SplitMix64
from melsmooth.server import BatchClient, BatchRequest, BatchServer, client_fetch

from .conftest import SR, dir_bytes, sine
from .oracles import eq_profile, msd_loops

pytestmark = pytest.mark.acceptance

RESULTS = []


@contextmanager
def criterion(number, name, budget_s):
    """Run a criterion body, enforce its runtime budget and record the outcome."""
    t0 = time.perf_counter()
    status, detail = "FAIL", ""
    try:
        yield
        elapsed = time.perf_counter() - t0
        if elapsed >= budget_s:
            detail = f"runtime {elapsed:.2f}s >= {budget_s}s"
            raise AssertionError(detail)
        status, detail = "PASS", f"{elapsed:.2f}s (budget {budget_s}s)"
    except BaseException as exc:
        detail = detail or f"{type(exc).__name__}: {exc}".splitlines()[0][:160]
        raise
    finally:
        RESULTS.append(f"{status} [{number:2d}] {name}: {detail}")


def dense_oracle(grid, l_t, l_f):
    """Full 2-D kernel from the closed form, applied tap by tap over a replicate-padded grid."""
    h = np.outer(eq_profile(l_t), eq_profile(l_f))
    ht, hf = (l_t - 1) // 2, (l_f - 1) // 2
    padded = np.pad(grid, ((ht, ht), (hf, hf)), mode="edge")
    n_t, n_f = grid.shape
    out = np.zeros(grid.shape)
    for i in range(l_t):
        for j in range(l_f):
            out += h[i, j] * padded[i:i + n_t, j:j + n_f]
    return out


def test_c01_kernel_exactness():
    with criterion(1, "kernel exactness", 1.0):
        for l in range(1, 22, 2):
            got = triangular_profile(l)
            assert np.max(np.abs(got - np.array(eq_profile(l)))) <= 1e-12
        assert triangular_profile(3).tolist() == [0.25, 0.5, 0.25]
        assert triangular_profile(5).tolist() == [1 / 9, 2 / 9, 3 / 9, 2 / 9, 1 / 9]


def test_c02_sampling_law():
    with criterion(2, "sampling law", 2.0):
        dist = FilterSizeDistribution(6, 2 / 3)
        rng = SplitMix64.for_context(2024, 0, "acceptance")
        draws = np.array([sample_size(dist, rng) for _ in range(100_000)])
        assert 0.657 <= np.mean(draws == 1) <= 0.677, np.mean(draws == 1)
        for l in (3, 5, 7, 9, 11):
            assert 0.0617 <= np.mean(draws == l) <= 0.0717, (l, np.mean(draws == l))
        policy = SmoothingPolicy()
        joint = [draw_sizes(policy, 450_000 + (i % 150_000), f"utt{i // 150_000}") == (1, 1) for i in range(100_000)]
        assert abs(np.mean(joint) - 4 / 9) <= 0.01, np.mean(joint)


def test_c03_smoothing_oracle_equivalence():
    with criterion(3, "smoothing oracle equivalence", 30.0):
        rng = np.random.default_rng(3)
        shapes = [(1, 1), (64, 100), (1, 100), (64, 1)]
        shapes += [(int(rng.integers(1, 65)), int(rng.integers(1, 101))) for _ in range(100)]
        compared = rejected = 0
        for n_t, n_f in shapes:
            grid = rng.uniform(-100.0, 40.0, (n_t, n_f))
            for l_t in range(1, 12, 2):
                for l_f in range(1, 6, 2):
                    kernel = make_kernel(l_t, l_f)
                    if l_t > 2 * n_t + 1:
                        with pytest.raises(ValueError):
                            smooth_mel(grid, kernel)
                        rejected += 1
                        continue
                    err = np.max(np.abs(smooth_mel(grid, kernel) - dense_oracle(grid, l_t, l_f)))
                    assert err <= 1e-9, (n_t, n_f, l_t, l_f, err)
                    compared += 1
        assert len(shapes) >= 100 and compared + rejected == len(shapes) * 18


def test_c04_fig2_desk_reproduction(tmp_path, capsys):
    with criterion(4, "MSD histogram shift on demo corpus", 120.0):
        manifest = make_demo_corpus(str(tmp_path / "wav"), n_utterances=20, seed=0)
        feat = str(tmp_path / "feat")
        assert main(["extract", manifest, feat, "--jobs", "2"]) == 0
        assert len(list_feature_files(feat)) >= 20
        capsys.readouterr()
        hist = tmp_path / "hist"
        assert main(["sweep", feat, "--sizes", "1x1", "3x1", "5x1", "5x3", "--hist-dir", str(hist)]) == 0
        rows = [l.split("\t") for l in capsys.readouterr().out.splitlines() if not l.startswith("#")]
        sizes = [(int(r[0]), int(r[1])) for r in rows]
        means = [float(r[2]) for r in rows]
        assert sizes == [(1, 1), (3, 1), (5, 1), (5, 3)]
        assert means[0] == 0.0 and means[1] < means[2] < means[3], means
        identity = [l.split("\t") for l in (hist / "hist_1x1.tsv").read_text().splitlines()[1:]]
        assert float(identity[0][0]) == 0.0 and float(identity[0][2]) == 1.0
        assert all(float(r[2]) == 0.0 for r in identity[1:])


def test_c05_schedule_contract():
    with criterion(5, "schedule contract", 1.0):
        policy = SmoothingPolicy()
        feat = AcousticFeature(np.linspace(-80, 0, 12 * 102).reshape(12, 102), "probe")
        probes = list(range(0, 2000)) + list(range(448_000, 450_000)) + list(range(2000, 448_000, 97))
        for step in probes:
            out, l_t, l_f = augment_step(feat, policy, step, 600_000)
            assert (l_t, l_f) == (1, 1) and out.values.tobytes() == feat.values.tobytes(), step
        entered = 0
        for i in range(64):
            uid = f"probe{i}"
            _, l_t, l_f = augment_step(feat, policy, 450_000, 600_000, uid)
            assert (l_t, l_f) == draw_sizes(policy, 450_000, uid)
            entered += (l_t, l_f) != (1, 1)
        assert entered > 0


def test_c06_pitch_sanity():
    with criterion(6, "pitch sanity", 10.0):
        tr = pyin_track(Waveform(sine(220.0, 2.0)))
        interior = tr.voicing[4:-4]
        assert interior.mean() >= 0.9
        assert abs(np.median(tr.f0_hz[tr.voicing > 0]) / 220.0 - 1.0) <= 0.01
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            silent = pyin_track(Waveform(np.zeros(2 * SR)))
            noise = pyin_track(Waveform(0.3 * np.random.default_rng(6).standard_normal(2 * SR)))
        assert np.mean(silent.voicing == 0) >= 0.99
        assert np.mean(noise.voicing == 0) >= 0.99


def test_c07_msd_exactness():
    with criterion(7, "MSD exactness", 5.0):
        a = np.zeros((1, 100))
        b = a.copy()
        b[0, :2] = (3.0, 4.0)
        assert msd(a, b).per_frame.tolist() == [5.0]
        rng = np.random.default_rng(7)
        for _ in range(50):
            x, y = rng.uniform(-100, 40, (2, int(rng.integers(1, 30)), 100))
            assert np.array_equal(msd(x, y).per_frame, msd(y, x).per_frame)
            assert not msd(x, x).per_frame.any()
            assert np.max(np.abs(msd(x, y).per_frame - msd_loops(x, y))) <= 1e-9


def _pipeline(manifest, root, jobs):
    feat, norm, aug = (os.path.join(root, d) for d in ("feat", "norm", "aug"))
    stats = os.path.join(root, "stats.json")
    assert main(["extract", manifest, feat, "--jobs", str(jobs)]) == 0
    assert main(["stats", feat, stats, "--jobs", str(jobs)]) == 0
    assert main(["normalize", feat, stats, norm, "--jobs", str(jobs)]) == 0
    assert main(["augment", norm, aug, "--step", "512345", "--total", "600000", "--seed", "8",
                 "--jobs", str(jobs)]) == 0
    return {d: dir_bytes(os.path.join(root, d)) for d in ("feat", "norm", "aug")}, open(stats, "rb").read()


def test_c08_end_to_end_determinism(demo_wavs, tmp_path):
    with criterion(8, "end-to-end determinism", 120.0):
        runs = [_pipeline(demo_wavs, str(tmp_path / name), jobs)
                for name, jobs in (("a", 1), ("b", 1), ("c", 8))]
        assert runs[0] == runs[1] == runs[2]
        log = runs[0][0]["aug"]["augment_log.tsv"].decode().splitlines()
        assert len(log) == 21 and any(not l.endswith("\t1\t1") for l in log[1:])


def test_c09_online_offline_equivalence(demo_features, tmp_path):
    with criterion(9, "online/offline equivalence", 30.0):
        ids = [uid for uid, _ in list_feature_files(demo_features)]
        rng = np.random.default_rng(9)
        triples = [(int(rng.integers(0, 2 ** 63)), int(rng.integers(400_000, 600_000)), ids[int(rng.integers(len(ids)))])
                   for _ in range(100)]
        smoothed = 0
        with BatchServer(demo_features, SmoothingPolicy()) as srv, BatchClient(srv.server_address) as client:
            for k, (seed, step, uid) in enumerate(triples):
                out = tmp_path / f"off{k}"
                assert main(["augment", demo_features, str(out), "--step", str(step), "--total", "600000",
                             "--seed", str(seed)]) == 0
                resp = client.fetch(BatchRequest(seed, step, 600_000, uid))
                offline = (out / f"{uid}.afv1").read_bytes()
                assert resp.payload == offline[20:]
                log = dict(l.split("\t", 1) for l in (out / "augment_log.tsv").read_text().splitlines()[1:])
                assert log[uid] == f"{resp.l_t}\t{resp.l_f}"
                smoothed += (resp.l_t, resp.l_f) != (1, 1)

            seed, step, uid = triples[0]
            req = BatchRequest(seed, step, 600_000, uid)
            with ThreadPoolExecutor(8) as pool:
                payloads = list(pool.map(lambda _: client_fetch(srv.server_address, req).payload, range(8)))
            assert len(set(payloads)) == 1
        assert smoothed > 0


def test_c10_serialization():
    with criterion(10, "AFV1 serialization", 10.0):
        rng = np.random.default_rng(10)
        for _ in range(1000):
            n, d = int(rng.integers(1, 200)), int(rng.integers(3, 130))
            vals = (rng.standard_normal((n, d)) * 100).astype(np.float32)
            back = decode_afv1(encode_afv1(AcousticFeature(vals)))
            assert back.values.tobytes() == vals.tobytes()
        good = encode_afv1(AcousticFeature(np.ones((4, 102), dtype=np.float32)))
        with pytest.raises(BadMagicError, match="bad magic"):
            decode_afv1(b"AFV2" + good[4:])
        with pytest.raises(UnsupportedVersionError):
            decode_afv1(good[:4] + (7).to_bytes(4, "little") + good[8:])
        with pytest.raises(TruncatedFileError):
            decode_afv1(good[:-1])
