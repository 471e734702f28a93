import math
import os

import numpy as np
import pytest

import pcgcls


def test_preprocess_resamples_and_standardizes():
    rng = np.random.default_rng(0)
    x = rng.standard_normal(4000)
    y = pcgcls.preprocess(x, 2000)
    assert y.shape == (2000,)
    assert abs(y.mean()) < 1e-9
    assert abs(y.std() - 1.0) < 1e-6


def test_bandpass_passes_midband_and_rejects_dc():
    mag = pcgcls.bandpass_response(np.array([0.0, 100.0]))
    assert mag[0] < 1e-9
    assert mag[1] >= 0.95


def test_synth_segment_mfcc_shapes():
    rec = pcgcls.synth(n_recordings=2, beats_per_recording=6, seed=5)[0]
    assert rec["label"] in ("normal", "abnormal")
    beats = pcgcls.segment(rec["samples"], rec["annotations"], rec["sample_rate_hz"])
    assert len(beats) == 6
    assert all(b.shape == (1000,) for b in beats)
    assert pcgcls.mfcc(beats[0]).shape == (96, 12)
    assert pcgcls.tvar(beats[0]).shape == (96, 12)
    padded = pcgcls.segment(rec["samples"], rec["annotations"], rec["sample_rate_hz"], "zpad1200")
    assert all(b.shape == (1200,) for b in padded)


def test_levinson_recovers_ar1():
    phi = 0.6
    r = np.array([phi**k for k in range(4)]) / (1 - phi**2)
    a, err = pcgcls.levinson(r, 3)
    assert np.allclose(a, [phi, 0.0, 0.0], atol=1e-12)
    assert math.isclose(err, 1.0, rel_tol=1e-12)


def test_evaluate_counts_macc():
    d = pcgcls.evaluate_counts(tp=8, tn=6, fp=2, fn=2)
    assert math.isclose(d["sensitivity"], 80.0)
    assert math.isclose(d["specificity"], 75.0)
    assert math.isclose(d["macc"], 77.5)


def test_fuse_tie_goes_abnormal():
    pn, pa, label = pcgcls.fuse_scores((0.7, 0.3), (0.3, 0.7))
    assert math.isclose(pn, pa)
    assert label == "abnormal"
    assert pcgcls.fuse_scores((0.9, 0.1), (0.6, 0.4))[2] == "normal"


def test_run_train_and_predict(tmp_path):
    ds = str(tmp_path / "ds")
    out = str(tmp_path / "out")
    pcgcls.run("synth", {"n_recordings": 6, "beats_per_recording": 8, "out": ds})
    assert os.path.exists(os.path.join(ds, "labels.csv"))
    pcgcls.run("train", {"data_root": ds, "model": "hmm", "hmm_components": 2, "hmm_max_iters": 2, "out": out})
    model = pcgcls.Model(os.path.join(out, "model.pcgm"))
    assert model.kind == "hmm"
    rec = pcgcls.synth(n_recordings=1, beats_per_recording=4, seed=9)[0]
    beats = pcgcls.segment(rec["samples"], rec["annotations"], rec["sample_rate_hz"])
    maps = np.stack([pcgcls.mfcc(b) for b in beats])
    p = model.predict(maps=maps)
    assert p.shape == (len(beats), 2)
    assert np.allclose(p.sum(axis=1), 1.0)


def test_errors_map_to_exception_types(tmp_path):
    with pytest.raises(pcgcls.ConfigError):
        pcgcls.run("synth", {"n_recordings": 0, "out": str(tmp_path)})
    with pytest.raises(pcgcls.PcgError):
        pcgcls.run("nonsense", {})
    with pytest.raises(pcgcls.DataError):
        pcgcls.Model(str(tmp_path / "missing.pcgm"))
