use std::ffi::CString;
use std::sync::Once;

use binspp_py::{from_rows, parse_config, to_rows};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn python() {
    static INIT: Once = Once::new();
    INIT.call_once(|| {
        use binspp_py::binspp_py;
        pyo3::append_to_inittab!(binspp_py);
        Python::initialize();
    });
}

/// Runs a Python snippet with `binspp_py` imported and `tmp` bound to a
/// scratch directory.
fn run(code: &str) {
    python();
    let dir = tempfile::tempdir().unwrap();
    Python::attach(|py| {
        let globals = PyDict::new(py);
        globals
            .set_item("tmp", dir.path().to_str().unwrap())
            .unwrap();
        let src = CString::new(format!("import binspp_py as b\n{code}")).unwrap();
        if let Err(e) = py.run(&src, Some(&globals), None) {
            e.print(py);
            panic!("python snippet failed");
        }
    });
}

#[test]
fn rows_round_trip() {
    let rows = vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]];
    let a = from_rows(&rows).unwrap();
    assert_eq!(a.dim(), (2, 3));
    assert_eq!(a[[1, 0]], 4.0);
    assert_eq!(to_rows(&a), rows);
    assert!(from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    assert_eq!(from_rows(&[]).unwrap().dim(), (0, 0));
}

#[test]
fn config_defaults_and_rejection() {
    let c: binspp::model::ModelConfig = parse_config(None).unwrap();
    assert_eq!(c, binspp::model::ModelConfig::default());
    let c: binspp::model::ModelConfig = parse_config(Some(r#"{"epochs": 4}"#)).unwrap();
    assert_eq!(c.epochs, 4);
    python();
    assert!(parse_config::<binspp::model::ModelConfig>(Some(r#"{"epoch": 4}"#)).is_err());
}

#[test]
fn spectral_functions() {
    run(r#"
assert all(abs(a - e) < 1e-15 for a, e in zip(b.hann_window(4), [0.0, 0.5, 1.0, 0.5]))
assert (b.FRAME_LEN, b.HOP) == (256, 128)
import math
x = [math.sin(2 * math.pi * 1000 * i / 16000) for i in range(16000)]
p = b.power_spectrogram(x)
assert len(p) == 129 and len(p[0]) == 124
assert max(range(129), key=lambda k: p[k][10]) == 16
lp = b.log_power([[0.0, 1.0]])
assert lp[0][1] == 0.0 and abs(lp[0][0] - math.log(1e-10)) < 1e-12
try:
    b.hann_window(3)
    raise AssertionError("odd length accepted")
except ValueError:
    pass
"#);
}

#[test]
fn targets_labels_and_baseline() {
    run(r#"
import math
spp = b.oracle_spp([[0.0, 10.0]], [[1.0, 1.0]], '{"noise_smoothing": 0.5}')
assert abs(spp[0][0] - 0.029742) < 1e-6 and abs(spp[0][1] - 0.997992) < 1e-6
lab = b.labels([[1.0, 1e-7, 0.0]])
assert lab == [[1, 0, 0]]
import random
rng = random.Random(1)
noise = [rng.gauss(0.0, 0.1) for _ in range(16000)]
s, psd = b.unbiased_mmse_spp(b.power_spectrogram(noise))
assert len(s) == 129 and len(psd[0]) == 124
assert all(0.0 <= v <= 1.0 for row in s for v in row)
assert sum(map(sum, s)) / (129 * 124) < 0.3
try:
    b.unbiased_mmse_spp([[1.0]], '{"bogus": 1}')
    raise AssertionError("unknown field accepted")
except ValueError:
    pass
"#);
}

#[test]
fn roc_metrics() {
    run(r#"
assert b.auc([0.9, 0.8, 0.1, 0.2], [1, 1, 0, 0]) == 1.0
pts = b.roc_curve([0.5, 0.5], [1, 0])
assert pts[0] == (0.0, 0.0) and pts[-1] == (1.0, 1.0)
assert abs(b.pd_at_pfa([0.9, 0.8, 0.1, 0.2], [1, 1, 0, 0]) - 1.0) < 1e-12
try:
    b.auc([0.1, 0.2], [0, 0])
    raise AssertionError("single class accepted")
except ValueError:
    pass
assert b.gru_param_count(1, 1) == 12 and b.gru_macs_per_step(1, 1) == 6
"#);
}

#[test]
fn bundle_class() {
    run(r#"
import os
m = b.Bundle.untrained()
assert m.num_models == 129
assert m.count_params() == 1548 and m.count_macs() == 774
t = b.Bundle.untrained('{"kind": "typical", "hidden": 129}')
assert t.count_params() == 100620 and t.num_models == 1
x = [((i * 7919) % 2001 - 1000) / 4000 for i in range(16000)]
out = m.infer(x)
assert len(out) == 129 and len(out[0]) == 124
assert all(0.0 <= v <= 1.0 for row in out for v in row)
path = os.path.join(tmp, "bundle.json")
m.save(path)
again = b.Bundle.load(path)
assert again.to_json() == m.to_json()
assert again.infer(x) == out
assert b.Bundle.from_json(m.to_json()).fingerprint == m.fingerprint
assert "params=1548" in repr(m)
try:
    b.Bundle.load(os.path.join(tmp, "missing.json"))
    raise AssertionError("missing file loaded")
except FileNotFoundError:
    pass
try:
    m.infer([0.0] * 100)
    raise AssertionError("short input accepted")
except ValueError:
    pass
"#);
}

#[test]
fn train_from_manifest() {
    run(r#"
import json, os, random
rng = random.Random(5)
entries = []
for i in range(2):
    clean = [0.3 * __import__("math").sin(0.4 * n) if (n // 2000) % 2 else 0.0 for n in range(8000)]
    noise = [rng.gauss(0.0, 0.05) for _ in range(8000)]
    cp, np_ = os.path.join(tmp, f"c{i}.wav"), os.path.join(tmp, f"n{i}.wav")
    b.write_wav(cp, clean)
    b.write_wav(np_, noise)
    entries.append({"clean": cp, "noise": np_, "snr_db": 5.0, "seed": i})
mpath = os.path.join(tmp, "manifest.json")
with open(mpath, "w") as f:
    json.dump(entries, f)
cfg = '{"epochs": 3, "batch_utterances": 1, "lr": 0.01}'
bundle, losses = b.Bundle.train(mpath, cfg)
assert len(losses) == 3 and losses[-1] < losses[0]
again, _ = b.Bundle.train(mpath, cfg)
assert again.to_json() == bundle.to_json()
"#);
}
