"""Smoke test for the binspp_py extension.

Build and install first:
    maturin build --release -m crates/python/Cargo.toml -o dist
    pip install dist/binspp-*.whl
"""

import math
import os
import random
import sys
import tempfile

import binspp_py as b


def check(cond, what):
    print(("ok   " if cond else "FAIL ") + what)
    return cond


def main():
    rng = random.Random(0)
    n = 16000
    # Half-second bursts with a smooth envelope; hard gating would splatter
    # clicks across every bin.
    env = [math.sin(math.pi * (i % 8000) / 8000) ** 2 if (i // 8000) % 2 else 0.0 for i in range(n)]
    tone = [0.3 * e * math.sin(2 * math.pi * 1000 * i / n) for i, e in enumerate(env)]
    noise = [rng.gauss(0.0, 0.05) for _ in range(n)]
    noisy, scaled, gain = b.mix_at_snr(tone, noise, 5.0, 1)

    results = []
    p = b.power_spectrogram(noisy)
    results.append(check(len(p) == 129 and len(p[0]) == 124, "power spectrogram is 129 x 124"))

    target = b.oracle_spp(p, b.power_spectrogram(scaled))
    labels = b.labels(b.power_spectrogram(tone))
    scores = [v for row in target for v in row]
    flat = [v for row in labels for v in row]
    a = b.auc(scores, flat)
    results.append(check(a > 0.75, f"oracle target AUC {a:.3f}"))

    spp, _ = b.unbiased_mmse_spp(p)
    a = b.auc([v for row in spp for v in row], flat)
    results.append(check(0.5 < a <= 1.0, f"baseline AUC {a:.3f} above chance"))

    m = b.Bundle.untrained()
    results.append(check(m.count_params() == 1548 and m.count_macs() == 774, repr(m)))
    out = m.infer(noisy)
    results.append(check(all(0.0 <= v <= 1.0 for row in out for v in row), "inference output in [0, 1]"))

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "bundle.json")
        m.save(path)
        results.append(check(b.Bundle.load(path).infer(noisy) == out, "bundle round trip reproduces output"))
        try:
            b.Bundle.load(os.path.join(tmp, "nope.json"))
            results.append(check(False, "missing bundle raises"))
        except FileNotFoundError:
            results.append(check(True, "missing bundle raises FileNotFoundError"))

    return 0 if all(results) else 1


if __name__ == "__main__":
    sys.exit(main())
