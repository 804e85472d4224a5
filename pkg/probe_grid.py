"""Grid probe: which oracle settings let the pinned GAN config learn?"""
import sys
import time

import numpy as np

from breathgan.data import build_dataset, NON_APNEIC
from breathgan.gan import GanConfig, generate, new_model, train
from breathgan.metrics import mmd2_unbiased, median_heuristic_sigma
from breathgan.oracle import OracleRecordingSpec, OracleSpec, generate_corpus
from breathgan.experiments import balanced_sd_builder


def quick_mmd(real, sd):
    sigma = median_heuristic_sigma(real, sd)
    return mmd2_unbiased(real, sd, sigma)


def run(freq, noise, epochs, seed=7, n_windows=240, hidden=32):
    spec = OracleSpec(seed=11, sample_rate_hz=4, window_seconds=60, recordings=[
        OracleRecordingSpec("a01", hours=n_windows / 120, apneic_fraction=0.6,
                            breathing_freq_hz=freq, noise_std=noise, subject_phase=0.0),
        OracleRecordingSpec("c01", hours=n_windows / 120, apneic_fraction=0.06,
                            breathing_freq_hz=freq, noise_std=noise, subject_phase=1.6),
    ])
    ds = build_dataset(generate_corpus(spec))
    rd = ds.windows
    real = np.stack([w.values for w in rd])
    cfg = GanConfig(hidden_size=hidden, minibatch_size=50, noise_dim=4,
                    sequence_length=60, epochs=epochs, checkpoint_every=epochs // 8,
                    seed=seed)
    m = new_model(cfg)
    builder = balanced_sd_builder(200)
    sd0 = np.stack([w.values for w in builder(m, 99)])
    mmd0 = quick_mmd(real, sd0)
    history = []
    def cb(snap):
        sd = np.stack([w.values for w in builder(snap, 100 + snap.epoch)])
        history.append((snap.epoch, quick_mmd(real, sd), sd.std()))
    t0 = time.time()
    m, ckpts = train(m, rd, callback=cb)
    best = min(history, key=lambda x: x[1])
    print(f"freq={freq} noise={noise} epochs={epochs}: mmd0={mmd0:.4f} "
          f"best@{best[0]} mmd={best[1]:.4f} ratio={best[1]/mmd0:.3f} "
          f"sd_std={best[2]:.3f} ({time.time()-t0:.0f}s)", flush=True)
    for e, v, s in history:
        print(f"   epoch {e:4d} mmd {v:.4f} std {s:.3f}", flush=True)


if __name__ == "__main__":
    which = sys.argv[1] if len(sys.argv) > 1 else "all"
    if which in ("all", "a"):
        run(freq=0.10, noise=0.10, epochs=200)
    if which in ("all", "b"):
        run(freq=0.05, noise=0.25, epochs=200)
    if which in ("all", "c"):
        run(freq=0.10, noise=0.25, epochs=600)
    if which in ("all", "d"):
        run(freq=0.25, noise=0.25, epochs=200)
