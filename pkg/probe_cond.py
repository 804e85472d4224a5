"""Probe conditional routing under different oracle shapes (30 s windows)."""
import sys
import time

import numpy as np

from breathgan.classifiers import default_classifier_set, fit
from breathgan.data import APNEIC, NON_APNEIC, TRAIN, TEST, build_dataset, split_by_events
from breathgan.experiments import balanced_sd_builder
from breathgan.gan import GanConfig, new_model, train
from breathgan.metrics import accuracy_of, mmd_with_optimized_kernel, t_metric
from breathgan.oracle import OracleRecordingSpec, OracleSpec, generate_corpus


def run(tag, ws, freq, drop, span, noise, hours, seed=7, epochs=200):
    t0 = time.time()
    recs = [
        OracleRecordingSpec("a01", hours, 0.62, freq, drop, noise, 0.0, span),
        OracleRecordingSpec("a02", hours, 0.58, freq, drop, noise, 0.0, span),
        OracleRecordingSpec("c01", hours, 0.05, freq, drop, noise, 0.0, span),
        OracleRecordingSpec("c02", hours, 0.08, freq, drop, noise, 0.0, span),
        OracleRecordingSpec("b01", hours, 0.04, freq, drop, noise, 0.0, span),
    ]
    spec = OracleSpec(seed=11, sample_rate_hz=4, window_seconds=ws, recordings=recs)
    ds = split_by_events(build_dataset(generate_corpus(spec)),
                         (0.8, 0.2 - 1e-9, 1e-9), seed=1)
    rd_train, held = ds.subset(TRAIN), ds.subset(TEST)
    cfg = GanConfig(hidden_size=32, minibatch_size=50, noise_dim=4,
                    sequence_length=ws, epochs=epochs, checkpoint_every=10, seed=seed)
    m = new_model(cfg)
    builder = balanced_sd_builder(300)
    mmd0, _, _ = mmd_with_optimized_kernel(held, builder(m, 999), 42)
    hist, ck = [], {}

    def cb(snap):
        v, _, _ = mmd_with_optimized_kernel(held, builder(snap, 1000 + snap.epoch), 42)
        hist.append((snap.epoch, v))
        ck[snap.epoch] = snap

    m, _ = train(m, rd_train, callback=cb)
    be, bm = min(hist, key=lambda x: x[1])
    sd = builder(ck[be], 777)
    # condition-routing diagnostic: energy gap between the two requested classes
    e_apneic = np.mean([np.abs(w.values).mean() for w in sd if w.label == APNEIC])
    e_non = np.mean([np.abs(w.values).mean() for w in sd if w.label == NON_APNEIC])
    r_apneic = np.mean([np.abs(w.values).mean() for w in held if w.label == APNEIC])
    r_non = np.mean([np.abs(w.values).mean() for w in held if w.label == NON_APNEIC])
    specs = default_classifier_set(seed=3)
    tstr_per, trts_per = {}, {}
    for s in specs:
        tstr_per[s.kind] = accuracy_of(fit(s, sd), held)
        trts_per[s.kind] = accuracy_of(fit(s, held), sd)
    tstr_v = float(np.mean(list(tstr_per.values())))
    trts_v = float(np.mean(list(trts_per.values())))
    print(f"[{tag}] mmd0 {mmd0:.4f} best@{be} {bm:.4f} ratio {bm/mmd0:.3f} "
          f"T {t_metric(tstr_v, trts_v):.3f} (TSTR {tstr_v:.3f} TRTS {trts_v:.3f}) "
          f"| sd energy A {e_apneic:.3f} N {e_non:.3f} vs real A {r_apneic:.3f} "
          f"N {r_non:.3f} | {time.time()-t0:.0f}s", flush=True)
    print(f"   per-clf TSTR {tstr_per}", flush=True)
    print(f"   per-clf TRTS {trts_per}", flush=True)


if __name__ == "__main__":
    which = sys.argv[1]
    if which == "A":
        run("A ws30 f1/30 n.15", 30, 1 / 30, 1.0, 1.0, 0.15, 1.25)
    elif which == "B":
        run("B ws30 f1/30 n.25", 30, 1 / 30, 1.0, 1.0, 0.25, 1.25)
    elif which == "C":
        run("C ws30 f1/15 n.15", 30, 1 / 15, 1.0, 1.0, 0.15, 1.25)
    elif which == "D":
        run("D ws60 f1/60 n.25", 60, 1 / 60, 1.0, 1.0, 0.25, 2.5)

def variant(tag, seed, noise):
    run(f"{tag} seed{seed} n{noise}", 30, 1 / 30, 1.0, 1.0, noise, 1.25, seed=seed)
