"""Full criterion-5 scale probe: 600 windows, hidden 32, 200 epochs."""
import time
import numpy as np
from breathgan.data import build_dataset, split_by_events, TRAIN, TEST
from breathgan.experiments import balanced_sd_builder
from breathgan.gan import GanConfig, new_model, train
from breathgan.metrics import mmd_with_optimized_kernel, t_metric, tstr, trts
from breathgan.oracle import OracleRecordingSpec, OracleSpec, generate_corpus
from breathgan.classifiers import default_classifier_set

t0 = time.time()
freq, noise = 1/30, 0.15
spec = OracleSpec(seed=11, sample_rate_hz=4, window_seconds=60, recordings=[
    OracleRecordingSpec("a01", 2.4, 0.62, freq, 1.0, noise, 0.0, 1.0),
    OracleRecordingSpec("a02", 2.4, 0.58, freq, 1.0, noise, 1.1, 1.0),
    OracleRecordingSpec("c01", 2.4, 0.05, freq, 1.0, noise, 2.2, 1.0),
    OracleRecordingSpec("c02", 2.4, 0.08, freq, 1.0, noise, 3.3, 1.0),
    OracleRecordingSpec("b01", 2.4, 0.04, freq, 1.0, noise, 4.4, 1.0),
])
ds = split_by_events(build_dataset(generate_corpus(spec)), (0.8, 0.2 - 1e-9, 1e-9), seed=1)
rd_train, held = ds.subset(TRAIN), ds.subset(TEST)
print(f"train {len(rd_train)} held {len(held)}", flush=True)

cfg = GanConfig(hidden_size=32, minibatch_size=50, noise_dim=4, sequence_length=60,
                epochs=200, checkpoint_every=10, seed=7)
m = new_model(cfg)
builder = balanced_sd_builder(300)
sd0 = builder(m, 999)
mmd0, _, _ = mmd_with_optimized_kernel(held, sd0, 42)
print(f"epoch0 mmd {mmd0:.5f}", flush=True)
hist = []
ck = {}
def cb(snap):
    sd = builder(snap, 1000 + snap.epoch)
    v, s, t = mmd_with_optimized_kernel(held, sd, 42)
    hist.append((snap.epoch, v))
    ck[snap.epoch] = snap
    print(f"epoch {snap.epoch:3d} mmd {v:.5f} ratio {v/mmd0:.3f} [{time.time()-t0:.0f}s]", flush=True)
m, ckpts = train(m, rd_train, callback=cb)
be, bm = min(hist, key=lambda x: x[1])
print(f"BEST epoch {be} mmd {bm:.5f} ratio {bm/mmd0:.3f}", flush=True)
best = ck[be]
sd = builder(best, 777)
specs = default_classifier_set(seed=3)
a = tstr(sd, held, specs); b = trts(held, sd, specs)
print(f"TSTR {a:.4f} TRTS {b:.4f} T {t_metric(a,b):.4f} total {time.time()-t0:.0f}s", flush=True)
