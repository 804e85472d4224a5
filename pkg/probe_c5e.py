import time
import numpy as np
from breathgan.data import build_dataset, split_by_events, TRAIN, TEST
from breathgan.experiments import balanced_sd_builder
from breathgan.gan import GanConfig, new_model, train
from breathgan.metrics import mmd_with_optimized_kernel, t_metric, tstr, trts
from breathgan.oracle import OracleRecordingSpec, OracleSpec, generate_corpus
from breathgan.classifiers import default_classifier_set

t0 = time.time()
freq, noise, span = 1/60, 0.15, 1.0
drop = 0.75
recs = [
    OracleRecordingSpec("a01", 2.4, 0.62, freq, drop, noise, 0.0, span),
    OracleRecordingSpec("a02", 2.4, 0.58, freq, drop, noise, 0.0, span),
    OracleRecordingSpec("c01", 2.4, 0.05, freq, drop, noise, 0.0, span),
    OracleRecordingSpec("c02", 2.4, 0.08, freq, drop, noise, 0.0, span),
    OracleRecordingSpec("b01", 2.4, 0.04, freq, drop, noise, 0.0, span),
]
spec = OracleSpec(seed=11, sample_rate_hz=4, window_seconds=60, recordings=recs)
ds = split_by_events(build_dataset(generate_corpus(spec)), (0.8, 0.2 - 1e-9, 1e-9), seed=1)
rd_train, held = ds.subset(TRAIN), ds.subset(TEST)
print(f"train {len(rd_train)} held {len(held)}", flush=True)

cfg = GanConfig(hidden_size=32, minibatch_size=50, noise_dim=4, sequence_length=60,
                epochs=200, checkpoint_every=10, seed=7)
m = new_model(cfg)
builder = balanced_sd_builder(300)
mmd0, _, _ = mmd_with_optimized_kernel(held, builder(m, 999), 42)
print(f"epoch0 mmd {mmd0:.5f}", flush=True)
hist, ck = [], {}
def cb(snap):
    v, s, t = mmd_with_optimized_kernel(held, builder(snap, 1000 + snap.epoch), 42)
    hist.append((snap.epoch, v)); ck[snap.epoch] = snap
    print(f"epoch {snap.epoch:3d} mmd {v:.5f} ratio {v/mmd0:.3f} [{time.time()-t0:.0f}s]", flush=True)
m, _ = train(m, rd_train, callback=cb)
be, bm = min(hist, key=lambda x: x[1])
print(f"BEST epoch {be} mmd {bm:.5f} ratio {bm/mmd0:.3f}", flush=True)
sd = builder(ck[be], 777)
specs = default_classifier_set(seed=3)
a = tstr(sd, held, specs); b = trts(held, sd, specs)
print(f"TSTR {a:.4f} TRTS {b:.4f} T {t_metric(a,b):.4f} total {time.time()-t0:.0f}s", flush=True)
