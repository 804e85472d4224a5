"""Dev probe for the GAN-learning acceptance target (criterion 5 shape)."""
import time

import numpy as np

from breathgan.data import APNEIC, NON_APNEIC, build_dataset, split_by_events, TRAIN, TEST
from breathgan.experiments import balanced_sd_builder, derive_seed
from breathgan.gan import GanConfig, generate, new_model, train
from breathgan.metrics import evaluate_quality, mmd_with_optimized_kernel, t_metric, tstr, trts
from breathgan.oracle import OracleRecordingSpec, OracleSpec, generate_corpus
from breathgan.classifiers import default_classifier_set

t_start = time.time()
spec = OracleSpec(
    seed=11,
    sample_rate_hz=20,
    window_seconds=60,
    recordings=[
        OracleRecordingSpec("a01", hours=2.0, apneic_fraction=0.65, breathing_freq_hz=0.25,
                            noise_std=0.10, subject_phase=0.0),
        OracleRecordingSpec("a02", hours=2.0, apneic_fraction=0.60, breathing_freq_hz=0.25,
                            noise_std=0.10, subject_phase=0.8),
        OracleRecordingSpec("c01", hours=2.0, apneic_fraction=0.05, breathing_freq_hz=0.25,
                            noise_std=0.10, subject_phase=1.6),
        OracleRecordingSpec("c02", hours=2.0, apneic_fraction=0.08, breathing_freq_hz=0.25,
                            noise_std=0.10, subject_phase=2.4),
        OracleRecordingSpec("b01", hours=2.0, apneic_fraction=0.04, breathing_freq_hz=0.25,
                            noise_std=0.10, subject_phase=3.2),
    ],
)
corpus = generate_corpus(spec)
ds = split_by_events(build_dataset(corpus), (0.75, 0.25 - 1e-9, 1e-9), seed=1)
rd_train = ds.subset(TRAIN)
held_out = ds.subset(TEST)
print(f"train {len(rd_train)} held-out {len(held_out)}", flush=True)

cfg = GanConfig(hidden_size=32, minibatch_size=50, noise_dim=4, sequence_length=60,
                epochs=200, checkpoint_every=10, seed=7)
model = new_model(cfg)
builder = balanced_sd_builder(300)

sd0 = builder(model, 999)
mmd0, sig0, _ = mmd_with_optimized_kernel(held_out, sd0, 42)
print(f"epoch0 mmd {mmd0:.5f} sigma {sig0:.3f}", flush=True)

mmds = []
def cb(snap):
    sd = builder(snap, 1000 + snap.epoch)
    m, s, t = mmd_with_optimized_kernel(held_out, sd, 42)
    mmds.append((snap.epoch, m))
    print(f"epoch {snap.epoch}: mmd {m:.5f} (sigma {s:.3f}, tstat {t:.2f}) "
          f"[{time.time()-t_start:.0f}s]", flush=True)

model, ckpts = train(model, rd_train, callback=cb)
best_epoch, best_mmd = min(mmds, key=lambda x: x[1])
print(f"best ckpt epoch {best_epoch} mmd {best_mmd:.5f} ratio {best_mmd/mmd0:.3f}", flush=True)

best = ckpts[[c.epoch for c in ckpts].index(best_epoch)]
sd = builder(best, 777)
specs = default_classifier_set(seed=3)
tstr_v = tstr(sd, held_out, specs)
trts_v = trts(held_out, sd, specs)
print(f"TSTR {tstr_v:.4f} TRTS {trts_v:.4f} T {t_metric(tstr_v, trts_v):.4f}", flush=True)
print(f"total {time.time()-t_start:.0f}s", flush=True)
