"""Shared fixtures: the desk-scale GAN training run used by the acceptance
criterion on learning signal and by the conditioning-effectiveness check."""

import time

import pytest

from breathgan.data import TEST, TRAIN, build_dataset, split_by_events
from breathgan.experiments import balanced_sd_builder
from breathgan.gan import GanConfig, new_model, train
from breathgan.metrics import mmd_with_optimized_kernel
from breathgan.oracle import OracleRecordingSpec, OracleSpec, generate_corpus


def gan_oracle_spec():
    """Five subjects, 750 windows of 30 s (600 train at an 80/20 split)."""
    recs = [
        OracleRecordingSpec("a01", 1.25, 0.62, 1 / 30, 1.0, 0.25, 0.0, 1.0),
        OracleRecordingSpec("a02", 1.25, 0.58, 1 / 30, 1.0, 0.25, 0.0, 1.0),
        OracleRecordingSpec("c01", 1.25, 0.05, 1 / 30, 1.0, 0.25, 0.0, 1.0),
        OracleRecordingSpec("c02", 1.25, 0.08, 1 / 30, 1.0, 0.25, 0.0, 1.0),
        OracleRecordingSpec("b01", 1.25, 0.04, 1 / 30, 1.0, 0.25, 0.0, 1.0),
    ]
    return OracleSpec(seed=11, sample_rate_hz=4, window_seconds=30, recordings=recs)


@pytest.fixture(scope="session")
def gan_learning_run():
    """Train the pinned desk-scale GAN once: hidden 32, 200 epochs, 600 windows.

    Returns the training data, held-out windows, the epoch-0 MMD, the
    checkpoint MMD trajectory, the best checkpoint and the wall time.
    """
    start = time.time()
    ds = split_by_events(build_dataset(generate_corpus(gan_oracle_spec())),
                         (0.8, 0.2 - 1e-9, 1e-9), seed=1)
    rd_train = ds.subset(TRAIN)
    held_out = ds.subset(TEST)
    cfg = GanConfig(hidden_size=32, minibatch_size=50, noise_dim=4,
                    sequence_length=30, epochs=200, checkpoint_every=10, seed=1)
    model = new_model(cfg)
    builder = balanced_sd_builder(300)
    mmd_epoch0, _, _ = mmd_with_optimized_kernel(held_out, builder(model, 999), 42)

    trajectory = []
    snapshots = {}

    def checkpoint_cb(snap):
        sd = builder(snap, 1000 + snap.epoch)
        value, _, _ = mmd_with_optimized_kernel(held_out, sd, 42)
        trajectory.append((snap.epoch, value))
        snapshots[snap.epoch] = snap

    train(model, rd_train, callback=checkpoint_cb)
    best_epoch, best_mmd = min(trajectory, key=lambda item: item[1])
    return {
        "rd_train": rd_train,
        "held_out": held_out,
        "mmd_epoch0": mmd_epoch0,
        "trajectory": trajectory,
        "best_epoch": best_epoch,
        "best_mmd": best_mmd,
        "best_model": snapshots[best_epoch],
        "builder": builder,
        "elapsed": time.time() - start,
    }
