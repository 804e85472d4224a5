"""Conditional recurrent GAN over 1 Hz airflow windows.

The generator maps a per-step noise vector plus a per-step class condition
(0.0 non-apneic, 1.0 apneic) to an airflow sequence through an LSTM and a
tanh projection.  The discriminator scores every timestep as real/fake from
the sequence history through its own LSTM and a sigmoid projection.
Training alternates one discriminator and one generator update per
minibatch; the per-timestep scores are averaged into the sequence loss.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .data import APNEIC, NON_APNEIC, Window
from .nn import (
    CHECKPOINT_FORMAT_VERSION,
    LstmParams,
    OptimizerState,
    init_lstm,
    lstm_from_doc,
    lstm_step,
    lstm_to_doc,
    optimizer_step,
)

COND_VALUE = {APNEIC: 1.0, NON_APNEIC: 0.0}


@dataclass
class GanConfig:
    hidden_size: int = 300
    minibatch_size: int = 50
    noise_dim: int = 4
    sequence_length: int = 60
    g_learning_rate: float = 0.01
    d_learning_rate: float = 0.01
    epochs: int = 100
    checkpoint_every: int = 10
    seed: int = 0

    def __post_init__(self):
        for name in ("hidden_size", "minibatch_size", "noise_dim",
                     "sequence_length", "checkpoint_every"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be nonnegative")

    @staticmethod
    def from_dict(doc: dict) -> "GanConfig":
        return GanConfig(**doc)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class GanModel:
    """Generator/discriminator parameter pair plus training bookkeeping."""

    config: GanConfig
    gen: LstmParams
    gen_proj_w: Tensor
    gen_proj_b: Tensor
    disc: LstmParams
    disc_proj_w: Tensor
    disc_proj_b: Tensor
    epoch: int = 0
    loss_history: list = field(default_factory=list)

    def g_parameters(self) -> list[Tensor]:
        return self.gen.parameters() + [self.gen_proj_w, self.gen_proj_b]

    def d_parameters(self) -> list[Tensor]:
        return self.disc.parameters() + [self.disc_proj_w, self.disc_proj_b]

    def zero_grads(self) -> None:
        for p in self.g_parameters() + self.d_parameters():
            p.zero_grad()

    def snapshot(self) -> "GanModel":
        """Deep parameter copy used for in-memory checkpoints."""
        snap = GanModel(
            config=self.config,
            gen=_copy_lstm(self.gen),
            gen_proj_w=Tensor(self.gen_proj_w.data.copy(), requires_grad=True),
            gen_proj_b=Tensor(self.gen_proj_b.data.copy(), requires_grad=True),
            disc=_copy_lstm(self.disc),
            disc_proj_w=Tensor(self.disc_proj_w.data.copy(), requires_grad=True),
            disc_proj_b=Tensor(self.disc_proj_b.data.copy(), requires_grad=True),
            epoch=self.epoch,
            loss_history=copy.deepcopy(self.loss_history),
        )
        return snap


def _copy_lstm(params: LstmParams) -> LstmParams:
    return LstmParams(
        params.input_size,
        params.hidden_size,
        {k: Tensor(t.data.copy(), requires_grad=True) for k, t in params.w.items()},
        {k: Tensor(t.data.copy(), requires_grad=True) for k, t in params.b.items()},
    )


PROJ_INIT_SCALE = 0.5  # wider than the gate init so early samples span the value range


def new_model(config: GanConfig) -> GanModel:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([config.seed, 0])))
    h = config.hidden_size
    gen = init_lstm(config.noise_dim + 1, h, rng)
    gen_w = Tensor(rng.uniform(-PROJ_INIT_SCALE, PROJ_INIT_SCALE, (h, 1)),
                   requires_grad=True)
    gen_b = Tensor(np.zeros(1), requires_grad=True)
    disc = init_lstm(2, h, rng)
    disc_w = Tensor(rng.uniform(-PROJ_INIT_SCALE, PROJ_INIT_SCALE, (h, 1)),
                    requires_grad=True)
    disc_b = Tensor(np.zeros(1), requires_grad=True)
    return GanModel(config, gen, gen_w, gen_b, disc, disc_w, disc_b)


def _condition_column(labels: list[str] | np.ndarray) -> np.ndarray:
    if isinstance(labels, np.ndarray):
        return labels.reshape(-1, 1).astype(np.float64)
    return np.array([[COND_VALUE[l]] for l in labels])


def gen_forward(model: GanModel, noise: np.ndarray, conds: np.ndarray) -> Tensor:
    """Run the generator over a (batch, T, noise_dim) noise block."""
    batch, seq_len, _ = noise.shape
    cond_t = Tensor(conds)
    h = Tensor(np.zeros((batch, model.config.hidden_size)))
    c = Tensor(np.zeros((batch, model.config.hidden_size)))
    outputs = []
    for t in range(seq_len):
        x_t = ad.concat([Tensor(noise[:, t, :]), cond_t], axis=1)
        h, c = lstm_step(model.gen, x_t, h, c)
        y_t = ad.tanh(ad.add(ad.matmul(h, model.gen_proj_w), model.gen_proj_b))
        outputs.append(y_t)
    return ad.concat(outputs, axis=1)


def disc_forward(model: GanModel, values: Tensor | np.ndarray, conds: np.ndarray) -> Tensor:
    """Per-timestep real/fake probabilities for a (batch, T) value block."""
    if not isinstance(values, Tensor):
        values = Tensor(values)
    batch, seq_len = values.shape
    cond_t = Tensor(conds)
    h = Tensor(np.zeros((batch, model.config.hidden_size)))
    c = Tensor(np.zeros((batch, model.config.hidden_size)))
    outputs = []
    for t in range(seq_len):
        x_t = ad.concat([ad.slice_cols(values, t, t + 1), cond_t], axis=1)
        h, c = lstm_step(model.disc, x_t, h, c)
        d_t = ad.sigmoid(ad.add(ad.matmul(h, model.disc_proj_w), model.disc_proj_b))
        outputs.append(d_t)
    return ad.concat(outputs, axis=1)


def d_loss_from_scores(d_real: Tensor, d_fake: Tensor) -> Tensor:
    """-[log D(real) + log(1 - D(fake))] averaged over samples and timesteps."""
    real_term = ad.mean(ad.bce(d_real, np.ones_like(d_real.data)))
    fake_term = ad.mean(ad.bce(d_fake, np.zeros_like(d_fake.data)))
    return ad.add(real_term, fake_term)


def g_loss_from_scores(d_fake: Tensor) -> Tensor:
    """Non-saturating generator loss: mean of -log D(fake)."""
    return ad.mean(ad.bce(d_fake, np.ones_like(d_fake.data)))


def d_loss(
    model: GanModel,
    real_values: np.ndarray,
    real_conds: np.ndarray,
    fake_values: Tensor | np.ndarray,
    fake_conds: np.ndarray,
) -> Tensor:
    loss = d_loss_from_scores(
        disc_forward(model, real_values, real_conds),
        disc_forward(model, fake_values, fake_conds),
    )
    if not np.isfinite(loss.data):
        raise RuntimeError("diverged: non-finite discriminator loss")
    return loss


def g_loss(model: GanModel, fake_values: Tensor, fake_conds: np.ndarray) -> Tensor:
    loss = g_loss_from_scores(disc_forward(model, fake_values, fake_conds))
    if not np.isfinite(loss.data):
        raise RuntimeError("diverged: non-finite generator loss")
    return loss


def generate(model: GanModel, label: str, count: int, seed: int) -> list[Window]:
    """Sample labeled synthetic windows; deterministic per seed."""
    if count <= 0:
        raise ValueError("count must be positive")
    if label not in COND_VALUE:
        raise ValueError(f"unknown label {label!r}")
    cfg = model.config
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed])))
    noise = rng.standard_normal((count, cfg.sequence_length, cfg.noise_dim))
    conds = np.full((count, 1), COND_VALUE[label])
    with ad.no_grad():
        values = gen_forward(model, noise, conds).data
    # keep the contract's open interval even if tanh rounds to +-1.0
    values = np.clip(values, -1.0 + 1e-12, 1.0 - 1e-12)
    rec_id = f"sd-{label}-{seed}"
    return [Window(rec_id, i, values[i], label) for i in range(count)]


class SubsetBatchSource:
    """Minibatch stream over one or more window pools.

    Each pool keeps its own shuffled cursor (reshuffled when exhausted,
    dropping the partial remainder).  When several pools are present, the
    pool for each minibatch is drawn from ``probs`` (the weighted dice toss);
    a one-hot probability vector short-circuits the draw so the degenerate
    single-pool case consumes no dice randomness and matches plain training
    exactly.  Draw counts per pool are logged.
    """

    def __init__(
        self,
        pools: list[list[Window]],
        probs: np.ndarray,
        own_index: int,
        batch_size: int,
        rng_data: np.random.Generator,
        rng_dice: np.random.Generator | None = None,
    ):
        if any(len(p) == 0 for p in pools):
            raise ValueError("empty window pool")
        self.pools = pools
        self.probs = np.asarray(probs, dtype=np.float64)
        if abs(self.probs.sum() - 1.0) > 1e-9 or np.any(self.probs < 0):
            raise ValueError("pool probabilities must be nonnegative and sum to 1")
        self.own_index = own_index
        self.batch_size = batch_size
        self.rng_data = rng_data
        self.rng_dice = rng_dice
        self.draw_counts = [0] * len(pools)
        self._orders = [rng_data.permutation(len(p)) for p in pools]
        self._cursors = [0] * len(pools)
        self._one_hot = int(np.argmax(self.probs)) if np.max(self.probs) >= 1.0 else None

    def steps_per_epoch(self) -> int:
        return max(1, len(self.pools[self.own_index]) // self.batch_size)

    def _pick_pool(self) -> int:
        if self._one_hot is not None:
            return self._one_hot
        if self.rng_dice is None:
            raise ValueError("dice rng required for a non-degenerate mixture")
        return int(self.rng_dice.choice(len(self.pools), p=self.probs))

    def next_batch(self) -> list[Window]:
        i = self._pick_pool()
        self.draw_counts[i] += 1
        pool = self.pools[i]
        size = min(self.batch_size, len(pool))
        if self._cursors[i] + size > len(pool):
            self._orders[i] = self.rng_data.permutation(len(pool))
            self._cursors[i] = 0
        idx = self._orders[i][self._cursors[i] : self._cursors[i] + size]
        self._cursors[i] += size
        return [pool[j] for j in idx]


def train(
    model: GanModel,
    windows: list[Window],
    epochs: int | None = None,
    callback=None,
    batch_source: SubsetBatchSource | None = None,
    allow_single_class: bool = False,
) -> tuple[GanModel, list[GanModel]]:
    """Adversarial training; returns the model and its checkpoint snapshots.

    One discriminator update then one generator update per minibatch.  Fake
    conditions mirror the real minibatch's labels, so the generator sees the
    data's class balance.  Checkpoints are taken every
    ``config.checkpoint_every`` epochs and at the final epoch.
    """
    cfg = model.config
    if epochs is None:
        epochs = cfg.epochs
    if not windows:
        raise ValueError("empty training data")
    lengths = {len(w.values) for w in windows}
    if lengths != {cfg.sequence_length}:
        raise ValueError(
            f"window length {sorted(lengths)} does not match "
            f"sequence_length {cfg.sequence_length}"
        )
    present = {w.label for w in windows}
    if len(present) < 2 and not allow_single_class:
        raise ValueError("training set holds a single class; "
                         "pass allow_single_class=True if intended")

    rng_data = np.random.Generator(np.random.PCG64(np.random.SeedSequence([cfg.seed, 1])))
    rng_noise = np.random.Generator(np.random.PCG64(np.random.SeedSequence([cfg.seed, 2])))
    if batch_source is None:
        batch_source = SubsetBatchSource(
            [windows], np.array([1.0]), 0, cfg.minibatch_size, rng_data)

    g_opt = OptimizerState("sgd", cfg.g_learning_rate)
    d_opt = OptimizerState("adam", cfg.d_learning_rate)
    g_params = model.g_parameters()
    d_params = model.d_parameters()

    checkpoints: list[GanModel] = []
    steps = batch_source.steps_per_epoch()
    for _ in range(epochs):
        d_sum = g_sum = 0.0
        for _ in range(steps):
            batch = batch_source.next_batch()
            real_values = np.stack([w.values for w in batch])
            conds = _condition_column([w.label for w in batch])
            noise = rng_noise.standard_normal(
                (len(batch), cfg.sequence_length, cfg.noise_dim))
            fake = gen_forward(model, noise, conds)

            model.zero_grads()
            dl = d_loss(model, real_values, conds, fake.detach(), conds)
            dl.backward()
            optimizer_step(d_opt, d_params)

            model.zero_grads()
            gl = g_loss(model, fake, conds)
            gl.backward()
            optimizer_step(g_opt, g_params)

            d_sum += float(dl.data)
            g_sum += float(gl.data)
        model.epoch += 1
        model.loss_history.append(
            {"epoch": model.epoch, "d_loss": d_sum / steps, "g_loss": g_sum / steps})
        if model.epoch % cfg.checkpoint_every == 0 or model.epoch == epochs:
            snap = model.snapshot()
            checkpoints.append(snap)
            if callback is not None:
                callback(snap)
    return model, checkpoints


def model_to_doc(model: GanModel) -> dict:
    return {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "epoch": model.epoch,
        "config": model.config.to_dict(),
        "generator": lstm_to_doc(
            model.gen,
            {"w_proj": model.gen_proj_w.data.tolist(),
             "b_proj": model.gen_proj_b.data.tolist()},
        ),
        "discriminator": lstm_to_doc(
            model.disc,
            {"w_proj": model.disc_proj_w.data.tolist(),
             "b_proj": model.disc_proj_b.data.tolist()},
        ),
    }


def model_from_doc(doc: dict) -> GanModel:
    if doc.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format {doc.get('format_version')}")
    return GanModel(
        config=GanConfig.from_dict(doc["config"]),
        gen=lstm_from_doc(doc["generator"]),
        gen_proj_w=Tensor(np.asarray(doc["generator"]["w_proj"]), requires_grad=True),
        gen_proj_b=Tensor(np.asarray(doc["generator"]["b_proj"]), requires_grad=True),
        disc=lstm_from_doc(doc["discriminator"]),
        disc_proj_w=Tensor(np.asarray(doc["discriminator"]["w_proj"]), requires_grad=True),
        disc_proj_b=Tensor(np.asarray(doc["discriminator"]["b_proj"]), requires_grad=True),
        epoch=int(doc["epoch"]),
    )


def save_checkpoint(model: GanModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model_to_doc(model)))


def load_checkpoint(path: str | Path) -> GanModel:
    return model_from_doc(json.loads(Path(path).read_text()))
