"""Multi-GAN training over recording subsets with a weighted dice toss.

Recordings are paired into disjoint subsets (one AHI-severe with one
AHI-normal each).  One GAN is trained per subset; for every minibatch of
GAN j the source subset is drawn from the probability vector that puts p on
subset j and (1 - p) / (k - 1) on every other subset, so GAN j's training
stream converges to the corresponding subset mixture.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .data import Recording, Window, compute_ahi
from .gan import GanConfig, GanModel, SubsetBatchSource, new_model, train


@dataclass
class MixturePlan:
    """Disjoint recording-id subsets plus the own-subset probability p."""

    subsets: list[list[str]]
    p: float

    def __post_init__(self):
        if not 0.0 < self.p <= 1.0:
            raise ValueError("p must be in (0, 1]")
        if self.k_sub > 1 and self.p == 1.0:
            # allowed: a degenerate plan that never interchanges subsets
            pass
        flat = [rid for subset in self.subsets for rid in subset]
        if len(flat) != len(set(flat)):
            raise ValueError("subsets must be pairwise disjoint")

    @property
    def k_sub(self) -> int:
        return len(self.subsets)

    def probability_vector(self, j: int) -> np.ndarray:
        """GAN j's subset-draw probabilities (p on its own subset)."""
        if not 0 <= j < self.k_sub:
            raise ValueError(f"gan index {j} out of range")
        if self.k_sub == 1:
            return np.array([1.0])
        probs = np.full(self.k_sub, (1.0 - self.p) / (self.k_sub - 1))
        probs[j] = self.p
        return probs

    def to_dict(self) -> dict:
        return {"p": self.p, "subsets": [list(s) for s in self.subsets]}

    @staticmethod
    def from_dict(doc: dict) -> "MixturePlan":
        return MixturePlan(subsets=[list(s) for s in doc["subsets"]], p=float(doc["p"]))

    @staticmethod
    def from_json(path: str | Path) -> "MixturePlan":
        return MixturePlan.from_dict(json.loads(Path(path).read_text()))


@dataclass
class MixtureWeights:
    """Predicted mixture weights w_i = P(subset i feeds the GAN)."""

    weights: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to 1")


def make_plan(recordings: list[Recording], k_sub: int, p: float) -> MixturePlan:
    """Pair one AHI-severe with one AHI-normal recording per subset.

    Requires exactly k_sub severe and k_sub normal recordings; pairing is by
    sorted id, so the plan is deterministic.
    """
    if k_sub < 1:
        raise ValueError("k_sub must be positive")
    severe = sorted(r.id for r in recordings if compute_ahi(r).category == "severe")
    normal = sorted(r.id for r in recordings if compute_ahi(r).category == "normal")
    if len(severe) != k_sub or len(normal) != k_sub:
        raise ValueError(
            f"pairing infeasible: need {k_sub} severe and {k_sub} normal recordings, "
            f"found {len(severe)} severe and {len(normal)} normal"
        )
    subsets = [[severe[i], normal[i]] for i in range(k_sub)]
    return MixturePlan(subsets=subsets, p=p)


def sample_subset(plan: MixturePlan, j: int, rng: np.random.Generator) -> int:
    """One weighted dice toss for GAN j."""
    probs = plan.probability_vector(j)
    if probs.max() >= 1.0:
        return int(np.argmax(probs))
    return int(rng.choice(plan.k_sub, p=probs))


def effective_mixture(plan: MixturePlan, j: int) -> MixtureWeights:
    """The subset mixture GAN j's training stream converges to."""
    return MixtureWeights(plan.probability_vector(j))


@dataclass
class MixtureTrainResult:
    model: GanModel
    checkpoints: list[GanModel]
    draw_counts: list[int]


def train_mixture(
    plan: MixturePlan,
    windows_by_recording: dict[str, list[Window]],
    gan_config: GanConfig,
    allow_single_class: bool = False,
) -> list[MixtureTrainResult]:
    """Train one GAN per subset with per-minibatch subset interchange.

    GAN j is seeded with gan_config.seed + j, so the degenerate single-subset
    plan reproduces plain training bit for bit.  Each result retains the
    per-subset draw log.
    """
    missing = [
        rid for subset in plan.subsets for rid in subset
        if rid not in windows_by_recording
    ]
    if missing:
        raise ValueError(f"plan references unknown recordings: {sorted(set(missing))}")
    pools = [
        [w for rid in subset for w in windows_by_recording[rid]]
        for subset in plan.subsets
    ]
    for subset, pool in zip(plan.subsets, pools):
        if not pool:
            raise ValueError(f"subset {subset} holds no windows")

    results = []
    for j in range(plan.k_sub):
        cfg = replace(gan_config, seed=gan_config.seed + j)
        model = new_model(cfg)
        rng_data = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence([cfg.seed, 1])))
        rng_dice = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence([cfg.seed, 3])))
        source = SubsetBatchSource(
            pools, plan.probability_vector(j), j, cfg.minibatch_size,
            rng_data, rng_dice)
        all_windows = [w for pool in pools for w in pool]
        model, checkpoints = train(
            model, all_windows,
            batch_source=source, allow_single_class=allow_single_class)
        results.append(MixtureTrainResult(model, checkpoints, list(source.draw_counts)))
    return results
