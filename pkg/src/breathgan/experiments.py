"""End-to-end orchestration of the three augmentation experiments.

exp1: event-level 50/25/25 split, GAN trained on the training windows,
      balanced synthetic set of the same size, arms Baseline / Synth / Augm.
exp2: per-recording split with one apneic recording removed everywhere;
      an apneic-only GAN rebalances the training set to exactly 50/50.
exp3: subsets of recordings train a mixture of GANs; Augm combines equal
      synthetic shares, AugmP regenerates from the GAN whose output is
      closest (lowest MMD) to a validation slice of the test recordings.

Every iteration derives its own seeds, evaluates all arms on the identical
test windows, audits split provenance for leakage, and the aggregated
report reproduces byte for byte under the same config and seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import classifiers, metrics
from .data import (
    APNEIC,
    NON_APNEIC,
    TEST,
    TRAIN,
    VALIDATION,
    Recording,
    Window,
    WindowedDataset,
    build_dataset,
    class_ratio,
    extract_validation,
    load_recording,
    load_windows,
    split_by_events,
    split_by_recordings,
)
from .gan import GanConfig, GanModel, generate, new_model, train
from .mixture import MixturePlan, make_plan, train_mixture
from .oracle import OracleSpec, generate_corpus

ARM_ORDER = ("Baseline", "Synth", "Augm", "AugmP")
DEFAULT_ITERATIONS = {"exp1": 15, "exp2": 5, "exp3": 5}


@dataclass
class Thresholds:
    """Checkpoint eligibility gates; None disables a gate."""

    t_min: float | None = 0.7
    mmd_tstat_max: float | None = 3.0

    def to_dict(self) -> dict:
        return {"t_min": self.t_min, "mmd_tstat_max": self.mmd_tstat_max}

    @staticmethod
    def from_dict(doc: dict) -> "Thresholds":
        return Thresholds(
            t_min=doc.get("t_min", 0.7),
            mmd_tstat_max=doc.get("mmd_tstat_max", 3.0),
        )


@dataclass
class ExperimentConfig:
    experiment: str
    seed: int = 0
    iterations: int | None = None
    oracle: OracleSpec | None = None
    dataset_path: str | None = None
    recording_paths: list[str] = field(default_factory=list)
    gan: GanConfig = field(default_factory=GanConfig)
    test_recordings: list[str] = field(default_factory=list)
    excluded_recordings: list[str] = field(default_factory=list)
    mixture_p: float = 0.4
    mixture_k: int = 3
    validation_fraction: float = 0.25
    thresholds: Thresholds = field(default_factory=Thresholds)
    quality_metric: str = "accuracy"

    def __post_init__(self):
        if self.experiment not in DEFAULT_ITERATIONS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.iterations is None:
            self.iterations = DEFAULT_ITERATIONS[self.experiment]
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")

    @staticmethod
    def from_dict(doc: dict) -> "ExperimentConfig":
        doc = dict(doc)
        if "oracle" in doc and doc["oracle"] is not None:
            doc["oracle"] = OracleSpec.from_dict(doc["oracle"])
        if "gan" in doc and doc["gan"] is not None:
            doc["gan"] = GanConfig.from_dict(doc["gan"])
        if "thresholds" in doc and doc["thresholds"] is not None:
            doc["thresholds"] = Thresholds.from_dict(doc["thresholds"])
        return ExperimentConfig(**doc)


@dataclass
class ExperimentReport:
    experiment: str
    arms: dict  # arm -> classifier kind -> metric -> {mean, se, values}
    p_values: dict  # arm -> classifier kind -> p-value vs Baseline (kappa)
    quality: list  # per-iteration quality bundle for the selected model
    provenance: dict
    warning_flag: bool = False

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "arms": self.arms,
            "p_values": self.p_values,
            "quality": self.quality,
            "provenance": self.provenance,
            "warning_flag": self.warning_flag,
        }


def derive_seed(seed: int, *salts: int) -> int:
    """Stable child-seed derivation for independent random streams."""
    return int(np.random.SeedSequence([seed, *salts]).generate_state(1)[0])


def _resolve_corpus(config: ExperimentConfig) -> tuple[list[Recording], WindowedDataset | None]:
    if config.oracle is not None:
        return generate_corpus(config.oracle), None
    if config.recording_paths:
        return [load_recording(p) for p in config.recording_paths], None
    if config.dataset_path:
        return [], load_windows(config.dataset_path)
    raise ValueError("config needs an oracle spec, recording paths or a dataset path")


def _window_keys(windows: list[Window]) -> set:
    return {w.key for w in windows}


def audit_leakage(training_sets: dict[str, list[Window]], protected_keys: set) -> dict:
    """Count protected (test/validation) windows inside each training set."""
    audit = {}
    for name, windows in training_sets.items():
        hits = len(_window_keys(windows) & protected_keys)
        audit[name] = hits
        if hits:
            raise RuntimeError(
                f"leakage: {hits} protected windows inside training set {name!r}")
    return audit


def balanced_sd_builder(total: int):
    """Balanced synthetic-set builder: exactly half apneic, half non-apneic.

    An odd total is rounded up so the 50/50 ratio is exact.
    """
    per_class = (total + 1) // 2

    def build(model: GanModel, seed: int) -> list[Window]:
        return generate(model, APNEIC, per_class, seed) + generate(
            model, NON_APNEIC, per_class, derive_seed(seed, 1))

    return build


def rebalance_sd_builder(n_missing: int):
    """Apneic-only builder adding the windows needed for an exact 50/50."""

    def build(model: GanModel, seed: int) -> list[Window]:
        if n_missing <= 0:
            return []
        return generate(model, APNEIC, n_missing, seed)

    return build


def select_checkpoint(
    checkpoints: list[GanModel],
    rd_train: list[Window],
    validation: list[Window],
    classifier_specs: list,
    thresholds: Thresholds,
    sd_builder,
    seed: int,
    quality_reference: list[Window] | None = None,
    quality_metric: str = "accuracy",
) -> tuple[GanModel, dict]:
    """Validation-driven checkpoint choice with quality-threshold gating.

    For every checkpoint: generate a synthetic set, train the classifier set
    on real-plus-synthetic, score mean kappa on the validation windows, and
    evaluate the quality gates against the reference windows (the GAN's
    training data unless stated otherwise).  The best-kappa checkpoint among
    those passing all gates wins; if none passes, the best overall is
    returned with a warning flag.
    """
    if not checkpoints:
        raise ValueError("no checkpoints to select from")
    if not validation:
        raise ValueError("empty validation set")
    reference = quality_reference if quality_reference is not None else rd_train
    entries = []
    for k, ckpt in enumerate(checkpoints):
        sd = sd_builder(ckpt, derive_seed(seed, 100, k))
        augmented = rd_train + sd
        kappas = []
        for spec in classifier_specs:
            clf = classifiers.fit(spec, augmented)
            kappas.append(metrics.cohen_kappa(classifiers.evaluate(clf, validation)))
        entry = {
            "epoch": ckpt.epoch,
            "val_kappa": float(np.mean(kappas)),
            "t_metric": None,
            "mmd2": None,
            "mmd_tstat": None,
        }
        passed = True
        if sd:
            if thresholds.t_min is not None:
                tstr_v = metrics.tstr(sd, reference, classifier_specs, quality_metric)
                trts_v = metrics.trts(reference, sd, classifier_specs, quality_metric)
                entry["t_metric"] = metrics.t_metric(tstr_v, trts_v)
                passed = passed and entry["t_metric"] >= thresholds.t_min
            if thresholds.mmd_tstat_max is not None:
                mmd2, _, tstat = metrics.mmd_with_optimized_kernel(
                    reference, sd, derive_seed(seed, 101, k))
                entry["mmd2"] = mmd2
                entry["mmd_tstat"] = float(tstat)
                passed = passed and tstat <= thresholds.mmd_tstat_max
        entry["passed"] = bool(passed)
        entries.append(entry)

    passing = [i for i, e in enumerate(entries) if e["passed"]]
    fallback = not passing
    pool = passing if passing else range(len(entries))
    best = max(pool, key=lambda i: entries[i]["val_kappa"])
    info = {
        "per_checkpoint": entries,
        "selected_epoch": entries[best]["epoch"],
        "fallback": fallback,
    }
    return checkpoints[best], info


def _evaluate_arms(
    arms: dict[str, list[Window]],
    test_windows: list[Window],
    classifier_specs: list,
) -> dict:
    """Per-arm, per-classifier kappa/accuracy/sensitivity/specificity."""
    results = {}
    for arm, train_windows in arms.items():
        per_clf = {}
        for spec in classifier_specs:
            clf = classifiers.fit(spec, train_windows)
            cm = classifiers.evaluate(clf, test_windows)
            stats = metrics.confusion_stats(cm)
            per_clf[spec.kind] = {
                "kappa": metrics.cohen_kappa(cm),
                "accuracy": stats["accuracy"],
                "sensitivity": stats["sensitivity"],
                "specificity": stats["specificity"],
            }
        results[arm] = per_clf
    return results


def _aggregate_iterations(per_iteration: list[dict]) -> tuple[dict, dict]:
    """Fold per-iteration arm results into mean/se aggregates and p-values."""
    arms: dict = {}
    arm_names = [a for a in ARM_ORDER if a in per_iteration[0]]
    clf_kinds = list(per_iteration[0][arm_names[0]].keys())
    metric_names = ("kappa", "accuracy", "sensitivity", "specificity")
    for arm in arm_names:
        arms[arm] = {}
        for kind in clf_kinds:
            arms[arm][kind] = {}
            for name in metric_names:
                values = [it[arm][kind][name] for it in per_iteration]
                mean, se = metrics.aggregate(values)
                arms[arm][kind][name] = {"mean": mean, "se": se, "values": values}
    p_values: dict = {}
    if len(per_iteration) >= 2:
        for arm in arm_names:
            if arm == "Baseline":
                continue
            p_values[arm] = {}
            for kind in clf_kinds:
                try:
                    p = metrics.t_test_one_tailed(
                        arms[arm][kind]["kappa"]["values"],
                        arms["Baseline"][kind]["kappa"]["values"],
                    )
                except ValueError:
                    p = None  # degenerate: both arms constant across iterations
                p_values[arm][kind] = p
    return arms, p_values


def run_exp1(config: ExperimentConfig) -> ExperimentReport:
    corpus, preset = _resolve_corpus(config)
    base_ds = preset if preset is not None else build_dataset(corpus)
    per_iteration = []
    quality = []
    provenance: dict = {"iterations": [], "seed": config.seed}
    warning_flag = False
    for it in range(config.iterations):
        it_seed = derive_seed(config.seed, it)
        ds = split_by_events(base_ds, (0.5, 0.25, 0.25), it_seed)
        rd_train = ds.subset(TRAIN)
        rd_test = ds.subset(TEST)
        rd_val = ds.subset(VALIDATION)
        gan_cfg = replace(config.gan, seed=derive_seed(it_seed, 1))
        model, checkpoints = train(new_model(gan_cfg), rd_train)
        specs = classifiers.default_classifier_set(seed=derive_seed(it_seed, 3))
        builder = balanced_sd_builder(len(rd_train))
        best, sel_info = select_checkpoint(
            checkpoints, rd_train, rd_val, specs, config.thresholds,
            builder, it_seed, quality_metric=config.quality_metric)
        warning_flag = warning_flag or sel_info["fallback"]
        sd = builder(best, derive_seed(it_seed, 2))
        arms = {"Baseline": rd_train, "Synth": sd, "Augm": rd_train + sd}
        protected = _window_keys(rd_test) | _window_keys(rd_val)
        audit = audit_leakage({"gan_train": rd_train, **arms}, protected)
        per_iteration.append(_evaluate_arms(arms, rd_test, specs))
        quality.append(
            metrics.evaluate_quality(
                rd_train, sd, specs, derive_seed(it_seed, 4), config.quality_metric
            ).to_dict())
        provenance["iterations"].append({
            "seed": it_seed,
            "selection": sel_info,
            "leakage": audit,
            "class_ratio_train": class_ratio(rd_train),
            "class_ratio_sd": class_ratio(sd),
            "sizes": {"train": len(rd_train), "test": len(rd_test),
                      "validation": len(rd_val), "sd": len(sd)},
        })
    arms_agg, p_values = _aggregate_iterations(per_iteration)
    return ExperimentReport("exp1", arms_agg, p_values, quality, provenance, warning_flag)


def run_exp2(config: ExperimentConfig) -> ExperimentReport:
    corpus, preset = _resolve_corpus(config)
    if preset is not None:
        raise ValueError("exp2 needs recordings (oracle or files), not a flat dataset")
    if not config.test_recordings:
        raise ValueError("exp2 needs test_recordings (one apneic, one non-apneic)")
    base_ds = split_by_recordings(
        corpus, set(config.test_recordings), set(config.excluded_recordings))
    per_iteration = []
    quality = []
    provenance: dict = {"iterations": [], "seed": config.seed}
    warning_flag = False
    for it in range(config.iterations):
        it_seed = derive_seed(config.seed, it)
        ds = extract_validation(base_ds, config.validation_fraction, it_seed)
        rd_train = ds.subset(TRAIN)
        rd_test = ds.subset(TEST)
        rd_val = ds.subset(VALIDATION)
        apneic_train = [w for w in rd_train if w.label == APNEIC]
        if not apneic_train:
            raise ValueError("no apneic training windows left after exclusion")
        n_missing = (len(rd_train) - len(apneic_train)) - len(apneic_train)
        gan_cfg = replace(config.gan, seed=derive_seed(it_seed, 1))
        model, checkpoints = train(
            new_model(gan_cfg), apneic_train, allow_single_class=True)
        specs = classifiers.default_classifier_set(seed=derive_seed(it_seed, 3))
        builder = rebalance_sd_builder(n_missing)
        # single-class synthetic data: the T gate does not apply, the MMD gate
        # compares against the apneic slice of the training data
        gates = Thresholds(t_min=None, mmd_tstat_max=config.thresholds.mmd_tstat_max)
        best, sel_info = select_checkpoint(
            checkpoints, rd_train, rd_val, specs, gates, builder, it_seed,
            quality_reference=apneic_train, quality_metric=config.quality_metric)
        warning_flag = warning_flag or sel_info["fallback"]
        sd = builder(best, derive_seed(it_seed, 2))
        arms = {"Baseline": rd_train, "Augm": rd_train + sd}
        protected = _window_keys(rd_test) | _window_keys(rd_val)
        audit = audit_leakage({"gan_train": apneic_train, **arms}, protected)
        per_iteration.append(_evaluate_arms(arms, rd_test, specs))
        if sd:
            mmd2, sigma, tstat = metrics.mmd_with_optimized_kernel(
                apneic_train, sd, derive_seed(it_seed, 4))
        else:
            mmd2 = sigma = tstat = None
        quality.append({
            "tstr": None, "trts": None, "t_metric": None,
            "mmd2": mmd2, "kernel_sigma": sigma, "mmd_tstat": tstat,
        })
        provenance["iterations"].append({
            "seed": it_seed,
            "selection": sel_info,
            "leakage": audit,
            "class_ratio_train": class_ratio(rd_train),
            "class_ratio_augmented": class_ratio(rd_train + sd),
            "sizes": {"train": len(rd_train), "test": len(rd_test),
                      "validation": len(rd_val), "sd": len(sd)},
        })
    arms_agg, p_values = _aggregate_iterations(per_iteration)
    return ExperimentReport("exp2", arms_agg, p_values, quality, provenance, warning_flag)


def run_exp3(config: ExperimentConfig) -> ExperimentReport:
    corpus, preset = _resolve_corpus(config)
    if preset is not None:
        raise ValueError("exp3 needs recordings (oracle or files), not a flat dataset")
    if not config.test_recordings:
        raise ValueError("exp3 needs test_recordings (the held-out pair)")
    held_out = set(config.test_recordings) | set(config.excluded_recordings)
    train_recordings = [r for r in corpus if r.id not in held_out]
    plan = make_plan(train_recordings, config.mixture_k, config.mixture_p)
    base_ds = split_by_recordings(
        corpus, set(config.test_recordings), set(config.excluded_recordings))
    per_iteration = []
    quality = []
    provenance: dict = {"iterations": [], "seed": config.seed,
                        "plan": plan.to_dict()}
    warning_flag = False
    for it in range(config.iterations):
        it_seed = derive_seed(config.seed, it)
        ds = extract_validation(base_ds, config.validation_fraction, it_seed)
        rd_train = ds.subset(TRAIN)
        rd_test = ds.subset(TEST)
        rd_val = ds.subset(VALIDATION)
        windows_by_recording: dict[str, list[Window]] = {}
        for w in rd_train:
            windows_by_recording.setdefault(w.recording_id, []).append(w)
        gan_cfg = replace(config.gan, seed=derive_seed(it_seed, 1))
        results = train_mixture(plan, windows_by_recording, gan_cfg)

        share = len(rd_train) // plan.k_sub
        shares = [share + (1 if i < len(rd_train) % plan.k_sub else 0)
                  for i in range(plan.k_sub)]
        sds = []
        mmd_values = []
        for i, res in enumerate(results):
            sd_i = balanced_sd_builder(shares[i])(res.model, derive_seed(it_seed, 2, i))
            sds.append(sd_i)
            mmd2, _, _ = metrics.mmd_with_optimized_kernel(
                rd_val, sd_i, derive_seed(it_seed, 5, i))
            mmd_values.append(mmd2)
        selected = int(np.argmin(mmd_values))
        sd_combined = [w for sd in sds for w in sd]
        sd_personal = balanced_sd_builder(len(rd_train))(
            results[selected].model, derive_seed(it_seed, 6))

        specs = classifiers.default_classifier_set(seed=derive_seed(it_seed, 3))
        arms = {
            "Baseline": rd_train,
            "Augm": rd_train + sd_combined,
            "AugmP": rd_train + sd_personal,
        }
        protected = _window_keys(rd_test) | _window_keys(rd_val)
        audit = audit_leakage({"gan_train": rd_train, **arms}, protected)
        per_iteration.append(_evaluate_arms(arms, rd_test, specs))
        quality.append(
            metrics.evaluate_quality(
                rd_train, sd_personal, specs, derive_seed(it_seed, 4),
                config.quality_metric).to_dict())
        provenance["iterations"].append({
            "seed": it_seed,
            "per_gan_mmd": mmd_values,
            "selected_gan": selected,
            "draw_counts": [res.draw_counts for res in results],
            "leakage": audit,
            "class_ratio_train": class_ratio(rd_train),
            "sizes": {"train": len(rd_train), "test": len(rd_test),
                      "validation": len(rd_val),
                      "sd_combined": len(sd_combined),
                      "sd_personal": len(sd_personal)},
        })
    arms_agg, p_values = _aggregate_iterations(per_iteration)
    return ExperimentReport("exp3", arms_agg, p_values, quality, provenance, warning_flag)


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    runner = {"exp1": run_exp1, "exp2": run_exp2, "exp3": run_exp3}[config.experiment]
    report = runner(config)
    # single-threaded fixed-order summation throughout; AUGMENT_DETERMINISTIC=1
    # therefore changes nothing and is recorded as always satisfied
    report.provenance["deterministic_summation"] = True
    return report
