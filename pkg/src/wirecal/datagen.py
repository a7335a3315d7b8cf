"""Synthetic ground truth: perturbed robots, workspace samples and wire-length readings.

All draws come from ``numpy.random.Generator(PCG64(seed))`` (recorded as
:data:`RNG_ALGORITHM` in ground-truth sidecars), one generator per spec so the
geometry stream and the noise stream never interfere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .calibration import MeasurementSet
from .errors import InvalidArgumentError
from .kinematics import ANGLE_MASK, N_LINKS, DHParams, MeasurementRig, batch_cable_lengths

RNG_ALGORITHM = "numpy.random.Generator(PCG64)"
DEFAULT_JOINT_LIMITS_DEG = ((-120.0, 120.0),) * N_LINKS
DEFAULT_NOISE_SIGMA = 0.05


def rng_for(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class PerturbationSpec:
    angle_bound: float  # rad, applied to the alpha and theta blocks
    length_bound: float  # mm, applied to the a and d blocks
    seed: int = 0

    def __post_init__(self):
        if not (self.angle_bound >= 0 and self.length_bound >= 0):
            raise InvalidArgumentError("perturbation bounds must be >= 0")


@dataclass(frozen=True)
class NoiseSpec:
    sigma: float = DEFAULT_NOISE_SIGMA
    seed: int = 0

    def __post_init__(self):
        if not self.sigma >= 0:
            raise InvalidArgumentError("noise sigma must be >= 0")


def perturb_params(nominal: DHParams, spec: PerturbationSpec) -> DHParams:
    bounds = np.where(ANGLE_MASK, spec.angle_bound, spec.length_bound)
    u = rng_for(spec.seed).uniform(-1.0, 1.0, size=bounds.shape)
    return nominal.oplus(u * bounds)


def sample_configs(limits, n: int, seed: int) -> np.ndarray:
    """``n`` joint configurations (radians), each joint uniform within its ``[lo, hi]``."""
    limits = np.asarray(limits, dtype=float)
    if limits.shape != (N_LINKS, 2):
        raise InvalidArgumentError("joint limits must be six [lo, hi] pairs")
    if n < 1:
        raise InvalidArgumentError("need at least one configuration")
    lo, hi = limits[:, 0], limits[:, 1]
    if np.any(hi < lo) or not np.all(np.isfinite(limits)):
        raise InvalidArgumentError(f"empty joint interval in {limits.tolist()}")
    u = rng_for(seed).random((n, N_LINKS))
    return lo + u * (hi - lo)


def exact_lengths(true_params: DHParams, rig: MeasurementRig, configs) -> np.ndarray:
    return batch_cable_lengths(true_params, configs, rig)


def generate_dataset(true_params: DHParams, rig: MeasurementRig, configs,
                     noise: NoiseSpec) -> MeasurementSet:
    configs = np.asarray(configs, dtype=float)
    lengths = exact_lengths(true_params, rig, configs)
    if noise.sigma > 0:
        lengths = lengths + rng_for(noise.seed).normal(0.0, noise.sigma, size=lengths.shape)
    return MeasurementSet(configs, lengths, rig)


def derive_seeds(seed: int):
    """Independent (perturbation, configs, noise) seeds from one master seed."""
    children = np.random.SeedSequence(seed).spawn(3)
    return tuple(int(s.generate_state(1)[0]) for s in children)


@dataclass(frozen=True)
class Scenario:
    truth: DHParams
    train: MeasurementSet
    holdout: MeasurementSet | None  # None when split == 1
    c_measured: np.ndarray  # every reading, train records first
    q_deg: np.ndarray  # every configuration, in the degrees written to disk
    seeds: tuple  # (perturbation, configs, noise)


def make_scenario(nominal: DHParams, rig: MeasurementRig, *, n: int, split: float = 0.8,
                  angle_bound: float, length_bound: float, noise_sigma: float = 0.0,
                  seed: int = 0, joint_limits=None, noise_seed: int | None = None) -> Scenario:
    """Perturbed truth plus a train/holdout split of its wire readings.

    The first ``round(n * split)`` records train, the rest are held out; samples are
    i.i.d., so a contiguous split is as good as a shuffled one. Lengths are computed
    from joint angles that survive a round trip through degrees, so CSV files
    reload bit-exactly.
    """
    if not 0 < split <= 1:
        raise InvalidArgumentError("split must lie in (0, 1]")
    if n < 1:
        raise InvalidArgumentError("need at least one configuration")
    if joint_limits is None:
        joint_limits = np.radians(DEFAULT_JOINT_LIMITS_DEG)
    perturb_seed, config_seed, default_noise_seed = derive_seeds(seed)
    noise_seed = default_noise_seed if noise_seed is None else noise_seed

    truth = perturb_params(nominal, PerturbationSpec(angle_bound, length_bound, perturb_seed))
    q_deg = np.degrees(sample_configs(joint_limits, n, config_seed))
    data = generate_dataset(truth, rig, np.radians(q_deg), NoiseSpec(noise_sigma, noise_seed))
    n_train = int(round(n * split))
    if n_train < 1:
        raise InvalidArgumentError(f"split {split} leaves no training records out of {n}")
    return Scenario(
        truth=truth,
        train=data.subset(slice(0, n_train)),
        holdout=data.subset(slice(n_train, n)) if n_train < n else None,
        c_measured=data.c_measured,
        q_deg=q_deg,
        seeds=(perturb_seed, config_seed, noise_seed),
    )
