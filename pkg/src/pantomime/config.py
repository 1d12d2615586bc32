"""Run configuration: one JSON document drives every CLI command.

A RunConfig pins all seeds and hyperparameters, so a run is reproducible
from its config file alone and artifact directories can be keyed by the
config hash. There is no implicit entropy anywhere: master_seed is required
and every derived seed is spelled out with a calibrated default.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

from .anonymizer import AnonymizationConfig, DirectNoiseSpec
from .errors import ConfigurationError
from .fitting import FitOptions, FitWeights
from .priors import POSE_VAE, TRANSITION_CVAE
from .synthdata import CorpusConfig, desk_ceti_config, desk_horst_config

CORPUS_PRESETS = ("desk-ceti", "desk-horst")
EXPERIMENT_IDS = ("E1", "E2", "E3", "E4", "E5", "E6")


@dataclass(frozen=True)
class PriorTrainSettings:
    """Training hyperparameters for one prior."""

    kind: str
    epochs: int
    batch_size: int
    kl_weight: float
    lr: float
    seed: int

    def __post_init__(self):
        if self.kind not in (POSE_VAE, TRANSITION_CVAE):
            raise ConfigurationError(f"prior kind '{self.kind}' unknown")
        if self.epochs < 0 or self.batch_size < 1:
            raise ConfigurationError("prior epochs/batch_size out of range")
        if self.kl_weight < 0 or self.lr <= 0:
            raise ConfigurationError("prior kl_weight/lr out of range")


def default_pose_prior_settings() -> PriorTrainSettings:
    # long low-KL schedule: enough latent dimensions stay active to carry
    # posture, which the round-trip fidelity checks depend on
    return PriorTrainSettings(kind=POSE_VAE, epochs=300, batch_size=128,
                              kl_weight=0.01, lr=0.001, seed=404)


def default_transition_prior_settings() -> PriorTrainSettings:
    # strong KL keeps the transition posterior near the prior; its sampled
    # codes are the whitest of the four representations by design
    return PriorTrainSettings(kind=TRANSITION_CVAE, epochs=20, batch_size=128,
                              kl_weight=0.25, lr=0.001, seed=405)


def _corpus_from_preset(preset: str, master_seed: int) -> CorpusConfig:
    if preset == "desk-ceti":
        return desk_ceti_config(master_seed)
    if preset == "desk-horst":
        return desk_horst_config(master_seed)
    raise ConfigurationError(
        f"corpus_preset '{preset}' unknown (have {', '.join(CORPUS_PRESETS)})"
    )


@dataclass
class RunConfig:
    """Everything one run needs. `corpus` overrides `corpus_preset` when set."""

    master_seed: int
    corpus_preset: str = "desk-ceti"
    corpus: CorpusConfig = None
    pose_prior: PriorTrainSettings = field(default_factory=default_pose_prior_settings)
    transition_prior: PriorTrainSettings = field(
        default_factory=default_transition_prior_settings)
    fit_weights: FitWeights = field(default_factory=FitWeights)
    fit_options: FitOptions = field(default_factory=FitOptions)
    fit_base_seed: int = 7000
    split_seed: int = 5
    anon_seed: int = 303
    anonymizers: list = field(default_factory=list)
    experiments: tuple = EXPERIMENT_IDS
    out_dir: str = "runs"

    def __post_init__(self):
        if self.master_seed is None:
            raise ConfigurationError("master_seed is required")
        if self.corpus is None and self.corpus_preset not in CORPUS_PRESETS:
            raise ConfigurationError(
                f"corpus_preset '{self.corpus_preset}' unknown "
                f"(have {', '.join(CORPUS_PRESETS)})"
            )
        bad = [e for e in self.experiments if e not in EXPERIMENT_IDS]
        if bad:
            raise ConfigurationError(f"experiments: unknown ids {bad}")
        if not self.anonymizers:
            self.anonymizers = [
                AnonymizationConfig(prior=POSE_VAE, mode="static", gamma=1.0,
                                    seed=self.anon_seed)
            ]

    def corpus_config(self) -> CorpusConfig:
        if self.corpus is not None:
            return self.corpus
        return _corpus_from_preset(self.corpus_preset, self.master_seed)


def _anon_to_dict(a) -> dict:
    d = a.to_dict()
    d["kind"] = "direct" if isinstance(a, DirectNoiseSpec) else "prior"
    return d


def anon_from_dict(d: dict):
    d = dict(d)
    kind = d.pop("kind", "prior")
    if kind == "direct":
        return DirectNoiseSpec.from_dict(d)
    if kind == "prior":
        return AnonymizationConfig.from_dict(d)
    raise ConfigurationError(f"anonymizers: unknown kind '{kind}'")


def run_config_to_dict(rc: RunConfig) -> dict:
    d = {
        "master_seed": int(rc.master_seed),
        "corpus_preset": rc.corpus_preset,
        "corpus": None if rc.corpus is None else _corpus_dict(rc.corpus),
        "pose_prior": asdict(rc.pose_prior),
        "transition_prior": asdict(rc.transition_prior),
        "fit_weights": asdict(rc.fit_weights),
        "fit_options": asdict(rc.fit_options),
        "fit_base_seed": int(rc.fit_base_seed),
        "split_seed": int(rc.split_seed),
        "anon_seed": int(rc.anon_seed),
        "anonymizers": [_anon_to_dict(a) for a in rc.anonymizers],
        "experiments": list(rc.experiments),
        "out_dir": rc.out_dir,
    }
    return d


def _corpus_dict(c: CorpusConfig) -> dict:
    d = asdict(c)
    d["actions"] = list(d["actions"])
    return d


def run_config_from_dict(d: dict) -> RunConfig:
    if not isinstance(d, dict):
        raise ConfigurationError("run config must be a JSON object")
    if "master_seed" not in d:
        raise ConfigurationError("master_seed is required")
    known = {
        "master_seed", "corpus_preset", "corpus", "pose_prior",
        "transition_prior", "fit_weights", "fit_options", "fit_base_seed",
        "split_seed", "anon_seed", "anonymizers", "experiments", "out_dir",
    }
    unknown = sorted(set(d) - known)
    if unknown:
        raise ConfigurationError(f"unknown config keys: {', '.join(unknown)}")
    kw = {"master_seed": int(d["master_seed"])}
    if "corpus_preset" in d:
        kw["corpus_preset"] = str(d["corpus_preset"])
    if d.get("corpus") is not None:
        c = dict(d["corpus"])
        c["actions"] = tuple(c.get("actions", ()))
        try:
            kw["corpus"] = CorpusConfig(**c)
        except TypeError as e:
            raise ConfigurationError(f"corpus: {e}")
    for key, cls in (("pose_prior", PriorTrainSettings),
                     ("transition_prior", PriorTrainSettings),
                     ("fit_weights", FitWeights),
                     ("fit_options", FitOptions)):
        if d.get(key) is not None:
            try:
                kw[key] = cls(**d[key])
            except TypeError as e:
                raise ConfigurationError(f"{key}: {e}")
    for key in ("fit_base_seed", "split_seed", "anon_seed"):
        if key in d:
            kw[key] = int(d[key])
    if "anonymizers" in d:
        kw["anonymizers"] = [anon_from_dict(a) for a in d["anonymizers"]]
    if "experiments" in d:
        kw["experiments"] = tuple(str(e) for e in d["experiments"])
    if "out_dir" in d:
        kw["out_dir"] = str(d["out_dir"])
    return RunConfig(**kw)


def load_run_config(path: str) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}")
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"config file {path} is not valid JSON: {e}")
    return run_config_from_dict(doc)


def save_run_config(path: str, rc: RunConfig) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(run_config_to_dict(rc), fh, sort_keys=True, indent=2)
        fh.write("\n")


def config_hash(rc: RunConfig) -> str:
    """Identity of the computation: everything except where it lands on disk."""
    d = run_config_to_dict(rc)
    d.pop("out_dir", None)
    text = json.dumps(d, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]
