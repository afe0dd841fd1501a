"""Run presets bundling corpus, network, training and evaluation configs.

``paper``: the full-scale experiment (7 JSR values x 10 classes x 100
samples = 7000 records at 16 MHz; 105x105 composites; 64/128/128/256
embedding tower trained 2000 iterations x 180 pairs). Hours of compute;
never run in CI.

``desk``: a scaled-down twin that keeps every pipeline stage but runs in
minutes: 2 JSR values {0, 10} dB x 10 x 20 = 400 records at 1 MHz (the
synthesized content tops out near 310 kHz, so the smaller rate keeps
Nyquist with margin), 40x40 composites, a 16/32/32/64 tower with a 64-dim
embedding, 200 iterations x 60 pairs with a faster learning rate suited to
the short schedule.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

from .dataset import CorpusConfig, config_from_dict, config_to_dict
from .errors import ConfigurationError
from .pipeline import PrepConfig
from .siamese import NetConfig, TrainConfig
from .tfa import TfGrid


@dataclass(frozen=True)
class EvalConfig:
    k_support: int = 5
    n_draws: int = 3


@dataclass(frozen=True)
class RunConfig:
    corpus: CorpusConfig
    net: NetConfig
    train: TrainConfig
    eval: EvalConfig = field(default_factory=EvalConfig)


def paper_preset() -> RunConfig:
    return RunConfig(
        corpus=CorpusConfig(
            tf=TfGrid(n_time_bins=256, n_freq_bins=256,
                      freq_range_hz=(4e3, 360e3), window_length=257),
            prep=PrepConfig(side=105),
        ),
        net=NetConfig(),
        train=TrainConfig(),
        eval=EvalConfig(k_support=5, n_draws=3),
    )


def desk_preset() -> RunConfig:
    return RunConfig(
        corpus=CorpusConfig(
            jsr_values_db=(0.0, 10.0),
            per_cell=20,
            sample_rate_hz=1e6,
            duration_s=0.05,
            tf=TfGrid(n_time_bins=128, n_freq_bins=128,
                      freq_range_hz=(4e3, 360e3), window_length=257),
            prep=PrepConfig(side=40),
        ),
        net=NetConfig(
            input_side=40,
            conv_channels=(16, 32, 32, 64),
            conv_kernels=(5, 5, 4, 2),
            pool_after=(True, True, True, False),
            embed_dim=64,
        ),
        train=TrainConfig(
            iterations=200,
            pairs_per_iteration=60,
            learning_rate=3e-3,
            init_scheme="fan_in",
        ),
        eval=EvalConfig(k_support=5, n_draws=3),
    )


PRESETS = {"desk": desk_preset, "paper": paper_preset}


def get_preset(name: str) -> RunConfig:
    if name not in PRESETS:
        raise ConfigurationError(
            f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return PRESETS[name]()


def run_config_to_dict(cfg: RunConfig) -> dict:
    return {
        "corpus": config_to_dict(cfg.corpus),
        "net": dataclasses.asdict(cfg.net),
        "train": dataclasses.asdict(cfg.train),
        "eval": dataclasses.asdict(cfg.eval),
    }


def run_config_from_dict(d: dict, base: RunConfig = None) -> RunConfig:
    """Build a RunConfig from a (possibly partial) dict, overlaying ``base``.

    Unknown keys raise ConfigurationError so config-file typos surface
    instead of silently keeping defaults.
    """
    base = base if base is not None else paper_preset()
    known = {"corpus", "net", "train", "eval"}
    unknown = set(d) - known
    if unknown:
        raise ConfigurationError(f"unknown config sections: {sorted(unknown)}")

    def overlay(section, current, builder):
        if section not in d:
            return current
        merged = {**_section_dict(section, current), **d[section]}
        try:
            return builder(merged)
        except TypeError as exc:
            raise ConfigurationError(f"bad {section} config: {exc}") from exc

    def _section_dict(section, current):
        if section == "corpus":
            return config_to_dict(current)
        return dataclasses.asdict(current)

    def build_net(m):
        for key in ("conv_channels", "conv_kernels", "pool_after"):
            m[key] = tuple(m[key])
        return NetConfig(**m)

    return RunConfig(
        corpus=overlay("corpus", base.corpus, config_from_dict),
        net=overlay("net", base.net, build_net),
        train=overlay("train", base.train, lambda m: TrainConfig(**m)),
        eval=overlay("eval", base.eval, lambda m: EvalConfig(**m)),
    )
