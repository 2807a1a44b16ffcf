"""Experiment configuration: YAML schema, validation, hashing."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from typing import Optional

import yaml

from .brw import DEFAULT_POPULATION_CAP, SimConfig
from .displacement import DisplacementModel
from .environment import EnvironmentModel
from .errors import ConfigError
from .limit_laws import LimitConfig
from .offspring import Binomial, Deterministic, Finite, Geometric, OffspringLaw, Poisson


def law_to_dict(law: OffspringLaw) -> dict:
    if isinstance(law, Deterministic):
        return {"family": "deterministic", "k": law.k}
    if isinstance(law, Poisson):
        return {"family": "poisson", "lam": law.lam}
    if isinstance(law, Geometric):
        return {"family": "geometric", "q": law.q}
    if isinstance(law, Binomial):
        return {"family": "binomial", "m": law.m, "q": law.q}
    if isinstance(law, Finite):
        return {"family": "finite", "probs": list(law.probs)}
    raise ConfigError(f"unknown offspring law {law!r}")


def law_from_dict(doc: dict) -> OffspringLaw:
    try:
        family = doc["family"]
        if family == "deterministic":
            return Deterministic(int(doc["k"]))
        if family == "poisson":
            return Poisson(float(doc["lam"]))
        if family == "geometric":
            return Geometric(float(doc["q"]))
        if family == "binomial":
            return Binomial(int(doc["m"]), float(doc["q"]))
        if family == "finite":
            return Finite(tuple(float(p) for p in doc["probs"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid offspring law {doc!r}: {exc}") from exc
    raise ConfigError(f"unknown offspring family {doc.get('family')!r}")


@dataclass(frozen=True)
class SimSettings:
    n: tuple
    replications: int = 1000
    retain_delta: float = 0.05
    top_k: int = 2
    population_cap: int = DEFAULT_POPULATION_CAP
    jump_eta: float = 0.1
    condition_on_survival: bool = True
    early_rho: int = 10

    def __post_init__(self):
        if len(self.n) == 0 or any(int(v) < 1 for v in self.n):
            raise ConfigError("simulation.n must be a nonempty list of positive integers")
        if self.replications < 1:
            raise ConfigError("need at least one replication")
        object.__setattr__(self, "n", tuple(int(v) for v in self.n))


@dataclass(frozen=True)
class ComparisonSettings:
    grid: tuple = (0.5, 0.75, 1.0, 1.5, 2.0, 3.0)
    ks_tolerance: float = 0.05
    count_tv_tolerance: float = 0.05
    laplace_tolerance: float = 0.05
    count_x: float = 1.0

    def __post_init__(self):
        if len(self.grid) == 0 or any(x <= 0.0 for x in self.grid):
            raise ConfigError("comparison.grid must be nonempty and positive")
        object.__setattr__(self, "grid", tuple(float(x) for x in self.grid))


@dataclass(frozen=True)
class ExperimentConfig:
    environment: EnvironmentModel
    displacement: DisplacementModel
    simulation: SimSettings
    limit: LimitConfig
    comparison: ComparisonSettings
    seed: int = 0
    output_dir: str = "out"

    def sim_config(self, n: int) -> SimConfig:
        return SimConfig(
            n=n,
            env=self.environment,
            disp=self.displacement,
            retain_delta=self.simulation.retain_delta,
            top_k=self.simulation.top_k,
            population_cap=self.simulation.population_cap,
            condition_on_survival=self.simulation.condition_on_survival,
            jump_eta=self.simulation.jump_eta,
            seed=self.seed,
        )


def config_to_dict(cfg: ExperimentConfig) -> dict:
    disp = {"mode": cfg.displacement.mode, "alpha": cfg.displacement.alpha, "p": cfg.displacement.p}
    if cfg.displacement.mode == "discrete_angular":
        disp["atoms"] = [list(a) for a in cfg.displacement.atoms]
        disp["weights"] = list(cfg.displacement.weights)
    return {
        "seed": cfg.seed,
        "output_dir": cfg.output_dir,
        "environment": {
            "support": [law_to_dict(law) for law in cfg.environment.support],
            "weights": list(cfg.environment.weights),
        },
        "displacement": disp,
        "simulation": {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(cfg.simulation).items()},
        "limit": asdict(cfg.limit),
        "comparison": {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(cfg.comparison).items()},
    }


def config_from_dict(doc: dict) -> ExperimentConfig:
    try:
        env_doc = doc["environment"]
        env = EnvironmentModel(
            tuple(law_from_dict(d) for d in env_doc["support"]),
            tuple(float(w) for w in env_doc["weights"]),
        )
        disp_doc = dict(doc["displacement"])
        mode = disp_doc.get("mode", "iid")
        if mode == "discrete_angular":
            disp = DisplacementModel(
                alpha=float(disp_doc["alpha"]),
                p=float(disp_doc["p"]),
                mode=mode,
                atoms=tuple(tuple(float(x) for x in row) for row in disp_doc["atoms"]),
                weights=tuple(float(w) for w in disp_doc["weights"]),
            )
        else:
            disp = DisplacementModel(
                alpha=float(disp_doc["alpha"]), p=float(disp_doc["p"]), mode=mode
            )
        sim = SimSettings(**{**doc.get("simulation", {}), "n": tuple(doc["simulation"]["n"])})
        limit = LimitConfig(**doc.get("limit", {}))
        comparison = ComparisonSettings(
            **{
                k: (tuple(v) if k == "grid" else v)
                for k, v in doc.get("comparison", {}).items()
            }
        )
        return ExperimentConfig(
            environment=env,
            displacement=disp,
            simulation=sim,
            limit=limit,
            comparison=comparison,
            seed=int(doc.get("seed", 0)),
            output_dir=str(doc.get("output_dir", "out")),
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc


def load_config(path: str, seed: Optional[int] = None, output_dir: Optional[str] = None) -> ExperimentConfig:
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path!r}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("configuration document must be a mapping")
    if seed is not None:
        doc["seed"] = seed
    if output_dir is not None:
        doc["output_dir"] = output_dir
    return config_from_dict(doc)


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=False)


def config_hash(cfg: ExperimentConfig) -> str:
    """Short stable digest of the full configuration."""
    canonical = json.dumps(config_to_dict(cfg), sort_keys=True)
    return hashlib.sha256(canonical.encode()).hexdigest()[:12]
