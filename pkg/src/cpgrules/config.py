"""Pipeline configuration: JSON file plus dotted ``--set key=value`` overrides."""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Optional, Sequence

from .classifier.training import TrainConfig
from .errors import ConfigError
from .textprep import _data_path

PATH_KEYS = ("corpus", "embeddings", "stoplist", "tag_lexicon", "qualifier_lexicon", "semantic_lexicon",
             "categories", "synonyms", "operator_cues", "units")

_BUNDLED = {
    "corpus": "synthetic_corpus.jsonl",
    "embeddings": "synthetic_vectors.txt",
    "stoplist": "stopwords.txt",
    "tag_lexicon": "tag_lexicon.tsv",
    "qualifier_lexicon": "seed_qualifiers.tsv",
    "semantic_lexicon": "semantic_lexicon.tsv",
    "categories": "categories.json",
    "synonyms": "synonyms.tsv",
    "operator_cues": "operator_cues.json",
    "units": "units.txt",
}


@dataclass(frozen=True)
class MiningConfig:
    threshold: float = 50.0
    alpha: float = 0.5
    min_df: int = 3
    window: int = 2
    expand: bool = True
    top_k: Optional[int] = None

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError("mining.alpha must lie in [0, 1]")
        if not isinstance(self.min_df, int) or self.min_df < 1:
            raise ConfigError("mining.min_df must be an integer >= 1")
        if not isinstance(self.window, int) or self.window < 0:
            raise ConfigError("mining.window must be an integer >= 0")
        if self.top_k is not None and (not isinstance(self.top_k, int) or self.top_k < 1):
            raise ConfigError("mining.top_k must be null or an integer >= 1")
        if not isinstance(self.threshold, (int, float)) or isinstance(self.threshold, bool):
            raise ConfigError("mining.threshold must be a number")


@dataclass(frozen=True)
class PipelineConfig:
    paths: dict[str, Path] = field(default_factory=lambda: {k: _data_path(v) for k, v in _BUNDLED.items()})
    train: TrainConfig = field(default_factory=TrainConfig)
    mining: MiningConfig = field(default_factory=MiningConfig)
    seed: int = 42

    def path(self, key: str) -> Path:
        return self.paths[key]

    def train_config(self, seed: Optional[int] = None) -> TrainConfig:
        """Classifier settings with the pipeline seed applied."""
        values = self.train.to_dict()
        values["seed"] = self.seed if seed is None else seed
        return TrainConfig(**values)

    def to_dict(self) -> dict:
        train = self.train.to_dict()
        train.pop("seed")
        return {
            "seed": self.seed,
            "paths": {k: str(v) for k, v in self.paths.items()},
            "train": train,
            "mining": {f.name: getattr(self.mining, f.name) for f in fields(MiningConfig)},
        }


def default_dict() -> dict:
    return PipelineConfig().to_dict()


def _parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(data: dict, assignment: str) -> None:
    """Set ``section.key=value`` (value parsed as JSON when possible) in a config dict."""
    key, sep, raw = assignment.partition("=")
    if not sep or not key.strip():
        raise ConfigError(f"--set expects key=value, got {assignment!r}")
    parts = key.strip().split(".")
    node = data
    for p in parts[:-1]:
        if not isinstance(node.get(p), dict):
            raise ConfigError(f"unknown config section {p!r} in {key!r}")
        node = node[p]
    if parts[-1] not in node:
        raise ConfigError(f"unknown config key {key!r}")
    node[parts[-1]] = _parse_value(raw)


def _merge(base: dict, update: dict, where: str = "") -> None:
    for k, v in update.items():
        if k not in base:
            raise ConfigError(f"unknown config key {where + k!r}")
        if isinstance(base[k], dict):
            if not isinstance(v, dict):
                raise ConfigError(f"config key {where + k!r} must be an object")
            _merge(base[k], v, f"{where}{k}.")
        else:
            base[k] = v


def from_dict(data: dict, base_dir: Optional[Path] = None, check_paths: Sequence[str] = PATH_KEYS) -> PipelineConfig:
    seed = data.get("seed")
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError("seed must be a non-negative integer")
    paths = {}
    for k, v in data["paths"].items():
        p = Path(str(v)).expanduser()
        if base_dir is not None and not p.is_absolute():
            p = base_dir / p
        paths[k] = p
    for k in check_paths:
        if not paths[k].exists():
            raise ConfigError(f"paths.{k}: {paths[k]} does not exist")
    try:
        train = TrainConfig(seed=seed, **data["train"])
        mining = MiningConfig(**data["mining"])
    except TypeError as exc:
        raise ConfigError(f"bad config value: {exc}") from None
    return PipelineConfig(paths, train, mining, seed)


def load_config(path=None, overrides: Sequence[str] = (), seed: Optional[int] = None,
                check_paths: Sequence[str] = PATH_KEYS) -> PipelineConfig:
    """Defaults, then the JSON file, then ``--set`` overrides, then an explicit seed.

    Relative paths in the file resolve against the file's directory; paths
    given through overrides resolve against the working directory.
    """
    data = copy.deepcopy(default_dict())
    base_dir = None
    if path is not None:
        path = Path(path)
        try:
            loaded = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file {path} does not exist") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON ({exc.msg})") from None
        if not isinstance(loaded, dict):
            raise ConfigError(f"config file {path} must hold a JSON object")
        _merge(data, loaded)
        base_dir = path.parent
        for k in loaded.get("paths", {}):
            p = Path(str(data["paths"][k])).expanduser()
            data["paths"][k] = str(p if p.is_absolute() else base_dir / p)
    for assignment in overrides:
        apply_override(data, assignment)
    if seed is not None:
        data["seed"] = seed
    return from_dict(data, None, check_paths)


__all__ = ["MiningConfig", "PATH_KEYS", "PipelineConfig", "apply_override", "default_dict", "from_dict",
           "load_config"]
