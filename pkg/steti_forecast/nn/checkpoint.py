"""
Self-describing model checkpoints: parameter arrays in an .npz archive plus a JSON
header with the version, hyperparameters, scalers and vocabulary.
"""
import json
import logging
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from ..config import HyperParams
from ..exceptions import CheckpointMismatch
from ..features import ExampleSet, FeatureContext
from .model import Architecture, ModelParams, predict

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
HEADER_KEY = "__header__"


class Checkpoint(BaseModel):
    """Everything needed to predict: parameters and the preprocessing that produced their inputs."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    params: ModelParams
    hyperparams: HyperParams
    context: FeatureContext
    metadata: dict[str, Any] = Field(default_factory=dict)

    @property
    def architecture(self) -> Architecture:
        return Architecture.from_params(self.params)

    def predict(self, examples: ExampleSet) -> np.ndarray:
        return predict(examples, self.params, self.hyperparams)


def save_checkpoint(checkpoint: Checkpoint, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {
        "version": CHECKPOINT_VERSION,
        "hidden_size": checkpoint.architecture.hidden_size,
        "param_names": sorted(checkpoint.params),
        "hyperparams": checkpoint.hyperparams.model_dump(mode="json"),
        "context": checkpoint.context.model_dump(mode="json"),
        "metadata": checkpoint.metadata,
    }
    with open(path, "wb") as fh:
        np.savez(fh, **{HEADER_KEY: np.array(json.dumps(header, sort_keys=True))}, **checkpoint.params)
    logger.info("checkpoint written to %s", path)
    return path


def load_checkpoint(path: str | Path) -> Checkpoint:
    """
    Raises:
        CheckpointMismatch: If the file is unreadable, from another version, or inconsistent.
    """
    try:
        with np.load(path, allow_pickle=False) as archive:
            header = json.loads(str(archive[HEADER_KEY]))
            params = {name: archive[name].astype(np.float64) for name in archive.files if name != HEADER_KEY}
    except (OSError, KeyError, ValueError) as e:
        raise CheckpointMismatch(f"cannot read checkpoint {path}: {e}") from e
    if header.get("version") != CHECKPOINT_VERSION:
        raise CheckpointMismatch(f"checkpoint version {header.get('version')} != {CHECKPOINT_VERSION}")
    if sorted(params) != header["param_names"]:
        raise CheckpointMismatch("checkpoint parameters differ from its header")
    try:
        checkpoint = Checkpoint(
            params=params,
            hyperparams=HyperParams.model_validate(header["hyperparams"]),
            context=FeatureContext.model_validate(header["context"]),
            metadata=header.get("metadata", {}),
        )
    except ValidationError as e:
        raise CheckpointMismatch(f"invalid checkpoint header in {path}: {e}") from e
    if checkpoint.architecture.hidden_size != header["hidden_size"]:
        raise CheckpointMismatch(f"hidden size {checkpoint.architecture.hidden_size} != header {header['hidden_size']}")
    return checkpoint
