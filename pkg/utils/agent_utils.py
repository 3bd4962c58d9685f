import importlib
import json
from typing import Optional

import numpy as np

from models.__base import BaseModel, ModelSpec
from utils.exceptions import ValidationError
from utils.io import write_json


def get_net(spec: ModelSpec, n_features: int, anchors: Optional[np.ndarray] = None) -> BaseModel:
    """
    Instantiate the model family named by ``spec.family`` (file and class share the name)
    """
    spec.validate()
    mod = importlib.import_module(f"models.{spec.family}")
    net = getattr(mod, spec.family)
    if spec.family == "KernelExpansion":
        if anchors is None:
            raise ValidationError("KernelExpansion needs anchor points")
        return net(spec, n_features, anchors)
    return net(spec, n_features)


def model_from_dict(payload: dict) -> BaseModel:
    spec = ModelSpec.from_dict(payload["spec"])
    anchors = np.asarray(payload["anchors"], dtype=np.float64) if "anchors" in payload else None
    model = get_net(spec, int(payload["n_features"]), anchors)
    return model.set_weights(np.asarray(payload["weights"], dtype=np.float64))


def save_model(model: BaseModel, path) -> None:
    write_json(path, model.to_dict())


def load_model(path) -> BaseModel:
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))


def get_datamodule(datamodule: str, config, seed: int):
    """
    Fetch the datamodule class by file name
    """
    mod = importlib.import_module(f"datamodules.{datamodule}")
    return getattr(mod, datamodule)(config, seed)


def get_agent(experiment: str):
    """Agent class registered for an experiment name."""
    from agents import REGISTRY

    if experiment in REGISTRY:
        return REGISTRY[experiment]
    raise KeyError(f"no agent runs experiment {experiment!r}")
