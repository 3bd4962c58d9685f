"""Experiment agents.

Every agent module is imported on package load and its classes are exposed on
the package. Classes that declare an ``experiment`` name land in ``REGISTRY``,
which ``get_agent`` reads.
"""
import importlib
import pkgutil
from typing import Dict, Type

REGISTRY: Dict[str, Type] = {}


def _load() -> Dict[str, Type]:
    exported = {}
    for info in sorted(pkgutil.iter_modules(__path__), key=lambda m: m.name):
        module = importlib.import_module(f"{__name__}.{info.name}")
        for name, obj in vars(module).items():
            if not isinstance(obj, type) or obj.__module__ != module.__name__:
                continue
            exported[name] = obj
            experiment = vars(obj).get("experiment")
            if experiment is None:
                continue
            if experiment in REGISTRY:
                raise ImportError(f"{REGISTRY[experiment].__name__} and {name} both run {experiment!r}")
            REGISTRY[experiment] = obj
    return exported


globals().update(_load())
