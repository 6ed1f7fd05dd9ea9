"""Frozen numerical constants shared by the library and its tests.

The values live in ``defaults.json`` next to this module so that a run can be
reproduced from the data file alone.
"""

import json
from functools import lru_cache
from importlib import resources
from types import MappingProxyType


def _freeze(obj):
    if isinstance(obj, dict):
        return MappingProxyType({k: _freeze(v) for k, v in obj.items()})
    if isinstance(obj, list):
        return tuple(_freeze(v) for v in obj)
    return obj


@lru_cache(maxsize=1)
def defaults():
    """Return the read-only mapping of default constants."""
    text = resources.files(__package__).joinpath("defaults.json").read_text()
    return _freeze(json.loads(text))
