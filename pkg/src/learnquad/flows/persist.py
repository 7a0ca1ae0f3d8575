"""Versioned binary storage for fitted transports.

Layout: the magic line ``LEARNQUAD-MODEL``, one line of JSON describing the
estimator class, its parameters and the name/shape of every array, then the
arrays back to back as little-endian float64.
"""

import json

import numpy as np
from sklearn.utils.validation import check_is_fitted

from ..exceptions import InvalidArgumentError
from .coupling import AffineCouplingFlow
from .matching import FlowMatching
from .transport import IdentityTransport, LinearTransport

__all__ = ["save_model", "load_model", "FORMAT_VERSION"]

MAGIC = b"LEARNQUAD-MODEL\n"
FORMAT_VERSION = 1
_CLASSES = {cls.__name__: cls for cls in (AffineCouplingFlow, FlowMatching, LinearTransport, IdentityTransport)}


def _jsonable(value):
    if isinstance(value, (tuple, list)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    return value


def _arrays(model):
    if isinstance(model, LinearTransport):
        return {"matrix_": model.matrix_, "offset_": model.offset_}
    return model._state_arrays()


def save_model(model, path):
    """Write a fitted transport; :func:`load_model` restores it bit-exactly."""
    name = type(model).__name__
    if name not in _CLASSES:
        raise InvalidArgumentError(f"cannot serialize {name}")
    check_is_fitted(model, "n_features_in_")
    arrays = _arrays(model)
    header = {
        "version": FORMAT_VERSION,
        "class": name,
        "n_features": int(model.n_features_in_),
        "params": {k: _jsonable(v) for k, v in model.get_params(deep=False).items()},
        "arrays": [{"name": k, "shape": list(np.shape(v))} for k, v in arrays.items()],
    }
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        for value in arrays.values():
            fh.write(np.ascontiguousarray(value, dtype="<f8").tobytes())


def load_model(path):
    with open(path, "rb") as fh:
        if fh.readline() != MAGIC:
            raise InvalidArgumentError(f"{path} is not a model file")
        header = json.loads(fh.readline())
        payload = fh.read()
    if header.get("version") != FORMAT_VERSION:
        raise InvalidArgumentError(f"unsupported model format version {header.get('version')!r}")
    cls = _CLASSES[header["class"]]
    params = {k: tuple(v) if isinstance(v, list) else v for k, v in header["params"].items()}
    arrays, offset = {}, 0
    for entry in header["arrays"]:
        count = int(np.prod(entry["shape"], dtype=int))
        if offset + 8 * count > len(payload):
            raise InvalidArgumentError("model payload is shorter than its header describes")
        chunk = np.frombuffer(payload, dtype="<f8", count=count, offset=offset)
        arrays[entry["name"]] = chunk.reshape(entry["shape"]).astype(np.float64)
        offset += 8 * count
    if offset != len(payload):
        raise InvalidArgumentError("model payload size does not match its header")
    model = cls(**params)
    if isinstance(model, LinearTransport):
        model.matrix_, model.offset_ = arrays["matrix_"], arrays["offset_"]
        model.n_features_in_ = header["n_features"]
        return model
    return model._load_state_arrays(header["n_features"], arrays)
