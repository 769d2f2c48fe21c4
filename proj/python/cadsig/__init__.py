"""Point cloud to CAD design history reconstruction."""

import json as _json

import numpy as _np

from . import _cadsig
from ._cadsig import (  # noqa: F401
    MAX_TOKENS,
    VOCAB_SIZE,
    CadsigError,
    CapacityError,
    DomainError,
    GenerationError,
    IoError,
    NumericError,
    ShapeError,
    ProgramSyntaxError,
    ValidationError,
    chamfer,
    dequantize_scalar,
    estimate_normals,
    hungarian,
    quantize_scalar,
)

__all__ = [
    "MAX_TOKENS", "VOCAB_SIZE", "CadsigError", "CapacityError", "DomainError", "GenerationError", "IoError",
    "NumericError", "ProgramSyntaxError", "ShapeError", "ValidationError", "Model", "chamfer", "dequantize_scalar",
    "estimate_normals", "evaluate_prediction", "evaluate_program", "generate_sample", "hungarian", "mesh_program",
    "program_to_tokens", "quantize_scalar", "run_fixture", "tokens_to_program",
]


def _dump(program):
    return program if isinstance(program, str) else _json.dumps(program)


def program_to_tokens(program):
    """Token stream (list of [a, b]) of a program dict, cls to end."""
    return [list(t) for t in _cadsig.program_to_tokens(_dump(program))]


def tokens_to_program(tokens):
    return _json.loads(_cadsig.tokens_to_program(tokens))


def generate_sample(seed, index, n_points=1024, max_steps=3):
    """(program dict, n_points x 6 float32 cloud of xyz + normals)."""
    prog, cloud = _cadsig.generate_sample(seed, index, n_points, max_steps)
    return _json.loads(prog), cloud


def evaluate_program(program, n_points=8192, seed=0):
    """dict(valid, diagnosis, points, normals) of the solid a program builds."""
    valid, diagnosis, points, normals = _cadsig.evaluate_program(_dump(program), n_points, seed)
    return {"valid": valid, "diagnosis": diagnosis, "points": points, "normals": normals}


def mesh_program(program, resolution=48):
    """(vertices, triangles) of a program's solid."""
    v, t = _cadsig.mesh_program(_dump(program), resolution)
    return v, _np.asarray(t, dtype=_np.int64).reshape(-1, 3)


def evaluate_prediction(gt_program, pred_tokens, eval_points=8192, seed=0):
    return _json.loads(_cadsig.evaluate_prediction(_dump(gt_program), pred_tokens, eval_points, seed))


def run_fixture(root, name):
    passed, provenance, failures = _cadsig.run_fixture(str(root), name)
    return {"passed": passed, "provenance": provenance, "failures": failures}


def _cloud(cloud):
    return _np.ascontiguousarray(cloud, dtype=_np.float32)


class Model:
    """Encoder-decoder model; weights from a preset initialization or a checkpoint."""

    def __init__(self, preset="tiny", seed=0, _impl=None):
        self._m = _impl if _impl is not None else _cadsig.Model(preset, seed)

    @classmethod
    def from_config(cls, config, seed=0):
        return cls(_impl=_cadsig.Model.from_config_json(_dump(config), seed))

    @classmethod
    def from_checkpoint(cls, path):
        return cls(_impl=_cadsig.Model.from_checkpoint(str(path)))

    @property
    def config(self):
        return _json.loads(self._m.config_json())

    def parameter_count(self):
        return self._m.parameter_count()

    def save(self, path):
        self._m.save(str(path))

    def decode(self, cloud, hybrid_k=1, eval_points=8192, seed=0):
        return _json.loads(self._m.decode(_cloud(cloud), hybrid_k, eval_points, seed))

    def autocomplete(self, cloud, given, hybrid_k=1, eval_points=8192, seed=0):
        return _json.loads(self._m.autocomplete(_cloud(cloud), given, hybrid_k, eval_points, seed))

    def next_steps(self, cloud, context, k=3, eval_points=8192):
        return _json.loads(self._m.next_steps(_cloud(cloud), context, k, eval_points))

    def train(self, data_dir, config=None, split="train", limit=0, out_dir=""):
        return _json.loads(self._m.train(str(data_dir), _dump(config or {}), split, limit, str(out_dir)))
