"""Python entry points for the uwpose C++ library.

Configs are plain dicts; they are passed to the extension as JSON.
"""

import json as _json

try:
    from . import _uwpose as _ext
except ImportError:  # built in-tree, module sits on PYTHONPATH
    import _uwpose as _ext

UwposeError = _ext.UwposeError
ConfigError = _ext.ConfigError
IoError = _ext.IoError
ParseError = _ext.ParseError
FormatError = _ext.FormatError
ShapeError = _ext.ShapeError
DivergenceError = _ext.DivergenceError

normalize_quaternion = _ext.normalize_quaternion
canonicalize = _ext.canonicalize
angular_error_deg = _ext.angular_error_deg
right_camera_pose = _ext.right_camera_pose
composite_loss = _ext.composite_loss
load_manifest = _ext.load_manifest
predict = _ext.predict


def generate_dataset(preset, out_dir, samples=None, stereo=False, seed=None, dataset=None):
    """Render a synthetic dataset; returns the manifest path."""
    return _ext.generate_dataset(preset, str(out_dir), samples, stereo, seed,
                                 _json.dumps(dataset) if dataset else "")


def train(manifest, checkpoint, config=None, eval_manifest=None):
    """Train on a manifest, write the checkpoint, return the per-epoch history as dicts."""
    csv = _ext.train(str(manifest), str(checkpoint), _json.dumps(config or {}),
                     None if eval_manifest is None else str(eval_manifest))
    lines = csv.strip().splitlines()
    keys = lines[0].split(",")
    rows = []
    for line in lines[1:]:
        values = line.split(",")
        rows.append({k: (int(v) if k == "epoch" else float(v)) for k, v in zip(keys, values)})
    return rows


def evaluate(checkpoint, manifest):
    """Evaluation report as a dict."""
    return _json.loads(_ext.evaluate(str(checkpoint), str(manifest)))
