"""Checkpoint persistence for trained AFG/SFG models (manifest + float32 blobs)."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .afg import AfgConfig, AfgModel
from .errors import ManifestError, ShapeMismatchError
from .losses import AfgNets
from .nn import MlpNet
from .sfg import ConditionMode, SfgModel

MANIFEST_NAME = "checkpoint.manifest"
_AFG_NETS = ("e_sem", "d_sem", "e_vis", "d_vis")


def _net_blobs(name: str, net: MlpNet) -> dict:
    out = {}
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        out[f"{name}.W{i}"] = w
        out[f"{name}.b{i}"] = b
    return out


def save_checkpoint(out_dir, afg: AfgModel, sfg: SfgModel | None = None, fingerprint: str = "") -> Path:
    from .data_io import write_manifest

    fields = {"aligned_dim": afg.aligned_dim, "config_fingerprint": fingerprint or "-"}
    blobs = {}
    nets = dict(zip(_AFG_NETS, afg.nets.as_list()))
    if sfg is not None:
        nets.update(e3=sfg.e3, d3=sfg.d3)
        fields["latent_dim"] = sfg.latent_dim
        fields["condition_mode"] = sfg.condition_mode.value
    for name, net in nets.items():
        fields[f"net.{name}.layers"] = ",".join(str(s) for s in net.layer_sizes)
        blobs.update(_net_blobs(name, net))
    return write_manifest(Path(out_dir) / MANIFEST_NAME, "checkpoint", fields, blobs)


def _load_net(name: str, fields: dict, arrays: dict) -> MlpNet:
    key = f"net.{name}.layers"
    if key not in fields:
        raise ManifestError(f"checkpoint lacks {key}")
    sizes = [int(s) for s in fields[key].split(",")]
    weights, biases = [], []
    for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        try:
            w, b = arrays[f"{name}.W{i}"], arrays[f"{name}.b{i}"]
        except KeyError as exc:
            raise ManifestError(f"checkpoint lacks blob {exc.args[0]}") from None
        if w.shape != (fan_in, fan_out) or b.shape != (fan_out,):
            raise ShapeMismatchError(
                f"{name} layer {i}: blob shapes {w.shape}/{b.shape} do not match layer sizes {sizes}")
        weights.append(w)
        biases.append(b)
    return MlpNet(sizes, weights=weights, biases=biases)


def load_checkpoint(path) -> tuple[AfgModel, SfgModel | None, dict]:
    """``path`` is a checkpoint directory or its manifest. Returns (afg, sfg, fields)."""
    from .data_io import read_manifest

    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    fields, arrays = read_manifest(path, kind="checkpoint")
    d = int(fields["aligned_dim"])
    nets = AfgNets(*(_load_net(n, fields, arrays) for n in _AFG_NETS))
    if nets.e_sem.out_dim != 2 * d or nets.e_vis.out_dim != 2 * d or nets.d_sem.in_dim != d:
        raise ShapeMismatchError("network sizes inconsistent with aligned_dim")
    afg = AfgModel(nets, d, [], None, trained=True)
    sfg = None
    if "latent_dim" in fields:
        e3, d3 = _load_net("e3", fields, arrays), _load_net("d3", fields, arrays)
        latent = int(fields["latent_dim"])
        if e3.out_dim != 2 * latent or d3.out_dim != d:
            raise ShapeMismatchError("SFG network sizes inconsistent with latent/aligned dims")
        sfg = SfgModel(e3, d3, latent, ConditionMode(fields["condition_mode"]))
    return afg, sfg, fields


def params_equal(a: MlpNet, b: MlpNet) -> bool:
    return a.layer_sizes == b.layer_sizes and all(
        np.array_equal(p, q) for p, q in zip(a.params(), b.params()))


def dump_config(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))
