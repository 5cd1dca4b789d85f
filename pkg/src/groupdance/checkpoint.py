"""Versioned parameter container.

Same single-file style as the motion container: an ASCII header naming every
parameter tensor with its shape (denoiser under ``gdd.``, footwork adaptor under
``fa.``), then the raw little-endian float64 blocks in header order. Byte layout
is documented in docs/format.md.
"""
from __future__ import annotations

import numpy as np
import torch

from .config import ModelConfig
from .errors import FormatError
from .footwork import FootworkAdaptor
from .model import GroupDanceDenoiser

_MAGIC = "GDCK 1"


def _named_tensors(gdd: GroupDanceDenoiser, fa: FootworkAdaptor):
    for name, p in gdd.named_parameters():
        yield f"gdd.{name}", p
    for name, p in fa.named_parameters():
        yield f"fa.{name}", p


def save_checkpoint(path, config: ModelConfig, gdd: GroupDanceDenoiser,
                    fa: FootworkAdaptor) -> None:
    entries = list(_named_tensors(gdd, fa))
    lines = [
        _MAGIC,
        f"dancers {config.dancers}",
        f"width {config.width}",
        f"layers {config.layers}",
        f"heads {config.heads}",
        f"fa_blocks {config.fa_blocks}",
        f"fa_hidden {config.fa_hidden}",
        f"timesteps {config.timesteps}",
        f"schedule {config.schedule}",
    ]
    for name, p in entries:
        shape = ",".join(str(s) for s in p.shape) or "0"
        lines.append(f"param {name} {shape}")
    header = "\n".join(lines + ["end_header"]) + "\n"
    with open(path, "wb") as f:
        f.write(header.encode("ascii"))
        for _, p in entries:
            f.write(p.detach().numpy().astype("<f8", copy=False).tobytes())


def load_checkpoint(path):
    """Rebuild (config, denoiser, adaptor) from a container file."""
    try:
        with open(path, "rb") as f:
            payload = f.read()
    except OSError as e:
        raise FormatError(f"cannot read {path}: {e}") from e
    sep = payload.find(b"end_header\n")
    if sep < 0:
        raise FormatError("missing end_header marker")
    head = payload[:sep].decode("ascii", errors="replace").splitlines()
    body = payload[sep + len(b"end_header\n"):]
    if not head or head[0] != _MAGIC:
        raise FormatError(f"bad magic/version line: {head[:1]}")

    fields, params = {}, []
    for line in head[1:]:
        key, _, rest = line.partition(" ")
        if key == "param":
            name, _, shape = rest.partition(" ")
            try:
                dims = tuple(int(s) for s in shape.split(",")) if shape != "0" else ()
            except ValueError as e:
                raise FormatError(f"bad shape for {name}: {shape}") from e
            params.append((name, dims))
        else:
            fields[key] = rest
    try:
        config = ModelConfig(
            dancers=int(fields["dancers"]), width=int(fields["width"]),
            layers=int(fields["layers"]), heads=int(fields["heads"]),
            fa_blocks=int(fields["fa_blocks"]), fa_hidden=int(fields["fa_hidden"]),
            timesteps=int(fields["timesteps"]), schedule=fields["schedule"])
    except (KeyError, ValueError) as e:
        raise FormatError(f"malformed header field: {e}") from e

    gdd = GroupDanceDenoiser(config.dancers, config.width, config.layers, config.heads)
    fa = FootworkAdaptor(config.fa_blocks, config.fa_hidden)
    expected = dict(_named_tensors(gdd, fa))
    if [n for n, _ in params] != list(expected.keys()):
        raise FormatError("parameter list does not match the architecture")

    total = sum(int(np.prod(dims)) if dims else 1 for _, dims in params)
    if len(body) != 8 * total:
        raise FormatError(f"payload is {len(body)} bytes, expected {8 * total}")
    off = 0
    with torch.no_grad():
        for name, dims in params:
            target = expected[name]
            if tuple(target.shape) != dims:
                raise FormatError(f"{name}: stored shape {dims} != {tuple(target.shape)}")
            n = int(np.prod(dims)) if dims else 1
            arr = np.frombuffer(body, dtype="<f8", count=n, offset=off).copy()
            off += 8 * n
            if not np.isfinite(arr).all():
                raise FormatError(f"non-finite values in {name}")
            target.copy_(torch.from_numpy(arr.reshape(dims)))
    return config, gdd, fa
