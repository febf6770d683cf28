"""Self-describing text checkpoints for :class:`~gandetect.nn.Network`.

Layout::

    format gandetect-checkpoint 1
    arch cnn_d
    wl 100
    epoch 5
    seed 0
    input 100
    layer 0 reshape 100 1
    layer 1 conv1d 1 16 5
    layer 3 dropout 0.25
    ...
    weights 1 W 5 1 16
    <one value per line, %.17g, row-major>
    weights 1 b 16
    ...
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .nn import ARCH_TAGS, LayerSpec, Network

MAGIC = "format gandetect-checkpoint 1"


class CheckpointError(ValueError):
    pass


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def dumps(net: Network) -> str:
    lines = [MAGIC, f"arch {net.arch}", f"wl {net.wl}", f"epoch {net.epoch}", f"seed {net.seed}",
             "input " + " ".join(str(d) for d in net.input_shape)]
    for i, spec in enumerate(net.layers):
        parts = [f"layer {i} {spec.kind}"]
        if spec.kind == "dropout":
            parts.append(_fmt(spec.rate))
        elif spec.dims:
            parts.append(" ".join(str(d) for d in spec.dims))
        lines.append(" ".join(parts))
    for i, p in enumerate(net.params):
        for key in sorted(p):
            arr = p[key]
            lines.append(f"weights {i} {key} " + " ".join(str(d) for d in arr.shape))
            lines.extend(_fmt(v) for v in arr.ravel())
    lines.append("end")
    return "\n".join(lines) + "\n"


def save_checkpoint(net: Network, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(net), encoding="utf-8")
    return path


def loads(text: str, expect_arch: str | None = None) -> Network:
    lines = text.splitlines()
    if not lines or lines[0].strip() != MAGIC:
        raise CheckpointError("not a gandetect checkpoint or unsupported version")
    header: dict[str, str] = {}
    layers: dict[int, LayerSpec] = {}
    pos = 1
    try:
        while pos < len(lines) and not lines[pos].startswith("weights") and lines[pos] != "end":
            key, _, rest = lines[pos].partition(" ")
            if key == "layer":
                idx, kind, *args = rest.split()
                if kind == "dropout":
                    layers[int(idx)] = LayerSpec(kind, rate=float(args[0]))
                else:
                    layers[int(idx)] = LayerSpec(kind, tuple(int(a) for a in args))
            else:
                header[key] = rest
            pos += 1
        for key in ("arch", "wl", "epoch", "seed", "input"):
            if key not in header:
                raise CheckpointError(f"missing header field {key!r}")
        arch = header["arch"]
        if arch not in ARCH_TAGS:
            raise CheckpointError(f"unknown arch {arch!r}")
        if expect_arch is not None and arch != expect_arch:
            raise CheckpointError(f"expected arch {expect_arch!r}, file has {arch!r}")
        if sorted(layers) != list(range(len(layers))):
            raise CheckpointError("layer indices are not contiguous")
        specs = [layers[i] for i in range(len(layers))]
        params: list[dict[str, np.ndarray]] = [{} for _ in specs]
        while pos < len(lines) and lines[pos] != "end":
            _, idx, key, *shape = lines[pos].split()
            shape = tuple(int(d) for d in shape)
            n = int(np.prod(shape))
            vals = np.array([float(v) for v in lines[pos + 1:pos + 1 + n]])
            if len(vals) != n:
                raise CheckpointError(f"truncated weights for layer {idx} {key}")
            params[int(idx)][key] = vals.reshape(shape)
            pos += 1 + n
        if pos >= len(lines):
            raise CheckpointError("missing end marker")
        return Network(arch, int(header["wl"]), tuple(int(d) for d in header["input"].split()),
                       specs, params, seed=int(header["seed"]), epoch=int(header["epoch"]))
    except CheckpointError:
        raise
    except (ValueError, IndexError, KeyError) as exc:
        raise CheckpointError(f"malformed checkpoint near line {pos + 1}: {exc}") from None


def load_checkpoint(path, expect_arch: str | None = None) -> Network:
    return loads(Path(path).read_text(encoding="utf-8"), expect_arch)
