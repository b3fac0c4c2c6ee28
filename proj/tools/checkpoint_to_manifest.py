#!/usr/bin/env python3
# Copyright 2026 The Scribo Authors
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Converts a QuartzNet/Jasper checkpoint into a scribo model directory.

Accepts a .nemo archive, a PyTorch state dict (.ckpt/.pt, needs torch) or an
.npz holding the same tensor names. The architecture is read from the tensor
shapes; the first layer is taken as stride 2 and the first epilogue layer as
dilation 2, as in the QuartzNet family.

    checkpoint_to_manifest.py model.nemo out_dir --alphabet en
"""

import argparse
import io
import json
import re
import sys
import tarfile
import zlib
from pathlib import Path

import numpy as np

ENGLISH = [" "] + [chr(c) for c in range(ord("a"), ord("z") + 1)] + ["'"]
SPANISH = ENGLISH + ["ñ"]
PRESETS = {"en": ENGLISH, "de": ENGLISH, "fr": ENGLISH, "it": ENGLISH, "es": SPANISH}

BLOCK = re.compile(r"^encoder\.encoder\.(\d+)\.")


def load_state(path):
    path = Path(path)
    if path.suffix == ".npz":
        with np.load(path) as z:
            return {k: z[k] for k in z.files}
    import torch  # only needed for torch checkpoints

    if path.suffix == ".nemo":
        with tarfile.open(path) as tar:
            member = next(m for m in tar.getmembers() if m.name.endswith("model_weights.ckpt"))
            blob = io.BytesIO(tar.extractfile(member).read())
        state = torch.load(blob, map_location="cpu")
    else:
        state = torch.load(path, map_location="cpu")
    if "state_dict" in state:
        state = state["state_dict"]
    return {k: v.numpy() for k, v in state.items() if hasattr(v, "numpy")}


def bn(state, prefix):
    return {
        "bn.gamma": state[prefix + ".weight"],
        "bn.beta": state[prefix + ".bias"],
        "bn.mean": state[prefix + ".running_mean"],
        "bn.var": state[prefix + ".running_var"],
    }


def conv_layer(state, base, index):
    """Returns (conv spec, in_channels, tensors) for the conv at mconv.<index>."""
    w = state[f"{base}.mconv.{index}.conv.weight"]
    tensors = {}
    if w.shape[1] == 1 and w.shape[2] > 1:  # depthwise [C, 1, K]
        kernel, cin = w.shape[2], w.shape[0]
        tensors["dw"] = np.ascontiguousarray(w[:, 0, :].T)
        pw = state[f"{base}.mconv.{index + 1}.conv.weight"]
        bn_index, separable = index + 2, True
    else:
        kernel, cin, pw, bn_index, separable = 1, w.shape[1], w, index + 1, False
    tensors["pw"] = np.ascontiguousarray(pw[:, :, 0].T)
    tensors.update(bn(state, f"{base}.mconv.{bn_index}"))
    spec = {"kernel": int(kernel), "stride": 1, "dilation": 1, "channels": int(pw.shape[0]), "separable": separable}
    return spec, int(cin), tensors


def convert(state, alphabet):
    ids = sorted({int(m.group(1)) for k in state if (m := BLOCK.match(k))})
    tensors, blocks, epilogue = {}, [], []
    prologue, in_features, t = conv_layer(state, "encoder.encoder.0", 0)
    prologue["stride"] = 2
    tensors.update({f"prologue.{k}": v for k, v in t.items()})
    b = 0
    for i in ids[1:]:
        base = f"encoder.encoder.{i}"
        convs = sorted({int(m.group(1)) for k in state
                        if (m := re.match(re.escape(base) + r"\.mconv\.(\d+)\.conv\.weight$", k))})
        starts = [c for c in convs if c == 0 or c - 1 not in convs]
        residual = f"{base}.res.0.0.conv.weight" in state
        if len(starts) > 1 or residual:
            b += 1
            specs = []
            for j, start in enumerate(starts):
                spec, _, t = conv_layer(state, base, start)
                specs.append(spec)
                tensors.update({f"b{b}.s{j + 1}.{k}": v for k, v in t.items()})
            if residual:
                tensors[f"b{b}.res.pw"] = np.ascontiguousarray(state[f"{base}.res.0.0.conv.weight"][:, :, 0].T)
                tensors.update({f"b{b}.res.{k}": v for k, v in bn(state, f"{base}.res.0.1").items()})
            blocks.append({"repeat": len(specs), "kernel": specs[0]["kernel"], "channels": specs[0]["channels"],
                           "dilation": 1, "residual": residual})
        else:
            spec, _, t = conv_layer(state, base, 0)
            if not epilogue:
                spec["dilation"] = 2
            epilogue.append(spec)
            tensors.update({f"epi{len(epilogue)}.{k}": v for k, v in t.items()})
    out_w = state["decoder.decoder_layers.0.weight"]
    tensors["out.pw"] = np.ascontiguousarray(out_w[:, :, 0].T)
    tensors["out.bias"] = state["decoder.decoder_layers.0.bias"]
    vocab = out_w.shape[0] - 1
    if vocab != len(alphabet):
        raise SystemExit(f"checkpoint has {vocab} output symbols, alphabet has {len(alphabet)}")
    config = {"name": f"QuartzNet{len(blocks)}x{blocks[0]['repeat'] if blocks else 0}",
              "input_features": in_features, "vocab_size": vocab, "bn_epsilon": 1e-3, "folded": False,
              "prologue": prologue, "blocks": blocks, "epilogue": epilogue}
    return config, tensors


def write(out_dir, config, tensors, alphabet):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    blob = bytearray()
    table = []
    for name, arr in tensors.items():
        data = np.asarray(arr, dtype="<f4")
        table.append({"name": name, "shape": list(data.shape), "dtype": "f32", "offset": len(blob),
                      "length": data.nbytes})
        blob += data.tobytes()
    (out_dir / "weights.bin").write_bytes(bytes(blob))
    features = {"window_length": 0.02, "hop_length": 0.01, "fft_size": 512, "mel_bins": config["input_features"],
                "fmin": 0.0, "fmax": 8000.0, "log_epsilon": 2.0 ** -24}
    manifest = {"format": "scribo-weights", "version": 1, "model": config["name"], "config": config,
                "features": features, "alphabet": {"symbols": alphabet, "blank_index": len(alphabet)},
                "tensors": table,
                "blob": {"file": "weights.bin", "bytes": len(blob), "crc32": f"{zlib.crc32(bytes(blob)):08x}"}}
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, ensure_ascii=False) + "\n")
    return out_dir / "manifest.json"


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("checkpoint")
    ap.add_argument("out_dir")
    ap.add_argument("--alphabet", default="en", help="preset name or JSON file with a 'symbols' list")
    args = ap.parse_args(argv)
    if args.alphabet in PRESETS:
        alphabet = PRESETS[args.alphabet]
    else:
        alphabet = json.loads(Path(args.alphabet).read_text())["symbols"]
    config, tensors = convert(load_state(args.checkpoint), alphabet)
    print(write(args.out_dir, config, tensors, alphabet))


if __name__ == "__main__":
    sys.exit(main())
