#!/usr/bin/env python3
# Copyright 2026 The AdvBlur Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Converts torchvision ResNet-50 ImageNet weights to the advblur tensor file.

    python tools/export_resnet50_weights.py weights/resnet50_imagenet.tensors

Layout: magic line, header length line, JSON header, little-endian float32
payload in table order. Parameter names are the torchvision state_dict keys.
"""

import argparse
import hashlib
import json
import os
import sys

MAGIC = b"ADVBLUR-CHECKPOINT 1"


def export(state_dict, path, source):
    table, chunks, offset = [], [], 0
    digest = hashlib.sha256()
    for name, tensor in state_dict.items():
        if name.endswith("num_batches_tracked"):
            continue
        data = tensor.detach().to("cpu").float().contiguous().numpy().astype("<f4").tobytes()
        count = tensor.numel()
        table.append({"name": name, "shape": list(tensor.shape), "offset": offset, "count": count})
        offset += count
        digest.update(data)
        chunks.append(data)
    header = json.dumps(
        {
            "metadata": {"source": source},
            "tensors": table,
            "payload_bytes": offset * 4,
            "payload_sha256": digest.hexdigest(),
        },
        separators=(",", ":"),
    ).encode()
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    tmp = path + ".tmp"
    with open(tmp, "wb") as out:
        out.write(MAGIC + b"\n" + str(len(header)).encode() + b"\n" + header)
        for chunk in chunks:
            out.write(chunk)
    os.replace(tmp, path)
    return len(table), offset


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("output", help="destination tensor file")
    parser.add_argument("--weights", default="IMAGENET1K_V1", help="torchvision weight enum name")
    parser.add_argument("--state-dict", help="load a saved state_dict (.pth) instead of downloading")
    args = parser.parse_args(argv)

    import torch
    import torchvision

    if args.state_dict:
        state = torch.load(args.state_dict, map_location="cpu")
        source = os.path.basename(args.state_dict)
    else:
        weights = getattr(torchvision.models.ResNet50_Weights, args.weights)
        state = torchvision.models.resnet50(weights=weights).state_dict()
        source = "torchvision resnet50 " + args.weights
    tensors, floats = export(state, args.output, source)
    print(f"wrote {tensors} tensors ({floats} floats) to {args.output}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
