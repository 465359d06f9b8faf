#!/usr/bin/env python3
"""Writes a randomly initialized torchvision ResNet-50 through the export tool,
plus a fixed input batch and its penultimate features, for the C++ import test.

    resnet50_reference.py OUT_DIR
"""

import os
import sys

import torch
import torchvision

sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "..", "tools"))
import export_resnet50_weights  # noqa: E402


def main(out_dir):
    os.makedirs(out_dir, exist_ok=True)
    torch.manual_seed(0)
    model = torchvision.models.resnet50(weights=None)
    for m in model.modules():
        if isinstance(m, torch.nn.BatchNorm2d):
            m.running_mean.uniform_(-0.1, 0.1)
            m.running_var.uniform_(0.5, 1.5)
            m.weight.data.uniform_(0.5, 1.5)
            m.bias.data.uniform_(-0.1, 0.1)
    model.eval()
    export_resnet50_weights.export(model.state_dict(), os.path.join(out_dir, "resnet50.tensors"), "reference")

    x = torch.rand(2, 3, 64, 64, generator=torch.Generator().manual_seed(1))
    mean = torch.tensor([0.485, 0.456, 0.406]).view(1, 3, 1, 1)
    std = torch.tensor([0.229, 0.224, 0.225]).view(1, 3, 1, 1)
    with torch.no_grad():
        trunk = torch.nn.Sequential(*list(model.children())[:-1])
        features = trunk((x - mean) / std).flatten(1)
    x.numpy().astype("<f4").tofile(os.path.join(out_dir, "input.bin"))
    features.numpy().astype("<f4").tofile(os.path.join(out_dir, "features.bin"))


if __name__ == "__main__":
    main(sys.argv[1])
