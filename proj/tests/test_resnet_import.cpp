// Copyright 2026 The AdvBlur Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Cross-checks the ResNet-50 port against torchvision: weights go through
// tools/export_resnet50_weights.py and the penultimate features must agree.
// Skipped when python3 with torch and torchvision is unavailable.

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "advblur/model.hpp"
#include "test_util.hpp"

#ifndef ADVBLUR_SOURCE_DIR
#error "ADVBLUR_SOURCE_DIR must name the source tree"
#endif

namespace {

using namespace advblur;
using advblur::testing::TempDir;

std::vector<float> read_floats(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    in.seekg(0, std::ios::end);
    std::vector<float> v(static_cast<std::size_t>(in.tellg()) / sizeof(float));
    in.seekg(0);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
    return v;
}

TEST(ResNetImport, PenultimateFeaturesMatchTorchvision) {
    if (std::system("python3 -c 'import torch, torchvision' >/dev/null 2>&1") != 0) {
        GTEST_SKIP() << "python3 with torch and torchvision is not available";
    }
    TempDir dir("resnet");
    const std::string script = std::string(ADVBLUR_SOURCE_DIR) + "/tests/fixtures/resnet50_reference.py";
    ASSERT_EQ(std::system(("python3 '" + script + "' '" + dir.path().string() + "'").c_str()), 0);

    TrainConfig cfg;
    cfg.backbone = Backbone::resnet50_pretrained;
    cfg.pretrained_weights = (dir / "resnet50.tensors").string();
    cfg.image_size = 64;
    ModelBundle model = build_model(cfg, 0);

    const std::vector<float> input = read_floats(dir / "input.bin");
    const std::vector<float> expected = read_floats(dir / "features.bin");
    ASSERT_EQ(input.size(), 2u * 3 * 64 * 64);
    ASSERT_EQ(expected.size(), 2u * 2048);
    nn::Tensor x(2, 3, 64, 64);
    std::copy(input.begin(), input.end(), x.data());
    const auto got = model.penultimate(x);
    ASSERT_EQ(got.size(), 2u);
    double worst = 0.0, scale = 0.0;
    for (std::size_t n = 0; n < 2; ++n)
        for (std::size_t k = 0; k < 2048; ++k) {
            worst = std::max(worst, std::abs(static_cast<double>(got[n][k]) - expected[n * 2048 + k]));
            scale = std::max(scale, std::abs(static_cast<double>(expected[n * 2048 + k])));
        }
    EXPECT_LT(worst, 1e-4 * scale) << "max abs diff " << worst << " at feature scale " << scale;
}

}  // namespace
