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

#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "advblur/config.hpp"
#include "advblur/image.hpp"
#include "advblur/manifest.hpp"
#include "advblur/nn/network.hpp"
#include "advblur/tensor_file.hpp"

namespace advblur {

#ifdef ADVBLUR_GIT_REVISION
inline constexpr std::string_view kGitRevision = ADVBLUR_GIT_REVISION;
#else
inline constexpr std::string_view kGitRevision = "unknown";
#endif

struct ModelMetadata {
    Backbone backbone = Backbone::small_cnn;
    int head_width = kNumGrades;
    int image_size = 224;
    std::string config_hash;
    std::uint64_t seed = 0;
    /// Epoch the weights come from (0-based); -1 before any training.
    int epoch = -1;
    std::string git_revision{kGitRevision};
    nlohmann::json train_config;
};

inline nlohmann::json to_json(const ModelMetadata& m) {
    return {{"backbone", to_string(m.backbone)}, {"head_width", m.head_width},   {"image_size", m.image_size},
            {"config_hash", m.config_hash},      {"seed", m.seed},               {"epoch", m.epoch},
            {"git_revision", m.git_revision},    {"train_config", m.train_config}};
}

inline ModelMetadata metadata_from_json(const nlohmann::json& j) {
    ModelMetadata m;
    m.backbone = parse_backbone(j.at("backbone").get<std::string>());
    m.head_width = j.at("head_width").get<int>();
    m.image_size = j.at("image_size").get<int>();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.epoch = j.at("epoch").get<int>();
    m.git_revision = j.value("git_revision", std::string("unknown"));
    m.train_config = j.at("train_config");
    return m;
}

/// Packs HWC images of equal size into an NCHW batch.
inline nn::Tensor to_tensor(std::span<const Image> images) {
    if (images.empty()) throw InvalidArgument("empty image batch");
    const int h = images[0].height, w = images[0].width;
    nn::Tensor t(static_cast<int>(images.size()), 3, h, w);
    for (std::size_t n = 0; n < images.size(); ++n) {
        const Image& img = images[n];
        if (img.height != h || img.width != w || img.channels != 3) throw InvalidArgument("images in a batch must share a 3-channel shape");
        float* dst = t.sample(static_cast<int>(n));
        const std::size_t plane = static_cast<std::size_t>(h) * w;
        for (std::size_t i = 0; i < plane; ++i)
            for (int c = 0; c < 3; ++c) dst[static_cast<std::size_t>(c) * plane + i] = img.pixels[i * 3 + static_cast<std::size_t>(c)];
    }
    return t;
}

/// Index of the largest of the first `classes` logits of row `n`.
inline int argmax_row(const nn::Tensor& logits, int n, int classes = kNumGrades) {
    const float* row = logits.sample(n);
    return static_cast<int>(std::max_element(row, row + classes) - row);
}

/// A classifier plus the information needed to reproduce it.
class ModelBundle {
public:
    ModelBundle(nn::Network net, ModelMetadata meta) : net_(std::move(net)), meta_(std::move(meta)) {
        if (net_.num_outputs() != meta_.head_width) throw InvalidArgument("head width does not match metadata");
    }

    nn::Network& network() { return net_; }
    const ModelMetadata& metadata() const { return meta_; }
    ModelMetadata& metadata() { return meta_; }
    int image_size() const { return meta_.image_size; }

    /// Inference logits, (N, head_width, 1, 1).
    nn::Tensor logits(const nn::Tensor& images) { return net_.forward(images, nn::Mode::eval); }

    /// Grade predictions; always an argmax over the five real grades.
    std::vector<int> predict(const nn::Tensor& images) {
        const nn::Tensor z = logits(images);
        std::vector<int> out(static_cast<std::size_t>(z.n()));
        for (int n = 0; n < z.n(); ++n) out[static_cast<std::size_t>(n)] = argmax_row(z, n);
        return out;
    }

    /// One feature_dim vector per image (global-average-pooled last conv block).
    std::vector<std::vector<float>> penultimate(const nn::Tensor& images) {
        logits(images);
        const nn::Tensor& f = net_.penultimate();
        std::vector<std::vector<float>> out;
        for (int n = 0; n < f.n(); ++n) out.emplace_back(f.sample(n), f.sample(n) + f.sample_size());
        return out;
    }

private:
    nn::Network net_;
    ModelMetadata meta_;
};

inline nn::Network make_network(Backbone backbone, int head_width) {
    return backbone == Backbone::small_cnn ? nn::make_small_cnn(head_width) : nn::make_resnet50(head_width);
}

/// Fresh model for `cfg` and `seed`. The head (and, for small_cnn, every layer)
/// is initialised from the seed. resnet50_pretrained loads converted ImageNet
/// weights for the trunk and throws if they are unavailable.
inline ModelBundle build_model(const TrainConfig& cfg, std::uint64_t seed) {
    nn::Network net = make_network(cfg.backbone, cfg.head_width());
    Rng rng(derive_seed(seed, 0x1417));
    net.init(rng);
    if (cfg.backbone == Backbone::resnet50_pretrained) {
        if (cfg.pretrained_weights.empty()) {
            throw ConfigError("train.pretrained_weights",
                              "resnet50_pretrained needs converted ImageNet weights (tools/export_resnet50_weights.py)");
        }
        if (!std::filesystem::exists(cfg.pretrained_weights)) {
            throw ConfigError("train.pretrained_weights", "file not found: " + cfg.pretrained_weights);
        }
        const TensorFile file = read_tensor_file(cfg.pretrained_weights);
        assign_parameters(file, net.parameters(), {net.head_name() + "."});
    }
    ModelMetadata meta;
    meta.backbone = cfg.backbone;
    meta.head_width = cfg.head_width();
    meta.image_size = cfg.image_size;
    meta.config_hash = config_hash(cfg);
    meta.seed = seed;
    meta.train_config = to_json(cfg);
    return ModelBundle(std::move(net), std::move(meta));
}

}  // namespace advblur
