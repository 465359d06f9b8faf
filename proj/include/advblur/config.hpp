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

// Training configuration, its JSON form, and the config hash.
//
// JSON readers are strict: unknown keys and wrong types raise ConfigError with
// the dotted key path ("blur.kernel", "train.epochs").

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "advblur/blur.hpp"
#include "advblur/error.hpp"
#include "advblur/hash.hpp"
#include "advblur/loss.hpp"
#include "advblur/nn/optim.hpp"

namespace advblur {

using json = nlohmann::json;

enum class Backbone { small_cnn, resnet50_pretrained };

inline std::string to_string(Backbone b) { return b == Backbone::small_cnn ? "small_cnn" : "resnet50_pretrained"; }

inline Backbone parse_backbone(std::string_view s) {
    if (s == "small_cnn") return Backbone::small_cnn;
    if (s == "resnet50_pretrained") return Backbone::resnet50_pretrained;
    throw InvalidArgument("unsupported backbone '" + std::string(s) + "' (small_cnn|resnet50_pretrained)");
}

/// custom: 5-way head with the dual loss. cce6: 6-way head, plain cross-entropy
/// over all six labels, prediction restricted to the first five logits.
enum class LossVariant { custom, cce6 };

inline std::string to_string(LossVariant v) { return v == LossVariant::custom ? "custom" : "cce6"; }

inline LossVariant parse_loss_variant(std::string_view s) {
    if (s == "custom") return LossVariant::custom;
    if (s == "cce6") return LossVariant::cce6;
    throw InvalidArgument("unsupported loss variant '" + std::string(s) + "' (custom|cce6)");
}

struct TrainConfig {
    Backbone backbone = Backbone::resnet50_pretrained;
    int epochs = 20;
    int batch_size = 32;
    double learning_rate = 0.001;
    nn::OptimizerKind optimizer = nn::OptimizerKind::adam;
    int image_size = 224;
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
    LossConfig loss;
    LossVariant loss_variant = LossVariant::custom;
    /// Unset: plain cross-entropy baseline without blurred twins.
    std::optional<BlurSpec> blur = BlurSpec{};
    /// Converted ImageNet weights for resnet50_pretrained.
    std::string pretrained_weights;

    /// Number of logits the model emits for this configuration.
    int head_width() const { return loss_variant == LossVariant::cce6 ? loss.num_classes + 1 : loss.num_classes; }

    /// Loss actually optimised: cce6 treats the blurred label as an ordinary class.
    LossConfig effective_loss() const {
        if (loss_variant == LossVariant::custom) return loss;
        return LossConfig{loss.num_classes + 1, loss.num_classes + 1, loss.reduction};
    }

    void validate() const {
        if (epochs < 1) throw ConfigError("train.epochs", "must be >= 1");
        if (batch_size < 1) throw ConfigError("train.batch_size", "must be >= 1");
        if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate", "must be > 0");
        if (image_size < 16) throw ConfigError("train.image_size", "must be >= 16");
        if (seeds.empty()) throw ConfigError("train.seeds", "needs at least one seed");
        try {
            loss.validate();
        } catch (const InvalidArgument& e) {
            throw ConfigError("loss", e.what());
        }
        if (loss.num_classes != 5) throw ConfigError("loss.num_classes", "the model head has 5 grades");
        if (blur) {
            try {
                check_kernel(blur->kernel);
            } catch (const InvalidArgument& e) {
                throw ConfigError("blur.kernel", e.what());
            }
            if (!(blur->ratio > 0.0 && blur->ratio <= 1.0)) throw ConfigError("blur.ratio", "must lie in (0,1]");
            if (!(blur->effective_sigma_space() > 0.0)) throw ConfigError("blur.sigma_space", "must be > 0");
            if (!(blur->sigma_color > 0.0)) throw ConfigError("blur.sigma_color", "must be > 0");
        }
        if (loss_variant == LossVariant::cce6 && !blur) {
            throw ConfigError("loss.variant", "cce6 needs blurred twins (blur must be set)");
        }
    }
};

namespace config_detail {

inline std::string join_key(std::string_view prefix, std::string_view key) {
    return prefix.empty() ? std::string(key) : std::string(prefix) + "." + std::string(key);
}

/// Rejects keys outside `allowed`.
inline void check_keys(const json& j, std::string_view prefix, std::initializer_list<std::string_view> allowed) {
    if (!j.is_object()) throw ConfigError(std::string(prefix), "expected an object");
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (auto a : allowed) ok |= a == key;
        if (!ok) throw ConfigError(join_key(prefix, key), "unknown key");
    }
}

template <typename T>
void read(const json& j, std::string_view prefix, std::string_view key, T& out) {
    auto it = j.find(std::string(key));
    if (it == j.end()) return;
    const std::string path = join_key(prefix, key);
    try {
        if constexpr (std::is_same_v<T, int>) {
            if (!it->is_number_integer()) throw ConfigError(path, "expected an integer");
        } else if constexpr (std::is_same_v<T, double>) {
            if (!it->is_number()) throw ConfigError(path, "expected a number");
        } else if constexpr (std::is_same_v<T, bool>) {
            if (!it->is_boolean()) throw ConfigError(path, "expected true or false");
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!it->is_string()) throw ConfigError(path, "expected a string");
        }
        out = it->get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(path, e.what());
    }
}

/// Reads an enum through its parser, re-raising parse failures as ConfigError.
template <typename E, typename Parse>
void read_enum(const json& j, std::string_view prefix, std::string_view key, E& out, Parse parse) {
    std::string s;
    read(j, prefix, key, s);
    if (s.empty()) {
        if (j.contains(std::string(key))) throw ConfigError(join_key(prefix, key), "must not be empty");
        return;
    }
    try {
        out = parse(s);
    } catch (const InvalidArgument& e) {
        throw ConfigError(join_key(prefix, key), e.what());
    }
}

}  // namespace config_detail

inline json to_json(const BlurSpec& b) {
    return json{{"method", to_string(b.method)},
                {"kernel", b.kernel},
                {"sigma_space", b.sigma_space ? json(*b.sigma_space) : json(nullptr)},
                {"sigma_color", b.sigma_color},
                {"border", std::string(to_string(b.border))},
                {"ratio", b.ratio}};
}

/// Missing keys keep the values already in `base`.
inline BlurSpec blur_from_json(const json& j, std::string_view prefix = "blur", BlurSpec base = {}) {
    using namespace config_detail;
    check_keys(j, prefix, {"method", "kernel", "sigma_space", "sigma_color", "border", "ratio"});
    read_enum(j, prefix, "method", base.method, parse_blur_method);
    read(j, prefix, "kernel", base.kernel);
    if (auto it = j.find("sigma_space"); it != j.end()) {
        if (it->is_null()) {
            base.sigma_space.reset();
        } else {
            double s = 0;
            read(j, prefix, "sigma_space", s);
            base.sigma_space = s;
        }
    }
    read(j, prefix, "sigma_color", base.sigma_color);
    read_enum(j, prefix, "border", base.border, parse_border);
    read(j, prefix, "ratio", base.ratio);
    return base;
}

inline json to_json(const LossConfig& l) {
    return json{{"num_classes", l.num_classes},
                {"blur_label", l.blur_label},
                {"reduction", l.reduction == Reduction::mean ? "mean" : "sum"}};
}

/// Train config as one object: {"train": {...}, "loss": {...}, "blur": {...} | null}.
inline json to_json(const TrainConfig& c) {
    json loss = to_json(c.loss);
    loss["variant"] = to_string(c.loss_variant);
    return json{{"train",
                 {{"backbone", to_string(c.backbone)},
                  {"epochs", c.epochs},
                  {"batch_size", c.batch_size},
                  {"learning_rate", c.learning_rate},
                  {"optimizer", nn::to_string(c.optimizer)},
                  {"image_size", c.image_size},
                  {"seeds", c.seeds},
                  {"pretrained_weights", c.pretrained_weights}}},
                {"loss", loss},
                {"blur", c.blur ? to_json(*c.blur) : json(nullptr)}};
}

inline void train_section_from_json(const json& j, TrainConfig& c) {
    using namespace config_detail;
    const std::string_view p = "train";
    check_keys(j, p,
               {"backbone", "epochs", "batch_size", "learning_rate", "optimizer", "image_size", "seeds",
                "pretrained_weights"});
    read_enum(j, p, "backbone", c.backbone, parse_backbone);
    read(j, p, "epochs", c.epochs);
    read(j, p, "batch_size", c.batch_size);
    read(j, p, "learning_rate", c.learning_rate);
    read_enum(j, p, "optimizer", c.optimizer, nn::parse_optimizer);
    read(j, p, "image_size", c.image_size);
    if (auto it = j.find("seeds"); it != j.end()) {
        if (!it->is_array()) throw ConfigError("train.seeds", "expected an array of non-negative integers");
        c.seeds.clear();
        for (const auto& s : *it) {
            if (!s.is_number_unsigned()) throw ConfigError("train.seeds", "expected an array of non-negative integers");
            c.seeds.push_back(s.get<std::uint64_t>());
        }
    }
    read(j, p, "pretrained_weights", c.pretrained_weights);
}

inline void loss_section_from_json(const json& j, TrainConfig& c) {
    using namespace config_detail;
    const std::string_view p = "loss";
    check_keys(j, p, {"num_classes", "blur_label", "reduction", "variant"});
    read(j, p, "num_classes", c.loss.num_classes);
    read(j, p, "blur_label", c.loss.blur_label);
    read_enum(j, p, "reduction", c.loss.reduction, [](std::string_view s) {
        if (s == "mean") return Reduction::mean;
        if (s == "sum") return Reduction::sum;
        throw InvalidArgument("expected mean or sum");
    });
    read_enum(j, p, "variant", c.loss_variant, parse_loss_variant);
}

/// Inverse of to_json(TrainConfig); sections absent from `j` keep `base` values.
inline TrainConfig train_config_from_json(const json& j, TrainConfig base = {}) {
    config_detail::check_keys(j, "", {"train", "loss", "blur"});
    if (auto it = j.find("train"); it != j.end()) train_section_from_json(*it, base);
    if (auto it = j.find("loss"); it != j.end()) loss_section_from_json(*it, base);
    if (auto it = j.find("blur"); it != j.end()) {
        if (it->is_null()) {
            base.blur.reset();
        } else {
            base.blur = blur_from_json(*it, "blur", base.blur.value_or(BlurSpec{}));
        }
    }
    return base;
}

/// SHA-256 over the canonical (sorted-key, compact) JSON of the config.
/// Seeds and the weights-file location are excluded: a checkpoint records its
/// own seed, and the same weights may live at different paths. `ignore` lists
/// further dotted keys to drop, e.g. "blur.method" when comparing ablation variants.
inline std::string config_hash(const TrainConfig& c, const std::set<std::string>& ignore = {}) {
    json j = to_json(c);
    j["train"].erase("seeds");
    j["train"].erase("pretrained_weights");
    for (const auto& key : ignore) {
        const auto dot = key.find('.');
        if (dot == std::string::npos) {
            j.erase(key);
            continue;
        }
        auto section = j.find(key.substr(0, dot));
        if (section != j.end() && section->is_object()) section->erase(key.substr(dot + 1));
    }
    return sha256_hex(j.dump());
}

}  // namespace advblur
