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

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "advblur/checkpoint.hpp"
#include "advblur/config.hpp"
#include "advblur/evaluator.hpp"
#include "advblur/forge.hpp"
#include "advblur/report.hpp"
#include "advblur/splits.hpp"
#include "advblur/trainer.hpp"

namespace advblur {

enum class AblationAxis { loss, blur };

inline std::string to_string(AblationAxis a) { return a == AblationAxis::loss ? "loss" : "blur"; }

inline AblationAxis parse_ablation_axis(std::string_view s) {
    if (s == "loss") return AblationAxis::loss;
    if (s == "blur") return AblationAxis::blur;
    throw InvalidArgument("unknown ablation axis '" + std::string(s) + "' (loss|blur)");
}

/// The config key an axis varies; excluded when comparing variant hashes.
inline std::string ablated_key(AblationAxis a) { return a == AblationAxis::loss ? "loss.variant" : "blur.method"; }

inline std::vector<std::string> default_variants(AblationAxis a) {
    if (a == AblationAxis::loss) return {"custom", "cce6"};
    return {"median", "gaussian", "box", "bilateral"};
}

struct NamedSplit {
    std::string name;
    SplitSpec spec;
};

struct AblationSpec {
    AblationAxis axis = AblationAxis::loss;
    std::vector<std::string> variants = default_variants(AblationAxis::loss);
    TrainConfig base_config;
    std::vector<NamedSplit> protocols;
    /// Ablations run one seed unless configured otherwise.
    std::vector<std::uint64_t> seeds{0};
};

/// base_config with only the ablated field replaced.
inline TrainConfig variant_config(const TrainConfig& base, AblationAxis axis, const std::string& variant) {
    TrainConfig c = base;
    if (!c.blur) throw ConfigError("blur", "ablations need blurred twins (blur must be set)");
    if (axis == AblationAxis::loss) {
        try {
            c.loss_variant = parse_loss_variant(variant);
        } catch (const InvalidArgument& e) {
            throw ConfigError("ablation.variants", e.what());
        }
    } else {
        try {
            c.blur->method = parse_blur_method(variant);
        } catch (const InvalidArgument& e) {
            throw ConfigError("ablation.variants", e.what());
        }
    }
    return c;
}

inline void validate(const AblationSpec& spec) {
    if (spec.variants.empty()) throw ConfigError("ablation.variants", "needs at least one variant");
    for (std::size_t i = 0; i < spec.variants.size(); ++i)
        for (std::size_t j = 0; j < i; ++j)
            if (spec.variants[i] == spec.variants[j]) throw ConfigError("ablation.variants", "duplicate variant " + spec.variants[i]);
    if (spec.protocols.empty()) throw ConfigError("ablation.protocols", "needs at least one protocol");
    if (spec.seeds.empty()) throw ConfigError("ablation.seeds", "needs at least one seed");
    const std::string key = ablated_key(spec.axis);
    const std::string reference = config_hash(spec.base_config, {key});
    for (const auto& v : spec.variants) {
        const TrainConfig c = variant_config(spec.base_config, spec.axis, v);
        c.validate();
        if (config_hash(c, {key}) != reference) throw Error("variant " + v + " differs from the base config outside " + key);
    }
}

/// `ablations/<axis>/<variant>/seed_<s>/`
inline std::filesystem::path ablation_run_dir(const std::filesystem::path& root, AblationAxis axis,
                                              const std::string& variant, std::uint64_t seed) {
    return root / "ablations" / to_string(axis) / variant / ("seed_" + std::to_string(seed));
}

struct AblationResult {
    /// Per variant: the per-seed reports, or their aggregate when there are several seeds.
    std::map<std::string, EvalReport> per_variant;
    /// All variants in spec order; rendered as the ablation table.
    EvalReport combined;
    /// Variant config hashes with the ablated field removed (all equal).
    std::map<std::string, std::string> masked_hashes;
    RenderedReport table;
};

struct AblationOptions {
    int threads = 0;
    std::function<void(const std::string& variant, std::uint64_t seed, const EpochRecord&)> on_epoch;
};

/// Trains one model per (variant, seed) on identically split data and evaluates
/// every protocol's test sets. Blur variants forge their own twins; the loss axis
/// forges once and shares them. `originals` must contain labels 0-4 only.
inline AblationResult run_ablation(const AblationSpec& spec, const DatasetManifest& originals,
                                   const std::filesystem::path& out_root, const AblationOptions& opts = {}) {
    validate(spec);
    const std::string key = ablated_key(spec.axis);
    const auto axis_root = out_root / "ablations" / to_string(spec.axis);
    AblationResult result;
    std::map<std::string, DatasetManifest> forged_cache;

    auto forged_for = [&](const BlurSpec& blur, const std::string& tag) -> const DatasetManifest& {
        auto it = forged_cache.find(tag);
        if (it != forged_cache.end()) return it->second;
        const auto dir = axis_root / "_data" / tag;
        DatasetManifest m = forge_train_selection(originals, blur, dir, spec.protocols.front().spec.seed, opts.threads,
                                                  [&](const ImageRecord& r) {
                                                      for (const auto& p : spec.protocols)
                                                          if (p.spec.train.matches(r)) return true;
                                                      return false;
                                                  });
        save_manifest(m, dir / "manifest.csv");
        return forged_cache.emplace(tag, std::move(m)).first->second;
    };

    for (const auto& variant : spec.variants) {
        const TrainConfig cfg = variant_config(spec.base_config, spec.axis, variant);
        result.masked_hashes[variant] = config_hash(cfg, {key});
        const std::string data_tag = spec.axis == AblationAxis::blur ? variant : "shared";
        const DatasetManifest& data = forged_for(*cfg.blur, data_tag);

        std::vector<EvalReport> seed_reports;
        for (auto seed : spec.seeds) {
            const auto dir = ablation_run_dir(out_root, spec.axis, variant, seed);
            std::filesystem::create_directories(dir);
            EvalReport report;
            report.provenance = {config_hash(cfg), {seed}};
            for (const auto& protocol : spec.protocols) {
                const Splits splits = build_splits(data, protocol.spec);
                TrainOptions topts;
                topts.threads = opts.threads;
                topts.history_path = dir / (spec.protocols.size() > 1 ? "history_" + protocol.name + ".jsonl" : "history.jsonl");
                if (opts.on_epoch) topts.on_epoch = [&](const EpochRecord& e) { opts.on_epoch(variant, seed, e); };
                TrainResult trained = train(cfg, splits, seed, topts);
                save_checkpoint(trained.model,
                                dir / (spec.protocols.size() > 1 ? "model_" + protocol.name + ".ckpt" : "model.ckpt"));
                for (const auto& test : splits.tests) {
                    const ImageSet set(test.name, test.records, cfg.image_size, opts.threads);
                    const DomainAccuracy acc = evaluate(trained.model, set);
                    const std::string domain = spec.protocols.size() > 1 ? protocol.name + "/" + test.name : test.name;
                    report.rows.push_back({variant, domain, acc.accuracy, std::nullopt, acc.n});
                }
            }
            std::ofstream(dir / "eval.csv") << render_csv(report);
            seed_reports.push_back(std::move(report));
        }
        EvalReport merged = seed_reports.size() > 1 ? aggregate_seeds(seed_reports) : seed_reports.front();
        result.combined.rows.insert(result.combined.rows.end(), merged.rows.begin(), merged.rows.end());
        result.per_variant.emplace(variant, std::move(merged));
    }
    for (const auto& [v, h] : result.masked_hashes) {
        if (h != result.masked_hashes.begin()->second) throw Error("ablation variants differ outside " + key);
    }
    result.combined.provenance = {config_hash(spec.base_config, {key}), spec.seeds};
    result.table = render_report(result.combined, Layout::ablation_table, axis_root / "table",
                                 "Ablation over " + to_string(spec.axis));
    return result;
}

}  // namespace advblur
