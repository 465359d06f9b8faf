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

// One JSON document configures every pipeline stage. Values resolve as
// built-in defaults < config file < --set overrides; the output root can also
// come from ADVBLUR_OUT or --out (in that order of increasing precedence).
// The schema is documented in docs/config.md.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "advblur/ablation.hpp"
#include "advblur/config.hpp"
#include "advblur/gradcam.hpp"
#include "advblur/manifest.hpp"
#include "advblur/report.hpp"
#include "advblur/splits.hpp"
#include "advblur/synthetic.hpp"
#include "advblur/tsne.hpp"

namespace advblur {

inline constexpr int kRunConfigSchemaVersion = 1;

struct DataConfig {
    /// Originals manifest; empty means <output_root>/data/manifest.csv.
    std::string manifest;
    /// Originals plus blurred twins; empty means <output_root>/data/manifest_blur.csv.
    std::string forged_manifest;
    /// Where twins are written; empty means <output_root>/data/blurred.
    std::string blurred_dir;
    /// Per-dataset overrides of the default grade vocabularies.
    std::map<std::string, LabelMap::Vocabulary, std::less<>> label_map;
};

struct SynthConfig {
    int n = 2000;
    std::uint64_t seed = 7;
    SyntheticSpec spec;
    std::vector<DomainStyle> domains{source_domain(), shifted_domain()};
};

struct ExplainConfig {
    double threshold = kDefaultMaskThreshold;
    /// Test set used by gradcam/mask-eval/tsne; empty means the first one.
    std::string test_set;
    int gradcam_images = 8;
    /// t-SNE subsamples (deterministically) to at most this many points.
    int tsne_max_points = 600;
    TsneOptions tsne;
};

struct AblationConfig {
    AblationAxis axis = AblationAxis::loss;
    std::vector<std::string> variants = default_variants(AblationAxis::loss);
    std::vector<std::uint64_t> seeds{0};
};

struct RunConfig {
    int schema_version = kRunConfigSchemaVersion;
    std::filesystem::path output_root = "runs/synthetic";
    int threads = 0;
    DataConfig data;
    SynthConfig synth;
    SplitSpec split;
    TrainConfig train;
    ExplainConfig explain;
    AblationConfig ablation;
    Layout layout = Layout::external_table;

    /// Built-in defaults: the desk-scale synthetic benchmark.
    static RunConfig defaults() {
        RunConfig c;
        c.split.mode = SplitMode::explicit_sets;
        c.split.train = Selector{{"synthetic"}, {}, false};
        c.split.tests = {{"synthetic_shift", Selector{{"synthetic_shift"}, {}, false}}};
        c.split.val_fraction = 0.1;
        c.split.test_fraction = 0.2;
        c.train.backbone = Backbone::small_cnn;
        c.train.epochs = 5;
        c.train.image_size = 64;
        c.train.seeds = {0, 1, 2};
        return c;
    }

    std::filesystem::path manifest_path() const {
        return data.manifest.empty() ? output_root / "data" / "manifest.csv" : std::filesystem::path(data.manifest);
    }
    std::filesystem::path forged_manifest_path() const {
        return data.forged_manifest.empty() ? output_root / "data" / "manifest_blur.csv"
                                            : std::filesystem::path(data.forged_manifest);
    }
    std::filesystem::path blurred_dir() const {
        return data.blurred_dir.empty() ? output_root / "data" / "blurred" : std::filesystem::path(data.blurred_dir);
    }
    std::filesystem::path train_dir(std::uint64_t seed) const {
        return output_root / "train" / ("seed_" + std::to_string(seed));
    }
    std::filesystem::path checkpoint_path(std::uint64_t seed) const { return train_dir(seed) / "model.ckpt"; }

    /// Default vocabularies, identity for every synthetic domain, then overrides.
    LabelMap label_map() const {
        LabelMap m = LabelMap::defaults();
        for (const auto& d : synth.domains) m.per_dataset[d.name] = LabelMap::identity(kNumGrades);
        for (const auto& [ds, v] : data.label_map) m.per_dataset[ds] = v;
        return m;
    }

    void validate() const {
        if (schema_version != kRunConfigSchemaVersion) {
            throw ConfigError("schema_version", "unsupported version " + std::to_string(schema_version));
        }
        if (output_root.empty()) throw ConfigError("output_root", "must not be empty");
        if (threads < 0) throw ConfigError("threads", "must be >= 0");
        train.validate();
        if (synth.n < 50) throw ConfigError("synth.n", "must be >= 50");
        if (synth.domains.empty()) throw ConfigError("synth.domains", "needs at least one domain");
        try {
            synth.spec.validate();
        } catch (const InvalidArgument& e) {
            throw ConfigError("synth", e.what());
        }
        for (std::size_t i = 0; i < synth.domains.size(); ++i) {
            try {
                synth.domains[i].validate();
            } catch (const InvalidArgument& e) {
                throw ConfigError("synth.domains." + std::to_string(i), e.what());
            }
        }
        if (!(split.val_fraction > 0.0 && split.val_fraction < 1.0)) throw ConfigError("split.val_fraction", "must lie in (0,1)");
        if (!(split.test_fraction >= 0.0 && split.val_fraction + split.test_fraction < 1.0)) {
            throw ConfigError("split.test_fraction", "must be >= 0 with val_fraction + test_fraction < 1");
        }
        if (split.test_fraction > 0.0) {
            for (const auto& t : split.tests)
                if (t.name == "in_domain") throw ConfigError("split.tests", "'in_domain' is reserved for the test_fraction holdout");
        }
        if (!(explain.threshold >= 0.0 && explain.threshold <= 1.0)) throw ConfigError("explain.threshold", "must lie in [0,1]");
        if (explain.gradcam_images < 1) throw ConfigError("explain.gradcam_images", "must be >= 1");
        if (explain.tsne_max_points < 4) throw ConfigError("explain.tsne_max_points", "must be >= 4");
        if (!(explain.tsne.perplexity > 0.0)) throw ConfigError("explain.tsne.perplexity", "must be > 0");
        if (explain.tsne.iterations < 1) throw ConfigError("explain.tsne.iterations", "must be >= 1");
        if (ablation.variants.empty()) throw ConfigError("ablation.variants", "needs at least one variant");
        if (ablation.seeds.empty()) throw ConfigError("ablation.seeds", "needs at least one seed");
        for (const auto& v : ablation.variants) {
            try {
                if (ablation.axis == AblationAxis::loss) {
                    parse_loss_variant(v);
                } else {
                    parse_blur_method(v);
                }
            } catch (const InvalidArgument& e) {
                throw ConfigError("ablation.variants", e.what());
            }
        }
    }
};

namespace run_config_detail {

using config_detail::check_keys;
using config_detail::read;
using config_detail::read_enum;

inline json selector_to_json(const Selector& s) {
    json cams = json::array();
    for (auto c : s.cameras) cams.push_back(to_string(c));
    return {{"datasets", s.datasets}, {"cameras", cams}, {"drop_reject", s.drop_reject}};
}

inline Selector selector_from_json(const json& j, const std::string& p) {
    check_keys(j, p, {"datasets", "cameras", "drop_reject"});
    Selector s;
    if (auto it = j.find("datasets"); it != j.end()) {
        if (!it->is_array()) throw ConfigError(p + ".datasets", "expected an array of strings");
        for (const auto& d : *it) {
            if (!d.is_string()) throw ConfigError(p + ".datasets", "expected an array of strings");
            s.datasets.insert(d.get<std::string>());
        }
    }
    if (auto it = j.find("cameras"); it != j.end()) {
        if (!it->is_array()) throw ConfigError(p + ".cameras", "expected an array of camera ids");
        for (const auto& c : *it) {
            const auto cam = c.is_string() ? parse_camera(c.get<std::string>()) : std::nullopt;
            if (!cam) throw ConfigError(p + ".cameras", "expected camera ids A-E or unknown");
            s.cameras.insert(*cam);
        }
    }
    read(j, p, "drop_reject", s.drop_reject);
    return s;
}

inline std::vector<std::string> strings(const json& j, const std::string& p) {
    if (!j.is_array()) throw ConfigError(p, "expected an array of strings");
    std::vector<std::string> out;
    for (const auto& v : j) {
        if (!v.is_string()) throw ConfigError(p, "expected an array of strings");
        out.push_back(v.get<std::string>());
    }
    return out;
}

inline std::vector<std::uint64_t> seeds(const json& j, const std::string& p) {
    if (!j.is_array()) throw ConfigError(p, "expected an array of non-negative integers");
    std::vector<std::uint64_t> out;
    for (const auto& v : j) {
        if (!v.is_number_unsigned()) throw ConfigError(p, "expected an array of non-negative integers");
        out.push_back(v.get<std::uint64_t>());
    }
    return out;
}

}  // namespace run_config_detail

inline json to_json(const SplitSpec& s) {
    json tests = json::array();
    for (const auto& t : s.tests) {
        json o = run_config_detail::selector_to_json(t.selector);
        o["name"] = t.name;
        tests.push_back(o);
    }
    return {{"mode", to_string(s.mode)},
            {"train", run_config_detail::selector_to_json(s.train)},
            {"tests", tests},
            {"val_fraction", s.val_fraction},
            {"test_fraction", s.test_fraction},
            {"seed", s.seed}};
}

/// Preset keys (dataset; source + targets; datasets + held_out) expand the
/// matching mode; otherwise train/tests are taken as written.
inline SplitSpec split_from_json(const json& j, SplitSpec base = {}) {
    using namespace run_config_detail;
    const std::string p = "split";
    check_keys(j, p,
               {"mode", "train", "tests", "val_fraction", "test_fraction", "seed", "dataset", "source", "targets",
                "datasets", "held_out", "drop_reject"});
    read_enum(j, p, "mode", base.mode, parse_split_mode);
    if (auto it = j.find("train"); it != j.end()) base.train = selector_from_json(*it, p + ".train");
    if (auto it = j.find("tests"); it != j.end()) {
        if (!it->is_array()) throw ConfigError(p + ".tests", "expected an array");
        base.tests.clear();
        for (std::size_t i = 0; i < it->size(); ++i) {
            json t = (*it)[i];
            const std::string tp = p + ".tests." + std::to_string(i);
            if (!t.is_object() || !t.contains("name") || !t["name"].is_string()) throw ConfigError(tp + ".name", "required string");
            const std::string name = t["name"].get<std::string>();
            t.erase("name");
            base.tests.push_back({name, selector_from_json(t, tp)});
        }
    }
    read(j, p, "val_fraction", base.val_fraction);
    read(j, p, "test_fraction", base.test_fraction);
    if (auto it = j.find("seed"); it != j.end()) {
        if (!it->is_number_unsigned()) throw ConfigError("split.seed", "expected a non-negative integer");
        base.seed = it->get<std::uint64_t>();
    }
    const auto keep = [&](SplitSpec preset) {
        preset.val_fraction = base.val_fraction;
        preset.test_fraction = base.test_fraction;
        preset.seed = base.seed;
        return preset;
    };
    try {
        if (base.mode == SplitMode::camera_split && j.contains("dataset")) {
            std::string ds;
            read(j, p, "dataset", ds);
            base = keep(SplitSpec::camera_split(ds));
        } else if (base.mode == SplitMode::single_source && j.contains("source")) {
            std::string src;
            read(j, p, "source", src);
            if (!j.contains("targets")) throw ConfigError("split.targets", "required with split.source");
            base = keep(SplitSpec::single_source(src, strings(j["targets"], "split.targets")));
        } else if (base.mode == SplitMode::leave_one_out && j.contains("held_out")) {
            std::string held;
            read(j, p, "held_out", held);
            if (!j.contains("datasets")) throw ConfigError("split.datasets", "required with split.held_out");
            base = keep(SplitSpec::leave_one_out(strings(j["datasets"], "split.datasets"), held));
        }
    } catch (const InvalidArgument& e) {
        throw ConfigError("split", e.what());
    }
    bool drop = false;
    read(j, p, "drop_reject", drop);
    if (drop) base.train.drop_reject = true;
    return base;
}

inline json to_json(const RunConfig& c) {
    json label_map = json::object();
    for (const auto& [ds, v] : c.data.label_map) label_map[ds] = v;
    json domains = json::array();
    for (const auto& d : c.synth.domains) domains.push_back(to_json(d));
    json j = to_json(c.train);
    j["schema_version"] = c.schema_version;
    j["output_root"] = c.output_root.string();
    j["threads"] = c.threads;
    j["data"] = {{"manifest", c.data.manifest},
                 {"forged_manifest", c.data.forged_manifest},
                 {"blurred_dir", c.data.blurred_dir},
                 {"label_map", label_map}};
    j["synth"] = {{"n", c.synth.n},
                  {"seed", c.synth.seed},
                  {"native_size", c.synth.spec.native_size},
                  {"lesions_per_grade", c.synth.spec.lesions_per_grade},
                  {"domains", domains}};
    j["split"] = to_json(c.split);
    j["explain"] = {{"threshold", c.explain.threshold},
                    {"test_set", c.explain.test_set},
                    {"gradcam_images", c.explain.gradcam_images},
                    {"tsne_max_points", c.explain.tsne_max_points},
                    {"tsne",
                     {{"perplexity", c.explain.tsne.perplexity},
                      {"iterations", c.explain.tsne.iterations},
                      {"learning_rate", c.explain.tsne.learning_rate},
                      {"seed", c.explain.tsne.seed}}}};
    j["ablation"] = {{"axis", to_string(c.ablation.axis)}, {"variants", c.ablation.variants}, {"seeds", c.ablation.seeds}};
    j["report"] = {{"layout", to_string(c.layout)}};
    return j;
}

/// Strict reader: unknown keys and ill-typed values raise ConfigError naming the key.
inline RunConfig run_config_from_json(const json& j, RunConfig base = RunConfig::defaults()) {
    using namespace run_config_detail;
    check_keys(j, "",
               {"schema_version", "output_root", "threads", "data", "synth", "split", "train", "loss", "blur", "explain",
                "ablation", "report"});
    read(j, "", "schema_version", base.schema_version);
    std::string out = base.output_root.string();
    read(j, "", "output_root", out);
    base.output_root = out;
    read(j, "", "threads", base.threads);

    json tc = json::object();
    for (const char* k : {"train", "loss", "blur"})
        if (j.contains(k)) tc[k] = j[k];
    base.train = train_config_from_json(tc, base.train);

    if (auto it = j.find("data"); it != j.end()) {
        check_keys(*it, "data", {"manifest", "forged_manifest", "blurred_dir", "label_map"});
        read(*it, "data", "manifest", base.data.manifest);
        read(*it, "data", "forged_manifest", base.data.forged_manifest);
        read(*it, "data", "blurred_dir", base.data.blurred_dir);
        if (auto lm = it->find("label_map"); lm != it->end()) {
            if (!lm->is_object()) throw ConfigError("data.label_map", "expected an object of vocabularies");
            base.data.label_map.clear();
            for (const auto& [ds, vocab] : lm->items()) {
                const std::string p = "data.label_map." + ds;
                if (!vocab.is_object()) throw ConfigError(p, "expected {token: grade}");
                LabelMap::Vocabulary v;
                for (const auto& [tok, g] : vocab.items()) {
                    if (!g.is_number_integer() || g.get<int>() < 0 || g.get<int>() >= kNumGrades) {
                        throw ConfigError(p + "." + tok, "grade must be an integer in [0,4]");
                    }
                    v[tok] = g.get<int>();
                }
                base.data.label_map[ds] = std::move(v);
            }
        }
    }
    if (auto it = j.find("synth"); it != j.end()) {
        check_keys(*it, "synth", {"n", "seed", "native_size", "lesions_per_grade", "domains"});
        read(*it, "synth", "n", base.synth.n);
        if (auto s = it->find("seed"); s != it->end()) {
            if (!s->is_number_unsigned()) throw ConfigError("synth.seed", "expected a non-negative integer");
            base.synth.seed = s->get<std::uint64_t>();
        }
        read(*it, "synth", "native_size", base.synth.spec.native_size);
        read(*it, "synth", "lesions_per_grade", base.synth.spec.lesions_per_grade);
        if (auto d = it->find("domains"); d != it->end()) {
            if (!d->is_array()) throw ConfigError("synth.domains", "expected an array");
            base.synth.domains.clear();
            for (std::size_t i = 0; i < d->size(); ++i) {
                const std::string p = "synth.domains." + std::to_string(i);
                check_keys((*d)[i], p, {"name", "tint", "brightness", "gamma", "vignette", "noise", "grade_tone_bias"});
                try {
                    base.synth.domains.push_back(domain_from_json((*d)[i]));
                } catch (const json::exception& e) {
                    throw ConfigError(p, e.what());
                }
            }
        }
    }
    if (auto it = j.find("split"); it != j.end()) base.split = split_from_json(*it, base.split);
    if (auto it = j.find("explain"); it != j.end()) {
        const std::string p = "explain";
        check_keys(*it, p, {"threshold", "test_set", "gradcam_images", "tsne_max_points", "tsne"});
        read(*it, p, "threshold", base.explain.threshold);
        read(*it, p, "test_set", base.explain.test_set);
        read(*it, p, "gradcam_images", base.explain.gradcam_images);
        read(*it, p, "tsne_max_points", base.explain.tsne_max_points);
        if (auto t = it->find("tsne"); t != it->end()) {
            check_keys(*t, "explain.tsne", {"perplexity", "iterations", "learning_rate", "seed"});
            read(*t, "explain.tsne", "perplexity", base.explain.tsne.perplexity);
            read(*t, "explain.tsne", "iterations", base.explain.tsne.iterations);
            read(*t, "explain.tsne", "learning_rate", base.explain.tsne.learning_rate);
            if (auto s = t->find("seed"); s != t->end()) {
                if (!s->is_number_unsigned()) throw ConfigError("explain.tsne.seed", "expected a non-negative integer");
                base.explain.tsne.seed = s->get<std::uint64_t>();
            }
        }
    }
    if (auto it = j.find("ablation"); it != j.end()) {
        check_keys(*it, "ablation", {"axis", "variants", "seeds"});
        const AblationAxis before = base.ablation.axis;
        read_enum(*it, "ablation", "axis", base.ablation.axis, parse_ablation_axis);
        if (auto v = it->find("variants"); v != it->end()) {
            base.ablation.variants = strings(*v, "ablation.variants");
        } else if (base.ablation.axis != before) {
            base.ablation.variants = default_variants(base.ablation.axis);
        }
        if (auto s = it->find("seeds"); s != it->end()) base.ablation.seeds = seeds(*s, "ablation.seeds");
    }
    if (auto it = j.find("report"); it != j.end()) {
        check_keys(*it, "report", {"layout"});
        read_enum(*it, "report", "layout", base.layout, parse_layout);
    }
    return base;
}

/// Deep merge where `patch` wins; unlike RFC 7386 a null is stored, not erased
/// (null is meaningful, e.g. "blur": null disables twins).
inline void merge_into(json& target, const json& patch) {
    if (!target.is_object() || !patch.is_object()) {
        target = patch;
        return;
    }
    for (const auto& [k, v] : patch.items()) {
        if (target.contains(k) && target[k].is_object() && v.is_object()) {
            merge_into(target[k], v);
        } else {
            target[k] = v;
        }
    }
}

/// Applies one `dotted.key=value` override. The value is parsed as JSON when
/// possible and taken as a string otherwise.
inline void apply_override(json& j, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError(assignment, "override must look like key=value");
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    json* node = &j;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw ConfigError(key, "empty path component in override");
        if (dot == std::string::npos) {
            if (node->is_array()) {
                throw ConfigError(key, "overriding array elements is not supported; set the whole array");
            }
            (*node)[part] = value;
            return;
        }
        if (!node->contains(part) || !(*node)[part].is_object()) (*node)[part] = json::object();
        node = &(*node)[part];
        start = dot + 1;
    }
}

inline json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("--config", "cannot open " + path.string());
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError("--config", "not valid JSON: " + path.string());
    if (!j.is_object()) throw ConfigError("--config", "top level must be an object");
    return j;
}

struct ConfigSources {
    std::optional<std::filesystem::path> config_file;
    std::vector<std::string> overrides;
    /// Value of ADVBLUR_OUT, if set.
    std::optional<std::string> env_output_root;
    /// --out on the command line.
    std::optional<std::string> cli_output_root;
};

/// defaults < file < --set; output root: ... < ADVBLUR_OUT < --out.
inline RunConfig resolve_run_config(const ConfigSources& src) {
    json j = to_json(RunConfig::defaults());
    if (src.config_file) merge_into(j, read_json_file(*src.config_file));
    for (const auto& o : src.overrides) apply_override(j, o);
    RunConfig c = run_config_from_json(j);
    if (src.env_output_root && !src.env_output_root->empty()) c.output_root = *src.env_output_root;
    if (src.cli_output_root && !src.cli_output_root->empty()) c.output_root = *src.cli_output_root;
    c.validate();
    return c;
}

}  // namespace advblur
