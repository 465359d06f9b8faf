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

#include <cmath>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "advblur/error.hpp"
#include "advblur/manifest.hpp"
#include "advblur/rng.hpp"

namespace advblur {

/// Predicate over (dataset_id, camera_id), plus the optional quality filter used
/// for the low-quality-removal experiment. Empty sets match everything.
struct Selector {
    std::set<std::string> datasets;
    std::set<Camera> cameras;
    bool drop_reject = false;

    bool matches(const ImageRecord& r) const {
        if (!datasets.empty() && !datasets.contains(r.dataset.name)) return false;
        if (!cameras.empty() && (!r.camera || !cameras.contains(*r.camera))) return false;
        if (drop_reject && r.quality == Quality::reject) return false;
        return true;
    }
};

enum class SplitMode { camera_split, single_source, leave_one_out, explicit_sets };

inline std::string to_string(SplitMode m) {
    switch (m) {
        case SplitMode::camera_split: return "camera_split";
        case SplitMode::single_source: return "single_source";
        case SplitMode::leave_one_out: return "leave_one_out";
        case SplitMode::explicit_sets: return "explicit";
    }
    return "?";
}

inline SplitMode parse_split_mode(std::string_view s) {
    if (s == "camera_split") return SplitMode::camera_split;
    if (s == "single_source") return SplitMode::single_source;
    if (s == "leave_one_out") return SplitMode::leave_one_out;
    if (s == "explicit") return SplitMode::explicit_sets;
    throw InvalidArgument("unknown split mode '" + std::string(s) + "'");
}

struct NamedSelector {
    std::string name;
    Selector selector;
};

struct SplitSpec {
    SplitMode mode = SplitMode::explicit_sets;
    Selector train;
    std::vector<NamedSelector> tests;
    double val_fraction = 0.1;
    /// Fraction of the train selection held out as an in-domain test set named
    /// "in_domain" (placed before the selector-based test sets). 0 disables it.
    double test_fraction = 0.0;
    std::uint64_t seed = 0;

    /// Train on cameras A, B, C of one dataset; test sets "D" and "E".
    static SplitSpec camera_split(const std::string& dataset = "eyepacs") {
        SplitSpec s;
        s.mode = SplitMode::camera_split;
        s.train = Selector{{dataset}, {Camera::A, Camera::B, Camera::C}, false};
        s.tests = {{"D", Selector{{dataset}, {Camera::D}, false}}, {"E", Selector{{dataset}, {Camera::E}, false}}};
        return s;
    }

    /// Train on one dataset; one test set per named target dataset.
    static SplitSpec single_source(const std::string& source, const std::vector<std::string>& targets) {
        SplitSpec s;
        s.mode = SplitMode::single_source;
        s.train = Selector{{source}, {}, false};
        for (const auto& t : targets) s.tests.push_back({t, Selector{{t}, {}, false}});
        return s;
    }

    /// Train on every dataset but the held-out one, which becomes the only test set.
    static SplitSpec leave_one_out(const std::vector<std::string>& datasets, const std::string& held_out) {
        SplitSpec s;
        s.mode = SplitMode::leave_one_out;
        bool found = false;
        for (const auto& d : datasets) {
            if (d == held_out) {
                found = true;
            } else {
                s.train.datasets.insert(d);
            }
        }
        if (!found) throw InvalidArgument("held-out dataset '" + held_out + "' is not in the dataset list");
        s.tests = {{held_out, Selector{{held_out}, {}, false}}};
        return s;
    }
};

struct NamedSet {
    std::string name;
    std::vector<ImageRecord> records;
};

struct Splits {
    std::vector<ImageRecord> train;  // originals plus blurred twins of train originals
    std::vector<ImageRecord> val;    // originals only
    std::vector<NamedSet> tests;     // originals only, in spec order

    const NamedSet* test(std::string_view name) const {
        for (const auto& t : tests)
            if (t.name == name) return &t;
        return nullptr;
    }
};

/// Deterministic split construction.
///
/// Originals matched by the train selector are shuffled with `spec.seed` and
/// `round(val_fraction * n)` of them (at least one when n >= 2) form the
/// validation set, the next `round(test_fraction * n)` the in-domain test set. Blurred records follow their source: they land in train only
/// when the source original stayed in train. Test sets never contain label 5.
/// Output order follows manifest order within each set.
inline Splits build_splits(const DatasetManifest& manifest, const SplitSpec& spec) {
    if (manifest.records.empty()) throw InvalidArgument("manifest is empty");
    if (!(spec.val_fraction > 0.0 && spec.val_fraction < 1.0)) {
        throw InvalidArgument("val_fraction must lie in (0,1)");
    }
    if (!(spec.test_fraction >= 0.0 && spec.val_fraction + spec.test_fraction < 1.0)) {
        throw InvalidArgument("test_fraction must be >= 0 and leave room for training");
    }

    std::vector<std::size_t> train_idx;
    std::vector<std::vector<std::size_t>> test_idx(spec.tests.size());
    for (std::size_t i = 0; i < manifest.records.size(); ++i) {
        const auto& r = manifest.records[i];
        validate_record(r);
        if (r.is_blurred()) continue;
        const bool in_train = spec.train.matches(r);
        int test_hits = 0;
        for (std::size_t t = 0; t < spec.tests.size(); ++t) {
            if (spec.tests[t].selector.matches(r)) {
                test_idx[t].push_back(i);
                ++test_hits;
            }
        }
        if (in_train && test_hits > 0) {
            throw InvalidArgument("selector overlap: " + r.image_path.string() + " matches train and a test selector");
        }
        if (test_hits > 1) {
            throw InvalidArgument("selector overlap: " + r.image_path.string() + " matches several test selectors");
        }
        if (in_train) train_idx.push_back(i);
    }
    if (train_idx.empty()) throw InvalidArgument("train selection is empty");

    std::size_t n_val = static_cast<std::size_t>(std::llround(spec.val_fraction * static_cast<double>(train_idx.size())));
    if (n_val == 0 && train_idx.size() >= 2) n_val = 1;
    const auto n_test = static_cast<std::size_t>(std::llround(spec.test_fraction * static_cast<double>(train_idx.size())));
    if (spec.test_fraction > 0.0 && n_test == 0) throw InvalidArgument("test_fraction selects no image");
    if (n_val + n_test >= train_idx.size()) throw InvalidArgument("train selection is empty after carving validation");

    std::vector<std::size_t> shuffled = train_idx;
    Rng rng(derive_seed(spec.seed, 0x5e11));
    shuffle(shuffled, rng);
    std::set<std::size_t> val_set(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::set<std::size_t> holdout(shuffled.begin() + static_cast<std::ptrdiff_t>(n_val),
                                  shuffled.begin() + static_cast<std::ptrdiff_t>(n_val + n_test));

    Splits out;
    NamedSet in_domain{"in_domain", {}};
    std::set<std::string> train_paths;
    for (std::size_t i : train_idx) {
        if (val_set.contains(i)) {
            out.val.push_back(manifest.records[i]);
        } else if (holdout.contains(i)) {
            in_domain.records.push_back(manifest.records[i]);
        } else {
            out.train.push_back(manifest.records[i]);
            train_paths.insert(manifest.records[i].image_path.string());
        }
    }

    // Blurred twins join train after their source, preserving manifest order.
    std::vector<ImageRecord> twins;
    for (const auto& r : manifest.records) {
        if (r.is_blurred() && train_paths.contains(r.source_record->string())) twins.push_back(r);
    }
    out.train.insert(out.train.end(), twins.begin(), twins.end());

    if (n_test > 0) out.tests.push_back(std::move(in_domain));
    for (std::size_t t = 0; t < spec.tests.size(); ++t) {
        NamedSet set{spec.tests[t].name, {}};
        for (std::size_t i : test_idx[t]) set.records.push_back(manifest.records[i]);
        out.tests.push_back(std::move(set));
    }
    return out;
}

}  // namespace advblur
