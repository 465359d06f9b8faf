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
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "advblur/blur.hpp"
#include "advblur/error.hpp"
#include "advblur/manifest.hpp"
#include "advblur/parallel.hpp"
#include "advblur/rng.hpp"

namespace advblur {

/// `<source-stem>__blur_<method>_<kernel>.png`
inline std::string blurred_file_name(const ImageRecord& source, const BlurSpec& spec) {
    return source.image_path.stem().string() + "__blur_" + to_string(spec.method) + "_" +
           std::to_string(spec.kernel) + ".png";
}

/// Indices of the originals that receive a twin: all of them at ratio 1, otherwise a
/// seeded uniform sample of ceil(ratio * N), returned in manifest order.
inline std::vector<std::size_t> select_for_twinning(std::size_t n, double ratio, std::uint64_t seed) {
    const auto k = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(n) - 1e-9));
    if (k >= n) {
        std::vector<std::size_t> all(n);
        for (std::size_t i = 0; i < n; ++i) all[i] = i;
        return all;
    }
    Rng rng(derive_seed(seed, 0xb1u));
    return sample_indices(n, k, rng);
}

/// Blurs originals at native resolution, writes PNG twins to out_dir and returns
/// the originals followed by the label-5 twins (in source order).
inline DatasetManifest forge_adversarial_set(const DatasetManifest& manifest, const BlurSpec& spec,
                                             const std::filesystem::path& out_dir, std::uint64_t seed,
                                             int threads = 0) {
    spec.validate();
    for (const auto& r : manifest.records) {
        if (r.is_blurred()) throw InvalidArgument("input manifest already contains label-5 records");
    }

    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    {
        const auto probe = out_dir / ".write_probe";
        std::ofstream f(probe);
        if (ec || !f) throw Error("output directory is not writable: " + out_dir.string());
        f.close();
        std::filesystem::remove(probe, ec);
    }

    const auto chosen = select_for_twinning(manifest.records.size(), spec.ratio, seed);
    std::vector<ImageRecord> twins(chosen.size());
    std::set<std::string> names;
    for (std::size_t j = 0; j < chosen.size(); ++j) {
        const auto& src = manifest.records[chosen[j]];
        ImageRecord t = src;
        t.image_path = std::filesystem::absolute(out_dir / blurred_file_name(src, spec)).lexically_normal();
        t.label = kBlurLabel;
        t.source_record = src.image_path;
        if (!names.insert(t.image_path.string()).second) {
            throw InvalidArgument("blurred output name collision for " + src.image_path.string() +
                                  " (source stems must be unique)");
        }
        twins[j] = std::move(t);
    }

    parallel_for(
        twins.size(),
        [&](std::size_t j) {
            const Image original = read_image(*twins[j].source_record);
            write_png(apply_blur(original, spec), twins[j].image_path);
        },
        threads);

    DatasetManifest out;
    out.label_map = manifest.label_map;
    out.schema_version = manifest.schema_version;
    out.records = manifest.records;
    out.records.insert(out.records.end(), twins.begin(), twins.end());
    return out;
}

/// Forges twins only for the originals where `selected(record)` holds (typically the
/// training selector); the remaining originals are appended unchanged after the twins.
template <typename Pred>
DatasetManifest forge_train_selection(const DatasetManifest& manifest, const BlurSpec& spec,
                                      const std::filesystem::path& out_dir, std::uint64_t seed, int threads,
                                      Pred selected) {
    DatasetManifest chosen, rest;
    chosen.label_map = rest.label_map = manifest.label_map;
    chosen.schema_version = manifest.schema_version;
    for (const auto& r : manifest.records) (selected(r) ? chosen : rest).records.push_back(r);
    if (chosen.records.empty()) throw InvalidArgument("no original matches the training selection; nothing to blur");
    DatasetManifest out = forge_adversarial_set(chosen, spec, out_dir, seed, threads);
    out.records.insert(out.records.end(), rest.records.begin(), rest.records.end());
    return out;
}

}  // namespace advblur
