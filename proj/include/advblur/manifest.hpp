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

#include <array>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "advblur/csv.hpp"
#include "advblur/error.hpp"
#include "advblur/image.hpp"

namespace advblur {

/// Number of real DR grades (0..4).
inline constexpr int kNumGrades = 5;
/// Label index of the blurred adversarial class.
inline constexpr int kBlurLabel = 5;

inline constexpr std::string_view kManifestHeader = "image_path,dataset_id,camera_id,label,quality,source_record";
inline constexpr int kManifestSchemaVersion = 1;

/// Dataset identity. The five known ids have fixed spellings; anything else is other(name).
struct DatasetId {
    std::string name;

    static constexpr std::array<std::string_view, 5> kKnown{"eyepacs", "messidor1", "messidor2", "aptos", "synthetic"};

    DatasetId() = default;
    DatasetId(std::string n) : name(std::move(n)) {}  // NOLINT(google-explicit-constructor)
    DatasetId(const char* n) : name(n) {}             // NOLINT(google-explicit-constructor)

    bool is_known() const {
        for (auto k : kKnown)
            if (k == name) return true;
        return false;
    }

    /// Column heading used in rendered tables.
    std::string display_name() const {
        if (name == "eyepacs") return "EyePACS";
        if (name == "messidor1") return "Messidor-1";
        if (name == "messidor2") return "Messidor-2";
        if (name == "aptos") return "APTOS";
        if (name == "synthetic") return "Synthetic";
        return name;
    }

    auto operator<=>(const DatasetId&) const = default;
};

enum class Camera { A, B, C, D, E, unknown };
enum class Quality { good, usable, reject, unknown };

inline std::string to_string(Camera c) {
    static constexpr std::array<const char*, 6> names{"A", "B", "C", "D", "E", "unknown"};
    return names[static_cast<int>(c)];
}

inline std::optional<Camera> parse_camera(std::string_view s) {
    if (s == "A") return Camera::A;
    if (s == "B") return Camera::B;
    if (s == "C") return Camera::C;
    if (s == "D") return Camera::D;
    if (s == "E") return Camera::E;
    if (s == "unknown") return Camera::unknown;
    return std::nullopt;
}

inline std::string to_string(Quality q) {
    static constexpr std::array<const char*, 4> names{"good", "usable", "reject", "unknown"};
    return names[static_cast<int>(q)];
}

inline std::optional<Quality> parse_quality(std::string_view s) {
    if (s == "good") return Quality::good;
    if (s == "usable") return Quality::usable;
    if (s == "reject") return Quality::reject;
    if (s == "unknown") return Quality::unknown;
    return std::nullopt;
}

/// One fundus image. Label 5 marks a blurred derivative and requires source_record.
struct ImageRecord {
    std::filesystem::path image_path;
    DatasetId dataset;
    std::optional<Camera> camera;
    int label = 0;
    std::optional<Quality> quality;
    std::optional<std::filesystem::path> source_record;

    bool is_blurred() const { return label == kBlurLabel; }

    /// Record identity used for duplicate detection and split disjointness.
    std::pair<std::string, int> key() const { return {image_path.string(), label}; }

    bool operator==(const ImageRecord&) const = default;
};

/// Throws InvalidArgument when the record violates its invariants.
inline void validate_record(const ImageRecord& r) {
    if (r.label < 0 || r.label > kBlurLabel) {
        throw InvalidArgument("label " + std::to_string(r.label) + " outside valid range [0,5]");
    }
    if (r.is_blurred() != r.source_record.has_value()) {
        throw InvalidArgument("label 5 must be paired with a source_record (and only label 5): " +
                              r.image_path.string());
    }
}

/// Maps a native grade token through one dataset's vocabulary into [0,4].
inline int map_labels(std::string_view native_grade, const std::map<std::string, int, std::less<>>& vocabulary) {
    const auto it = vocabulary.find(native_grade);
    if (it == vocabulary.end()) {
        throw InvalidArgument("unmapped label token '" + std::string(native_grade) + "'");
    }
    if (it->second < 0 || it->second >= kNumGrades) {
        throw InvalidArgument("label map sends '" + std::string(native_grade) + "' to " +
                              std::to_string(it->second) + ", outside [0,4]");
    }
    return it->second;
}

/// Per-dataset grade vocabularies. Datasets without an entry are rejected unless a
/// fallback vocabulary is set (used for manifests already in canonical labels).
struct LabelMap {
    using Vocabulary = std::map<std::string, int, std::less<>>;

    std::map<std::string, Vocabulary, std::less<>> per_dataset;
    std::optional<Vocabulary> fallback;

    static Vocabulary identity(int levels) {
        Vocabulary v;
        for (int i = 0; i < levels; ++i) v[std::to_string(i)] = i;
        return v;
    }

    /// eyepacs/messidor2/aptos/synthetic: identity over 0..4; messidor1: identity over its 4 levels.
    static LabelMap defaults() {
        LabelMap m;
        for (const char* ds : {"eyepacs", "messidor2", "aptos", "synthetic"}) m.per_dataset[ds] = identity(kNumGrades);
        m.per_dataset["messidor1"] = identity(4);
        return m;
    }

    /// Accepts every dataset with labels already on the 5-grade scale.
    static LabelMap canonical() {
        LabelMap m;
        m.fallback = identity(kNumGrades);
        return m;
    }

    const Vocabulary* vocabulary(std::string_view dataset) const {
        const auto it = per_dataset.find(dataset);
        if (it != per_dataset.end()) return &it->second;
        return fallback ? &*fallback : nullptr;
    }

    bool declares(std::string_view dataset) const { return vocabulary(dataset) != nullptr; }
};

struct DatasetManifest {
    std::vector<ImageRecord> records;
    LabelMap label_map = LabelMap::canonical();
    int schema_version = kManifestSchemaVersion;

    std::set<DatasetId> datasets() const {
        std::set<DatasetId> out;
        for (const auto& r : records) out.insert(r.dataset);
        return out;
    }

    std::size_t count_label(int label) const {
        std::size_t n = 0;
        for (const auto& r : records) n += r.label == label;
        return n;
    }

    /// Checks record invariants, key uniqueness and dataset declaration.
    void validate() const {
        std::set<std::pair<std::string, int>> seen;
        for (std::size_t i = 0; i < records.size(); ++i) {
            const auto& r = records[i];
            try {
                validate_record(r);
            } catch (const InvalidArgument& e) {
                throw ManifestError("record " + std::to_string(i) + ": " + e.what());
            }
            if (!seen.insert(r.key()).second) {
                throw ManifestError("duplicate (image_path, label) pair: " + r.image_path.string() + ", " +
                                    std::to_string(r.label));
            }
            if (!label_map.declares(r.dataset.name)) {
                throw ManifestError("dataset_id '" + r.dataset.name + "' is not declared in the label map");
            }
        }
    }
};

namespace detail {

inline std::filesystem::path resolve_path(const std::filesystem::path& base_dir, std::string_view text) {
    std::filesystem::path p{std::string(text)};
    if (p.is_relative()) p = base_dir / p;
    return std::filesystem::absolute(p).lexically_normal();
}

inline std::string relative_path(const std::filesystem::path& p, const std::filesystem::path& base_dir) {
    const auto abs_base = std::filesystem::absolute(base_dir).lexically_normal();
    const auto abs_p = std::filesystem::absolute(p).lexically_normal();
    auto rel = abs_p.lexically_relative(abs_base);
    if (rel.empty()) return abs_p.generic_string();
    return rel.generic_string();
}

inline std::optional<int> parse_int(std::string_view s) {
    int v = 0;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end) return std::nullopt;
    return v;
}

}  // namespace detail

/// Parses one CSV manifest. Relative image paths resolve against the manifest's
/// directory; paths are held in absolute, normalized form.
inline DatasetManifest load_manifest(const std::filesystem::path& path,
                                     const LabelMap& label_map = LabelMap::defaults()) {
    std::ifstream in(path);
    if (!in) throw ManifestError("cannot open manifest: " + path.string());
    const auto base_dir = std::filesystem::absolute(path).parent_path();

    DatasetManifest manifest;
    manifest.label_map = label_map;

    std::string line;
    if (!std::getline(in, line)) throw ManifestError(1, "", "empty manifest (missing header)");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kManifestHeader) {
        throw ManifestError(1, "", "header must be exactly '" + std::string(kManifestHeader) + "'");
    }

    static constexpr std::array<const char*, 6> kColumns{"image_path", "dataset_id", "camera_id",
                                                         "label",      "quality",    "source_record"};
    std::set<std::pair<std::string, int>> seen;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto fields = csv::split_line(line);
        if (!fields) throw ManifestError(line_no, "", "unterminated quoted field");
        if (fields->size() != kColumns.size()) {
            throw ManifestError(line_no, "", "expected 6 columns, found " + std::to_string(fields->size()));
        }
        const auto& f = *fields;
        ImageRecord r;
        if (f[0].empty()) throw ManifestError(line_no, kColumns[0], "image_path is empty");
        r.image_path = detail::resolve_path(base_dir, f[0]);

        if (f[1].empty()) throw ManifestError(line_no, kColumns[1], "dataset_id is empty");
        r.dataset = DatasetId(f[1]);
        const auto* vocab = label_map.vocabulary(f[1]);
        if (vocab == nullptr) {
            throw ManifestError(line_no, kColumns[1], "unknown dataset_id '" + f[1] + "' without label_map entry");
        }

        if (!f[2].empty()) {
            r.camera = parse_camera(f[2]);
            if (!r.camera) throw ManifestError(line_no, kColumns[2], "invalid camera_id '" + f[2] + "' (A-E|unknown)");
        }
        if (!f[4].empty()) {
            r.quality = parse_quality(f[4]);
            if (!r.quality) {
                throw ManifestError(line_no, kColumns[4], "invalid quality '" + f[4] + "' (good|usable|reject|unknown)");
            }
        }
        if (!f[5].empty()) r.source_record = detail::resolve_path(base_dir, f[5]);

        const auto numeric = detail::parse_int(f[3]);
        if (numeric && (*numeric < 0 || *numeric > kBlurLabel)) {
            throw ManifestError(line_no, kColumns[3], "label " + f[3] + " outside valid range [0,5]");
        }
        if (numeric && *numeric == kBlurLabel) {
            if (!r.source_record) throw ManifestError(line_no, kColumns[5], "label 5 requires a source_record");
            r.label = kBlurLabel;
        } else {
            if (r.source_record) {
                throw ManifestError(line_no, kColumns[5], "source_record is only allowed on label-5 records");
            }
            try {
                r.label = map_labels(f[3], *vocab);
            } catch (const InvalidArgument& e) {
                throw ManifestError(line_no, kColumns[3], std::string(e.what()) + " for dataset '" + f[1] + "'");
            }
        }
        if (!seen.insert(r.key()).second) {
            throw ManifestError(line_no, kColumns[0], "duplicate (image_path, label) pair");
        }
        manifest.records.push_back(std::move(r));
    }
    return manifest;
}

/// Writes the canonical CSV form. Paths are written relative to the manifest's directory.
inline void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
    const auto dir = std::filesystem::absolute(path).parent_path();
    std::filesystem::create_directories(dir);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ManifestError("cannot write manifest: " + path.string());
    out << kManifestHeader << '\n';
    for (const auto& r : manifest.records) {
        out << csv::join({detail::relative_path(r.image_path, dir), r.dataset.name,
                          r.camera ? to_string(*r.camera) : std::string(), std::to_string(r.label),
                          r.quality ? to_string(*r.quality) : std::string(),
                          r.source_record ? detail::relative_path(*r.source_record, dir) : std::string()})
            << '\n';
    }
    if (!out) throw ManifestError("write failed: " + path.string());
}

/// Convenience overload decoding a record's image at the given size.
inline Image load_image(const ImageRecord& record, int target_size) {
    return load_image(record.image_path, target_size);
}

}  // namespace advblur
