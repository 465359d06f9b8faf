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

// Desk-scale fundus surrogate. Each image is a dark field with an orange retinal
// disk, a bright optic disc and a few dark vessels. Grade g is encoded as
// g * lesions_per_grade small bright exudate dots at random positions inside the
// disk, so labels are exact by construction. Visual domains differ only in
// global appearance (tint, illumination, gamma, vignette, sensor noise).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <opencv2/imgproc.hpp>

#include "advblur/error.hpp"
#include "advblur/image.hpp"
#include "advblur/manifest.hpp"
#include "advblur/parallel.hpp"
#include "advblur/rng.hpp"

namespace advblur {

struct DomainStyle {
    std::string name = "synthetic";
    /// Per-channel (RGB) multiplicative gain.
    std::array<double, 3> tint{1.0, 1.0, 1.0};
    /// Global illumination gain.
    double brightness = 1.0;
    /// Applied as v^gamma after tint and brightness.
    double gamma = 1.0;
    /// Relative darkening at the disk rim, in [0,1).
    double vignette = 0.35;
    /// Additive Gaussian noise sd on the [0,1] scale.
    double noise = 0.01;
    /// Retina tone gain per grade step away from grade 2. Nonzero values make
    /// global tone a label-correlated cue inside this domain only.
    double grade_tone_bias = 0.0;

    void validate() const {
        if (name.empty()) throw InvalidArgument("domain name must not be empty");
        for (double t : tint)
            if (!(t > 0.0)) throw InvalidArgument("domain tint gains must be positive");
        if (!(brightness > 0.0) || !(gamma > 0.0)) throw InvalidArgument("brightness and gamma must be positive");
        if (!(vignette >= 0.0 && vignette < 1.0)) throw InvalidArgument("vignette must lie in [0,1)");
        if (!(noise >= 0.0)) throw InvalidArgument("noise must be non-negative");
        if (!(std::abs(grade_tone_bias) <= 0.2)) throw InvalidArgument("grade_tone_bias must lie in [-0.2,0.2]");
    }
};

inline nlohmann::json to_json(const DomainStyle& d) {
    return {{"name", d.name},         {"tint", d.tint},         {"brightness", d.brightness},
            {"gamma", d.gamma},       {"vignette", d.vignette}, {"noise", d.noise},
            {"grade_tone_bias", d.grade_tone_bias}};
}

inline DomainStyle domain_from_json(const nlohmann::json& j) {
    DomainStyle d;
    d.name = j.value("name", d.name);
    if (j.contains("tint")) d.tint = j.at("tint").get<std::array<double, 3>>();
    d.brightness = j.value("brightness", d.brightness);
    d.gamma = j.value("gamma", d.gamma);
    d.vignette = j.value("vignette", d.vignette);
    d.noise = j.value("noise", d.noise);
    d.grade_tone_bias = j.value("grade_tone_bias", d.grade_tone_bias);
    return d;
}

/// The reference domain and a tint/illumination-shifted one.
inline DomainStyle source_domain() { return DomainStyle{}; }

inline DomainStyle shifted_domain() {
    DomainStyle d;
    d.name = "synthetic_shift";
    d.tint = {0.9, 1.0, 1.15};
    d.brightness = 0.85;
    d.gamma = 1.15;
    d.vignette = 0.5;
    d.noise = 0.02;
    return d;
}

struct SyntheticSpec {
    int native_size = 256;
    int lesions_per_grade = 3;

    void validate() const {
        if (native_size < 64) throw InvalidArgument("native_size must be >= 64");
        if (lesions_per_grade < 1) throw InvalidArgument("lesions_per_grade must be >= 1");
    }
};

struct RenderedFundus {
    Image image;
    int lesions = 0;
};

/// Renders one image. Fully determined by (grade, style, spec, seed).
inline RenderedFundus render_fundus(int grade, const DomainStyle& style, const SyntheticSpec& spec, std::uint64_t seed) {
    if (grade < 0 || grade >= kNumGrades) throw InvalidArgument("grade must lie in [0,4]");
    style.validate();
    spec.validate();
    Rng rng(seed);
    const int s = spec.native_size;
    const double scale = s / 256.0;
    cv::Mat canvas(s, s, CV_32FC3, cv::Scalar(0.03, 0.02, 0.02));  // RGB order

    const cv::Point2d center(s / 2.0 + uniform(rng, -4, 4) * scale, s / 2.0 + uniform(rng, -4, 4) * scale);
    const double radius = 0.44 * s;
    const double tone = uniform(rng, 0.9, 1.1) * (1.0 + style.grade_tone_bias * (grade - 2));
    const cv::Vec3f retina(static_cast<float>(0.78 * tone), static_cast<float>(0.36 * tone), static_cast<float>(0.16 * tone));
    cv::circle(canvas, center, static_cast<int>(radius), cv::Scalar(retina[0], retina[1], retina[2]), cv::FILLED, cv::LINE_8);

    // Optic disc on a random side, vessels fanning out from it.
    const double side = uniform01(rng) < 0.5 ? -1.0 : 1.0;
    const cv::Point2d disc(center.x + side * 0.55 * radius, center.y + uniform(rng, -0.1, 0.1) * radius);
    const double disc_r = 0.16 * radius;
    for (int v = 0; v < 6; ++v) {
        const double angle = uniform(rng, 0.0, 2.0 * M_PI);
        std::vector<cv::Point> path;
        cv::Point2d p = disc;
        double heading = angle;
        for (int step = 0; step < 12; ++step) {
            path.emplace_back(static_cast<int>(std::lround(p.x)), static_cast<int>(std::lround(p.y)));
            heading += uniform(rng, -0.25, 0.25);
            p += cv::Point2d(std::cos(heading), std::sin(heading)) * (0.09 * radius);
        }
        cv::polylines(canvas, path, false, cv::Scalar(0.45, 0.1, 0.07), std::max(1, static_cast<int>(std::lround(2.5 * scale))),
                      cv::LINE_8);
    }
    cv::circle(canvas, disc, static_cast<int>(disc_r), cv::Scalar(0.97, 0.82, 0.55), cv::FILLED, cv::LINE_8);

    // Exudates: non-overlapping dots inside the disk, clear of the optic disc.
    const int want = grade * spec.lesions_per_grade;
    std::vector<cv::Point2d> placed;
    const double dot_r_max = 7.0 * scale;
    int attempts = 0;
    while (static_cast<int>(placed.size()) < want) {
        if (++attempts > 100000) throw Error("could not place lesions without overlap");
        const double rr = std::sqrt(uniform01(rng)) * 0.78 * radius;
        const double th = uniform(rng, 0.0, 2.0 * M_PI);
        const cv::Point2d q(center.x + rr * std::cos(th), center.y + rr * std::sin(th));
        if (cv::norm(q - disc) < disc_r + 2 * dot_r_max) continue;
        bool clear = true;
        for (const auto& o : placed) clear &= cv::norm(q - o) >= 4 * dot_r_max;
        if (!clear) continue;
        placed.push_back(q);
    }
    for (const auto& q : placed) {
        const int r = std::max(1, static_cast<int>(std::lround(uniform(rng, 5.0, 7.0) * scale)));
        cv::circle(canvas, q, r, cv::Scalar(1.0, 0.93, 0.35), cv::FILLED, cv::LINE_8);
    }

    // Vessels stop at the rim.
    cv::Mat outside(s, s, CV_8UC1, cv::Scalar(255));
    cv::circle(outside, center, static_cast<int>(radius), cv::Scalar(0), cv::FILLED, cv::LINE_8);
    canvas.setTo(cv::Scalar(0.03, 0.02, 0.02), outside);

    cv::GaussianBlur(canvas, canvas, cv::Size(0, 0), 0.8 * scale);

    Image img(s, s, 3);
    for (int y = 0; y < s; ++y) {
        const auto* row = canvas.ptr<cv::Vec3f>(y);
        for (int x = 0; x < s; ++x) {
            const double d = cv::norm(cv::Point2d(x, y) - center) / radius;
            const double shade = d < 1.0 ? 1.0 - style.vignette * d * d : 1.0 - style.vignette;
            for (int c = 0; c < 3; ++c) {
                double v = row[x][c] * shade * style.tint[static_cast<std::size_t>(c)] * style.brightness;
                v = std::pow(std::clamp(v, 0.0, 1.0), style.gamma);
                v += normal(rng, 0.0, style.noise);
                img.at(y, x, c) = static_cast<float>(quantize8(static_cast<float>(v))) / 255.0f;
            }
        }
    }
    return {std::move(img), want};
}

/// Writes n images per domain under out_dir/<domain>/ and returns their manifest.
/// Grades cycle 0..4 so every grade gets n/5 images (+1 for the first n mod 5).
/// Output is pixel-identical for the same (n, domains, seed).
inline DatasetManifest make_synthetic_dataset(int n, const std::vector<DomainStyle>& domains, std::uint64_t seed,
                                              const std::filesystem::path& out_dir, const SyntheticSpec& spec = {},
                                              int threads = 0) {
    if (n < 50) throw InvalidArgument("synthetic datasets need n >= 50 images per domain");
    if (domains.empty()) throw InvalidArgument("at least one domain is required");
    spec.validate();
    for (std::size_t a = 0; a < domains.size(); ++a) {
        domains[a].validate();
        for (std::size_t b = 0; b < a; ++b)
            if (domains[a].name == domains[b].name) throw InvalidArgument("duplicate domain name " + domains[a].name);
    }

    DatasetManifest manifest;
    manifest.label_map = LabelMap::canonical();
    for (std::size_t d = 0; d < domains.size(); ++d) {
        for (int i = 0; i < n; ++i) {
            ImageRecord r;
            char name[32];
            std::snprintf(name, sizeof name, "img_%05d.png", i);
            r.image_path = std::filesystem::absolute(out_dir / domains[d].name / name).lexically_normal();
            r.dataset = DatasetId{domains[d].name};
            r.label = i % kNumGrades;
            manifest.records.push_back(std::move(r));
        }
    }
    parallel_for(
        manifest.records.size(),
        [&](std::size_t k) {
            const std::size_t d = k / static_cast<std::size_t>(n);
            const std::uint64_t image_seed = derive_seed(derive_seed(seed, d + 1), k % static_cast<std::size_t>(n));
            write_png(render_fundus(manifest.records[k].label, domains[d], spec, image_seed).image,
                      manifest.records[k].image_path);
        },
        threads);
    return manifest;
}

}  // namespace advblur
