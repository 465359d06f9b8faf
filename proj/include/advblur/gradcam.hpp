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
#include <optional>
#include <string>
#include <vector>

#include <opencv2/imgproc.hpp>

#include "advblur/dataset.hpp"
#include "advblur/evaluator.hpp"
#include "advblur/image.hpp"
#include "advblur/model.hpp"
#include "advblur/rng.hpp"

namespace advblur {

inline constexpr double kDefaultMaskThreshold = 0.6;

struct Heatmap {
    int height = 0;
    int width = 0;
    /// Row-major, min-max normalized to [0,1]; all zeros for a constant raw map.
    std::vector<float> values;
    std::string target_layer;
    int target_class = 0;
    /// Pooled-gradient channel weights of the target layer.
    std::vector<double> channel_weights;

    float at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

/// Min-max normalization in place; a constant map becomes all zeros.
inline void normalize_min_max(std::vector<float>& v) {
    if (v.empty()) return;
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    const float a = *lo, b = *hi;
    if (!(b > a)) {
        std::fill(v.begin(), v.end(), 0.0f);
        return;
    }
    const float inv = 1.0f / (b - a);
    for (float& x : v) x = std::clamp((x - a) * inv, 0.0f, 1.0f);
}

namespace gradcam_detail {

/// ReLU(sum_c w_c A_c) with w_c the spatial mean of dY/dA_c, at tap resolution.
inline std::vector<float> raw_map(const float* act, const float* grad, int channels, int h, int w,
                                  std::vector<double>& weights) {
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    weights.assign(static_cast<std::size_t>(channels), 0.0);
    std::vector<double> acc(plane, 0.0);
    for (int c = 0; c < channels; ++c) {
        const float* g = grad + static_cast<std::size_t>(c) * plane;
        double s = 0.0;
        for (std::size_t i = 0; i < plane; ++i) s += g[i];
        const double wc = s / static_cast<double>(plane);
        weights[static_cast<std::size_t>(c)] = wc;
        const float* a = act + static_cast<std::size_t>(c) * plane;
        for (std::size_t i = 0; i < plane; ++i) acc[i] += wc * a[i];
    }
    std::vector<float> out(plane);
    for (std::size_t i = 0; i < plane; ++i) out[i] = static_cast<float>(std::max(0.0, acc[i]));
    return out;
}

}  // namespace gradcam_detail

/// Grad-CAM for every image of a batch at the model's last convolutional block.
/// `targets` gives one class per image; empty means each image's predicted grade.
/// Maps are bilinearly upsampled to the input size before normalization.
inline std::vector<Heatmap> gradcam_batch(ModelBundle& model, const nn::Tensor& images, std::vector<int> targets = {}) {
    nn::Network& net = model.network();
    nn::Sequential& features = net.features();
    const std::string layer = net.cam_layer();
    if (features.child(layer) == nullptr) throw InvalidArgument("layer not found: " + layer);
    const int n = images.n();
    struct TapGuard {
        nn::Sequential& features;
        std::string previous;
        ~TapGuard() { features.set_tap(previous); }
    } guard{features, features.tap()};
    features.set_tap(layer);

    const nn::Tensor logits = net.forward(images, nn::Mode::eval);
    if (targets.empty()) {
        for (int i = 0; i < n; ++i) targets.push_back(argmax_row(logits, i));
    }
    if (static_cast<int>(targets.size()) != n) throw InvalidArgument("one Grad-CAM target per image is required");
    nn::Tensor seed(n, logits.c(), 1, 1);
    for (int i = 0; i < n; ++i) {
        const int t = targets[static_cast<std::size_t>(i)];
        if (t < 0 || t >= kNumGrades) throw InvalidArgument("Grad-CAM target class must lie in [0,4]");
        seed(i, t, 0, 0) = 1.0f;
    }
    net.backward(seed);
    net.zero_grad();

    const nn::Tensor act = features.tap_activation();
    const nn::Tensor grad = features.tap_gradient();

    std::vector<Heatmap> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        Heatmap hm;
        hm.target_layer = layer;
        hm.target_class = targets[static_cast<std::size_t>(i)];
        hm.height = images.h();
        hm.width = images.w();
        std::vector<float> raw = gradcam_detail::raw_map(act.sample(i), grad.sample(i), act.c(), act.h(), act.w(),
                                                         hm.channel_weights);
        cv::Mat small(act.h(), act.w(), CV_32F, raw.data());
        cv::Mat big;
        cv::resize(small, big, cv::Size(hm.width, hm.height), 0, 0, cv::INTER_LINEAR);
        hm.values.assign(big.begin<float>(), big.end<float>());
        normalize_min_max(hm.values);
        out.push_back(std::move(hm));
    }
    return out;
}

/// Grad-CAM of one image; `target_class` unset uses the predicted grade.
inline Heatmap gradcam(ModelBundle& model, const Image& image, std::optional<int> target_class = std::nullopt) {
    const Image one[] = {image};
    std::vector<int> t;
    if (target_class) t.push_back(*target_class);
    return gradcam_batch(model, to_tensor(one), t).front();
}

/// Zeroes every channel of the pixels whose heatmap value exceeds `threshold`.
inline Image mask_high_activation(const Image& image, const Heatmap& heatmap, double threshold) {
    if (image.height != heatmap.height || image.width != heatmap.width) {
        throw InvalidArgument("heatmap shape does not match the image");
    }
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw InvalidArgument("mask threshold must lie in [0,1]");
    Image out = image;
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x)
            if (heatmap.at(y, x) > threshold)
                for (int c = 0; c < image.channels; ++c) out.at(y, x, c) = 0.0f;
    return out;
}

inline std::size_t count_above(const Heatmap& h, double threshold) {
    return static_cast<std::size_t>(
        std::count_if(h.values.begin(), h.values.end(), [&](float v) { return v > threshold; }));
}

/// The control mask: the Grad-CAM mask circularly translated by a random offset,
/// so the zeroed-pixel budget and mask shape are preserved but placement is random.
inline Heatmap random_translate(const Heatmap& h, Rng& rng) {
    Heatmap out = h;
    const int dy = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(h.height)));
    const int dx = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(h.width)));
    for (int y = 0; y < h.height; ++y)
        for (int x = 0; x < h.width; ++x)
            out.values[static_cast<std::size_t>((y + dy) % h.height) * h.width + (x + dx) % h.width] = h.at(y, x);
    return out;
}

struct MaskingResult {
    double normal_accuracy = 0.0;
    double masked_accuracy = 0.0;
    /// Accuracy under the randomly placed control mask of equal size.
    double random_accuracy = 0.0;
    /// Mean fraction of pixels zeroed per image.
    double masked_fraction = 0.0;
    std::size_t n = 0;
};

/// Accuracy before and after zeroing each image's Grad-CAM high-activation region
/// (target = the model's own prediction), plus the random-placement control.
inline MaskingResult masking_experiment(ModelBundle& model, const ImageSet& set, double threshold = kDefaultMaskThreshold,
                                        std::uint64_t seed = 0, int batch = kEvalBatch) {
    require_graded(set);
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw InvalidArgument("mask threshold must lie in [0,1]");
    Rng rng(derive_seed(seed, 0x3a5c));
    std::vector<int> normal, masked, control;
    double fraction = 0.0;
    std::vector<std::size_t> rows;
    for (std::size_t start = 0; start < set.size(); start += static_cast<std::size_t>(batch)) {
        rows.clear();
        for (std::size_t i = start; i < std::min(set.size(), start + static_cast<std::size_t>(batch)); ++i) rows.push_back(i);
        const nn::Tensor x = set.batch(rows);
        const auto maps = gradcam_batch(model, x);
        std::vector<Image> a, b;
        for (std::size_t k = 0; k < rows.size(); ++k) {
            normal.push_back(maps[k].target_class);
            const Image img = set.image(rows[k]);
            a.push_back(mask_high_activation(img, maps[k], threshold));
            b.push_back(mask_high_activation(img, random_translate(maps[k], rng), threshold));
            fraction += static_cast<double>(count_above(maps[k], threshold)) / static_cast<double>(maps[k].values.size());
        }
        const auto pa = model.predict(to_tensor(a));
        const auto pb = model.predict(to_tensor(b));
        masked.insert(masked.end(), pa.begin(), pa.end());
        control.insert(control.end(), pb.begin(), pb.end());
    }
    MaskingResult r;
    r.n = set.size();
    r.normal_accuracy = accuracy_percent(normal, set.labels());
    r.masked_accuracy = accuracy_percent(masked, set.labels());
    r.random_accuracy = accuracy_percent(control, set.labels());
    r.masked_fraction = fraction / static_cast<double>(set.size());
    return r;
}

/// JET-colored heatmap blended over the image.
inline Image heatmap_overlay(const Image& image, const Heatmap& h, double alpha = 0.45) {
    if (image.height != h.height || image.width != h.width) throw InvalidArgument("heatmap shape does not match the image");
    cv::Mat gray(h.height, h.width, CV_8U);
    for (int y = 0; y < h.height; ++y)
        for (int x = 0; x < h.width; ++x) gray.at<std::uint8_t>(y, x) = quantize8(h.at(y, x));
    cv::Mat color;
    cv::applyColorMap(gray, color, cv::COLORMAP_JET);
    const Image colored = from_mat(color);
    Image out = image;
    for (std::size_t i = 0; i < out.pixels.size(); ++i) {
        out.pixels[i] = static_cast<float>((1.0 - alpha) * image.pixels[i] + alpha * colored.pixels[i]);
    }
    return out;
}

}  // namespace advblur
