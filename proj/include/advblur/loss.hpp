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

// The dual loss. Each sample takes exactly one branch:
//
//   label in [0, C)    original-image loss   L_OI = -log softmax(z)[label]
//   label == C         blurred-image loss    L_BI = (1/C) sum_c (softmax(z)_c - 1/C)^2
//
// The blurred class only exists here; the model head has C outputs. L_BI pulls
// the prediction on a blurred image towards the uniform distribution, so cues
// that survive heavy blurring (tint, illumination, field shape) carry no class
// evidence.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "advblur/error.hpp"

namespace advblur {

enum class Reduction { mean, sum };

struct LossConfig {
    int num_classes = 5;
    int blur_label = 5;
    Reduction reduction = Reduction::mean;

    /// u_c = 1/C for every class.
    std::vector<double> uniform_target() const {
        return std::vector<double>(static_cast<std::size_t>(num_classes), 1.0 / num_classes);
    }

    void validate() const {
        if (num_classes < 2) throw InvalidArgument("num_classes must be >= 2");
        if (blur_label != num_classes) throw InvalidArgument("blur_label must equal num_classes (one past the last real class)");
    }

    bool operator==(const LossConfig&) const = default;
};

/// Branch taken by a sample: original image (cross-entropy) or blurred image (MSE to uniform).
enum class Branch { OI, BI };

template <std::floating_point T>
struct LossOutput {
    T total{};
    std::vector<T> per_sample;
    std::vector<Branch> branch_tags;
};

/// Floor on probabilities inside the logarithm.
inline constexpr double kProbabilityFloor = 1e-12;

namespace loss_detail {

template <std::floating_point T>
void check_finite(std::span<const T> values) {
    for (T v : values) {
        if (!std::isfinite(v)) throw InvalidArgument("non-finite logit");
    }
}

}  // namespace loss_detail

/// Max-shifted softmax; invariant under adding a constant to every logit.
template <std::floating_point T>
std::vector<T> softmax(std::span<const T> logits) {
    if (logits.empty()) throw InvalidArgument("softmax of an empty vector");
    loss_detail::check_finite(logits);
    const T peak = *std::max_element(logits.begin(), logits.end());
    std::vector<T> p(logits.size());
    T sum = 0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - peak);
        sum += p[i];
    }
    for (T& v : p) v /= sum;
    return p;
}

template <std::floating_point T>
std::vector<T> softmax(const std::vector<T>& logits) {
    return softmax(std::span<const T>(logits));
}

/// One-hot cross-entropy (natural log) of a real-class label.
template <std::floating_point T>
T original_image_loss(std::span<const T> logits, int label) {
    if (label < 0 || static_cast<std::size_t>(label) >= logits.size()) {
        throw InvalidArgument("label " + std::to_string(label) + " out of range [0," + std::to_string(logits.size()) + ")");
    }
    const auto p = softmax(logits);
    return -std::log(std::max(p[static_cast<std::size_t>(label)], static_cast<T>(kProbabilityFloor)));
}

/// d L_OI / d z = softmax(z) - onehot(label); zero once the floor is active.
template <std::floating_point T>
std::vector<T> original_image_loss_grad(std::span<const T> logits, int label) {
    if (label < 0 || static_cast<std::size_t>(label) >= logits.size()) {
        throw InvalidArgument("label " + std::to_string(label) + " out of range");
    }
    auto g = softmax(logits);
    if (g[static_cast<std::size_t>(label)] < static_cast<T>(kProbabilityFloor)) {
        std::fill(g.begin(), g.end(), T{0});
        return g;
    }
    g[static_cast<std::size_t>(label)] -= T{1};
    return g;
}

/// Mean squared distance between softmax(z) and the uniform vector.
/// For C = 5 the value lies in [0, 0.16).
template <std::floating_point T>
T blurred_image_loss(std::span<const T> logits, const LossConfig& cfg = {}) {
    if (logits.size() != static_cast<std::size_t>(cfg.num_classes)) {
        throw InvalidArgument("blurred_image_loss expects " + std::to_string(cfg.num_classes) + " logits");
    }
    const auto p = softmax(logits);
    const T u = T{1} / static_cast<T>(cfg.num_classes);
    T acc = 0;
    for (T v : p) acc += (v - u) * (v - u);
    return acc / static_cast<T>(cfg.num_classes);
}

/// d L_BI / d z_j = (2/C) p_j [ (p_j - u) - sum_c (p_c - u) p_c ]
template <std::floating_point T>
std::vector<T> blurred_image_loss_grad(std::span<const T> logits, const LossConfig& cfg = {}) {
    if (logits.size() != static_cast<std::size_t>(cfg.num_classes)) {
        throw InvalidArgument("blurred_image_loss expects " + std::to_string(cfg.num_classes) + " logits");
    }
    const auto p = softmax(logits);
    const T c = static_cast<T>(cfg.num_classes);
    const T u = T{1} / c;
    T dot = 0;
    for (T v : p) dot += (v - u) * v;
    std::vector<T> g(p.size());
    for (std::size_t j = 0; j < p.size(); ++j) g[j] = T{2} / c * p[j] * ((p[j] - u) - dot);
    return g;
}

/// Per-sample dispatch over a row-major B x C logit batch.
/// When `grad` is non-null it receives d total / d logits (same layout).
template <std::floating_point T>
LossOutput<T> combined_loss(std::span<const T> logits, std::span<const int> labels, const LossConfig& cfg = {},
                            std::vector<T>* grad = nullptr) {
    cfg.validate();
    const std::size_t batch = labels.size();
    const std::size_t classes = static_cast<std::size_t>(cfg.num_classes);
    if (batch == 0) throw InvalidArgument("combined_loss on an empty batch");
    if (logits.size() != batch * classes) throw InvalidArgument("logit batch shape does not match labels x num_classes");

    LossOutput<T> out;
    out.per_sample.resize(batch);
    out.branch_tags.resize(batch);
    if (grad) grad->assign(logits.size(), T{0});
    const T scale = cfg.reduction == Reduction::mean ? T{1} / static_cast<T>(batch) : T{1};

    for (std::size_t i = 0; i < batch; ++i) {
        const int y = labels[i];
        if (y < 0 || y > cfg.blur_label) {
            throw InvalidArgument("label " + std::to_string(y) + " outside [0," + std::to_string(cfg.blur_label) + "]");
        }
        const auto row = logits.subspan(i * classes, classes);
        std::vector<T> g;
        if (y == cfg.blur_label) {
            out.branch_tags[i] = Branch::BI;
            out.per_sample[i] = blurred_image_loss(row, cfg);
            if (grad) g = blurred_image_loss_grad(row, cfg);
        } else {
            out.branch_tags[i] = Branch::OI;
            out.per_sample[i] = original_image_loss(row, y);
            if (grad) g = original_image_loss_grad(row, y);
        }
        if (grad) {
            for (std::size_t c = 0; c < classes; ++c) (*grad)[i * classes + c] = g[c] * scale;
        }
    }
    T total = 0;
    for (T v : out.per_sample) total += v;
    out.total = total * scale;
    return out;
}

enum class LossKind { OI, BI, combined };

/// Max relative discrepancy between the analytic gradient and central finite
/// differences, over every logit component. Components smaller than 1e-6 in
/// magnitude are compared against that floor instead of their own size.
/// For OI and BI each row of `logits` is an independent sample; for `combined`
/// the whole batch is differentiated through the mean reduction.
inline double gradient_check(LossKind kind, std::span<const double> logits, std::span<const int> labels, double eps,
                             const LossConfig& cfg = {}) {
    if (eps < 1e-7 || eps > 1e-3) throw InvalidArgument("eps must lie in [1e-7, 1e-3]");
    const std::size_t classes = static_cast<std::size_t>(cfg.num_classes);
    if (logits.size() % classes != 0) throw InvalidArgument("logit count is not a multiple of num_classes");
    const std::size_t batch = logits.size() / classes;
    constexpr double kFloor = 1e-6;

    auto relative = [](double a, double n) { return std::abs(a - n) / std::max({std::abs(a), std::abs(n), kFloor}); };

    double worst = 0.0;
    if (kind == LossKind::combined) {
        std::vector<double> analytic;
        combined_loss<double>(logits, labels, cfg, &analytic);
        std::vector<double> probe(logits.begin(), logits.end());
        for (std::size_t k = 0; k < probe.size(); ++k) {
            const double keep = probe[k];
            probe[k] = keep + eps;
            const double up = combined_loss<double>(probe, labels, cfg).total;
            probe[k] = keep - eps;
            const double down = combined_loss<double>(probe, labels, cfg).total;
            probe[k] = keep;
            worst = std::max(worst, relative(analytic[k], (up - down) / (2 * eps)));
        }
        return worst;
    }

    for (std::size_t i = 0; i < batch; ++i) {
        std::vector<double> row(logits.begin() + static_cast<std::ptrdiff_t>(i * classes),
                                logits.begin() + static_cast<std::ptrdiff_t>((i + 1) * classes));
        const int label = kind == LossKind::OI ? labels[i] : 0;
        auto f = [&](std::span<const double> z) {
            return kind == LossKind::OI ? original_image_loss(z, label) : blurred_image_loss(z, cfg);
        };
        const auto analytic = kind == LossKind::OI ? original_image_loss_grad(std::span<const double>(row), label)
                                                   : blurred_image_loss_grad(std::span<const double>(row), cfg);
        for (std::size_t c = 0; c < classes; ++c) {
            const double keep = row[c];
            row[c] = keep + eps;
            const double up = f(row);
            row[c] = keep - eps;
            const double down = f(row);
            row[c] = keep;
            worst = std::max(worst, relative(analytic[c], (up - down) / (2 * eps)));
        }
    }
    return worst;
}

}  // namespace advblur
