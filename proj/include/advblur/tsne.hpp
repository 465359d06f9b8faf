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

// Exact (O(N^2) per iteration) t-SNE with the usual optimizer schedule:
// early exaggeration 12 for 250 iterations, momentum 0.5 then 0.8, learning
// rate 200, per-coordinate adaptive gains. Single-threaded and seeded.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "advblur/dataset.hpp"
#include "advblur/evaluator.hpp"
#include "advblur/model.hpp"
#include "advblur/rng.hpp"

namespace advblur {

struct TsneOptions {
    double perplexity = 30.0;
    int iterations = 1000;
    double learning_rate = 200.0;
    double early_exaggeration = 12.0;
    int exaggeration_iterations = 250;
    std::uint64_t seed = 0;
};

struct EmbeddingPlot {
    std::vector<std::array<double, 2>> points;
    std::vector<int> labels;
    double perplexity = 0.0;
    std::uint64_t seed = 0;
    /// KL(P || Q) at the last iteration.
    double kl_divergence = 0.0;
};

namespace tsne_detail {

/// Row-conditional affinities with the Gaussian bandwidth found by bisection on
/// the entropy, then symmetrized: p_ij = (p_j|i + p_i|j) / 2N.
inline std::vector<double> joint_probabilities(const std::vector<double>& d2, std::size_t n, double perplexity) {
    const double target = std::log(perplexity);
    std::vector<double> p(n * n, 0.0);
    std::vector<double> row(n);
    for (std::size_t i = 0; i < n; ++i) {
        double dmin = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) dmin = std::min(dmin, d2[i * n + j]);
        double beta = 1.0, lo = 0.0, hi = std::numeric_limits<double>::infinity();
        for (int it = 0; it < 100; ++it) {
            double sum = 0.0, weighted = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                row[j] = j == i ? 0.0 : std::exp(-beta * (d2[i * n + j] - dmin));
                sum += row[j];
                weighted += row[j] * (d2[i * n + j] - dmin);
            }
            const double entropy = std::log(sum) + beta * weighted / sum;
            for (std::size_t j = 0; j < n; ++j) p[i * n + j] = row[j] / sum;
            const double diff = entropy - target;
            if (std::abs(diff) < 1e-5) break;
            if (diff > 0) {
                lo = beta;
                beta = std::isinf(hi) ? beta * 2.0 : (beta + hi) / 2.0;
            } else {
                hi = beta;
                beta = (beta + lo) / 2.0;
            }
        }
    }
    std::vector<double> sym(n * n);
    const double norm = 2.0 * static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) sym[i * n + j] = std::max((p[i * n + j] + p[j * n + i]) / norm, 1e-12);
    return sym;
}

}  // namespace tsne_detail

/// Embeds rows of `features` (all of equal length) into 2-D.
inline EmbeddingPlot tsne(const std::vector<std::vector<float>>& features, const std::vector<int>& labels,
                          const TsneOptions& opt = {}) {
    const std::size_t n = features.size();
    if (n == 0) throw InvalidArgument("t-SNE needs at least one point");
    if (labels.size() != n) throw InvalidArgument("one label per point is required");
    if (!(opt.perplexity > 0.0) || opt.perplexity >= static_cast<double>(n) / 3.0) {
        throw InvalidArgument("perplexity " + std::to_string(opt.perplexity) + " is too large for " + std::to_string(n) +
                              " points (must be below N/3)");
    }
    if (opt.iterations < 1) throw InvalidArgument("t-SNE needs at least one iteration");
    const std::size_t dim = features.front().size();
    for (const auto& f : features)
        if (f.size() != dim) throw InvalidArgument("feature vectors differ in length");

    std::vector<double> d2(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < dim; ++k) {
                const double d = static_cast<double>(features[i][k]) - features[j][k];
                s += d * d;
            }
            d2[i * n + j] = d2[j * n + i] = s;
        }
    const std::vector<double> P = tsne_detail::joint_probabilities(d2, n, opt.perplexity);

    Rng rng(derive_seed(opt.seed, 0x75e3));
    std::vector<double> y(n * 2), update(n * 2, 0.0), gains(n * 2, 1.0), grad(n * 2);
    for (double& v : y) v = normal(rng, 0.0, 1e-4);
    std::vector<double> num(n * n);
    double kl = 0.0;

    for (int it = 0; it < opt.iterations; ++it) {
        const double exaggeration = it < opt.exaggeration_iterations ? opt.early_exaggeration : 1.0;
        const double momentum = it < opt.exaggeration_iterations ? 0.5 : 0.8;
        double zsum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            num[i * n + i] = 0.0;
            for (std::size_t j = i + 1; j < n; ++j) {
                const double dx = y[2 * i] - y[2 * j], dy = y[2 * i + 1] - y[2 * j + 1];
                const double q = 1.0 / (1.0 + dx * dx + dy * dy);
                num[i * n + j] = num[j * n + i] = q;
                zsum += 2.0 * q;
            }
        }
        std::fill(grad.begin(), grad.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                if (i == j) continue;
                const double q = std::max(num[i * n + j] / zsum, 1e-12);
                const double m = 4.0 * (exaggeration * P[i * n + j] - q) * num[i * n + j];
                grad[2 * i] += m * (y[2 * i] - y[2 * j]);
                grad[2 * i + 1] += m * (y[2 * i + 1] - y[2 * j + 1]);
            }
        for (std::size_t k = 0; k < y.size(); ++k) {
            const bool same_sign = (grad[k] > 0) == (update[k] > 0);
            gains[k] = same_sign ? std::max(gains[k] * 0.8, 0.01) : gains[k] + 0.2;
            update[k] = momentum * update[k] - opt.learning_rate * gains[k] * grad[k];
            y[k] += update[k];
        }
        double mx = 0.0, my = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            mx += y[2 * i];
            my += y[2 * i + 1];
        }
        mx /= static_cast<double>(n);
        my /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[2 * i] -= mx;
            y[2 * i + 1] -= my;
        }
        if (it == opt.iterations - 1) {
            kl = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    if (i != j) kl += P[i * n + j] * std::log(P[i * n + j] / std::max(num[i * n + j] / zsum, 1e-12));
        }
    }

    EmbeddingPlot out;
    out.labels = labels;
    out.perplexity = opt.perplexity;
    out.seed = opt.seed;
    out.kl_divergence = kl;
    for (std::size_t i = 0; i < n; ++i) {
        out.points.push_back({y[2 * i], y[2 * i + 1]});
        if (!std::isfinite(y[2 * i]) || !std::isfinite(y[2 * i + 1])) throw Error("t-SNE diverged");
    }
    return out;
}

/// Penultimate features of every image, in order.
inline std::vector<std::vector<float>> extract_features(ModelBundle& model, const ImageSet& set, int batch = kEvalBatch) {
    std::vector<std::vector<float>> out;
    std::vector<std::size_t> rows;
    for (std::size_t start = 0; start < set.size(); start += static_cast<std::size_t>(batch)) {
        rows.clear();
        for (std::size_t i = start; i < std::min(set.size(), start + static_cast<std::size_t>(batch)); ++i) rows.push_back(i);
        auto f = model.penultimate(set.batch(rows));
        for (auto& v : f) out.push_back(std::move(v));
    }
    return out;
}

inline EmbeddingPlot tsne_embed(ModelBundle& model, const ImageSet& set, const TsneOptions& opt = {}) {
    if (set.empty()) throw InvalidArgument("t-SNE on an empty set");
    return tsne(extract_features(model, set), set.labels(), opt);
}

/// Mean silhouette coefficient of the points under `groups` (Euclidean).
/// Points in singleton groups score 0. Needs at least two groups.
inline double silhouette(const std::vector<std::array<double, 2>>& points, const std::vector<int>& groups) {
    const std::size_t n = points.size();
    if (groups.size() != n) throw InvalidArgument("one group per point is required");
    std::vector<int> ids(groups);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    if (ids.size() < 2) throw InvalidArgument("silhouette needs at least two groups");
    std::vector<std::size_t> size(ids.size(), 0);
    std::vector<std::size_t> gi(n);
    for (std::size_t i = 0; i < n; ++i) {
        gi[i] = static_cast<std::size_t>(std::lower_bound(ids.begin(), ids.end(), groups[i]) - ids.begin());
        ++size[gi[i]];
    }
    double total = 0.0;
    std::vector<double> sum(ids.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (size[gi[i]] < 2) continue;
        std::fill(sum.begin(), sum.end(), 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            sum[gi[j]] += std::hypot(points[i][0] - points[j][0], points[i][1] - points[j][1]);
        }
        const double a = sum[gi[i]] / static_cast<double>(size[gi[i]] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t g = 0; g < ids.size(); ++g)
            if (g != gi[i]) b = std::min(b, sum[g] / static_cast<double>(size[g]));
        const double m = std::max(a, b);
        total += m > 0 ? (b - a) / m : 0.0;
    }
    return total / static_cast<double>(n);
}

inline void write_embedding_csv(const EmbeddingPlot& e, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << "x,y,label\n";
    out.precision(17);
    for (std::size_t i = 0; i < e.points.size(); ++i) out << e.points[i][0] << "," << e.points[i][1] << "," << e.labels[i] << "\n";
}

/// Scatter plot colored by label (0-5) with a legend.
inline void write_embedding_png(const EmbeddingPlot& e, const std::filesystem::path& path, int size = 640) {
    static const std::array<cv::Scalar, 6> colors{cv::Scalar(180, 119, 31), cv::Scalar(14, 127, 255), cv::Scalar(44, 160, 44),
                                                  cv::Scalar(40, 39, 214),  cv::Scalar(189, 103, 148), cv::Scalar(127, 127, 127)};
    cv::Mat img(size, size, CV_8UC3, cv::Scalar(255, 255, 255));
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& p : e.points) {
        x0 = std::min(x0, p[0]);
        x1 = std::max(x1, p[0]);
        y0 = std::min(y0, p[1]);
        y1 = std::max(y1, p[1]);
    }
    const double margin = 0.08 * size;
    const double span = std::max({x1 - x0, y1 - y0, 1e-12});
    for (std::size_t i = 0; i < e.points.size(); ++i) {
        const int px = static_cast<int>(margin + (e.points[i][0] - x0) / span * (size - 2 * margin));
        const int py = static_cast<int>(margin + (e.points[i][1] - y0) / span * (size - 2 * margin));
        const int label = std::clamp(e.labels[i], 0, 5);
        cv::circle(img, {px, py}, 3, colors[static_cast<std::size_t>(label)], cv::FILLED, cv::LINE_AA);
    }
    for (int k = 0; k < 6; ++k) {
        if (std::find(e.labels.begin(), e.labels.end(), k) == e.labels.end()) continue;
        const cv::Point at(10, 18 + 18 * k);
        cv::circle(img, at, 5, colors[static_cast<std::size_t>(k)], cv::FILLED, cv::LINE_AA);
        cv::putText(img, k == kBlurLabel ? "blurred" : "grade " + std::to_string(k), at + cv::Point(10, 5),
                    cv::FONT_HERSHEY_SIMPLEX, 0.45, cv::Scalar(0, 0, 0), 1, cv::LINE_AA);
    }
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    if (!cv::imwrite(path.string(), img)) throw Error("cannot write " + path.string());
}

}  // namespace advblur
