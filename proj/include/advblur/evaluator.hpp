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
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "advblur/dataset.hpp"
#include "advblur/loss.hpp"
#include "advblur/manifest.hpp"
#include "advblur/model.hpp"

namespace advblur {

inline constexpr int kEvalBatch = 64;

/// Grade predictions (argmax over the five real grades) for every image, in order.
inline std::vector<int> predict_all(ModelBundle& model, const ImageSet& set, int batch = kEvalBatch) {
    std::vector<int> out;
    out.reserve(set.size());
    std::vector<std::size_t> rows;
    for (std::size_t start = 0; start < set.size(); start += static_cast<std::size_t>(batch)) {
        rows.clear();
        for (std::size_t i = start; i < std::min(set.size(), start + static_cast<std::size_t>(batch)); ++i) rows.push_back(i);
        const auto p = model.predict(set.batch(rows));
        out.insert(out.end(), p.begin(), p.end());
    }
    return out;
}

/// Percentage of predictions equal to the labels.
inline double accuracy_percent(std::span<const int> predictions, std::span<const int> labels) {
    if (labels.empty()) throw InvalidArgument("accuracy of an empty set");
    if (predictions.size() != labels.size()) throw InvalidArgument("prediction/label count mismatch");
    std::size_t hit = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) hit += predictions[i] == labels[i];
    return 100.0 * static_cast<double>(hit) / static_cast<double>(labels.size());
}

struct DomainAccuracy {
    std::string domain;
    double accuracy = 0.0;
    std::size_t n = 0;
};

inline void require_graded(const ImageSet& set) {
    if (set.empty()) throw InvalidArgument("test set '" + set.name() + "' is empty");
    for (int y : set.labels()) {
        if (y < 0 || y >= kNumGrades) {
            throw InvalidArgument("test set '" + set.name() + "' contains label " + std::to_string(y) + " (only 0-4 allowed)");
        }
    }
}

/// Top-1 accuracy over the five grades.
inline DomainAccuracy evaluate(ModelBundle& model, const ImageSet& set) {
    require_graded(set);
    const auto pred = predict_all(model, set);
    return {set.name(), accuracy_percent(pred, set.labels()), set.size()};
}

struct UniformityDiagnostic {
    /// Mean of max softmax; 1/C means perfectly uniform predictions.
    double mean_max_softmax = 0.0;
    /// Mean blurred-image loss against the uniform target.
    double mean_bi_loss = 0.0;
    std::size_t n = 0;
};

/// Softmax statistics over the five grade logits on blurred inputs.
inline UniformityDiagnostic uniformity_diagnostic(ModelBundle& model, const ImageSet& blurred, int batch = kEvalBatch) {
    if (blurred.empty()) throw InvalidArgument("uniformity diagnostic on an empty set");
    for (int y : blurred.labels()) {
        if (y != kBlurLabel) throw InvalidArgument("uniformity diagnostic expects only label-5 records");
    }
    const LossConfig cfg;
    double max_sum = 0.0, loss_sum = 0.0;
    std::vector<std::size_t> rows;
    for (std::size_t start = 0; start < blurred.size(); start += static_cast<std::size_t>(batch)) {
        rows.clear();
        for (std::size_t i = start; i < std::min(blurred.size(), start + static_cast<std::size_t>(batch)); ++i) rows.push_back(i);
        const nn::Tensor z = model.logits(blurred.batch(rows));
        for (int n = 0; n < z.n(); ++n) {
            std::vector<double> row(z.sample(n), z.sample(n) + kNumGrades);
            const auto p = softmax(row);
            max_sum += *std::max_element(p.begin(), p.end());
            loss_sum += blurred_image_loss<double>(row, cfg);
        }
    }
    const double n = static_cast<double>(blurred.size());
    return {max_sum / n, loss_sum / n, blurred.size()};
}

struct EvalRow {
    std::string method;
    std::string domain;
    double accuracy = 0.0;
    std::optional<double> std;
    std::size_t n = 0;
};

struct Provenance {
    std::string config_hash;
    std::vector<std::uint64_t> seeds;
};

struct EvalReport {
    std::vector<EvalRow> rows;
    Provenance provenance;

    /// Arithmetic mean of the row accuracies.
    double average() const {
        if (rows.empty()) throw InvalidArgument("report has no rows");
        double s = 0.0;
        for (const auto& r : rows) s += r.accuracy;
        return s / static_cast<double>(rows.size());
    }

    void validate() const {
        for (const auto& r : rows) {
            if (!(r.accuracy >= 0.0 && r.accuracy <= 100.0)) throw InvalidArgument("accuracy outside [0,100] in row " + r.domain);
            if (r.n == 0) throw InvalidArgument("row " + r.domain + " has no samples");
        }
    }
};

/// Per-row mean and population standard deviation across seeds.
/// Rows are matched by (method, domain) in the order of the first report.
inline EvalReport aggregate_seeds(const std::vector<EvalReport>& reports) {
    if (reports.size() < 2) throw InvalidArgument("aggregate_seeds needs at least two reports");
    const auto& first = reports.front();
    for (const auto& r : reports) {
        if (r.rows.size() != first.rows.size()) throw InvalidArgument("reports have different row sets");
        for (std::size_t i = 0; i < r.rows.size(); ++i) {
            if (r.rows[i].method != first.rows[i].method || r.rows[i].domain != first.rows[i].domain) {
                throw InvalidArgument("row key mismatch: " + r.rows[i].method + "/" + r.rows[i].domain + " vs " +
                                      first.rows[i].method + "/" + first.rows[i].domain);
            }
        }
    }
    EvalReport out;
    out.provenance.config_hash = first.provenance.config_hash;
    for (const auto& r : reports) {
        out.provenance.seeds.insert(out.provenance.seeds.end(), r.provenance.seeds.begin(), r.provenance.seeds.end());
    }
    const double k = static_cast<double>(reports.size());
    for (std::size_t i = 0; i < first.rows.size(); ++i) {
        double mean = 0.0;
        for (const auto& r : reports) mean += r.rows[i].accuracy;
        mean /= k;
        double var = 0.0;
        for (const auto& r : reports) var += (r.rows[i].accuracy - mean) * (r.rows[i].accuracy - mean);
        EvalRow row = first.rows[i];
        row.accuracy = mean;
        row.std = std::sqrt(var / k);
        out.rows.push_back(std::move(row));
    }
    return out;
}

}  // namespace advblur
