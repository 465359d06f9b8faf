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
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "advblur/config.hpp"
#include "advblur/dataset.hpp"
#include "advblur/evaluator.hpp"
#include "advblur/loss.hpp"
#include "advblur/model.hpp"
#include "advblur/nn/optim.hpp"
#include "advblur/splits.hpp"

namespace advblur {

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    /// Mean per-sample loss of each branch; NaN when the branch saw no sample.
    double oi_mean = 0.0;
    double bi_mean = 0.0;
    std::size_t oi_count = 0;
    std::size_t bi_count = 0;
    std::size_t bi_batches = 0;
    double val_accuracy = 0.0;
    double wall_seconds = 0.0;
};

inline nlohmann::json to_json(const EpochRecord& e) {
    auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
    return {{"epoch", e.epoch},         {"train_loss", e.train_loss},     {"oi_mean", num(e.oi_mean)},
            {"bi_mean", num(e.bi_mean)}, {"oi_count", e.oi_count},         {"bi_count", e.bi_count},
            {"bi_batches", e.bi_batches}, {"val_accuracy", e.val_accuracy}, {"wall_seconds", e.wall_seconds}};
}

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    int best_epoch = -1;
    double best_val_accuracy = -1.0;
};

struct TrainOptions {
    /// JSON-lines log, one record per completed epoch; empty disables it.
    std::filesystem::path history_path;
    std::function<void(const EpochRecord&)> on_epoch;
    int threads = 0;
};

struct TrainResult {
    ModelBundle model;
    TrainHistory history;
};

namespace trainer_detail {

inline void check_inputs(const TrainConfig& cfg, const ImageSet& train, const ImageSet& val) {
    cfg.validate();
    if (train.empty()) throw InvalidArgument("training split is empty");
    if (val.empty()) throw InvalidArgument("validation split is empty");
    if (train.image_size() != cfg.image_size || val.image_size() != cfg.image_size) {
        throw InvalidArgument("image sets were decoded at a size other than train.image_size");
    }
    const auto blurred = static_cast<std::size_t>(std::count(train.labels().begin(), train.labels().end(), kBlurLabel));
    if (!cfg.blur && blurred > 0) {
        throw InvalidArgument("blur is disabled but the training split contains " + std::to_string(blurred) +
                              " label-5 records");
    }
    if (cfg.blur && blurred == 0) throw InvalidArgument("blur is enabled but the training split has no label-5 records");
    for (int y : val.labels()) {
        if (y < 0 || y >= kNumGrades) throw InvalidArgument("validation split must contain grades 0-4 only");
    }
}

}  // namespace trainer_detail

/// Mini-batch training with the configured loss. Blurred and original samples
/// share one shuffled stream; the returned model holds the weights of the epoch
/// with the best validation accuracy (earliest on ties). Fully determined by
/// (cfg, seed, data) on a given platform.
inline TrainResult train(const TrainConfig& cfg, const ImageSet& train_set, const ImageSet& val_set, std::uint64_t seed,
                         const TrainOptions& opts = {}) {
    trainer_detail::check_inputs(cfg, train_set, val_set);
    ModelBundle bundle = build_model(cfg, seed);
    nn::Network& net = bundle.network();
    auto params = net.parameters();
    auto optimizer = nn::make_optimizer(cfg.optimizer, params, cfg.learning_rate);
    const LossConfig loss_cfg = cfg.effective_loss();
    const int width = cfg.head_width();

    std::ofstream log;
    if (!opts.history_path.empty()) {
        if (opts.history_path.has_parent_path()) std::filesystem::create_directories(opts.history_path.parent_path());
        log.open(opts.history_path, std::ios::trunc);
        if (!log) throw Error("cannot write history log " + opts.history_path.string());
    }

    TrainHistory history;
    std::vector<nn::FloatBuffer> best;
    std::vector<std::size_t> order(train_set.size());
    std::vector<std::size_t> rows;
    std::vector<int> labels;
    std::vector<float> grad;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng shuffle_rng(derive_seed(seed, 0xe90c0000ULL + static_cast<std::uint64_t>(epoch)));
        shuffle(order, shuffle_rng);

        EpochRecord rec;
        rec.epoch = epoch;
        double total = 0.0, oi_sum = 0.0, bi_sum = 0.0;
        int batch_index = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size), ++batch_index) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            rows.assign(order.begin() + static_cast<std::ptrdiff_t>(start), order.begin() + static_cast<std::ptrdiff_t>(end));
            labels.clear();
            for (std::size_t r : rows) labels.push_back(train_set.labels()[r]);

            const nn::Tensor logits = net.forward(train_set.batch(rows), nn::Mode::train);
            if (logits.c() != width) throw Error("model emitted " + std::to_string(logits.c()) + " logits, expected " + std::to_string(width));
            const auto out = combined_loss<float>(logits.values(), labels, loss_cfg, &grad);
            if (!std::isfinite(out.total)) throw NonFiniteLoss(epoch, batch_index);

            bool saw_bi = false;
            for (std::size_t i = 0; i < rows.size(); ++i) {
                const bool bi = out.branch_tags[i] == Branch::BI || labels[i] == kBlurLabel;
                (bi ? bi_sum : oi_sum) += out.per_sample[i];
                ++(bi ? rec.bi_count : rec.oi_count);
                saw_bi |= bi;
                total += out.per_sample[i];
            }
            rec.bi_batches += saw_bi;

            net.zero_grad();
            nn::Tensor g(logits.n(), logits.c(), 1, 1);
            std::copy(grad.begin(), grad.end(), g.data());
            net.backward(g);
            optimizer->step();
        }
        rec.train_loss = total / static_cast<double>(order.size());
        rec.oi_mean = rec.oi_count ? oi_sum / static_cast<double>(rec.oi_count) : std::nan("");
        rec.bi_mean = rec.bi_count ? bi_sum / static_cast<double>(rec.bi_count) : std::nan("");
        rec.val_accuracy = evaluate(bundle, val_set).accuracy;
        rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        if (rec.val_accuracy > history.best_val_accuracy) {
            history.best_val_accuracy = rec.val_accuracy;
            history.best_epoch = epoch;
            best.clear();
            for (auto& [name, p] : params) best.push_back(p->value);
        }
        history.epochs.push_back(rec);
        if (log) log << to_json(rec).dump() << '\n' << std::flush;
        if (opts.on_epoch) opts.on_epoch(rec);
    }

    for (std::size_t i = 0; i < params.size(); ++i) params[i].second->value = best[i];
    bundle.metadata().epoch = history.best_epoch;
    return {std::move(bundle), std::move(history)};
}

/// Decodes the split at cfg.image_size and trains. Validation uses originals only.
inline TrainResult train(const TrainConfig& cfg, const Splits& splits, std::uint64_t seed, const TrainOptions& opts = {}) {
    const ImageSet train_set("train", splits.train, cfg.image_size, opts.threads);
    const ImageSet val_set("val", splits.val, cfg.image_size, opts.threads);
    return train(cfg, train_set, val_set, seed, opts);
}

}  // namespace advblur
