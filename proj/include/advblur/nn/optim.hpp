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
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "advblur/nn/layers.hpp"

namespace advblur::nn {

enum class OptimizerKind { adam, sgd_momentum };

inline std::string to_string(OptimizerKind k) { return k == OptimizerKind::adam ? "adam" : "sgd_momentum"; }

inline OptimizerKind parse_optimizer(std::string_view s) {
    if (s == "adam") return OptimizerKind::adam;
    if (s == "sgd_momentum") return OptimizerKind::sgd_momentum;
    throw InvalidArgument("unsupported optimizer '" + std::string(s) + "' (adam|sgd_momentum)");
}

class Optimizer {
public:
    virtual ~Optimizer() = default;
    /// Applies one update from the accumulated gradients. Buffers are skipped.
    virtual void step() = 0;
};

class Adam : public Optimizer {
public:
    Adam(NamedParameters params, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {
        for (auto& [name, p] : params) {
            if (!p->trainable) continue;
            slots_.push_back({p, std::vector<float>(p->numel(), 0.0f), std::vector<float>(p->numel(), 0.0f)});
        }
    }

    void step() override {
        ++t_;
        const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
        const float b1 = static_cast<float>(b1_), b2 = static_cast<float>(b2_);
        const float step = static_cast<float>(lr_ / c1);
        const float inv_sqrt_c2 = static_cast<float>(1.0 / std::sqrt(c2));
        const float eps = static_cast<float>(eps_);
        for (auto& s : slots_) {
            float* w = s.param->value.data();
            const float* g = s.param->grad.data();
            for (std::size_t i = 0; i < s.m.size(); ++i) {
                s.m[i] = b1 * s.m[i] + (1.0f - b1) * g[i];
                s.v[i] = b2 * s.v[i] + (1.0f - b2) * g[i] * g[i];
                w[i] -= step * s.m[i] / (std::sqrt(s.v[i]) * inv_sqrt_c2 + eps);
            }
        }
    }

private:
    struct Slot {
        Parameter* param;
        std::vector<float> m, v;
    };
    double lr_, b1_, b2_, eps_;
    long t_ = 0;
    std::vector<Slot> slots_;
};

/// Heavy-ball SGD, torch convention: v = mu v + g; w -= lr v.
class SgdMomentum : public Optimizer {
public:
    SgdMomentum(NamedParameters params, double lr, double momentum = 0.9) : lr_(lr), mu_(momentum) {
        for (auto& [name, p] : params) {
            if (!p->trainable) continue;
            slots_.push_back({p, std::vector<float>(p->numel(), 0.0f)});
        }
    }

    void step() override {
        const float lr = static_cast<float>(lr_), mu = static_cast<float>(mu_);
        for (auto& s : slots_) {
            float* w = s.param->value.data();
            const float* g = s.param->grad.data();
            for (std::size_t i = 0; i < s.v.size(); ++i) {
                s.v[i] = mu * s.v[i] + g[i];
                w[i] -= lr * s.v[i];
            }
        }
    }

private:
    struct Slot {
        Parameter* param;
        std::vector<float> v;
    };
    double lr_, mu_;
    std::vector<Slot> slots_;
};

inline std::unique_ptr<Optimizer> make_optimizer(OptimizerKind kind, NamedParameters params, double lr) {
    if (!(lr > 0.0)) throw InvalidArgument("learning rate must be positive");
    if (kind == OptimizerKind::adam) return std::make_unique<Adam>(std::move(params), lr);
    return std::make_unique<SgdMomentum>(std::move(params), lr);
}

}  // namespace advblur::nn
