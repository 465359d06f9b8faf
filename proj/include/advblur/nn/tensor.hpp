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
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "advblur/error.hpp"

namespace advblur::nn {

/// Storage for everything Eigen maps. Vectorized kernels pick their code path from
/// the data address, so a fixed alignment keeps results bitwise reproducible.
using FloatBuffer = std::vector<float, Eigen::aligned_allocator<float>>;

/// Dense float32 NCHW tensor. Fully connected activations use H = W = 1.
class Tensor {
public:
    Tensor() = default;
    Tensor(int n, int c, int h, int w, float fill = 0.0f)
        : n_(n), c_(c), h_(h), w_(w), values_(static_cast<std::size_t>(n) * c * h * w, fill) {}

    int n() const { return n_; }
    int c() const { return c_; }
    int h() const { return h_; }
    int w() const { return w_; }
    std::size_t size() const { return values_.size(); }
    std::size_t sample_size() const { return static_cast<std::size_t>(c_) * h_ * w_; }
    std::size_t plane_size() const { return static_cast<std::size_t>(h_) * w_; }
    bool empty() const { return values_.empty(); }

    float* data() { return values_.data(); }
    const float* data() const { return values_.data(); }
    float* sample(int i) { return values_.data() + static_cast<std::size_t>(i) * sample_size(); }
    const float* sample(int i) const { return values_.data() + static_cast<std::size_t>(i) * sample_size(); }

    std::span<float> values() { return values_; }
    std::span<const float> values() const { return values_; }

    float& operator()(int n, int c, int h, int w) { return values_[index(n, c, h, w)]; }
    float operator()(int n, int c, int h, int w) const { return values_[index(n, c, h, w)]; }

    bool same_shape(const Tensor& o) const { return n_ == o.n_ && c_ == o.c_ && h_ == o.h_ && w_ == o.w_; }

    std::string shape_string() const {
        return "(" + std::to_string(n_) + "," + std::to_string(c_) + "," + std::to_string(h_) + "," +
               std::to_string(w_) + ")";
    }

private:
    std::size_t index(int n, int c, int h, int w) const {
        return ((static_cast<std::size_t>(n) * c_ + c) * h_ + h) * w_ + w;
    }

    int n_ = 0, c_ = 0, h_ = 0, w_ = 0;
    FloatBuffer values_;
};

/// Learnable weights (or a persistent buffer such as BatchNorm running stats,
/// marked trainable = false) with their accumulated gradient.
struct Parameter {
    std::vector<int> shape;
    FloatBuffer value;
    FloatBuffer grad;
    bool trainable = true;

    Parameter() = default;
    explicit Parameter(std::vector<int> s, float fill = 0.0f, bool learnable = true)
        : shape(std::move(s)), trainable(learnable) {
        std::size_t n = 1;
        for (int d : shape) n *= static_cast<std::size_t>(d);
        value.assign(n, fill);
        if (trainable) grad.assign(n, 0.0f);
    }

    std::size_t numel() const { return value.size(); }
    void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0f); }
};

}  // namespace advblur::nn
