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
#include <memory>
#include <string>
#include <vector>

#include "advblur/nn/layers.hpp"

namespace advblur::nn {

/// Feature extractor ending in global average pooling, plus a linear logit head.
/// Inputs are images in [0,1]; per-channel normalization happens inside forward().
class Network {
public:
    Network(std::unique_ptr<Sequential> features, int feature_dim, int num_outputs, std::string cam_layer)
        : features_(std::move(features)), head_(std::make_unique<Linear>(feature_dim, num_outputs)),
          cam_layer_(std::move(cam_layer)) {
        if (features_->child(cam_layer_) == nullptr) throw InvalidArgument("layer not found: " + cam_layer_);
    }

    Network(const Network&) = delete;
    Network& operator=(const Network&) = delete;
    Network(Network&&) = default;
    Network& operator=(Network&&) = default;

    void init(Rng& rng) {
        features_->init(rng);
        head_->init(rng);
    }

    void set_input_normalization(std::array<float, 3> mean, std::array<float, 3> stddev) {
        mean_ = mean;
        std_ = stddev;
    }
    std::array<float, 3> input_mean() const { return mean_; }
    std::array<float, 3> input_std() const { return std_; }

    /// images: (N, 3, H, W) in [0,1]. Returns (N, num_outputs, 1, 1) logits.
    Tensor forward(const Tensor& images, Mode mode) {
        if (images.c() != 3) throw InvalidArgument("network expects 3-channel input, got " + images.shape_string());
        Tensor x = images;
        const std::size_t plane = x.plane_size();
        for (int n = 0; n < x.n(); ++n)
            for (int c = 0; c < 3; ++c) {
                float* p = x.sample(n) + static_cast<std::size_t>(c) * plane;
                const float m = mean_[static_cast<std::size_t>(c)];
                const float s = 1.0f / std_[static_cast<std::size_t>(c)];
                for (std::size_t i = 0; i < plane; ++i) p[i] = (p[i] - m) * s;
            }
        features_out_ = features_->forward(x, mode);
        Tensor logits = head_->forward(features_out_, mode);
        if (logits.c() != head_->out_features()) throw Error("logit width does not match head width");
        return logits;
    }

    /// Backpropagates d loss / d logits through head and features.
    void backward(const Tensor& grad_logits) {
        const Tensor g = head_->backward(grad_logits);
        features_->backward(g);
    }

    /// Penultimate features of the last forward call: (N, feature_dim, 1, 1).
    const Tensor& penultimate() const { return features_out_; }

    NamedParameters parameters() {
        NamedParameters out;
        features_->collect("", out);
        head_->collect(head_name_, out);
        return out;
    }

    void zero_grad() {
        for (auto& [name, p] : parameters()) p->zero_grad();
    }

    Sequential& features() { return *features_; }
    Linear& head() { return *head_; }
    const Linear& head() const { return *head_; }
    int num_outputs() const { return head_->out_features(); }
    int feature_dim() const { return head_->in_features(); }
    const std::string& cam_layer() const { return cam_layer_; }

    /// Parameter prefix of the head ("fc", matching the torchvision ResNet naming).
    const std::string& head_name() const { return head_name_; }

private:
    std::unique_ptr<Sequential> features_;
    std::unique_ptr<Linear> head_;
    std::string cam_layer_;
    std::string head_name_ = "fc";
    std::array<float, 3> mean_{0.0f, 0.0f, 0.0f};
    std::array<float, 3> std_{1.0f, 1.0f, 1.0f};
    Tensor features_out_;
};

/// Four 3x3 conv blocks (16-32-64-64, max-pooling after the first three), global
/// average pooling, linear head: five weight layers. "relu4" is the last
/// convolutional activation.
inline Network make_small_cnn(int num_outputs) {
    auto f = std::make_unique<Sequential>();
    f->emplace<Conv2d>("conv1", 3, 16, 3, 1, 1).set_input_grad(false);
    f->emplace<ReLU>("relu1");
    f->emplace<MaxPool2d>("pool1", 2, 2);
    f->emplace<Conv2d>("conv2", 16, 32, 3, 1, 1);
    f->emplace<ReLU>("relu2");
    f->emplace<MaxPool2d>("pool2", 2, 2);
    f->emplace<Conv2d>("conv3", 32, 64, 3, 1, 1);
    f->emplace<ReLU>("relu3");
    f->emplace<MaxPool2d>("pool3", 2, 2);
    f->emplace<Conv2d>("conv4", 64, 64, 3, 1, 1);
    f->emplace<ReLU>("relu4");
    f->emplace<GlobalAvgPool>("avgpool");
    return Network(std::move(f), 64, num_outputs, "relu4");
}

/// ResNet-50 (bottleneck blocks 3-4-6-3) with parameter names matching the
/// torchvision state_dict, so converted ImageNet weights load by name.
/// Grad-CAM target: "layer4".
inline Network make_resnet50(int num_outputs) {
    auto f = std::make_unique<Sequential>();
    f->emplace<Conv2d>("conv1", 3, 64, 7, 2, 3, false).set_input_grad(false);
    f->emplace<BatchNorm2d>("bn1", 64);
    f->emplace<ReLU>("relu");
    f->emplace<MaxPool2d>("maxpool", 3, 2, 1);
    int in = 64;
    const std::array<int, 4> blocks{3, 4, 6, 3};
    const std::array<int, 4> widths{64, 128, 256, 512};
    for (std::size_t stage = 0; stage < blocks.size(); ++stage) {
        auto layer = std::make_unique<Sequential>();
        for (int b = 0; b < blocks[stage]; ++b) {
            const int stride = (b == 0 && stage > 0) ? 2 : 1;
            layer->emplace<Bottleneck>(std::to_string(b), in, widths[stage], stride);
            in = widths[stage] * Bottleneck::kExpansion;
        }
        f->add("layer" + std::to_string(stage + 1), std::move(layer));
    }
    f->emplace<GlobalAvgPool>("avgpool");
    Network net(std::move(f), in, num_outputs, "layer4");
    net.set_input_normalization({0.485f, 0.456f, 0.406f}, {0.229f, 0.224f, 0.225f});
    return net;
}

}  // namespace advblur::nn
