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

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include <gtest/gtest.h>

#include "advblur/nn/network.hpp"
#include "advblur/nn/optim.hpp"

namespace {

using advblur::nn::Mode;
using advblur::nn::Module;
using advblur::nn::Tensor;

Tensor random_tensor(int n, int c, int h, int w, advblur::Rng& rng) {
    Tensor t(n, c, h, w);
    for (float& v : t.values()) v = static_cast<float>(advblur::normal(rng));
    return t;
}

double weighted_sum(const Tensor& y, const Tensor& r) {
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += static_cast<double>(y.data()[i]) * r.data()[i];
    return s;
}

// Projects the loss L = <module(x), r> and compares the analytic directional
// derivative along a random direction with a central difference. float32 layers
// are checked with a loose relative tolerance.
void check_module_gradients(Module& m, Tensor x, Mode mode, advblur::Rng& rng, double eps = 1e-2) {
    advblur::nn::NamedParameters params;
    m.collect("", params);
    const Tensor probe = m.forward(x, mode);
    const Tensor r = random_tensor(probe.n(), probe.c(), probe.h(), probe.w(), rng);
    for (auto& [name, p] : params) p->zero_grad();
    m.forward(x, mode);
    const Tensor dx = m.backward(r);


    auto directional = [&](advblur::nn::FloatBuffer& values, const advblur::nn::FloatBuffer& grad, const char* what) {
        std::vector<float> dir(values.size());
        for (float& v : dir) v = static_cast<float>(advblur::normal(rng));
        double analytic = 0.0;
        for (std::size_t i = 0; i < dir.size(); ++i) analytic += static_cast<double>(grad[i]) * dir[i];
        const advblur::nn::FloatBuffer keep = values;
        for (std::size_t i = 0; i < dir.size(); ++i) values[i] = keep[i] + static_cast<float>(eps) * dir[i];
        const double up = weighted_sum(m.forward(x, mode), r);
        for (std::size_t i = 0; i < dir.size(); ++i) values[i] = keep[i] - static_cast<float>(eps) * dir[i];
        const double down = weighted_sum(m.forward(x, mode), r);
        values = keep;
        const double numeric = (up - down) / (2 * eps);
        EXPECT_NEAR(analytic, numeric, 2e-2 * std::max(1.0, std::abs(numeric))) << m.kind() << " " << what;
    };
    for (auto& [name, p] : params) {
        if (p->trainable) directional(p->value, p->grad, name.c_str());
    }
    {
        std::vector<float> xv(x.values().begin(), x.values().end());
        std::vector<float> g(dx.values().begin(), dx.values().end());
        std::vector<float> dir(xv.size());
        for (float& v : dir) v = static_cast<float>(advblur::normal(rng));
        double analytic = 0.0;
        for (std::size_t i = 0; i < dir.size(); ++i) analytic += static_cast<double>(g[i]) * dir[i];
        Tensor up = x, down = x;
        for (std::size_t i = 0; i < dir.size(); ++i) {
            up.data()[i] += static_cast<float>(eps) * dir[i];
            down.data()[i] -= static_cast<float>(eps) * dir[i];
        }
        const double numeric = (weighted_sum(m.forward(up, mode), r) - weighted_sum(m.forward(down, mode), r)) / (2 * eps);
        EXPECT_NEAR(analytic, numeric, 2e-2 * std::max(1.0, std::abs(numeric))) << m.kind() << " input";
    }
}

TEST(Storage, BuffersEigenMapsAreAligned) {
    // Vectorized products choose their path from the address; alignment must not vary.
    std::vector<Tensor> keep;
    for (int i = 1; i < 40; ++i) {
        keep.emplace_back(1, i, 3, 1);
        EXPECT_EQ(reinterpret_cast<std::uintptr_t>(keep.back().data()) % EIGEN_MAX_ALIGN_BYTES, 0u);
        advblur::nn::Parameter p({i, 3});
        EXPECT_EQ(reinterpret_cast<std::uintptr_t>(p.value.data()) % EIGEN_MAX_ALIGN_BYTES, 0u);
        EXPECT_EQ(reinterpret_cast<std::uintptr_t>(p.grad.data()) % EIGEN_MAX_ALIGN_BYTES, 0u);
    }
}

TEST(Layers, ConvGradients) {
    advblur::Rng rng(1);
    for (auto [k, s, p] : {std::tuple{3, 1, 1}, std::tuple{3, 2, 1}, std::tuple{1, 1, 0}, std::tuple{1, 2, 0},
                           std::tuple{7, 2, 3}}) {
        advblur::nn::Conv2d conv(3, 4, k, s, p);
        conv.init(rng);
        check_module_gradients(conv, random_tensor(2, 3, 9, 8, rng), Mode::train, rng);
    }
}

TEST(Layers, ConvMatchesDirectSum) {
    advblur::Rng rng(2);
    advblur::nn::Conv2d conv(2, 3, 3, 2, 1);
    conv.init(rng);
    advblur::nn::NamedParameters params;
    conv.collect("", params);
    for (float& v : params[1].second->value) v = static_cast<float>(advblur::normal(rng));
    const Tensor x = random_tensor(1, 2, 7, 6, rng);
    const Tensor y = conv.forward(x, Mode::eval);
    const auto& w = params[0].second->value;
    const auto& b = params[1].second->value;
    ASSERT_EQ(y.h(), 4);
    ASSERT_EQ(y.w(), 3);
    for (int o = 0; o < 3; ++o)
        for (int oy = 0; oy < y.h(); ++oy)
            for (int ox = 0; ox < y.w(); ++ox) {
                double acc = b[static_cast<std::size_t>(o)];
                for (int c = 0; c < 2; ++c)
                    for (int ky = 0; ky < 3; ++ky)
                        for (int kx = 0; kx < 3; ++kx) {
                            const int iy = oy * 2 - 1 + ky, ix = ox * 2 - 1 + kx;
                            if (iy < 0 || iy >= 7 || ix < 0 || ix >= 6) continue;
                            acc += w[static_cast<std::size_t>(((o * 2 + c) * 3 + ky) * 3 + kx)] * x(0, c, iy, ix);
                        }
                EXPECT_NEAR(y(0, o, oy, ox), acc, 1e-5);
            }
}

TEST(Layers, BatchNormGradientsTrainAndEval) {
    advblur::Rng rng(3);
    advblur::nn::BatchNorm2d bn(3);
    advblur::nn::NamedParameters params;
    bn.collect("", params);
    for (float& v : params[0].second->value) v = static_cast<float>(1.0 + 0.3 * advblur::normal(rng));
    for (float& v : params[1].second->value) v = static_cast<float>(advblur::normal(rng));
    check_module_gradients(bn, random_tensor(4, 3, 3, 5, rng), Mode::train, rng);
    check_module_gradients(bn, random_tensor(4, 3, 3, 5, rng), Mode::eval, rng);
}

TEST(Layers, BatchNormTracksRunningStatistics) {
    advblur::Rng rng(4);
    advblur::nn::BatchNorm2d bn(1);
    Tensor x(2, 1, 1, 2);
    x.values()[0] = 1.0f;
    x.values()[1] = 3.0f;
    x.values()[2] = 5.0f;
    x.values()[3] = 7.0f;
    bn.forward(x, Mode::train);
    advblur::nn::NamedParameters params;
    bn.collect("", params);
    // mean 4, unbiased variance 20/3; momentum 0.1.
    EXPECT_NEAR(params[2].second->value[0], 0.4f, 1e-6);
    EXPECT_NEAR(params[3].second->value[0], 0.9f + 0.1f * 20.0f / 3.0f, 1e-5);
    EXPECT_FALSE(params[2].second->trainable);
}

TEST(Layers, PoolingAndLinearGradients) {
    advblur::Rng rng(5);
    advblur::nn::MaxPool2d pool(3, 2, 1);
    check_module_gradients(pool, random_tensor(2, 2, 7, 6, rng), Mode::train, rng);
    advblur::nn::GlobalAvgPool gap;
    check_module_gradients(gap, random_tensor(2, 3, 4, 5, rng), Mode::train, rng);
    advblur::nn::Linear fc(12, 5);
    fc.init(rng);
    check_module_gradients(fc, random_tensor(3, 12, 1, 1, rng), Mode::train, rng);
}

// Residual blocks stack several ReLUs, so a joint directional probe crosses kinks;
// probe individual coordinates with a small step instead and tolerate the rare
// probe that still straddles a kink.
void check_elementwise(Module& m, const Tensor& x, Mode mode, advblur::Rng& rng) {
    advblur::nn::NamedParameters params;
    m.collect("", params);
    const Tensor probe = m.forward(x, mode);
    const Tensor r = random_tensor(probe.n(), probe.c(), probe.h(), probe.w(), rng);
    for (auto& [name, p] : params) p->zero_grad();
    m.forward(x, mode);
    m.backward(r);
    const double eps = 1e-3;
    int probes = 0, mismatches = 0;
    for (auto& [name, p] : params) {
        if (!p->trainable) continue;
        for (int k = 0; k < 3; ++k) {
            const std::size_t i = advblur::uniform_index(rng, p->numel());
            const float keep = p->value[i];
            p->value[i] = keep + static_cast<float>(eps);
            const double up = weighted_sum(m.forward(x, mode), r);
            p->value[i] = keep - static_cast<float>(eps);
            const double down = weighted_sum(m.forward(x, mode), r);
            p->value[i] = keep;
            const double numeric = (up - down) / (2 * eps);
            ++probes;
            if (std::abs(p->grad[i] - numeric) > 3e-2 * std::max(1.0, std::abs(numeric))) ++mismatches;
        }
    }
    EXPECT_LE(mismatches * 10, probes) << mismatches << " of " << probes << " probes disagree";
}

TEST(Layers, BottleneckGradients) {
    advblur::Rng rng(6);
    advblur::nn::Bottleneck projected(8, 4, 2);
    projected.init(rng);
    check_elementwise(projected, random_tensor(3, 8, 6, 6, rng), Mode::train, rng);
    advblur::nn::Bottleneck identity(16, 4, 1);
    identity.init(rng);
    check_elementwise(identity, random_tensor(3, 16, 5, 5, rng), Mode::eval, rng);
}

TEST(Network, SmallCnnShapesAndGradients) {
    advblur::Rng rng(7);
    auto net = advblur::nn::make_small_cnn(5);
    net.init(rng);
    Tensor x(4, 3, 64, 64);
    for (float& v : x.values()) v = static_cast<float>(advblur::uniform01(rng));
    const Tensor logits = net.forward(x, Mode::train);
    EXPECT_EQ(logits.n(), 4);
    EXPECT_EQ(logits.c(), 5);
    EXPECT_EQ(net.penultimate().c(), 64);
    EXPECT_EQ(net.head().weight().shape, (std::vector<int>{5, 64}));

    advblur::nn::NamedParameters params = net.parameters();
    std::vector<std::string> names;
    for (auto& [n, p] : params) names.push_back(n);
    EXPECT_EQ(names.front(), "conv1.weight");
    EXPECT_EQ(names.back(), "fc.bias");

    // Gradient of <logits, r> with respect to the head bias equals the sum of r over the batch.
    const Tensor r = random_tensor(4, 5, 1, 1, rng);
    net.zero_grad();
    net.forward(x, Mode::train);
    net.backward(r);
    for (int o = 0; o < 5; ++o) {
        double s = 0.0;
        for (int n = 0; n < 4; ++n) s += r(n, o, 0, 0);
        EXPECT_NEAR(params.back().second->grad[static_cast<std::size_t>(o)], s, 1e-5);
    }
}

TEST(Network, ResNet50LayoutMatchesTorchvision) {
    auto net = advblur::nn::make_resnet50(5);
    const auto params = net.parameters();
    std::size_t trainable = 0, buffers = 0;
    for (const auto& [n, p] : params) (p->trainable ? trainable : buffers) += p->numel();
    // torchvision resnet50 with a 5-way fc: 23,518,277 parameters.
    EXPECT_EQ(trainable, 23518277u);
    EXPECT_EQ(net.feature_dim(), 2048);
    EXPECT_EQ(net.cam_layer(), "layer4");
    bool found = false;
    for (const auto& [n, p] : params) found |= n == "layer3.5.downsample.0.weight" || n == "layer2.0.downsample.1.running_var";
    EXPECT_TRUE(found);
}

TEST(Network, TapRecordsActivationAndGradient) {
    advblur::Rng rng(8);
    auto net = advblur::nn::make_small_cnn(5);
    net.init(rng);
    net.features().set_tap("relu4");
    Tensor x(1, 3, 32, 32, 0.5f);
    const Tensor logits = net.forward(x, Mode::eval);
    Tensor onehot(1, 5, 1, 1);
    onehot(0, 2, 0, 0) = 1.0f;
    net.backward(onehot);
    EXPECT_EQ(net.features().tap_activation().c(), 64);
    EXPECT_EQ(net.features().tap_activation().h(), 4);
    EXPECT_TRUE(net.features().tap_gradient().same_shape(net.features().tap_activation()));
    EXPECT_THROW(net.features().set_tap("conv9"), advblur::InvalidArgument);
}

TEST(Optim, AdamFirstStepMovesByLearningRate) {
    advblur::nn::Parameter p({3}, 1.0f);
    p.grad = {0.5f, -2.0f, 0.0f};
    advblur::nn::Adam adam({{"p", &p}}, 0.01);
    adam.step();
    EXPECT_NEAR(p.value[0], 0.99f, 1e-6);
    EXPECT_NEAR(p.value[1], 1.01f, 1e-6);
    EXPECT_EQ(p.value[2], 1.0f);
}

TEST(Optim, SgdMomentumAccumulatesVelocity) {
    advblur::nn::Parameter p({1}, 0.0f);
    p.grad = {1.0f};
    advblur::nn::SgdMomentum sgd({{"p", &p}}, 0.1, 0.9);
    sgd.step();
    sgd.step();
    EXPECT_NEAR(p.value[0], -0.1f - 0.19f, 1e-6);
}

TEST(Optim, SkipsBuffers) {
    advblur::nn::Parameter buffer({2}, 3.0f, false);
    advblur::nn::Adam adam({{"b", &buffer}}, 0.1);
    adam.step();
    EXPECT_EQ(buffer.value, (advblur::nn::FloatBuffer{3.0f, 3.0f}));
    EXPECT_THROW(advblur::nn::make_optimizer(advblur::nn::OptimizerKind::adam, {}, 0.0), advblur::InvalidArgument);
}

}  // namespace
