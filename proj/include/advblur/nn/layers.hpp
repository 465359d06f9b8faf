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

// Layers with explicit forward/backward passes. Each layer caches what its
// backward pass needs from the most recent forward call, so a module instance
// must see forward() and backward() in strict alternation. Parameter gradients
// accumulate until zeroed.

#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "advblur/error.hpp"
#include "advblur/nn/tensor.hpp"
#include "advblur/rng.hpp"

namespace advblur::nn {

enum class Mode { train, eval };

using NamedParameters = std::vector<std::pair<std::string, Parameter*>>;

class Module {
public:
    virtual ~Module() = default;
    virtual Tensor forward(const Tensor& x, Mode mode) = 0;
    virtual Tensor backward(const Tensor& grad_out) = 0;
    virtual void collect(const std::string& /*prefix*/, NamedParameters& /*out*/) {}
    virtual void init(Rng& /*rng*/) {}
    virtual std::string kind() const = 0;
};

namespace detail {

using MatRM = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatRM>;
using CMapRM = Eigen::Map<const MatRM>;

inline std::string join_name(const std::string& prefix, std::string_view name) {
    return prefix.empty() ? std::string(name) : prefix + "." + std::string(name);
}

}  // namespace detail

class Conv2d : public Module {
public:
    Conv2d(int in_channels, int out_channels, int kernel, int stride = 1, int padding = 0, bool bias = true)
        : in_(in_channels), out_(out_channels), k_(kernel), stride_(stride), pad_(padding), has_bias_(bias),
          weight_({out_channels, in_channels, kernel, kernel}) {
        if (bias) bias_ = Parameter({out_channels});
    }

    /// The first layer of a network never needs d loss / d input.
    void set_input_grad(bool enabled) { input_grad_ = enabled; }

    int out_channels() const { return out_; }

    void init(Rng& rng) override {
        const double stddev = std::sqrt(2.0 / (static_cast<double>(in_) * k_ * k_));
        for (float& v : weight_.value) v = static_cast<float>(normal(rng, 0.0, stddev));
        std::fill(bias_.value.begin(), bias_.value.end(), 0.0f);
    }

    void collect(const std::string& prefix, NamedParameters& out) override {
        out.emplace_back(detail::join_name(prefix, "weight"), &weight_);
        if (has_bias_) out.emplace_back(detail::join_name(prefix, "bias"), &bias_);
    }

    Tensor forward(const Tensor& x, Mode /*mode*/) override {
        if (x.c() != in_) throw InvalidArgument("Conv2d: expected " + std::to_string(in_) + " channels, got " + x.shape_string());
        input_ = x;
        const int ho = out_size(x.h());
        const int wo = out_size(x.w());
        if (ho <= 0 || wo <= 0) throw InvalidArgument("Conv2d: input " + x.shape_string() + " too small");
        Tensor y(x.n(), out_, ho, wo);
        const int kdim = in_ * k_ * k_;
        const int pdim = ho * wo;
        detail::CMapRM w(weight_.value.data(), out_, kdim);
        for (int n = 0; n < x.n(); ++n) {
            detail::MapRM out(y.sample(n), out_, pdim);
            out.noalias() = w * columns(x, n);
            if (has_bias_) {
                for (int c = 0; c < out_; ++c) out.row(c).array() += bias_.value[static_cast<std::size_t>(c)];
            }
        }
        return y;
    }

    Tensor backward(const Tensor& grad_out) override {
        const Tensor& x = input_;
        const int ho = grad_out.h();
        const int wo = grad_out.w();
        const int kdim = in_ * k_ * k_;
        const int pdim = ho * wo;
        detail::CMapRM w(weight_.value.data(), out_, kdim);
        detail::MapRM dw(weight_.grad.data(), out_, kdim);
        Tensor dx = input_grad_ ? Tensor(x.n(), x.c(), x.h(), x.w()) : Tensor();
        detail::MatRM dcol;
        for (int n = 0; n < x.n(); ++n) {
            detail::CMapRM dy(grad_out.sample(n), out_, pdim);
            dw.noalias() += dy * columns(x, n).transpose();
            if (has_bias_) {
                for (int c = 0; c < out_; ++c) bias_.grad[static_cast<std::size_t>(c)] += dy.row(c).sum();
            }
            if (input_grad_) {
                if (pointwise()) {
                    detail::MapRM dxs(dx.sample(n), in_, pdim);
                    dxs.noalias() = w.transpose() * dy;
                } else {
                    dcol.noalias() = w.transpose() * dy;
                    col2im(dcol, x, ho, wo, dx.sample(n));
                }
            }
        }
        return dx;
    }

    std::string kind() const override { return "Conv2d"; }

private:
    bool pointwise() const { return k_ == 1 && stride_ == 1 && pad_ == 0; }
    int out_size(int in) const { return (in + 2 * pad_ - k_) / stride_ + 1; }

    /// im2col view of sample n: (in * k * k) x (ho * wo).
    detail::CMapRM columns(const Tensor& x, int n) {
        const int ho = out_size(x.h());
        const int wo = out_size(x.w());
        if (pointwise()) return detail::CMapRM(x.sample(n), in_, ho * wo);
        const int kdim = in_ * k_ * k_;
        col_.resize(static_cast<std::size_t>(kdim) * ho * wo);
        const float* src = x.sample(n);
        const int h = x.h();
        const int wd = x.w();
        float* dst = col_.data();
        for (int c = 0; c < in_; ++c) {
            const float* plane = src + static_cast<std::size_t>(c) * h * wd;
            for (int ky = 0; ky < k_; ++ky) {
                for (int kx = 0; kx < k_; ++kx) {
                    for (int oy = 0; oy < ho; ++oy) {
                        const int iy = oy * stride_ - pad_ + ky;
                        if (iy < 0 || iy >= h) {
                            std::fill(dst, dst + wo, 0.0f);
                            dst += wo;
                            continue;
                        }
                        const float* line = plane + static_cast<std::size_t>(iy) * wd;
                        for (int ox = 0; ox < wo; ++ox) {
                            const int ix = ox * stride_ - pad_ + kx;
                            *dst++ = (ix >= 0 && ix < wd) ? line[ix] : 0.0f;
                        }
                    }
                }
            }
        }
        return detail::CMapRM(col_.data(), kdim, ho * wo);
    }

    void col2im(const detail::MatRM& dcol, const Tensor& x, int ho, int wo, float* dx) const {
        const int h = x.h();
        const int wd = x.w();
        const float* src = dcol.data();
        for (int c = 0; c < in_; ++c) {
            float* plane = dx + static_cast<std::size_t>(c) * h * wd;
            for (int ky = 0; ky < k_; ++ky) {
                for (int kx = 0; kx < k_; ++kx) {
                    for (int oy = 0; oy < ho; ++oy) {
                        const int iy = oy * stride_ - pad_ + ky;
                        if (iy < 0 || iy >= h) {
                            src += wo;
                            continue;
                        }
                        float* line = plane + static_cast<std::size_t>(iy) * wd;
                        for (int ox = 0; ox < wo; ++ox, ++src) {
                            const int ix = ox * stride_ - pad_ + kx;
                            if (ix >= 0 && ix < wd) line[ix] += *src;
                        }
                    }
                }
            }
        }
    }

    int in_, out_, k_, stride_, pad_;
    bool has_bias_;
    bool input_grad_ = true;
    Parameter weight_;
    Parameter bias_;
    Tensor input_;
    FloatBuffer col_;
};

class BatchNorm2d : public Module {
public:
    explicit BatchNorm2d(int channels, float momentum = 0.1f, float eps = 1e-5f)
        : c_(channels), momentum_(momentum), eps_(eps), gamma_({channels}, 1.0f), beta_({channels}, 0.0f),
          running_mean_({channels}, 0.0f, false), running_var_({channels}, 1.0f, false) {}

    void init(Rng& /*rng*/) override {
        std::fill(gamma_.value.begin(), gamma_.value.end(), 1.0f);
        std::fill(beta_.value.begin(), beta_.value.end(), 0.0f);
        std::fill(running_mean_.value.begin(), running_mean_.value.end(), 0.0f);
        std::fill(running_var_.value.begin(), running_var_.value.end(), 1.0f);
    }

    void collect(const std::string& prefix, NamedParameters& out) override {
        out.emplace_back(detail::join_name(prefix, "weight"), &gamma_);
        out.emplace_back(detail::join_name(prefix, "bias"), &beta_);
        out.emplace_back(detail::join_name(prefix, "running_mean"), &running_mean_);
        out.emplace_back(detail::join_name(prefix, "running_var"), &running_var_);
    }

    Tensor forward(const Tensor& x, Mode mode) override {
        if (x.c() != c_) throw InvalidArgument("BatchNorm2d: channel mismatch");
        mode_ = mode;
        const std::size_t plane = x.plane_size();
        const double count = static_cast<double>(x.n()) * static_cast<double>(plane);
        xhat_ = Tensor(x.n(), x.c(), x.h(), x.w());
        inv_std_.assign(static_cast<std::size_t>(c_), 0.0f);
        Tensor y(x.n(), x.c(), x.h(), x.w());
        for (int c = 0; c < c_; ++c) {
            const auto ci = static_cast<std::size_t>(c);
            float mean = 0.0f;
            float var = 0.0f;
            if (mode == Mode::train) {
                double s = 0.0, s2 = 0.0;
                for (int n = 0; n < x.n(); ++n) {
                    const float* p = x.sample(n) + ci * plane;
                    for (std::size_t i = 0; i < plane; ++i) s += p[i];
                }
                const double m = s / count;
                for (int n = 0; n < x.n(); ++n) {
                    const float* p = x.sample(n) + ci * plane;
                    for (std::size_t i = 0; i < plane; ++i) s2 += (p[i] - m) * (p[i] - m);
                }
                mean = static_cast<float>(m);
                var = static_cast<float>(s2 / count);
                const float unbiased = count > 1 ? static_cast<float>(s2 / (count - 1)) : var;
                running_mean_.value[ci] = (1 - momentum_) * running_mean_.value[ci] + momentum_ * mean;
                running_var_.value[ci] = (1 - momentum_) * running_var_.value[ci] + momentum_ * unbiased;
            } else {
                mean = running_mean_.value[ci];
                var = running_var_.value[ci];
            }
            const float inv = 1.0f / std::sqrt(var + eps_);
            inv_std_[ci] = inv;
            const float g = gamma_.value[ci];
            const float b = beta_.value[ci];
            for (int n = 0; n < x.n(); ++n) {
                const float* p = x.sample(n) + ci * plane;
                float* xh = xhat_.sample(n) + ci * plane;
                float* q = y.sample(n) + ci * plane;
                for (std::size_t i = 0; i < plane; ++i) {
                    xh[i] = (p[i] - mean) * inv;
                    q[i] = g * xh[i] + b;
                }
            }
        }
        return y;
    }

    Tensor backward(const Tensor& dy) override {
        const std::size_t plane = dy.plane_size();
        const double count = static_cast<double>(dy.n()) * static_cast<double>(plane);
        Tensor dx(dy.n(), dy.c(), dy.h(), dy.w());
        for (int c = 0; c < c_; ++c) {
            const auto ci = static_cast<std::size_t>(c);
            double sum_dy = 0.0, sum_dy_xhat = 0.0;
            for (int n = 0; n < dy.n(); ++n) {
                const float* g = dy.sample(n) + ci * plane;
                const float* xh = xhat_.sample(n) + ci * plane;
                for (std::size_t i = 0; i < plane; ++i) {
                    sum_dy += g[i];
                    sum_dy_xhat += static_cast<double>(g[i]) * xh[i];
                }
            }
            gamma_.grad[ci] += static_cast<float>(sum_dy_xhat);
            beta_.grad[ci] += static_cast<float>(sum_dy);
            const float scale = gamma_.value[ci] * inv_std_[ci];
            for (int n = 0; n < dy.n(); ++n) {
                const float* g = dy.sample(n) + ci * plane;
                const float* xh = xhat_.sample(n) + ci * plane;
                float* d = dx.sample(n) + ci * plane;
                if (mode_ == Mode::train) {
                    const auto mean_dy = static_cast<float>(sum_dy / count);
                    const auto mean_dy_xhat = static_cast<float>(sum_dy_xhat / count);
                    for (std::size_t i = 0; i < plane; ++i) d[i] = scale * (g[i] - mean_dy - xh[i] * mean_dy_xhat);
                } else {
                    for (std::size_t i = 0; i < plane; ++i) d[i] = scale * g[i];
                }
            }
        }
        return dx;
    }

    std::string kind() const override { return "BatchNorm2d"; }

private:
    int c_;
    float momentum_, eps_;
    Parameter gamma_, beta_, running_mean_, running_var_;
    Mode mode_ = Mode::train;
    Tensor xhat_;
    std::vector<float> inv_std_;
};

class ReLU : public Module {
public:
    Tensor forward(const Tensor& x, Mode /*mode*/) override {
        Tensor y = x;
        for (float& v : y.values()) v = v > 0.0f ? v : 0.0f;
        output_ = y;
        return y;
    }

    Tensor backward(const Tensor& dy) override {
        Tensor dx = dy;
        auto out = output_.values();
        auto d = dx.values();
        for (std::size_t i = 0; i < d.size(); ++i)
            if (out[i] <= 0.0f) d[i] = 0.0f;
        return dx;
    }

    std::string kind() const override { return "ReLU"; }

private:
    Tensor output_;
};

class MaxPool2d : public Module {
public:
    MaxPool2d(int kernel, int stride, int padding = 0) : k_(kernel), stride_(stride), pad_(padding) {}

    Tensor forward(const Tensor& x, Mode /*mode*/) override {
        in_shape_ = Tensor(0, x.c(), x.h(), x.w());
        in_n_ = x.n();
        const int ho = (x.h() + 2 * pad_ - k_) / stride_ + 1;
        const int wo = (x.w() + 2 * pad_ - k_) / stride_ + 1;
        Tensor y(x.n(), x.c(), ho, wo);
        argmax_.assign(y.size(), 0);
        std::size_t o = 0;
        for (int n = 0; n < x.n(); ++n) {
            for (int c = 0; c < x.c(); ++c) {
                const std::size_t base = (static_cast<std::size_t>(n) * x.c() + c) * x.plane_size();
                const float* p = x.data() + base;
                for (int oy = 0; oy < ho; ++oy) {
                    for (int ox = 0; ox < wo; ++ox, ++o) {
                        float best = -std::numeric_limits<float>::infinity();
                        std::size_t best_i = base;
                        for (int ky = 0; ky < k_; ++ky) {
                            const int iy = oy * stride_ - pad_ + ky;
                            if (iy < 0 || iy >= x.h()) continue;
                            for (int kx = 0; kx < k_; ++kx) {
                                const int ix = ox * stride_ - pad_ + kx;
                                if (ix < 0 || ix >= x.w()) continue;
                                const std::size_t i = static_cast<std::size_t>(iy) * x.w() + ix;
                                if (p[i] > best) {
                                    best = p[i];
                                    best_i = base + i;
                                }
                            }
                        }
                        y.data()[o] = best;
                        argmax_[o] = best_i;
                    }
                }
            }
        }
        return y;
    }

    Tensor backward(const Tensor& dy) override {
        Tensor dx(in_n_, in_shape_.c(), in_shape_.h(), in_shape_.w());
        for (std::size_t o = 0; o < dy.size(); ++o) dx.data()[argmax_[o]] += dy.data()[o];
        return dx;
    }

    std::string kind() const override { return "MaxPool2d"; }

private:
    int k_, stride_, pad_;
    Tensor in_shape_;
    int in_n_ = 0;
    std::vector<std::size_t> argmax_;
};

/// (N, C, H, W) -> (N, C, 1, 1)
class GlobalAvgPool : public Module {
public:
    Tensor forward(const Tensor& x, Mode /*mode*/) override {
        h_ = x.h();
        w_ = x.w();
        Tensor y(x.n(), x.c(), 1, 1);
        const std::size_t plane = x.plane_size();
        for (int n = 0; n < x.n(); ++n)
            for (int c = 0; c < x.c(); ++c) {
                const float* p = x.sample(n) + static_cast<std::size_t>(c) * plane;
                double s = 0.0;
                for (std::size_t i = 0; i < plane; ++i) s += p[i];
                y(n, c, 0, 0) = static_cast<float>(s / static_cast<double>(plane));
            }
        return y;
    }

    Tensor backward(const Tensor& dy) override {
        Tensor dx(dy.n(), dy.c(), h_, w_);
        const std::size_t plane = dx.plane_size();
        const float scale = 1.0f / static_cast<float>(plane);
        for (int n = 0; n < dy.n(); ++n)
            for (int c = 0; c < dy.c(); ++c) {
                float* p = dx.sample(n) + static_cast<std::size_t>(c) * plane;
                std::fill(p, p + plane, dy(n, c, 0, 0) * scale);
            }
        return dx;
    }

    std::string kind() const override { return "GlobalAvgPool"; }

private:
    int h_ = 0, w_ = 0;
};

/// y = x W^T + b with W of shape (out, in); input samples are flattened.
class Linear : public Module {
public:
    Linear(int in_features, int out_features)
        : in_(in_features), out_(out_features), weight_({out_features, in_features}), bias_({out_features}) {}

    int in_features() const { return in_; }
    int out_features() const { return out_; }
    const Parameter& weight() const { return weight_; }

    void init(Rng& rng) override {
        const double bound = 1.0 / std::sqrt(static_cast<double>(in_));
        for (float& v : weight_.value) v = static_cast<float>(uniform(rng, -bound, bound));
        for (float& v : bias_.value) v = static_cast<float>(uniform(rng, -bound, bound));
    }

    void collect(const std::string& prefix, NamedParameters& out) override {
        out.emplace_back(detail::join_name(prefix, "weight"), &weight_);
        out.emplace_back(detail::join_name(prefix, "bias"), &bias_);
    }

    Tensor forward(const Tensor& x, Mode /*mode*/) override {
        if (x.sample_size() != static_cast<std::size_t>(in_)) {
            throw InvalidArgument("Linear: expected " + std::to_string(in_) + " features, got " + x.shape_string());
        }
        input_ = x;
        Tensor y(x.n(), out_, 1, 1);
        detail::CMapRM xm(x.data(), x.n(), in_);
        detail::CMapRM w(weight_.value.data(), out_, in_);
        detail::MapRM ym(y.data(), x.n(), out_);
        ym.noalias() = xm * w.transpose();
        for (int n = 0; n < x.n(); ++n)
            for (int o = 0; o < out_; ++o) ym(n, o) += bias_.value[static_cast<std::size_t>(o)];
        return y;
    }

    Tensor backward(const Tensor& dy) override {
        detail::CMapRM xm(input_.data(), input_.n(), in_);
        detail::CMapRM g(dy.data(), dy.n(), out_);
        detail::CMapRM w(weight_.value.data(), out_, in_);
        detail::MapRM dw(weight_.grad.data(), out_, in_);
        dw.noalias() += g.transpose() * xm;
        for (int n = 0; n < dy.n(); ++n)
            for (int o = 0; o < out_; ++o) bias_.grad[static_cast<std::size_t>(o)] += g(n, o);
        Tensor dx(input_.n(), input_.c(), input_.h(), input_.w());
        detail::MapRM dxm(dx.data(), input_.n(), in_);
        dxm.noalias() = g * w;
        return dx;
    }

    std::string kind() const override { return "Linear"; }

private:
    int in_, out_;
    Parameter weight_, bias_;
    Tensor input_;
};

/// Ordered named children. Optionally records the output of one child and the
/// gradient arriving at it (the hook Grad-CAM reads).
class Sequential : public Module {
public:
    Sequential& add(std::string name, std::unique_ptr<Module> m) {
        children_.emplace_back(std::move(name), std::move(m));
        return *this;
    }

    template <typename M, typename... Args>
    M& emplace(std::string name, Args&&... args) {
        auto m = std::make_unique<M>(std::forward<Args>(args)...);
        M& ref = *m;
        add(std::move(name), std::move(m));
        return ref;
    }

    Module* child(std::string_view name) const {
        for (const auto& [n, m] : children_)
            if (n == name) return m.get();
        return nullptr;
    }

    const std::vector<std::pair<std::string, std::unique_ptr<Module>>>& children() const { return children_; }

    /// Empty name disables the hook.
    void set_tap(std::string name) {
        if (!name.empty() && child(name) == nullptr) throw InvalidArgument("layer not found: " + name);
        tap_ = std::move(name);
        tap_activation_ = Tensor();
        tap_gradient_ = Tensor();
    }
    const std::string& tap() const { return tap_; }
    const Tensor& tap_activation() const { return tap_activation_; }
    const Tensor& tap_gradient() const { return tap_gradient_; }

    Tensor forward(const Tensor& x, Mode mode) override {
        Tensor h = x;
        for (auto& [name, m] : children_) {
            h = m->forward(h, mode);
            if (!tap_.empty() && name == tap_) tap_activation_ = h;
        }
        return h;
    }

    Tensor backward(const Tensor& grad_out) override {
        Tensor g = grad_out;
        for (auto it = children_.rbegin(); it != children_.rend(); ++it) {
            if (!tap_.empty() && it->first == tap_) tap_gradient_ = g;
            g = it->second->backward(g);
        }
        return g;
    }

    void collect(const std::string& prefix, NamedParameters& out) override {
        for (auto& [name, m] : children_) m->collect(detail::join_name(prefix, name), out);
    }

    void init(Rng& rng) override {
        for (auto& [name, m] : children_) m->init(rng);
    }

    std::string kind() const override { return "Sequential"; }

private:
    std::vector<std::pair<std::string, std::unique_ptr<Module>>> children_;
    std::string tap_;
    Tensor tap_activation_;
    Tensor tap_gradient_;
};

/// ResNet bottleneck: 1x1 -> 3x3(stride) -> 1x1 (x4 expansion) with identity or projected shortcut.
class Bottleneck : public Module {
public:
    static constexpr int kExpansion = 4;

    Bottleneck(int in_channels, int width, int stride)
        : conv1_(in_channels, width, 1, 1, 0, false), bn1_(width), conv2_(width, width, 3, stride, 1, false),
          bn2_(width), conv3_(width, width * kExpansion, 1, 1, 0, false), bn3_(width * kExpansion) {
        if (stride != 1 || in_channels != width * kExpansion) {
            downsample_ = std::make_unique<Sequential>();
            downsample_->emplace<Conv2d>("0", in_channels, width * kExpansion, 1, stride, 0, false);
            downsample_->emplace<BatchNorm2d>("1", width * kExpansion);
        }
    }

    Tensor forward(const Tensor& x, Mode mode) override {
        Tensor h = relu1_.forward(bn1_.forward(conv1_.forward(x, mode), mode), mode);
        h = relu2_.forward(bn2_.forward(conv2_.forward(h, mode), mode), mode);
        h = bn3_.forward(conv3_.forward(h, mode), mode);
        const Tensor shortcut = downsample_ ? downsample_->forward(x, mode) : x;
        auto hv = h.values();
        auto sv = shortcut.values();
        for (std::size_t i = 0; i < hv.size(); ++i) hv[i] += sv[i];
        return relu3_.forward(h, mode);
    }

    Tensor backward(const Tensor& grad_out) override {
        const Tensor g = relu3_.backward(grad_out);
        Tensor d = conv3_.backward(bn3_.backward(g));
        d = conv2_.backward(bn2_.backward(relu2_.backward(d)));
        d = conv1_.backward(bn1_.backward(relu1_.backward(d)));
        const Tensor ds = downsample_ ? downsample_->backward(g) : g;
        auto dv = d.values();
        auto sv = ds.values();
        for (std::size_t i = 0; i < dv.size(); ++i) dv[i] += sv[i];
        return d;
    }

    void collect(const std::string& prefix, NamedParameters& out) override {
        conv1_.collect(detail::join_name(prefix, "conv1"), out);
        bn1_.collect(detail::join_name(prefix, "bn1"), out);
        conv2_.collect(detail::join_name(prefix, "conv2"), out);
        bn2_.collect(detail::join_name(prefix, "bn2"), out);
        conv3_.collect(detail::join_name(prefix, "conv3"), out);
        bn3_.collect(detail::join_name(prefix, "bn3"), out);
        if (downsample_) downsample_->collect(detail::join_name(prefix, "downsample"), out);
    }

    void init(Rng& rng) override {
        conv1_.init(rng);
        bn1_.init(rng);
        conv2_.init(rng);
        bn2_.init(rng);
        conv3_.init(rng);
        bn3_.init(rng);
        if (downsample_) downsample_->init(rng);
    }

    std::string kind() const override { return "Bottleneck"; }

private:
    Conv2d conv1_;
    BatchNorm2d bn1_;
    ReLU relu1_;
    Conv2d conv2_;
    BatchNorm2d bn2_;
    ReLU relu2_;
    Conv2d conv3_;
    BatchNorm2d bn3_;
    ReLU relu3_;
    std::unique_ptr<Sequential> downsample_;
};

}  // namespace advblur::nn
