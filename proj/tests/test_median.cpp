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

#include <algorithm>
#include <tuple>
#include <vector>

#include <gtest/gtest.h>

#include "advblur/blur.hpp"
#include "advblur/median.hpp"
#include "advblur/rng.hpp"

namespace {

using advblur::Border;
using advblur::Image;

enum class Levels { continuous, eight_bit, few };

Image random_image(int h, int w, Levels levels, advblur::Rng& rng) {
    Image img(h, w, 3);
    for (float& v : img.pixels) {
        switch (levels) {
            case Levels::continuous: v = static_cast<float>(advblur::uniform01(rng)); break;
            case Levels::eight_bit: v = static_cast<float>(advblur::uniform_index(rng, 256)) / 255.0f; break;
            case Levels::few: v = static_cast<float>(advblur::uniform_index(rng, 4)) * 0.3f - 0.2f; break;
        }
    }
    return img;
}

// Written independently of the library reference: explicit fold of the padded index.
float reference_pixel(const Image& img, int y, int x, int c, int kernel, Border border) {
    auto fold = [border](int i, int n) {
        if (border == Border::replicate) return std::clamp(i, 0, n - 1);
        const int period = 2 * n;
        int m = ((i % period) + period) % period;
        return m < n ? m : period - 1 - m;
    };
    std::vector<float> win;
    const int r = kernel / 2;
    for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) win.push_back(img.at(fold(y + dy, img.height), fold(x + dx, img.width), c));
    std::nth_element(win.begin(), win.begin() + static_cast<long>(win.size() / 2), win.end());
    return win[win.size() / 2];
}

class MedianOracle : public ::testing::TestWithParam<std::tuple<int, Border, Levels>> {};

TEST_P(MedianOracle, BitExactAgainstSortingWindows) {
    const auto [kernel, border, levels] = GetParam();
    advblur::Rng rng(advblur::derive_seed(77, static_cast<std::uint64_t>(kernel) * 10 + static_cast<int>(levels)));
    for (int trial = 0; trial < 10; ++trial) {
        const int h = 5 + static_cast<int>(advblur::uniform_index(rng, 20));
        const int w = 5 + static_cast<int>(advblur::uniform_index(rng, 20));
        const Image img = random_image(h, w, levels, rng);
        const Image fast = advblur::median_filter(img, kernel, border);
        const Image oracle = advblur::median_filter_oracle(img, kernel, border);
        ASSERT_EQ(fast.pixels, oracle.pixels) << "kernel " << kernel << " size " << h << "x" << w;
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    ASSERT_EQ(fast.at(y, x, c), reference_pixel(img, y, x, c, kernel, border));
    }
}

INSTANTIATE_TEST_SUITE_P(Kernels, MedianOracle,
                         ::testing::Combine(::testing::Values(3, 5, 7, 15, 31),
                                            ::testing::Values(Border::reflect, Border::replicate),
                                            ::testing::Values(Levels::continuous, Levels::eight_bit, Levels::few)));

TEST(Median, KernelMuchLargerThanImageFoldsBorder) {
    advblur::Rng rng(5);
    for (Levels levels : {Levels::continuous, Levels::eight_bit}) {
        const Image img = random_image(6, 9, levels, rng);
        for (Border b : {Border::reflect, Border::replicate}) {
            EXPECT_EQ(advblur::median_filter(img, 151, b).pixels, advblur::median_filter_oracle(img, 151, b).pixels);
        }
    }
}

TEST(Median, ConstantImageIsFixedPoint) {
    Image img(12, 17, 3);
    std::fill(img.pixels.begin(), img.pixels.end(), 0.42f);
    EXPECT_EQ(advblur::median_filter(img, 9, Border::reflect).pixels, img.pixels);
}

TEST(Median, RemovesIsolatedImpulse) {
    Image img(9, 9, 3);
    img.at(4, 4, 1) = 1.0f;
    const Image out = advblur::median_filter(img, 3, Border::reflect);
    for (float v : out.pixels) EXPECT_EQ(v, 0.0f);
}

TEST(Median, RejectsEvenOrTinyKernel) {
    Image img(4, 4, 3);
    EXPECT_THROW(advblur::median_filter(img, 4, Border::reflect), advblur::InvalidArgument);
    EXPECT_THROW(advblur::median_filter(img, 1, Border::reflect), advblur::InvalidArgument);
}

TEST(ApplyBlur, MedianRoutesToExactFilter) {
    advblur::Rng rng(8);
    const Image img = random_image(16, 16, Levels::continuous, rng);
    advblur::BlurSpec spec;
    spec.kernel = 5;
    EXPECT_EQ(advblur::apply_blur(img, spec).pixels, advblur::median_filter_oracle(img, 5, Border::reflect).pixels);
}

// Property: every method keeps each channel within the input channel's range.
TEST(ApplyBlur, AllMethodsStayInInputRange) {
    advblur::Rng rng(10);
    Image img = random_image(40, 33, Levels::continuous, rng);
    for (std::size_t i = 0; i < img.pixels.size(); i += 3) img.pixels[i] = 0.25f + 0.5f * img.pixels[i];
    for (auto m : {advblur::BlurMethod::median, advblur::BlurMethod::gaussian, advblur::BlurMethod::box,
                   advblur::BlurMethod::bilateral}) {
        advblur::BlurSpec spec;
        spec.method = m;
        spec.kernel = 11;
        const Image out = advblur::apply_blur(img, spec);
        ASSERT_EQ(out.height, img.height);
        ASSERT_EQ(out.width, img.width);
        for (int c = 0; c < 3; ++c) {
            const auto in_c = img.channel(c);
            const auto out_c = out.channel(c);
            const auto [lo, hi] = std::minmax_element(in_c.begin(), in_c.end());
            for (float v : out_c) {
                EXPECT_GE(v, *lo) << advblur::to_string(m);
                EXPECT_LE(v, *hi) << advblur::to_string(m);
            }
        }
    }
}

TEST(ApplyBlur, ChannelsFilteredIndependently) {
    advblur::Rng rng(12);
    Image img = random_image(20, 20, Levels::eight_bit, rng);
    advblur::BlurSpec spec;
    spec.kernel = 7;
    const Image a = advblur::apply_blur(img, spec);
    for (std::size_t i = 1; i < img.pixels.size(); i += 3) img.pixels[i] = 0.0f;
    const Image b = advblur::apply_blur(img, spec);
    EXPECT_EQ(a.channel(0), b.channel(0));
    EXPECT_EQ(a.channel(2), b.channel(2));
}

TEST(BlurSpec, Validation) {
    advblur::BlurSpec spec;
    spec.validate();
    EXPECT_EQ(spec.kernel, 151);
    spec.ratio = 0.0;
    EXPECT_THROW(spec.validate(), advblur::InvalidArgument);
    EXPECT_THROW(advblur::parse_blur_method("motion"), advblur::InvalidArgument);
}

}  // namespace
