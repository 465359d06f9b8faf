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

// Exact large-kernel median filtering.
//
// Each channel is first rank-compressed: values are replaced by their index in
// the sorted list of distinct values present. When a channel has at most 256
// distinct values (always true for 8-bit sources) the filter runs the
// constant-time sliding-histogram scheme of Perreault & Hebert: one 256-bin
// histogram per image column covering the current row window, and a kernel
// histogram that slides right by adding one column histogram and subtracting
// another. A 16-bucket coarse level keeps the median search to at most 32
// steps. Cost per pixel is independent of the kernel size.
//
// Channels with more distinct values fall back to Huang's row-sliding window
// over a two-level rank histogram, O(kernel) per pixel.
//
// Both paths return, for every pixel, an element of the padded window, so the
// result is bit-identical to sorting the window.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "advblur/error.hpp"
#include "advblur/image.hpp"

namespace advblur {

namespace median_detail {

struct RankPlane {
    std::vector<std::uint32_t> ranks;  // per pixel
    std::vector<float> levels;         // rank -> value
};

/// Exact 8-bit levels (v == q/255 for integer q) map straight to bins.
inline bool try_quantized_levels(std::span<const float> plane, RankPlane& out) {
    out.ranks.resize(plane.size());
    for (std::size_t i = 0; i < plane.size(); ++i) {
        const float v = plane[i];
        if (!(v >= 0.0f && v <= 1.0f)) return false;
        const long q = std::lround(v * 255.0f);
        if (static_cast<float>(q) / 255.0f != v) return false;
        out.ranks[i] = static_cast<std::uint32_t>(q);
    }
    out.levels.resize(256);
    for (int q = 0; q < 256; ++q) out.levels[q] = static_cast<float>(q) / 255.0f;
    return true;
}

inline RankPlane rank_compress(std::span<const float> plane) {
    RankPlane out;
    if (try_quantized_levels(plane, out)) return out;
    out.levels.assign(plane.begin(), plane.end());
    std::sort(out.levels.begin(), out.levels.end());
    out.levels.erase(std::unique(out.levels.begin(), out.levels.end()), out.levels.end());
    out.ranks.resize(plane.size());
    for (std::size_t i = 0; i < plane.size(); ++i) {
        out.ranks[i] = static_cast<std::uint32_t>(
            std::lower_bound(out.levels.begin(), out.levels.end(), plane[i]) - out.levels.begin());
    }
    return out;
}

inline std::vector<int> border_table(int n, int radius, Border border) {
    std::vector<int> t(static_cast<std::size_t>(n + 2 * radius));
    for (int i = -radius; i < n + radius; ++i) t[static_cast<std::size_t>(i + radius)] = border_index(i, n, border);
    return t;
}

template <typename Count>
void constant_time_median(const std::vector<std::uint32_t>& ranks, int height, int width, int kernel,
                          Border border, std::vector<std::uint32_t>& out) {
    constexpr int kBins = 256;
    constexpr int kCoarse = 16;
    const int radius = kernel / 2;
    const auto rows = border_table(height, radius + 1, border);  // index = y + radius + 1
    const auto cols = border_table(width, radius + 1, border);
    auto row_at = [&](int y) { return rows[static_cast<std::size_t>(y + radius + 1)]; };
    auto col_at = [&](int x) { return cols[static_cast<std::size_t>(x + radius + 1)]; };

    const std::size_t w = static_cast<std::size_t>(width);
    std::vector<std::uint16_t> col_fine(w * kBins, 0);
    std::vector<std::uint16_t> col_coarse(w * kCoarse, 0);
    auto col_add = [&](int y, int sign) {
        const std::uint32_t* src = ranks.data() + static_cast<std::size_t>(y) * w;
        for (std::size_t x = 0; x < w; ++x) {
            const std::uint32_t v = src[x];
            col_fine[x * kBins + v] = static_cast<std::uint16_t>(col_fine[x * kBins + v] + sign);
            col_coarse[x * kCoarse + (v >> 4)] = static_cast<std::uint16_t>(col_coarse[x * kCoarse + (v >> 4)] + sign);
        }
    };
    for (int dy = -radius; dy <= radius; ++dy) col_add(row_at(dy), +1);

    std::vector<Count> fine(kBins);
    std::vector<Count> coarse(kCoarse);
    const std::uint32_t target = static_cast<std::uint32_t>((static_cast<std::uint64_t>(kernel) * kernel - 1) / 2);
    out.resize(static_cast<std::size_t>(height) * w);

    for (int y = 0; y < height; ++y) {
        if (y > 0) {
            col_add(row_at(y - 1 - radius), -1);
            col_add(row_at(y + radius), +1);
        }
        std::fill(fine.begin(), fine.end(), Count{0});
        std::fill(coarse.begin(), coarse.end(), Count{0});
        for (int dx = -radius; dx <= radius; ++dx) {
            const std::size_t c = static_cast<std::size_t>(col_at(dx));
            for (int b = 0; b < kBins; ++b) fine[b] += col_fine[c * kBins + b];
            for (int b = 0; b < kCoarse; ++b) coarse[b] += col_coarse[c * kCoarse + b];
        }
        std::uint32_t* dst = out.data() + static_cast<std::size_t>(y) * w;
        for (int x = 0; x < width; ++x) {
            if (x > 0) {
                const std::size_t gone = static_cast<std::size_t>(col_at(x - 1 - radius));
                const std::size_t came = static_cast<std::size_t>(col_at(x + radius));
                if (gone != came) {
                    const std::uint16_t* g = col_fine.data() + gone * kBins;
                    const std::uint16_t* a = col_fine.data() + came * kBins;
                    for (int b = 0; b < kBins; ++b) fine[b] = static_cast<Count>(fine[b] + a[b] - g[b]);
                    const std::uint16_t* gc = col_coarse.data() + gone * kCoarse;
                    const std::uint16_t* ac = col_coarse.data() + came * kCoarse;
                    for (int b = 0; b < kCoarse; ++b) coarse[b] = static_cast<Count>(coarse[b] + ac[b] - gc[b]);
                }
            }
            std::uint32_t acc = 0;
            int bucket = 0;
            while (acc + coarse[bucket] <= target) acc += coarse[bucket++];
            int bin = bucket * 16;
            while (acc + fine[bin] <= target) acc += fine[bin++];
            dst[x] = static_cast<std::uint32_t>(bin);
        }
    }
}

/// Huang's sliding window over an arbitrary number of rank levels.
inline void sliding_window_median(const std::vector<std::uint32_t>& ranks, std::size_t n_levels, int height,
                                  int width, int kernel, Border border, std::vector<std::uint32_t>& out) {
    const int radius = kernel / 2;
    const std::size_t bucket_size = std::max<std::size_t>(16, static_cast<std::size_t>(std::sqrt(double(n_levels))));
    const std::size_t n_buckets = (n_levels + bucket_size - 1) / bucket_size;
    std::vector<std::uint32_t> fine(n_levels);
    std::vector<std::uint32_t> coarse(n_buckets);
    const std::uint64_t target = (static_cast<std::uint64_t>(kernel) * kernel - 1) / 2;
    const auto rows = border_table(height, radius + 1, border);
    const auto cols = border_table(width, radius + 1, border);
    auto at = [&](int y, int x) {
        return ranks[static_cast<std::size_t>(rows[static_cast<std::size_t>(y + radius + 1)]) * width +
                     static_cast<std::size_t>(cols[static_cast<std::size_t>(x + radius + 1)])];
    };
    out.resize(static_cast<std::size_t>(height) * width);
    for (int y = 0; y < height; ++y) {
        std::fill(fine.begin(), fine.end(), 0u);
        std::fill(coarse.begin(), coarse.end(), 0u);
        for (int dy = -radius; dy <= radius; ++dy)
            for (int dx = -radius; dx <= radius; ++dx) {
                const auto v = at(y + dy, dx);
                ++fine[v];
                ++coarse[v / bucket_size];
            }
        for (int x = 0; x < width; ++x) {
            if (x > 0) {
                for (int dy = -radius; dy <= radius; ++dy) {
                    const auto g = at(y + dy, x - 1 - radius);
                    --fine[g];
                    --coarse[g / bucket_size];
                    const auto a = at(y + dy, x + radius);
                    ++fine[a];
                    ++coarse[a / bucket_size];
                }
            }
            std::uint64_t acc = 0;
            std::size_t bucket = 0;
            while (acc + coarse[bucket] <= target) acc += coarse[bucket++];
            std::size_t bin = bucket * bucket_size;
            while (acc + fine[bin] <= target) acc += fine[bin++];
            out[static_cast<std::size_t>(y) * width + x] = static_cast<std::uint32_t>(bin);
        }
    }
}

}  // namespace median_detail

inline void check_kernel(int kernel) {
    if (kernel < 3 || kernel % 2 == 0) {
        throw InvalidArgument("kernel must be an odd integer >= 3 (got " + std::to_string(kernel) + ")");
    }
}

/// Exact median of every kernel x kernel window of a row-major plane.
inline std::vector<float> median_filter_plane(std::span<const float> plane, int height, int width, int kernel,
                                              Border border) {
    check_kernel(kernel);
    if (plane.size() != static_cast<std::size_t>(height) * width) throw InvalidArgument("plane size mismatch");
    if (plane.empty()) return {};
    const auto rp = median_detail::rank_compress(plane);
    std::vector<std::uint32_t> med;
    if (rp.levels.size() <= 256) {
        if (static_cast<long long>(kernel) * kernel <= 0xffff) {
            median_detail::constant_time_median<std::uint16_t>(rp.ranks, height, width, kernel, border, med);
        } else {
            median_detail::constant_time_median<std::uint32_t>(rp.ranks, height, width, kernel, border, med);
        }
    } else {
        median_detail::sliding_window_median(rp.ranks, rp.levels.size(), height, width, kernel, border, med);
    }
    std::vector<float> out(med.size());
    for (std::size_t i = 0; i < med.size(); ++i) out[i] = rp.levels[med[i]];
    return out;
}

/// Per-channel exact median filter.
inline Image median_filter(const Image& image, int kernel, Border border) {
    check_kernel(kernel);
    Image out(image.height, image.width, image.channels);
    for (int c = 0; c < image.channels; ++c) {
        out.set_channel(c, median_filter_plane(image.channel(c), image.height, image.width, kernel, border));
    }
    return out;
}

/// Brute force reference: gathers each padded window, sorts it, takes the middle element.
/// Intended for small images only.
inline Image median_filter_oracle(const Image& image, int kernel, Border border) {
    check_kernel(kernel);
    const int radius = kernel / 2;
    Image out(image.height, image.width, image.channels);
    std::vector<float> window(static_cast<std::size_t>(kernel) * kernel);
    for (int c = 0; c < image.channels; ++c) {
        for (int y = 0; y < image.height; ++y) {
            for (int x = 0; x < image.width; ++x) {
                std::size_t k = 0;
                for (int dy = -radius; dy <= radius; ++dy) {
                    for (int dx = -radius; dx <= radius; ++dx) {
                        window[k++] = image.at(border_index(y + dy, image.height, border),
                                               border_index(x + dx, image.width, border), c);
                    }
                }
                std::sort(window.begin(), window.end());
                out.at(y, x, c) = window[window.size() / 2];
            }
        }
    }
    return out;
}

}  // namespace advblur
