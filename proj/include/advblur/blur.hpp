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
#include <optional>
#include <string>
#include <string_view>

#include <opencv2/imgproc.hpp>

#include "advblur/error.hpp"
#include "advblur/image.hpp"
#include "advblur/median.hpp"

namespace advblur {

enum class BlurMethod { median, gaussian, box, bilateral };

inline std::string to_string(BlurMethod m) {
    switch (m) {
        case BlurMethod::median: return "median";
        case BlurMethod::gaussian: return "gaussian";
        case BlurMethod::box: return "box";
        case BlurMethod::bilateral: return "bilateral";
    }
    return "?";
}

inline BlurMethod parse_blur_method(std::string_view s) {
    if (s == "median") return BlurMethod::median;
    if (s == "gaussian") return BlurMethod::gaussian;
    if (s == "box") return BlurMethod::box;
    if (s == "bilateral") return BlurMethod::bilateral;
    throw InvalidArgument("unsupported blur method '" + std::string(s) + "' (median|gaussian|box|bilateral)");
}

struct BlurSpec {
    BlurMethod method = BlurMethod::median;
    int kernel = 151;
    /// Spatial sigma for gaussian/bilateral; unset means kernel / 6.
    std::optional<double> sigma_space;
    /// Range sigma for bilateral, on the [0,1] intensity scale.
    double sigma_color = 0.1;
    Border border = Border::reflect;
    /// Fraction of originals that receive a blurred twin.
    double ratio = 1.0;

    double effective_sigma_space() const { return sigma_space.value_or(kernel / 6.0); }

    void validate() const {
        check_kernel(kernel);
        if (!(ratio > 0.0 && ratio <= 1.0)) throw InvalidArgument("blur ratio must lie in (0,1]");
        if (!(effective_sigma_space() > 0.0)) throw InvalidArgument("sigma_space must be positive");
        if (!(sigma_color > 0.0)) throw InvalidArgument("sigma_color must be positive");
    }

    bool operator==(const BlurSpec&) const = default;
};

namespace blur_detail {

/// Clamps each channel into the input's own [min, max]; removes float rounding overshoot
/// of the weighted filters so they stay range-safe.
inline void clamp_to_input_range(const Image& in, Image& out) {
    for (int c = 0; c < in.channels; ++c) {
        float lo = 1e30f, hi = -1e30f;
        for (std::size_t i = c; i < in.pixels.size(); i += in.channels) {
            lo = std::min(lo, in.pixels[i]);
            hi = std::max(hi, in.pixels[i]);
        }
        for (std::size_t i = c; i < out.pixels.size(); i += out.channels) out.pixels[i] = std::clamp(out.pixels[i], lo, hi);
    }
}

inline cv::Mat plane_mat(const Image& img, int c) {
    cv::Mat m(img.height, img.width, CV_32FC1);
    for (int y = 0; y < img.height; ++y) {
        auto* row = m.ptr<float>(y);
        for (int x = 0; x < img.width; ++x) row[x] = img.at(y, x, c);
    }
    return m;
}

inline void store_plane(const cv::Mat& m, Image& img, int c) {
    for (int y = 0; y < img.height; ++y) {
        const auto* row = m.ptr<float>(y);
        for (int x = 0; x < img.width; ++x) img.at(y, x, c) = row[x];
    }
}

}  // namespace blur_detail

/// Filters each channel independently; output has the input's shape.
/// Images smaller than the kernel are handled by the border policy.
inline Image apply_blur(const Image& image, const BlurSpec& spec) {
    spec.validate();
    if (spec.method == BlurMethod::median) return median_filter(image, spec.kernel, spec.border);

    Image out(image.height, image.width, image.channels);
    const int border = to_cv_border(spec.border);
    const cv::Size ksize(spec.kernel, spec.kernel);
    for (int c = 0; c < image.channels; ++c) {
        const cv::Mat src = blur_detail::plane_mat(image, c);
        cv::Mat dst;
        switch (spec.method) {
            case BlurMethod::gaussian:
                cv::GaussianBlur(src, dst, ksize, spec.effective_sigma_space(), spec.effective_sigma_space(), border);
                break;
            case BlurMethod::box:
                cv::blur(src, dst, ksize, cv::Point(-1, -1), border);
                break;
            case BlurMethod::bilateral:
                cv::bilateralFilter(src, dst, spec.kernel, spec.sigma_color, spec.effective_sigma_space(), border);
                break;
            case BlurMethod::median:
                break;
        }
        blur_detail::store_plane(dst, out, c);
    }
    blur_detail::clamp_to_input_range(image, out);
    return out;
}

}  // namespace advblur
