#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <utility>
#include <vector>

#include "mritherm/errors.hpp"
#include "mritherm/image.hpp"
#include "mritherm/tensor.hpp"

namespace mritherm {
namespace imgproc {

/// Single-channel float plane, row-major. Intermediate form for filtering:
/// edge detection runs on blurred floats before any 0-255 rounding.
struct FloatPlane {
    int width = 0;
    int height = 0;
    std::vector<float> data;

    FloatPlane() = default;
    FloatPlane(int w, int h, float fill = 0.0f)
        : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

    float at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }
    float& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
};

struct GaussianSpec {
    int kernel_size = 5;
    float sigma = 1.0f;
};

struct CannyConfig {
    float t_low = 20.0f;
    float t_high = 20.0f;
    GaussianSpec gaussian{};
};

struct GradientField {
    int width = 0;
    int height = 0;
    std::vector<float> gx, gy, magnitude, direction;
};

inline void validate(const GaussianSpec& spec) {
    if (spec.kernel_size < 1 || spec.kernel_size % 2 == 0) {
        throw ConfigError("gaussian kernel size must be odd and >= 1");
    }
    if (!(spec.sigma > 0.0f)) throw ConfigError("gaussian sigma must be > 0");
}

inline void validate(const CannyConfig& cfg) {
    validate(cfg.gaussian);
    if (cfg.t_low < 0.0f || cfg.t_low > cfg.t_high) {
        throw ConfigError("canny thresholds need 0 <= t_low <= t_high");
    }
}

inline ImageU8 to_grayscale(const ImageU8& img) {
    if (img.channels == 1) return img;
    ImageU8 out(img.width, img.height, 1);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            double luma = 0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) + 0.114 * img.at(y, x, 2);
            out.at(y, x) = static_cast<std::uint8_t>(std::min(255L, std::lround(luma)));
        }
    }
    return out;
}

inline ImageU8 gray_to_rgb(const ImageU8& img) {
    if (img.channels != 1) throw std::invalid_argument("gray_to_rgb: input must be single-channel");
    ImageU8 out(img.width, img.height, 3);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            std::uint8_t v = img.at(y, x);
            out.at(y, x, 0) = v;
            out.at(y, x, 1) = v;
            out.at(y, x, 2) = v;
        }
    }
    return out;
}

/// Bilinear resize with half-pixel-center alignment: src = (dst + 0.5) * scale - 0.5,
/// edge-clamped, rounded to nearest.
inline ImageU8 resize_bilinear(const ImageU8& img, int out_w, int out_h) {
    if (out_w < 1 || out_h < 1) throw ShapeError("resize target must be >= 1x1");
    if (out_w == img.width && out_h == img.height) return img;
    ImageU8 out(out_w, out_h, img.channels);
    const double scale_x = static_cast<double>(img.width) / out_w;
    const double scale_y = static_cast<double>(img.height) / out_h;
    for (int y = 0; y < out_h; ++y) {
        double sy = (y + 0.5) * scale_y - 0.5;
        int y0 = static_cast<int>(std::floor(sy));
        double fy = sy - y0;
        int y0c = std::clamp(y0, 0, img.height - 1);
        int y1c = std::clamp(y0 + 1, 0, img.height - 1);
        for (int x = 0; x < out_w; ++x) {
            double sx = (x + 0.5) * scale_x - 0.5;
            int x0 = static_cast<int>(std::floor(sx));
            double fx = sx - x0;
            int x0c = std::clamp(x0, 0, img.width - 1);
            int x1c = std::clamp(x0 + 1, 0, img.width - 1);
            for (int c = 0; c < img.channels; ++c) {
                double top = (1.0 - fx) * img.at(y0c, x0c, c) + fx * img.at(y0c, x1c, c);
                double bot = (1.0 - fx) * img.at(y1c, x0c, c) + fx * img.at(y1c, x1c, c);
                double v = (1.0 - fy) * top + fy * bot;
                out.at(y, x, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
            }
        }
    }
    return out;
}

/// Pseudothermal JET colormap, fixed piecewise-linear form on v = gray/255:
///   r = clamp(1.5 - |4v - 3|), g = clamp(1.5 - |4v - 2|), b = clamp(1.5 - |4v - 1|)
inline ImageU8 apply_colormap(const ImageU8& img) {
    if (img.channels != 1) throw std::invalid_argument("apply_colormap: input must be single-channel");
    auto ramp = [](double v, double center) {
        double t = std::clamp(1.5 - std::abs(4.0 * v - center), 0.0, 1.0);
        return static_cast<std::uint8_t>(std::lround(t * 255.0));
    };
    // all 256 mappings precomputed; the map is injective on gray levels
    std::array<std::array<std::uint8_t, 3>, 256> lut;
    for (int g = 0; g < 256; ++g) {
        double v = g / 255.0;
        lut[g] = {ramp(v, 3.0), ramp(v, 2.0), ramp(v, 1.0)};
    }
    ImageU8 out(img.width, img.height, 3);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const auto& rgb = lut[img.at(y, x)];
            out.at(y, x, 0) = rgb[0];
            out.at(y, x, 1) = rgb[1];
            out.at(y, x, 2) = rgb[2];
        }
    }
    return out;
}

/// Square filter taps kept in float64: the tap values themselves must hold
/// tighter tolerances than float32 rounding allows.
struct Kernel2D {
    int size = 0;
    std::vector<double> taps;

    Kernel2D() = default;
    explicit Kernel2D(int k) : size(k), taps(static_cast<std::size_t>(k) * k, 0.0) {}

    double at(int y, int x) const { return taps[static_cast<std::size_t>(y) * size + x]; }
    double& at(int y, int x) { return taps[static_cast<std::size_t>(y) * size + x]; }
};

/// Normalized Gaussian taps on the K x K integer grid around the center.
inline Kernel2D gaussian_kernel(const GaussianSpec& spec) {
    validate(spec);
    const int k = spec.kernel_size;
    const int r = k / 2;
    const double two_sigma_sq = 2.0 * static_cast<double>(spec.sigma) * spec.sigma;
    Kernel2D kernel(k);
    double sum = 0.0;
    for (int y = 0; y < k; ++y) {
        for (int x = 0; x < k; ++x) {
            double dx = x - r, dy = y - r;
            double v = std::exp(-(dx * dx + dy * dy) / two_sigma_sq);
            kernel.at(y, x) = v;
            sum += v;
        }
    }
    for (double& t : kernel.taps) t /= sum;
    return kernel;
}

namespace detail {

// reflect-101: index -1 maps to 1, n maps to n-2 (no edge repetition)
inline int reflect101(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * (n - 1) - i;
    }
    return i;
}

/// 2-D correlation of a float plane with a square odd kernel, reflect-101
/// borders, float64 accumulation in fixed tap order.
inline FloatPlane correlate(const FloatPlane& src, const Kernel2D& kernel) {
    const int k = kernel.size;
    const int r = k / 2;
    FloatPlane out(src.width, src.height);
    for (int y = 0; y < src.height; ++y) {
        for (int x = 0; x < src.width; ++x) {
            double acc = 0.0;
            for (int u = 0; u < k; ++u) {
                int yy = reflect101(y + u - r, src.height);
                for (int v = 0; v < k; ++v) {
                    int xx = reflect101(x + v - r, src.width);
                    acc += kernel.at(u, v) * src.at(yy, xx);
                }
            }
            out.at(y, x) = static_cast<float>(acc);
        }
    }
    return out;
}

}  // namespace detail

inline FloatPlane to_plane(const ImageU8& img) {
    if (img.channels != 1) throw std::invalid_argument("to_plane: input must be single-channel");
    FloatPlane p(img.width, img.height);
    for (std::size_t i = 0; i < img.data.size(); ++i) p.data[i] = img.data[i];
    return p;
}

inline FloatPlane gaussian_blur_plane(const FloatPlane& plane, const GaussianSpec& spec) {
    return detail::correlate(plane, gaussian_kernel(spec));
}

inline ImageU8 gaussian_blur(const ImageU8& img, const GaussianSpec& spec) {
    if (img.channels != 1) throw std::invalid_argument("gaussian_blur: input must be single-channel");
    FloatPlane blurred = gaussian_blur_plane(to_plane(img), spec);
    ImageU8 out(img.width, img.height, 1);
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        out.data[i] = static_cast<std::uint8_t>(std::clamp(std::lround(blurred.data[i]), 0L, 255L));
    }
    return out;
}

/// 3x3 Sobel gradients with magnitude sqrt(gx^2 + gy^2) and direction
/// atan2(gy, gx) mapped into (-pi, pi].
inline GradientField sobel_gradients(const FloatPlane& plane) {
    static const double sx[9] = {-1, 0, 1, -2, 0, 2, -1, 0, 1};
    static const double sy[9] = {-1, -2, -1, 0, 0, 0, 1, 2, 1};
    Kernel2D kx(3), ky(3);
    for (int i = 0; i < 9; ++i) {
        kx.taps[static_cast<std::size_t>(i)] = sx[i];
        ky.taps[static_cast<std::size_t>(i)] = sy[i];
    }
    FloatPlane gx = detail::correlate(plane, kx);
    FloatPlane gy = detail::correlate(plane, ky);
    GradientField field;
    field.width = plane.width;
    field.height = plane.height;
    field.gx = std::move(gx.data);
    field.gy = std::move(gy.data);
    const std::size_t n = field.gx.size();
    field.magnitude.resize(n);
    field.direction.resize(n);
    constexpr float kPi = 3.14159265358979323846f;
    for (std::size_t i = 0; i < n; ++i) {
        double dx = field.gx[i], dy = field.gy[i];
        field.magnitude[i] = static_cast<float>(std::sqrt(dx * dx + dy * dy));
        float theta = static_cast<float>(std::atan2(dy, dx));
        if (theta <= -kPi) theta = kPi;
        field.direction[i] = theta;
    }
    return field;
}

namespace detail {

// Direction quantized to 4 bins; (di, dj) is the step along the gradient.
inline std::pair<int, int> nms_offset(float theta) {
    constexpr float kPi = 3.14159265358979323846f;
    float a = theta < 0 ? theta + kPi : theta;  // fold to [0, pi]
    int bin = static_cast<int>(std::lround(a / (kPi / 4.0f))) % 4;
    switch (bin) {
        case 0: return {0, 1};    // 0 deg
        case 1: return {1, 1};    // 45 deg
        case 2: return {1, 0};    // 90 deg
        default: return {1, -1};  // 135 deg
    }
}

}  // namespace detail

/// Canny edge map: gaussian smoothing, Sobel gradients, non-maximum
/// suppression, double threshold (strong >= t_high, weak in [t_low, t_high)),
/// hysteresis keeping weak pixels 8-connected to a strong pixel. Output is
/// binary 0/255.
///
/// NMS keeps a pixel when its magnitude is strictly greater than the neighbor
/// against the gradient and >= the neighbor along it; an exactly symmetric
/// two-pixel ridge keeps its first pixel instead of vanishing.
inline ImageU8 canny(const ImageU8& img, const CannyConfig& cfg) {
    validate(cfg);
    if (img.channels != 1) throw std::invalid_argument("canny: input must be single-channel");
    const int w = img.width, h = img.height;

    FloatPlane blurred = gaussian_blur_plane(to_plane(img), cfg.gaussian);
    GradientField grad = sobel_gradients(blurred);

    auto mag_at = [&](int y, int x) -> float {
        if (y < 0 || y >= h || x < 0 || x >= w) return 0.0f;
        return grad.magnitude[static_cast<std::size_t>(y) * w + x];
    };

    // 0 = none, 1 = weak, 2 = strong
    std::vector<std::uint8_t> mark(static_cast<std::size_t>(w) * h, 0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            std::size_t i = static_cast<std::size_t>(y) * w + x;
            float m = grad.magnitude[i];
            if (m < cfg.t_low) continue;
            auto [di, dj] = detail::nms_offset(grad.direction[i]);
            if (!(m > mag_at(y - di, x - dj) && m >= mag_at(y + di, x + dj))) continue;
            mark[i] = m >= cfg.t_high ? 2 : 1;
        }
    }

    // hysteresis: flood from strong pixels through 8-connected weak pixels
    std::vector<std::size_t> stack;
    for (std::size_t i = 0; i < mark.size(); ++i)
        if (mark[i] == 2) stack.push_back(i);
    ImageU8 out(w, h, 1);
    while (!stack.empty()) {
        std::size_t i = stack.back();
        stack.pop_back();
        if (out.data[i]) continue;
        out.data[i] = 255;
        int y = static_cast<int>(i) / w, x = static_cast<int>(i) % w;
        for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
                int ny = y + dy, nx = x + dx;
                if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
                std::size_t ni = static_cast<std::size_t>(ny) * w + nx;
                if (mark[ni] != 0 && !out.data[ni]) stack.push_back(ni);
            }
        }
    }
    return out;
}

}  // namespace imgproc
}  // namespace mritherm
