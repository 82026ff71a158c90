#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "mritherm/mritherm.hpp"

using namespace mritherm;
using nn::LayerKind;
using nn::LayerSpec;
using nn::Padding;

namespace {

Tensor random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(shape, 0.0f);
    for (std::size_t i = 0; i < t.size(); ++i) {
        t[i] = static_cast<float>(rng.uniform(lo, hi));
    }
    return t;
}

// Plain reference convolution: explicit padding arithmetic, one scalar
// accumulator per output value, no skipping.
Tensor conv_oracle(const Tensor& input, const Tensor& weights, const Tensor& bias, int stride,
                   nn::Padding padding) {
    const int h = input.shape()[0], w = input.shape()[1], c = input.shape()[2];
    const int k = weights.shape()[0], d = weights.shape()[3];
    int oh, ow, pad_top, pad_left;
    if (padding == nn::Padding::valid) {
        oh = (h - k) / stride + 1;
        ow = (w - k) / stride + 1;
        pad_top = pad_left = 0;
    } else {
        oh = (h + stride - 1) / stride;
        ow = (w + stride - 1) / stride;
        pad_top = std::max((oh - 1) * stride + k - h, 0) / 2;
        pad_left = std::max((ow - 1) * stride + k - w, 0) / 2;
    }
    Tensor out(Shape::hwc(oh, ow, d), 0.0f);
    for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox)
            for (int di = 0; di < d; ++di) {
                double acc = bias.at(di);
                for (int u = 0; u < k; ++u)
                    for (int v = 0; v < k; ++v) {
                        const int iy = oy * stride + u - pad_top;
                        const int ix = ox * stride + v - pad_left;
                        if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                        for (int ci = 0; ci < c; ++ci) {
                            acc += static_cast<double>(input.at(iy, ix, ci)) * weights.at(u, v, ci, di);
                        }
                    }
                out.at(oy, ox, di) = static_cast<float>(acc);
            }
    return out;
}

void require_close(const Tensor& got, const Tensor& want, double tol) {
    REQUIRE(got.shape() == want.shape());
    for (std::size_t i = 0; i < got.size(); ++i) {
        REQUIRE_THAT(static_cast<double>(got[i]),
                     Catch::Matchers::WithinAbs(static_cast<double>(want[i]), tol));
    }
}

// Small full network used for wiring tests.
nn::ModelConfig tiny_config() {
    nn::ModelConfig cfg;
    cfg.input_h = 8;
    cfg.input_w = 8;
    cfg.input_c = 2;
    auto conv = [&](LayerKind kind, std::string name, int k, int s, int c, int d) {
        cfg.layers.push_back({kind, name, k, s, c, d, Padding::same_tf});
        cfg.layers.push_back({LayerKind::affine_norm, name + ".norm", 1, 1, d, d, Padding::same_tf});
        cfg.layers.push_back({LayerKind::relu6, "", 1, 1, d, d, Padding::same_tf});
    };
    conv(LayerKind::conv2d, "c1", 3, 2, 2, 4);
    conv(LayerKind::depthwise, "d1", 3, 1, 4, 4);
    conv(LayerKind::pointwise, "p1", 1, 1, 4, 8);
    cfg.frozen_prefix = cfg.layers.size();
    cfg.layers.push_back({LayerKind::gap, "", 1, 1, 8, 8, Padding::same_tf});
    cfg.layers.push_back({LayerKind::dense, "h1", 1, 1, 8, 3, Padding::same_tf});
    cfg.layers.push_back({LayerKind::relu, "", 1, 1, 3, 3, Padding::same_tf});
    cfg.layers.push_back({LayerKind::dense, "h2", 1, 1, 3, 2, Padding::same_tf});
    cfg.layers.push_back({LayerKind::softmax, "", 1, 1, 2, 2, Padding::same_tf});
    return cfg;
}

WeightStore tiny_weights(std::uint64_t seed) {
    Rng rng(seed);
    WeightStore ws;
    ws.add("c1.w", random_tensor(Shape::kkcd(3, 2, 4), rng));
    ws.add("c1.norm.scale", random_tensor(Shape::vec(4), rng, 0.5, 1.5));
    ws.add("c1.norm.shift", random_tensor(Shape::vec(4), rng, -0.2, 0.2));
    ws.add("d1.w", random_tensor(Shape::kkc(3, 4), rng));
    ws.add("d1.norm.scale", random_tensor(Shape::vec(4), rng, 0.5, 1.5));
    ws.add("d1.norm.shift", random_tensor(Shape::vec(4), rng, -0.2, 0.2));
    ws.add("p1.w", random_tensor(Shape::mat(4, 8), rng));
    ws.add("p1.norm.scale", random_tensor(Shape::vec(8), rng, 0.5, 1.5));
    ws.add("p1.norm.shift", random_tensor(Shape::vec(8), rng, -0.2, 0.2));
    ws.add("h1.w", random_tensor(Shape::mat(3, 8), rng));
    ws.add("h1.b", random_tensor(Shape::vec(3), rng));
    ws.add("h2.w", random_tensor(Shape::mat(2, 3), rng));
    ws.add("h2.b", random_tensor(Shape::vec(2), rng));
    return ws;
}

}  // namespace

TEST_CASE("same padding plan matches the closed form", "[nn]") {
    auto p = nn::detail::pad_axis(128, 3, 2, Padding::same_tf);
    REQUIRE(p.out == 64);
    REQUIRE(p.before == 0);  // total pad 1, all of it after

    p = nn::detail::pad_axis(4, 3, 1, Padding::same_tf);
    REQUIRE(p.out == 4);
    REQUIRE(p.before == 1);

    p = nn::detail::pad_axis(7, 3, 2, Padding::same_tf);
    REQUIRE(p.out == 4);
    REQUIRE(p.before == 1);

    p = nn::detail::pad_axis(5, 3, 1, Padding::valid);
    REQUIRE(p.out == 3);
    REQUIRE(p.before == 0);

    REQUIRE_THROWS_AS(nn::detail::pad_axis(2, 3, 1, Padding::valid), ShapeError);
}

TEST_CASE("conv2d matches the reference on random tensors", "[nn]") {
    Rng rng(11);
    const Tensor input = random_tensor(Shape::hwc(7, 6, 3), rng);
    const Tensor weights = random_tensor(Shape::kkcd(3, 3, 4), rng);
    const Tensor bias = random_tensor(Shape::vec(4), rng);

    for (int stride : {1, 2}) {
        Tensor got = nn::conv2d(input, weights, bias, stride, Padding::same_tf);
        require_close(got, conv_oracle(input, weights, bias, stride, Padding::same_tf), 1e-5);
    }
    Tensor got = nn::conv2d(input, weights, bias, 1, Padding::valid);
    REQUIRE(got.shape() == Shape::hwc(5, 4, 4));
    require_close(got, conv_oracle(input, weights, bias, 1, Padding::valid), 1e-5);
}

TEST_CASE("conv2d zero skipping does not change the bits", "[nn]") {
    Rng rng(12);
    Tensor input = random_tensor(Shape::hwc(5, 5, 3), rng);
    for (std::size_t i = 0; i < input.size(); i += 2) input[i] = 0.0f;
    const Tensor weights = random_tensor(Shape::kkcd(3, 3, 4), rng);
    const Tensor bias = random_tensor(Shape::vec(4), rng);
    const Tensor got = nn::conv2d(input, weights, bias, 1, Padding::same_tf);

    // same loop order and accumulator type, zeros included
    const int h = 5, w = 5, c = 3, k = 3, d = 4;
    Tensor want(Shape::hwc(h, w, d), 0.0f);
    std::vector<double> acc(d);
    for (int oy = 0; oy < h; ++oy)
        for (int ox = 0; ox < w; ++ox) {
            std::fill(acc.begin(), acc.end(), 0.0);
            for (int u = 0; u < k; ++u)
                for (int v = 0; v < k; ++v) {
                    const int iy = oy + u - 1, ix = ox + v - 1;
                    if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                    for (int ci = 0; ci < c; ++ci)
                        for (int di = 0; di < d; ++di)
                            acc[di] += static_cast<double>(input.at(iy, ix, ci)) * weights.at(u, v, ci, di);
                }
            for (int di = 0; di < d; ++di)
                want.at(oy, ox, di) = static_cast<float>(acc[di] + bias.at(di));
        }
    REQUIRE(got.same_bits(want));
}

TEST_CASE("depthwise convolution mixes no channels", "[nn]") {
    Rng rng(13);
    const Tensor input = random_tensor(Shape::hwc(6, 5, 4), rng);
    const Tensor weights = random_tensor(Shape::kkc(3, 4), rng);
    const Tensor bias = random_tensor(Shape::vec(4), rng);

    for (int stride : {1, 2}) {
        const Tensor got = nn::depthwise_conv(input, weights, bias, stride, Padding::same_tf);
        // reference: each channel convolved alone through the standard path
        for (int ch = 0; ch < 4; ++ch) {
            Tensor in1(Shape::hwc(6, 5, 1), 0.0f);
            for (int y = 0; y < 6; ++y)
                for (int x = 0; x < 5; ++x) in1.at(y, x, 0) = input.at(y, x, ch);
            Tensor w1(Shape::kkcd(3, 1, 1), 0.0f);
            for (int u = 0; u < 3; ++u)
                for (int v = 0; v < 3; ++v) w1.at(u, v, 0, 0) = weights.at(u, v, ch);
            Tensor b1(Shape::vec(1), 0.0f);
            b1.at(0) = bias.at(ch);
            const Tensor want = conv_oracle(in1, w1, b1, stride, Padding::same_tf);
            REQUIRE(got.shape()[0] == want.shape()[0]);
            REQUIRE(got.shape()[1] == want.shape()[1]);
            for (int y = 0; y < want.shape()[0]; ++y)
                for (int x = 0; x < want.shape()[1]; ++x)
                    REQUIRE_THAT(static_cast<double>(got.at(y, x, ch)),
                                 Catch::Matchers::WithinAbs(want.at(y, x, 0), 1e-5));
        }
    }
}

TEST_CASE("pointwise convolution is a per-pixel matrix product", "[nn]") {
    Rng rng(14);
    const Tensor input = random_tensor(Shape::hwc(4, 4, 5), rng);
    const Tensor weights = random_tensor(Shape::mat(5, 7), rng);
    const Tensor bias = random_tensor(Shape::vec(7), rng);
    const Tensor got = nn::pointwise_conv(input, weights, bias);
    REQUIRE(got.shape() == Shape::hwc(4, 4, 7));
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x)
            for (int di = 0; di < 7; ++di) {
                double acc = bias.at(di);
                for (int ci = 0; ci < 5; ++ci) {
                    acc += static_cast<double>(input.at(y, x, ci)) * weights.at(ci, di);
                }
                REQUIRE_THAT(static_cast<double>(got.at(y, x, di)),
                             Catch::Matchers::WithinAbs(acc, 1e-5));
            }
}

TEST_CASE("rank-one kernels make separable equal standard", "[nn]") {
    Rng rng(15);
    const Tensor input = random_tensor(Shape::hwc(9, 8, 3), rng);
    const Tensor dw = random_tensor(Shape::kkc(3, 3), rng);
    const Tensor pw = random_tensor(Shape::mat(3, 6), rng);
    Tensor full(Shape::kkcd(3, 3, 6), 0.0f);
    for (int u = 0; u < 3; ++u)
        for (int v = 0; v < 3; ++v)
            for (int c = 0; c < 3; ++c)
                for (int d = 0; d < 6; ++d) full.at(u, v, c, d) = dw.at(u, v, c) * pw.at(c, d);

    const Tensor zero3(Shape::vec(3), 0.0f);
    const Tensor zero6(Shape::vec(6), 0.0f);
    for (int stride : {1, 2}) {
        const Tensor standard = nn::conv2d(input, full, zero6, stride, Padding::same_tf);
        const Tensor separable = nn::pointwise_conv(
            nn::depthwise_conv(input, dw, zero3, stride, Padding::same_tf), pw, zero6);
        require_close(separable, standard, 1e-4);
    }
}

TEST_CASE("convolution shape guards", "[nn]") {
    Rng rng(16);
    const Tensor input = random_tensor(Shape::hwc(5, 5, 3), rng);
    const Tensor w = random_tensor(Shape::kkcd(3, 3, 4), rng);
    const Tensor b4 = random_tensor(Shape::vec(4), rng);

    REQUIRE_THROWS_AS(nn::conv2d(input, w, b4, 3, Padding::same_tf), ShapeError);
    REQUIRE_THROWS_AS(nn::conv2d(input, w, random_tensor(Shape::vec(3), rng), 1, Padding::same_tf),
                      ShapeError);
    REQUIRE_THROWS_AS(
        nn::conv2d(input, random_tensor(Shape::kkcd(3, 2, 4), rng), b4, 1, Padding::same_tf),
        ShapeError);
    REQUIRE_THROWS_AS(
        nn::depthwise_conv(input, random_tensor(Shape::kkc(3, 4), rng), b4, 1, Padding::same_tf),
        ShapeError);
    REQUIRE_THROWS_AS(nn::pointwise_conv(input, random_tensor(Shape::mat(4, 2), rng),
                                         random_tensor(Shape::vec(2), rng)),
                      ShapeError);
}

TEST_CASE("affine norm applies per-channel scale and shift", "[nn]") {
    Tensor input(Shape::hwc(1, 2, 2), 0.0f);
    input.at(0, 0, 0) = 1.0f;
    input.at(0, 0, 1) = 2.0f;
    input.at(0, 1, 0) = 3.0f;
    input.at(0, 1, 1) = 4.0f;
    Tensor scale(Shape::vec(2), 0.0f);
    scale.at(0) = 2.0f;
    scale.at(1) = -1.0f;
    Tensor shift(Shape::vec(2), 0.0f);
    shift.at(0) = 0.5f;
    shift.at(1) = 1.0f;
    const Tensor out = nn::affine_norm(input, scale, shift);
    REQUIRE(out.at(0, 0, 0) == 2.5f);
    REQUIRE(out.at(0, 0, 1) == -1.0f);
    REQUIRE(out.at(0, 1, 0) == 6.5f);
    REQUIRE(out.at(0, 1, 1) == -3.0f);

    REQUIRE_THROWS_AS(nn::affine_norm(input, scale, Tensor(Shape::vec(3), 0.0f)), ShapeError);
}

TEST_CASE("activation clamps", "[nn]") {
    Tensor v(Shape::vec(5), 0.0f);
    v.at(0) = -2.0f;
    v.at(1) = 0.0f;
    v.at(2) = 5.5f;
    v.at(3) = 6.0f;
    v.at(4) = 7.25f;
    const Tensor r = nn::relu(v);
    REQUIRE(r.at(0) == 0.0f);
    REQUIRE(r.at(2) == 5.5f);
    REQUIRE(r.at(4) == 7.25f);
    const Tensor r6 = nn::relu6(v);
    REQUIRE(r6.at(0) == 0.0f);
    REQUIRE(r6.at(2) == 5.5f);
    REQUIRE(r6.at(3) == 6.0f);
    REQUIRE(r6.at(4) == 6.0f);
}

TEST_CASE("softmax values and invariances", "[nn]") {
    Tensor logits(Shape::vec(2), 0.0f);
    logits.at(0) = 1.0f;
    logits.at(1) = 2.0f;
    const Tensor p = nn::softmax(logits);
    REQUIRE_THAT(static_cast<double>(p.at(0)), Catch::Matchers::WithinAbs(0.26894142136992605, 1e-7));
    REQUIRE_THAT(static_cast<double>(p.at(1)), Catch::Matchers::WithinAbs(0.7310585786300049, 1e-7));
    REQUIRE_THAT(static_cast<double>(p.at(0)) + p.at(1), Catch::Matchers::WithinAbs(1.0, 1e-6));

    Tensor shifted(Shape::vec(2), 0.0f);
    shifted.at(0) = 1001.0f;
    shifted.at(1) = 1002.0f;
    REQUIRE(nn::softmax(shifted).same_bits(p));

    Tensor extreme(Shape::vec(3), 0.0f);
    extreme.at(0) = 1000.0f;
    extreme.at(1) = -1000.0f;
    extreme.at(2) = 999.0f;
    const Tensor q = nn::softmax(extreme);
    REQUIRE(q.all_finite());
    REQUIRE(q.at(0) > 0.7f);
    REQUIRE(q.at(1) == 0.0f);

    Tensor bad(Shape::vec(2), 0.0f);
    bad.at(0) = std::numeric_limits<float>::infinity();
    REQUIRE_THROWS_AS(nn::softmax(bad), NumericError);
    REQUIRE_THROWS_AS(nn::softmax(Tensor(Shape::mat(2, 2), 0.0f)), std::invalid_argument);
}

TEST_CASE("multiply counts for the separable decomposition", "[nn]") {
    LayerSpec spec{LayerKind::conv2d, "x", 3, 1, 64, 128, Padding::same_tf};
    const nn::FlopsEstimate est = nn::flops_estimate(spec, 28, 28);
    REQUIRE(est.standard == 9ull * 64 * 128 * 28 * 28);
    REQUIRE(est.separable == (9ull * 64 + 64ull * 128) * 28 * 28);
    // separable * K^2 * D == standard * (K^2 + D), exactly
    REQUIRE(est.separable * 9 * 128 == est.standard * (9 + 128));
    REQUIRE_THAT(est.ratio, Catch::Matchers::WithinAbs(1.0 / 128 + 1.0 / 9, 1e-12));
    REQUIRE(est.ratio < 1.0 / 8.0);  // close to 9x cheaper for 3x3 kernels

    LayerSpec affine{LayerKind::affine_norm, "n", 1, 1, 8, 8, Padding::same_tf};
    REQUIRE_THROWS_AS(nn::flops_estimate(affine, 4, 4), std::domain_error);
}

TEST_CASE("backbone architecture shape", "[nn]") {
    const nn::ModelConfig cfg = nn::mobilenet_v1_config();
    REQUIRE(cfg.layers.size() == 86);
    REQUIRE(cfg.frozen_prefix == 81);
    REQUIRE_NOTHROW(nn::validate_model(cfg));

    REQUIRE(cfg.layers[0].kind == LayerKind::conv2d);
    REQUIRE(cfg.layers[0].name == "backbone.stem");
    REQUIRE(cfg.layers[0].stride == 2);
    REQUIRE(cfg.layers[0].in_channels == 3);
    REQUIRE(cfg.layers[0].out_channels == 32);

    int conv_count = 0, dw_count = 0, pw_count = 0, norm_count = 0;
    for (const auto& layer : cfg.layers) {
        conv_count += layer.kind == LayerKind::conv2d;
        dw_count += layer.kind == LayerKind::depthwise;
        pw_count += layer.kind == LayerKind::pointwise;
        norm_count += layer.kind == LayerKind::affine_norm;
    }
    REQUIRE(conv_count == 1);
    REQUIRE(dw_count == 13);
    REQUIRE(pw_count == 13);
    REQUIRE(norm_count == 27);

    REQUIRE(cfg.layers[3].name == "backbone.b01.dw");
    REQUIRE(cfg.layers[4].name == "backbone.b01.dw.norm");
    REQUIRE(cfg.layers[78].name == "backbone.b13.pw");
    REQUIRE(cfg.layers[78].out_channels == 1024);
    REQUIRE(cfg.layers[80].kind == LayerKind::relu6);
    REQUIRE(cfg.layers[81].kind == LayerKind::gap);
    REQUIRE(cfg.layers[82].name == "head.dense1");
    REQUIRE(cfg.layers[82].in_channels == 1024);
    REQUIRE(cfg.layers[82].out_channels == 256);
    REQUIRE(cfg.layers[84].name == "head.dense2");
    REQUIRE(cfg.layers[84].out_channels == 2);

    // width-doubling strides appear where the resolution halves
    std::vector<int> strides;
    for (const auto& layer : cfg.layers) {
        if (layer.kind == LayerKind::conv2d || layer.kind == LayerKind::depthwise) {
            strides.push_back(layer.stride);
        }
    }
    REQUIRE(strides == std::vector<int>{2, 1, 2, 1, 2, 1, 2, 1, 1, 1, 1, 1, 2, 1});
}

TEST_CASE("model validation rejects inconsistent configs", "[nn]") {
    nn::ModelConfig cfg = nn::mobilenet_v1_config();
    cfg.layers[3].in_channels = 64;
    REQUIRE_THROWS_AS(nn::validate_model(cfg), ConfigError);

    cfg = nn::mobilenet_v1_config();
    cfg.frozen_prefix = 80;
    REQUIRE_THROWS_AS(nn::validate_model(cfg), ConfigError);

    cfg = nn::mobilenet_v1_config();
    cfg.frozen_prefix = 82;
    REQUIRE_THROWS_AS(nn::validate_model(cfg), ConfigError);
}

TEST_CASE("forward pass composes the layer chain", "[nn]") {
    const nn::ModelConfig cfg = tiny_config();
    REQUIRE_NOTHROW(nn::validate_model(cfg));
    const WeightStore ws = tiny_weights(40);
    Rng rng(41);
    const Tensor input = random_tensor(Shape::hwc(8, 8, 2), rng, 0.0, 1.0);

    const Tensor features = nn::forward_features(cfg, ws, input);
    REQUIRE(features.shape() == Shape::vec(8));

    // identical composition by direct calls
    const Tensor zero4(Shape::vec(4), 0.0f);
    const Tensor zero8(Shape::vec(8), 0.0f);
    Tensor t = nn::conv2d(input, ws.get("c1.w"), zero4, 2, Padding::same_tf);
    t = nn::relu6(nn::affine_norm(t, ws.get("c1.norm.scale"), ws.get("c1.norm.shift")));
    t = nn::depthwise_conv(t, ws.get("d1.w"), zero4, 1, Padding::same_tf);
    t = nn::relu6(nn::affine_norm(t, ws.get("d1.norm.scale"), ws.get("d1.norm.shift")));
    t = nn::pointwise_conv(t, ws.get("p1.w"), zero8);
    t = nn::relu6(nn::affine_norm(t, ws.get("p1.norm.scale"), ws.get("p1.norm.shift")));
    REQUIRE(features.same_bits(reduce_mean_spatial(t)));

    const Tensor probs = nn::forward(cfg, ws, input);
    REQUIRE(probs.shape() == Shape::vec(2));
    REQUIRE_THAT(static_cast<double>(probs.at(0)) + probs.at(1),
                 Catch::Matchers::WithinAbs(1.0, 1e-6));
    Tensor head = matvec(ws.get("h1.w"), features, ws.get("h1.b"));
    head = nn::softmax(matvec(ws.get("h2.w"), nn::relu(head), ws.get("h2.b")));
    REQUIRE(probs.same_bits(head));
}

TEST_CASE("forward reports activation shapes through the hook", "[nn]") {
    const nn::ModelConfig cfg = tiny_config();
    const WeightStore ws = tiny_weights(42);
    Rng rng(43);
    const Tensor input = random_tensor(Shape::hwc(8, 8, 2), rng, 0.0, 1.0);

    std::vector<std::pair<std::size_t, Shape>> seen;
    nn::forward(cfg, ws, input, [&](std::size_t i, const LayerSpec&, const Tensor& t) {
        seen.emplace_back(i, t.shape());
    });
    REQUIRE(seen.size() == cfg.layers.size());
    REQUIRE(seen[0].second == Shape::hwc(4, 4, 4));
    REQUIRE(seen[8].second == Shape::hwc(4, 4, 8));
    REQUIRE(seen[9].second == Shape::vec(8));
    REQUIRE(seen[13].second == Shape::vec(2));
    for (std::size_t i = 0; i < seen.size(); ++i) REQUIRE(seen[i].first == i);
}

TEST_CASE("forward rejects bad inputs and missing weights", "[nn]") {
    const nn::ModelConfig cfg = tiny_config();
    WeightStore ws = tiny_weights(44);
    Rng rng(45);
    const Tensor input = random_tensor(Shape::hwc(8, 8, 2), rng);

    REQUIRE_THROWS_AS(nn::forward(cfg, ws, random_tensor(Shape::hwc(4, 8, 2), rng)), ShapeError);

    WeightStore partial;
    for (const auto& [name, tensor] : ws.entries()) {
        if (name != "p1.w") partial.add(name, tensor);
    }
    REQUIRE_THROWS_WITH(nn::forward(cfg, partial, input),
                        Catch::Matchers::ContainsSubstring("p1.w"));

    ws.replace("c1.w", Tensor(Shape::kkcd(3, 2, 5), 0.5f));
    REQUIRE_THROWS_AS(nn::forward(cfg, ws, input), LookupError);
}

TEST_CASE("full-size features are finite and deterministic", "[nn]") {
    const nn::ModelConfig cfg = nn::mobilenet_v1_config();
    const WeightStore ws = nn::init_backbone_random(7);
    Tensor input(Shape::hwc(128, 128, 3), 0.25f);
    const Tensor features = nn::forward_features(cfg, ws, input);
    REQUIRE(features.shape() == Shape::vec(1024));
    REQUIRE(features.all_finite());
    double sumsq = 0.0;
    for (std::size_t i = 0; i < features.size(); ++i) {
        sumsq += static_cast<double>(features[i]) * features[i];
    }
    REQUIRE(std::sqrt(sumsq / 1024.0) > 0.01);
    REQUIRE(nn::forward_features(cfg, ws, input).same_bits(features));
}

TEST_CASE("random backbone draws are seeded and bounded", "[nn]") {
    const WeightStore a = nn::init_backbone_random(1);
    const WeightStore b = nn::init_backbone_random(1);
    const WeightStore c = nn::init_backbone_random(2);
    REQUIRE(a.same_bits(b));
    REQUIRE_FALSE(a.same_bits(c));
    REQUIRE(a.count() == 81);  // 27 conv kernels + 27 affine pairs

    const Tensor& stem = a.get("backbone.stem.w");
    const double bound = std::sqrt(6.0 / 27.0);
    float peak = 0.0f;
    for (std::size_t i = 0; i < stem.size(); ++i) {
        REQUIRE(std::abs(stem[i]) < bound);
        peak = std::max(peak, std::abs(stem[i]));
    }
    REQUIRE(peak > 0.8 * bound);

    const Tensor& dw = a.get("backbone.b01.dw.w");
    const double dw_bound = std::sqrt(6.0 / 9.0);
    for (std::size_t i = 0; i < dw.size(); ++i) REQUIRE(std::abs(dw[i]) < dw_bound);

    const Tensor& scale = a.get("backbone.b07.pw.norm.scale");
    const Tensor& shift = a.get("backbone.b07.pw.norm.shift");
    for (std::size_t i = 0; i < scale.size(); ++i) {
        REQUIRE(scale[i] == nn::kRandomAffineGain);
        REQUIRE(shift[i] == 0.0f);
    }
}
