#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "mritherm/errors.hpp"
#include "mritherm/nn.hpp"
#include "mritherm/rng.hpp"
#include "mritherm/tensor.hpp"
#include "mritherm/weights.hpp"

namespace mritherm {
namespace train {

struct TrainConfig {
    int batch_size = 32;
    int epochs = 50;
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    int patience = 5;
    double split = 0.8;  // train fraction; remainder validates
    std::uint64_t seed = 0;

    void validate() const {
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
        if (epochs < 1) throw ConfigError("epochs must be >= 1");
        if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
        if (!(split > 0.0 && split < 1.0)) throw ConfigError("split must lie in (0,1)");
        if (patience < 1) throw ConfigError("patience must be >= 1");
        if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
            throw ConfigError("adam betas must lie in [0,1)");
        }
        if (!(epsilon > 0.0)) throw ConfigError("adam epsilon must be > 0");
    }
};

/// Cached backbone features with one-hot labels. features is [N x F] and
/// labels_onehot is [N x 2]; both stay default-constructed when N == 0.
struct LabeledFeatures {
    Tensor features;
    Tensor labels_onehot;

    std::size_t count() const {
        return features.shape().rank() == 2 ? static_cast<std::size_t>(features.shape()[0]) : 0;
    }
    int feature_dim() const { return features.shape().rank() == 2 ? features.shape()[1] : 0; }

    int label(std::size_t row) const {
        return labels_onehot.at(static_cast<int>(row), 1) > 0.5f ? 1 : 0;
    }

    Tensor feature_row(std::size_t row) const {
        Tensor out(Shape::vec(feature_dim()), 0.0f);
        const float* src = features.data() + row * static_cast<std::size_t>(feature_dim());
        for (int j = 0; j < feature_dim(); ++j) out.at(j) = src[j];
        return out;
    }
};

/// Row subset, in the order given.
inline LabeledFeatures slice(const LabeledFeatures& data, const std::vector<std::size_t>& rows) {
    if (rows.empty()) return {};
    LabeledFeatures out;
    const int f = data.feature_dim();
    out.features = Tensor(Shape::mat(static_cast<int>(rows.size()), f), 0.0f);
    out.labels_onehot = Tensor(Shape::mat(static_cast<int>(rows.size()), 2), 0.0f);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= data.count()) throw ShapeError("slice: row index out of range");
        const float* src = data.features.data() + rows[i] * static_cast<std::size_t>(f);
        float* dst = out.features.data() + i * static_cast<std::size_t>(f);
        for (int j = 0; j < f; ++j) dst[j] = src[j];
        out.labels_onehot.at(static_cast<int>(i), 0) = data.labels_onehot.at(static_cast<int>(rows[i]), 0);
        out.labels_onehot.at(static_cast<int>(i), 1) = data.labels_onehot.at(static_cast<int>(rows[i]), 1);
    }
    return out;
}

/// Runs backbone + GAP once per image and pairs the cached features with
/// one-hot labels. Labels must be 0 or 1.
inline LabeledFeatures extract_features(const nn::ModelConfig& cfg, const WeightStore& ws,
                                        const std::vector<Tensor>& images,
                                        const std::vector<int>& labels) {
    if (images.size() != labels.size()) {
        throw ShapeError("extract_features: " + std::to_string(images.size()) + " images vs " +
                         std::to_string(labels.size()) + " labels");
    }
    if (images.empty()) return {};
    const Shape want = Shape::hwc(cfg.input_h, cfg.input_w, cfg.input_c);
    LabeledFeatures out;
    for (std::size_t i = 0; i < images.size(); ++i) {
        if (images[i].shape() != want) {
            throw ShapeError("extract_features: image " + std::to_string(i) + " has shape " +
                             images[i].shape().str() + ", expected " + want.str());
        }
        if (labels[i] != 0 && labels[i] != 1) {
            throw ConfigError("extract_features: image " + std::to_string(i) + " has label " +
                              std::to_string(labels[i]) + ", expected 0 or 1");
        }
        Tensor feat = nn::forward_features(cfg, ws, images[i]);
        if (i == 0) {
            out.features = Tensor(Shape::mat(static_cast<int>(images.size()), feat.shape()[0]), 0.0f);
            out.labels_onehot = Tensor(Shape::mat(static_cast<int>(images.size()), 2), 0.0f);
        }
        float* dst = out.features.data() + i * feat.size();
        for (std::size_t j = 0; j < feat.size(); ++j) dst[j] = feat[j];
        out.labels_onehot.at(static_cast<int>(i), labels[i]) = 1.0f;
    }
    return out;
}

/// Categorical cross-entropy against a one-hot target, with the probability
/// clamped at 1e-12 inside the log so saturated softmax stays finite.
inline double cross_entropy(const Tensor& pred, const Tensor& target) {
    if (pred.shape().rank() != 1 || target.shape().rank() != 1 ||
        pred.shape()[0] != target.shape()[0]) {
        throw ShapeError("cross_entropy: prediction " + pred.shape().str() + " vs target " +
                         target.shape().str());
    }
    double loss = 0.0;
    for (int k = 0; k < pred.shape()[0]; ++k) {
        double p = std::max(static_cast<double>(pred.at(k)), 1e-12);
        loss -= static_cast<double>(target.at(k)) * std::log(p);
    }
    return loss;
}

// ---------------------------------------------------------------------------
// Head: dense -> relu -> dense -> softmax over cached features
// ---------------------------------------------------------------------------

struct HeadWeights {
    Tensor w1;  // [hidden x feature]
    Tensor b1;  // [hidden]
    Tensor w2;  // [classes x hidden]
    Tensor b2;  // [classes]
};

inline Tensor predict_head(const HeadWeights& hw, const Tensor& features) {
    Tensor h = nn::relu(matvec(hw.w1, features, hw.b1));
    return nn::softmax(matvec(hw.w2, h, hw.b2));
}

/// Argmax with ties resolved toward the lower class index.
inline int argmax_label(const Tensor& probs) {
    int best = 0;
    for (int k = 1; k < probs.shape()[0]; ++k) {
        if (probs.at(k) > probs.at(best)) best = k;
    }
    return best;
}

struct HeadGradients {
    Tensor w1, b1, w2, b2;
    double loss = 0.0;  // mean cross-entropy over the batch
};

/// Analytic gradients of mean cross-entropy over the batch. Softmax and the
/// loss fuse to (pred - target) at the logits; the relu gate uses the strict
/// pre-activation sign.
inline HeadGradients head_gradients(const LabeledFeatures& batch, const HeadWeights& hw) {
    const std::size_t n = batch.count();
    if (n == 0) throw ConfigError("head_gradients: empty batch");
    const int f = hw.w1.shape()[1];
    const int hidden = hw.w1.shape()[0];
    const int classes = hw.w2.shape()[0];
    if (batch.feature_dim() != f) {
        throw ShapeError("head_gradients: feature dim " + std::to_string(batch.feature_dim()) +
                         " vs weight " + hw.w1.shape().str());
    }

    std::vector<double> gw1(static_cast<std::size_t>(hidden) * f, 0.0);
    std::vector<double> gb1(static_cast<std::size_t>(hidden), 0.0);
    std::vector<double> gw2(static_cast<std::size_t>(classes) * hidden, 0.0);
    std::vector<double> gb2(static_cast<std::size_t>(classes), 0.0);
    double loss = 0.0;

    for (std::size_t s = 0; s < n; ++s) {
        const float* x = batch.features.data() + s * static_cast<std::size_t>(f);
        Tensor xv(Shape::vec(f), 0.0f);
        for (int j = 0; j < f; ++j) xv.at(j) = x[j];
        Tensor pre1 = matvec(hw.w1, xv, hw.b1);
        Tensor h = nn::relu(pre1);
        Tensor p = nn::softmax(matvec(hw.w2, h, hw.b2));

        std::vector<double> dz(static_cast<std::size_t>(classes));
        for (int k = 0; k < classes; ++k) {
            const double t = batch.labels_onehot.at(static_cast<int>(s), k);
            loss -= t * std::log(std::max(static_cast<double>(p.at(k)), 1e-12));
            dz[static_cast<std::size_t>(k)] = static_cast<double>(p.at(k)) - t;
        }
        for (int k = 0; k < classes; ++k) {
            gb2[static_cast<std::size_t>(k)] += dz[static_cast<std::size_t>(k)];
            double* row = gw2.data() + static_cast<std::size_t>(k) * hidden;
            for (int j = 0; j < hidden; ++j) row[j] += dz[static_cast<std::size_t>(k)] * h.at(j);
        }
        for (int j = 0; j < hidden; ++j) {
            if (!(pre1.at(j) > 0.0f)) continue;
            double dh = 0.0;
            for (int k = 0; k < classes; ++k) dh += dz[static_cast<std::size_t>(k)] * hw.w2.at(k, j);
            gb1[static_cast<std::size_t>(j)] += dh;
            double* row = gw1.data() + static_cast<std::size_t>(j) * f;
            for (int i = 0; i < f; ++i) row[i] += dh * x[i];
        }
    }

    const double inv = 1.0 / static_cast<double>(n);
    HeadGradients g;
    g.loss = loss * inv;
    g.w1 = Tensor(hw.w1.shape(), 0.0f);
    g.b1 = Tensor(hw.b1.shape(), 0.0f);
    g.w2 = Tensor(hw.w2.shape(), 0.0f);
    g.b2 = Tensor(hw.b2.shape(), 0.0f);
    for (std::size_t i = 0; i < gw1.size(); ++i) g.w1[i] = static_cast<float>(gw1[i] * inv);
    for (std::size_t i = 0; i < gb1.size(); ++i) g.b1[i] = static_cast<float>(gb1[i] * inv);
    for (std::size_t i = 0; i < gw2.size(); ++i) g.w2[i] = static_cast<float>(gw2[i] * inv);
    for (std::size_t i = 0; i < gb2.size(); ++i) g.b2[i] = static_cast<float>(gb2[i] * inv);
    return g;
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamState {
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    std::int64_t t = 0;
};

inline AdamState adam_init(const std::vector<const Tensor*>& params) {
    AdamState state;
    for (const Tensor* p : params) {
        state.m.emplace_back(p->shape(), 0.0f);
        state.v.emplace_back(p->shape(), 0.0f);
    }
    return state;
}

/// One bias-corrected Adam update over a parameter group. The step counter
/// advances once per call.
inline void adam_step(AdamState& state, const std::vector<Tensor*>& params,
                      const std::vector<const Tensor*>& grads, const TrainConfig& cfg) {
    if (params.size() != grads.size() || params.size() != state.m.size()) {
        throw ShapeError("adam_step: parameter/gradient/state group sizes disagree");
    }
    state.t += 1;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = *params[i];
        const Tensor& g = *grads[i];
        if (p.shape() != g.shape() || p.shape() != state.m[i].shape()) {
            throw ShapeError("adam_step: shape mismatch in parameter " + std::to_string(i));
        }
        if (!g.all_finite()) {
            throw NumericError("adam_step: non-finite gradient in parameter " + std::to_string(i) +
                               ", training aborted");
        }
        Tensor& m = state.m[i];
        Tensor& v = state.v[i];
        for (std::size_t j = 0; j < p.size(); ++j) {
            const double gj = g[j];
            const double mj = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * gj;
            const double vj = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * gj * gj;
            m[j] = static_cast<float>(mj);
            v[j] = static_cast<float>(vj);
            const double mhat = mj / c1;
            const double vhat = vj / c2;
            p[j] = static_cast<float>(p[j] - cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon));
        }
    }
}

// ---------------------------------------------------------------------------
// Early stopping
// ---------------------------------------------------------------------------

/// Strict-improvement watcher with zero minimum delta: an epoch counts as
/// improved only when its loss is strictly below the best seen.
struct EarlyStopping {
    int patience = 5;
    double best = std::numeric_limits<double>::infinity();
    int best_epoch = 0;
    int bad_epochs = 0;

    // returns whether this epoch improved
    bool observe(int epoch, double val_loss) {
        if (val_loss < best) {
            best = val_loss;
            best_epoch = epoch;
            bad_epochs = 0;
            return true;
        }
        bad_epochs += 1;
        return false;
    }

    bool should_stop() const { return bad_epochs >= patience; }
};

// ---------------------------------------------------------------------------
// Split and fit
// ---------------------------------------------------------------------------

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
};

/// Per-class split after one seeded shuffle: each class contributes
/// floor(split * n_c) rows to the training set and the remainder to
/// validation. Requires at least 2 samples in each of the two classes.
inline SplitIndices stratified_split(const std::vector<int>& labels, double split, Rng& rng) {
    std::vector<std::size_t> order(labels.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);

    std::size_t counts[2] = {0, 0};
    for (int l : labels) {
        if (l != 0 && l != 1) throw ConfigError("stratified_split: label must be 0 or 1");
        counts[l] += 1;
    }
    if (counts[0] < 2 || counts[1] < 2) {
        throw ConfigError("stratified_split: need at least 2 samples per class, got " +
                          std::to_string(counts[0]) + " and " + std::to_string(counts[1]));
    }
    std::size_t want_train[2];
    for (int c = 0; c < 2; ++c) {
        want_train[c] = static_cast<std::size_t>(split * static_cast<double>(counts[c]));
        if (want_train[c] == 0) want_train[c] = 1;
        if (want_train[c] == counts[c]) want_train[c] = counts[c] - 1;
    }
    SplitIndices out;
    std::size_t taken[2] = {0, 0};
    for (std::size_t idx : order) {
        const int c = labels[idx];
        if (taken[c] < want_train[c]) {
            out.train.push_back(idx);
            taken[c] += 1;
        } else {
            out.val.push_back(idx);
        }
    }
    return out;
}

inline SplitIndices stratified_split(const std::vector<int>& labels, double split, std::uint64_t seed) {
    Rng rng(seed);
    return stratified_split(labels, split, rng);
}

struct HistoryRow {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_accuracy = 0.0;
};

struct FitResult {
    HeadWeights head;
    std::vector<HistoryRow> history;
    int best_epoch = 0;
    double best_val_loss = 0.0;
};

struct FitHooks {
    // Test seam: substitutes the validation loss fed to the stopping logic.
    std::function<double(int epoch, double measured)> val_loss;
};

namespace detail {

inline void fill_uniform(Tensor& t, double bound, Rng& rng) {
    for (std::size_t i = 0; i < t.size(); ++i) {
        t[i] = static_cast<float>(rng.uniform(-bound, bound));
    }
}

struct EvalOutcome {
    double loss = 0.0;
    double accuracy = 0.0;
};

inline EvalOutcome evaluate_head(const LabeledFeatures& data, const std::vector<std::size_t>& rows,
                                 const HeadWeights& hw) {
    EvalOutcome out;
    std::size_t correct = 0;
    for (std::size_t idx : rows) {
        Tensor p = predict_head(hw, data.feature_row(idx));
        Tensor target(Shape::vec(2), 0.0f);
        target.at(data.label(idx)) = 1.0f;
        out.loss += cross_entropy(p, target);
        if (argmax_label(p) == data.label(idx)) correct += 1;
    }
    out.loss /= static_cast<double>(rows.size());
    out.accuracy = static_cast<double>(correct) / static_cast<double>(rows.size());
    return out;
}

}  // namespace detail

/// Trains the two dense layers on cached features. Deterministic given
/// cfg.seed: one shuffle feeds the stratified split, then the same stream
/// draws the head initialization and every epoch's batch order. Stops early
/// after `patience` epochs without strict validation-loss improvement and
/// returns the best epoch's weights.
inline FitResult fit_head(const LabeledFeatures& data, const TrainConfig& cfg,
                          const FitHooks& hooks = {}) {
    cfg.validate();
    const std::size_t n = data.count();
    if (n < 4) throw ConfigError("fit_head: need at least 4 samples");
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = data.label(i);

    Rng rng(cfg.seed);
    SplitIndices split = stratified_split(labels, cfg.split, rng);

    const int f = data.feature_dim();
    const int hidden = 256;
    const int classes = 2;
    HeadWeights hw;
    hw.w1 = Tensor(Shape::mat(hidden, f), 0.0f);
    hw.b1 = Tensor(Shape::vec(hidden), 0.0f);
    hw.w2 = Tensor(Shape::mat(classes, hidden), 0.0f);
    hw.b2 = Tensor(Shape::vec(classes), 0.0f);
    detail::fill_uniform(hw.w1, std::sqrt(6.0 / f), rng);
    detail::fill_uniform(hw.w2, std::sqrt(6.0 / (hidden + classes)), rng);

    AdamState adam = adam_init({&hw.w1, &hw.b1, &hw.w2, &hw.b2});
    EarlyStopping stopper{cfg.patience};
    HeadWeights best = hw;

    FitResult result;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        rng.shuffle(split.train);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < split.train.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(split.train.size(), start + cfg.batch_size);
            std::vector<std::size_t> batch(split.train.begin() + start, split.train.begin() + end);
            HeadGradients g = head_gradients(slice(data, batch), hw);
            loss_sum += g.loss * static_cast<double>(batch.size());
            adam_step(adam, {&hw.w1, &hw.b1, &hw.w2, &hw.b2}, {&g.w1, &g.b1, &g.w2, &g.b2}, cfg);
        }
        const double train_loss = loss_sum / static_cast<double>(split.train.size());
        detail::EvalOutcome val = detail::evaluate_head(data, split.val, hw);
        double val_loss = hooks.val_loss ? hooks.val_loss(epoch, val.loss) : val.loss;
        if (!std::isfinite(train_loss) || !std::isfinite(val_loss)) {
            throw NumericError("fit_head: non-finite loss at epoch " + std::to_string(epoch));
        }
        result.history.push_back({epoch, train_loss, val_loss, val.accuracy});
        if (stopper.observe(epoch, val_loss)) best = hw;
        if (stopper.should_stop()) break;
    }
    result.head = best;
    result.best_epoch = stopper.best_epoch;
    result.best_val_loss = stopper.best;
    return result;
}

// ---------------------------------------------------------------------------
// Persistence glue
// ---------------------------------------------------------------------------

inline void append_head(WeightStore& ws, const HeadWeights& hw) {
    ws.add("head.dense1.w", hw.w1);
    ws.add("head.dense1.b", hw.b1);
    ws.add("head.dense2.w", hw.w2);
    ws.add("head.dense2.b", hw.b2);
}

inline HeadWeights head_from_store(const WeightStore& ws) {
    HeadWeights hw;
    hw.w1 = ws.get("head.dense1.w");
    hw.b1 = ws.get("head.dense1.b");
    hw.w2 = ws.get("head.dense2.w");
    hw.b2 = ws.get("head.dense2.b");
    if (hw.w1.shape().rank() != 2 || hw.w2.shape().rank() != 2 ||
        hw.w1.shape()[0] != hw.b1.shape()[0] || hw.w2.shape()[0] != hw.b2.shape()[0] ||
        hw.w2.shape()[1] != hw.w1.shape()[0]) {
        throw LookupError("head weights have inconsistent shapes");
    }
    return hw;
}

/// One row per epoch: epoch,train_loss,val_loss,val_accuracy.
inline void write_history_csv(const std::string& path, const std::vector<HistoryRow>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open history file " + path);
    out << "epoch,train_loss,val_loss,val_accuracy\n";
    char line[160];
    for (const HistoryRow& r : rows) {
        std::snprintf(line, sizeof(line), "%d,%.9g,%.9g,%.9g\n", r.epoch, r.train_loss, r.val_loss,
                      r.val_accuracy);
        out << line;
    }
    if (!out) throw FormatError("failed writing history file " + path);
}

}  // namespace train
}  // namespace mritherm
