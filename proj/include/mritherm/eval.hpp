#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "mritherm/errors.hpp"

namespace mritherm {
namespace eval {

/// Binary confusion counts with the tumor class (label 1) as positive.
struct ConfusionMatrix {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;
    std::int64_t tn = 0;

    std::int64_t total() const { return tp + fp + fn + tn; }
};

inline ConfusionMatrix confusion(const std::vector<int>& preds, const std::vector<int>& truth) {
    if (preds.size() != truth.size()) {
        throw ShapeError("confusion: " + std::to_string(preds.size()) + " predictions vs " +
                         std::to_string(truth.size()) + " truths");
    }
    if (preds.empty()) throw ConfigError("confusion: need at least one sample");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const int p = preds[i];
        const int t = truth[i];
        if ((p != 0 && p != 1) || (t != 0 && t != 1)) {
            throw ConfigError("confusion: labels must be 0 or 1 at index " + std::to_string(i));
        }
        if (p == 1 && t == 1) cm.tp += 1;
        else if (p == 1 && t == 0) cm.fp += 1;
        else if (p == 0 && t == 1) cm.fn += 1;
        else cm.tn += 1;
    }
    return cm;
}

/// Metrics whose denominators can vanish are optionals: an undefined value is
/// surfaced as such, never silently coerced to 0.
struct Metrics {
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> f1;
    double accuracy = 0.0;
};

inline Metrics metrics(const ConfusionMatrix& cm) {
    if (cm.tp < 0 || cm.fp < 0 || cm.fn < 0 || cm.tn < 0) {
        throw ConfigError("metrics: negative count");
    }
    if (cm.total() < 1) throw ConfigError("metrics: empty confusion matrix");
    Metrics m;
    if (cm.tp + cm.fp > 0) m.precision = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp);
    if (cm.tp + cm.fn > 0) m.recall = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn);
    if (m.precision && m.recall && *m.precision + *m.recall > 0.0) {
        m.f1 = 2.0 * *m.precision * *m.recall / (*m.precision + *m.recall);
    }
    m.accuracy = static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
    return m;
}

namespace detail {

inline std::string metric_json(const std::optional<double>& v) {
    if (!v) return "null";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", *v);
    return buf;
}

inline std::string metric_text(const std::optional<double>& v) {
    if (!v) return "undefined";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", *v);
    return buf;
}

}  // namespace detail

/// Machine-readable report, fixed key order tp,fp,fn,tn,precision,recall,f1,
/// accuracy. Undefined metrics render as null.
inline std::string render_report_json(const ConfusionMatrix& cm) {
    const Metrics m = metrics(cm);
    std::string out = "{\n";
    out += "  \"tp\": " + std::to_string(cm.tp) + ",\n";
    out += "  \"fp\": " + std::to_string(cm.fp) + ",\n";
    out += "  \"fn\": " + std::to_string(cm.fn) + ",\n";
    out += "  \"tn\": " + std::to_string(cm.tn) + ",\n";
    out += "  \"precision\": " + detail::metric_json(m.precision) + ",\n";
    out += "  \"recall\": " + detail::metric_json(m.recall) + ",\n";
    out += "  \"f1\": " + detail::metric_json(m.f1) + ",\n";
    out += "  \"accuracy\": " + detail::metric_json(m.accuracy) + "\n";
    out += "}\n";
    return out;
}

/// Human-readable companion to the JSON report.
inline std::string render_report_table(const ConfusionMatrix& cm) {
    const Metrics m = metrics(cm);
    char buf[256];
    std::string out = "confusion matrix (rows actual, cols predicted; positive = tumor)\n";
    std::snprintf(buf, sizeof(buf), "%-16s %10s %10s\n", "", "tumor", "no tumor");
    out += buf;
    std::snprintf(buf, sizeof(buf), "%-16s %10lld %10lld\n", "actual tumor",
                  static_cast<long long>(cm.tp), static_cast<long long>(cm.fn));
    out += buf;
    std::snprintf(buf, sizeof(buf), "%-16s %10lld %10lld\n", "actual no tumor",
                  static_cast<long long>(cm.fp), static_cast<long long>(cm.tn));
    out += buf;
    out += "\n";
    out += "precision  " + detail::metric_text(m.precision) + "\n";
    out += "recall     " + detail::metric_text(m.recall) + "\n";
    out += "f1         " + detail::metric_text(m.f1) + "\n";
    out += "accuracy   " + detail::metric_text(m.accuracy) + "\n";
    return out;
}

inline void write_report(const std::string& path, const ConfusionMatrix& cm) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open report file " + path);
    out << render_report_json(cm);
    if (!out) throw FormatError("failed writing report file " + path);
}

}  // namespace eval
}  // namespace mritherm
