#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mritherm/mritherm.hpp"

using namespace mritherm;
using eval::ConfusionMatrix;

TEST_CASE("confusion counts by quadrant", "[eval]") {
    const ConfusionMatrix cm = eval::confusion({1, 1, 0, 0, 1}, {1, 0, 0, 1, 1});
    REQUIRE(cm.tp == 2);
    REQUIRE(cm.fp == 1);
    REQUIRE(cm.fn == 1);
    REQUIRE(cm.tn == 1);
    REQUIRE(cm.total() == 5);

    REQUIRE_THROWS_AS(eval::confusion({1, 0}, {1}), ShapeError);
    REQUIRE_THROWS_AS(eval::confusion({}, {}), ConfigError);
    REQUIRE_THROWS_WITH(eval::confusion({1, 2}, {1, 1}),
                        Catch::Matchers::ContainsSubstring("index 1"));
}

TEST_CASE("holdout matrix of the reference run", "[eval]") {
    const ConfusionMatrix cm{306, 2, 5, 287};
    const eval::Metrics m = eval::metrics(cm);
    REQUIRE(m.precision.has_value());
    REQUIRE(m.recall.has_value());
    REQUIRE(m.f1.has_value());
    REQUIRE_THAT(*m.precision, Catch::Matchers::WithinAbs(0.9935064935064936, 1e-12));
    REQUIRE_THAT(*m.recall, Catch::Matchers::WithinAbs(0.9839228295819936, 1e-12));
    REQUIRE_THAT(*m.f1, Catch::Matchers::WithinAbs(0.9886914378029079, 1e-12));
    REQUIRE_THAT(m.accuracy, Catch::Matchers::WithinAbs(0.9883333333333333, 1e-12));

    // rounds to the headline three-decimal figures
    REQUIRE_THAT(*m.precision, Catch::Matchers::WithinAbs(0.994, 5e-4));
    REQUIRE_THAT(*m.recall, Catch::Matchers::WithinAbs(0.984, 5e-4));
    REQUIRE_THAT(*m.f1, Catch::Matchers::WithinAbs(0.989, 5e-4));
    REQUIRE_THAT(m.accuracy, Catch::Matchers::WithinAbs(0.988, 5e-4));
}

TEST_CASE("degenerate matrices make metrics undefined, not zero", "[eval]") {
    const eval::Metrics perfect = eval::metrics({10, 0, 0, 10});
    REQUIRE(*perfect.precision == 1.0);
    REQUIRE(*perfect.recall == 1.0);
    REQUIRE(*perfect.f1 == 1.0);
    REQUIRE(perfect.accuracy == 1.0);

    // nothing predicted positive, nothing actually positive
    const eval::Metrics tn_only = eval::metrics({0, 0, 0, 5});
    REQUIRE_FALSE(tn_only.precision.has_value());
    REQUIRE_FALSE(tn_only.recall.has_value());
    REQUIRE_FALSE(tn_only.f1.has_value());
    REQUIRE(tn_only.accuracy == 1.0);

    // positives predicted but none exist: precision 0, recall undefined
    const eval::Metrics fp_only = eval::metrics({0, 3, 0, 0});
    REQUIRE(fp_only.precision.has_value());
    REQUIRE(*fp_only.precision == 0.0);
    REQUIRE_FALSE(fp_only.recall.has_value());
    REQUIRE_FALSE(fp_only.f1.has_value());
    REQUIRE(fp_only.accuracy == 0.0);

    // precision and recall both zero: their harmonic mean has no value
    const eval::Metrics both_zero = eval::metrics({0, 2, 3, 1});
    REQUIRE(*both_zero.precision == 0.0);
    REQUIRE(*both_zero.recall == 0.0);
    REQUIRE_FALSE(both_zero.f1.has_value());
    REQUIRE_THAT(both_zero.accuracy, Catch::Matchers::WithinAbs(1.0 / 6.0, 1e-15));

    REQUIRE_THROWS_AS(eval::metrics({0, 0, 0, 0}), ConfigError);
    REQUIRE_THROWS_AS(eval::metrics({-1, 0, 0, 5}), ConfigError);
}

TEST_CASE("metrics agree with a recount on random labels", "[eval]") {
    Rng rng(99);
    std::vector<int> preds(1000), truth(1000);
    for (std::size_t i = 0; i < preds.size(); ++i) {
        preds[i] = static_cast<int>(rng.below(2));
        truth[i] = static_cast<int>(rng.below(2));
    }
    const ConfusionMatrix cm = eval::confusion(preds, truth);

    std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        tp += preds[i] == 1 && truth[i] == 1;
        fp += preds[i] == 1 && truth[i] == 0;
        fn += preds[i] == 0 && truth[i] == 1;
        tn += preds[i] == 0 && truth[i] == 0;
    }
    REQUIRE(cm.tp == tp);
    REQUIRE(cm.fp == fp);
    REQUIRE(cm.fn == fn);
    REQUIRE(cm.tn == tn);
    REQUIRE(cm.total() == 1000);

    const eval::Metrics m = eval::metrics(cm);
    for (double v : {*m.precision, *m.recall, *m.f1, m.accuracy}) {
        REQUIRE(v >= 0.0);
        REQUIRE(v <= 1.0);
    }
    REQUIRE_THAT(*m.f1,
                 Catch::Matchers::WithinAbs(2.0 * *m.precision * *m.recall /
                                                (*m.precision + *m.recall), 1e-15));
    REQUIRE(*m.f1 >= std::min(*m.precision, *m.recall));
    REQUIRE(*m.f1 <= std::max(*m.precision, *m.recall));

    // swapping both label sets flips the quadrants but keeps accuracy
    std::vector<int> preds_sw = preds, truth_sw = truth;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        preds_sw[i] = 1 - preds[i];
        truth_sw[i] = 1 - truth[i];
    }
    const ConfusionMatrix sw = eval::confusion(preds_sw, truth_sw);
    REQUIRE(sw.tp == cm.tn);
    REQUIRE(sw.tn == cm.tp);
    REQUIRE(sw.fp == cm.fn);
    REQUIRE(sw.fn == cm.fp);
    REQUIRE(eval::metrics(sw).accuracy == m.accuracy);
}

TEST_CASE("json report bytes are stable", "[eval]") {
    const std::string got = eval::render_report_json({306, 2, 5, 287});
    REQUIRE(got ==
            "{\n"
            "  \"tp\": 306,\n"
            "  \"fp\": 2,\n"
            "  \"fn\": 5,\n"
            "  \"tn\": 287,\n"
            "  \"precision\": 0.993506,\n"
            "  \"recall\": 0.983923,\n"
            "  \"f1\": 0.988691,\n"
            "  \"accuracy\": 0.988333\n"
            "}\n");

    const std::string undef = eval::render_report_json({0, 0, 0, 5});
    REQUIRE_THAT(undef, Catch::Matchers::ContainsSubstring("\"precision\": null"));
    REQUIRE_THAT(undef, Catch::Matchers::ContainsSubstring("\"f1\": null"));
    REQUIRE_THAT(undef, Catch::Matchers::ContainsSubstring("\"accuracy\": 1.000000"));
}

TEST_CASE("table report spells out undefined metrics", "[eval]") {
    const std::string table = eval::render_report_table({0, 0, 0, 5});
    REQUIRE_THAT(table, Catch::Matchers::ContainsSubstring("undefined"));
    REQUIRE_THAT(table, Catch::Matchers::ContainsSubstring("accuracy   1.000000"));

    const std::string full = eval::render_report_table({306, 2, 5, 287});
    REQUIRE_THAT(full, Catch::Matchers::ContainsSubstring("306"));
    REQUIRE_THAT(full, Catch::Matchers::ContainsSubstring("287"));
    REQUIRE_THAT(full, Catch::Matchers::ContainsSubstring("precision  0.993506"));
}

TEST_CASE("report file holds the json rendering", "[eval]") {
    const auto dir = std::filesystem::temp_directory_path() / "mritherm_eval_test";
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "report.json").string();
    eval::write_report(path, {306, 2, 5, 287});
    std::ifstream in(path, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    REQUIRE(buf.str() == eval::render_report_json({306, 2, 5, 287}));
    std::filesystem::remove_all(dir);
}
