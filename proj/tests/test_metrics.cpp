#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "nesy/metrics.hpp"

using namespace nesy;

namespace {

EvalRecord rec(int truth, int pred, bool valid, Assignment gen, Assignment ext) {
    EvalRecord r;
    r.truth = truth;
    r.pred = pred;
    r.valid = valid;
    r.generating = std::move(gen);
    r.extracted = std::move(ext);
    return r;
}

}  // namespace

TEST_CASE("accuracy counts valid exact class hits only") {
    std::vector<EvalRecord> rs = {
        rec(0, 0, true, {{0}}, {{0}}),   // hit
        rec(1, 0, true, {{1}}, {{0}}),   // wrong class
        rec(1, 1, false, {{1}}, {{1}}),  // invalid prediction never scores
        rec(2, 2, true, {{2}}, {{1}}),   // hit with wrong explanation
    };
    CHECK(predictive_accuracy(rs) == doctest::Approx(0.5));
    CHECK_THROWS(predictive_accuracy({}));
}

TEST_CASE("fidelity wants the exact generating assignment") {
    std::vector<EvalRecord> rs = {
        rec(0, 0, true, {{0, 1}}, {{0, 1}}),  // exact
        rec(0, 0, true, {{0, 1}}, {{1, 1}}),  // near miss
        rec(0, 0, true, {{0, 1}}, {}),        // nothing extracted
        rec(0, 1, true, {{0, 1}}, {{0, 1}}),  // fidelity ignores the class column
    };
    CHECK(explanatory_fidelity(rs) == doctest::Approx(0.5));
    CHECK_THROWS(explanatory_fidelity({}));
}

TEST_CASE("constant predictor on a balanced eight-value feature scores one thirty-sixth") {
    std::vector<std::vector<std::string>> dom(1);
    for (int v = 0; v < 8; ++v) dom[0].push_back(std::to_string(v));
    const auto space = make_space(dom);
    std::vector<EvalRecord> rs;
    for (uint8_t v = 0; v < 8; ++v) rs.push_back(rec(0, 0, true, {{v}}, {{0}}));
    const auto f1 = feature_f1(rs, space);
    REQUIRE(f1.size() == 1);
    // value 0: precision 1/8, recall 1; the other seven never predicted
    CHECK(f1[0] == doctest::Approx(1.0 / 36.0).epsilon(1e-12));
}

TEST_CASE("perfect extraction gives macro-F1 one, absent extraction zero") {
    const auto space = make_space({{"a", "b"}, {"c", "d", "e"}});
    std::vector<EvalRecord> rs;
    for (uint8_t i = 0; i < 2; ++i)
        for (uint8_t j = 0; j < 3; ++j) rs.push_back(rec(0, 0, true, {{i, j}}, {{i, j}}));
    auto f1 = feature_f1(rs, space);
    CHECK(f1[0] == doctest::Approx(1.0));
    CHECK(f1[1] == doctest::Approx(1.0));

    for (auto& r : rs) r.extracted.v.clear();  // model committed to nothing
    f1 = feature_f1(rs, space);
    CHECK(f1[0] == 0.0);
    CHECK(f1[1] == 0.0);
}

TEST_CASE("f1 denominators follow the one-vs-rest contingency counts") {
    const auto space = make_space({{"a", "b", "c"}});
    // truth: a a b; predictions: a b b
    std::vector<EvalRecord> rs = {
        rec(0, 0, true, {{0}}, {{0}}),
        rec(0, 0, true, {{0}}, {{1}}),
        rec(0, 0, true, {{1}}, {{1}}),
    };
    // a: tp=1 fp=0 fn=1 -> 2/3; b: tp=1 fp=1 fn=0 -> 2/3; c: never seen -> 0
    CHECK(feature_f1(rs, space)[0] == doctest::Approx((2.0 / 3 + 2.0 / 3) / 3).epsilon(1e-12));
}

TEST_CASE("running average uses the trailing window with a warm-up ramp") {
    CHECK(running_average({1.0, 2.0, 3.0}, 2) == std::vector<double>{1.0, 1.5, 2.5});
    // constant series is a fixed point regardless of window
    const std::vector<double> flat(7, 4.2);
    CHECK(running_average(flat, 3) == flat);
    CHECK(running_average(flat, 100) == flat);
    // window one is the identity
    const std::vector<double> v = {3.0, -1.0, 0.5};
    CHECK(running_average(v, 1) == v);
    // linearity in the input
    const auto a = running_average({1.0, 2.0, 3.0, 4.0}, 2);
    const auto b = running_average({2.0, 4.0, 6.0, 8.0}, 2);
    for (size_t i = 0; i < a.size(); ++i) CHECK(b[i] == doctest::Approx(2 * a[i]).epsilon(1e-12));
    CHECK_THROWS(running_average({}, 2));
    CHECK_THROWS(running_average({1.0}, 0));
}

TEST_CASE("the comparison relation demands strict dominance on both axes") {
    CHECK(better(0.9, 0.9, 0.8, 0.8));
    CHECK_FALSE(better(0.9, 0.8, 0.8, 0.8));  // tie on one axis is not better
    CHECK_FALSE(better(0.8, 0.9, 0.9, 0.8));
    CHECK_FALSE(better(0.9, 0.9, 0.9, 0.9));
}

TEST_CASE("metrics rows survive the csv round-trip") {
    const char* path = "metrics_roundtrip.csv";
    std::vector<MetricsRow> rows(2);
    rows[0] = {"run-a", "N", 0.0, 0, 0.333333333, 0.0444444444, {0.1, 0.2, 0.3}};
    rows[1] = {"run-b", "N1", 0.4, 17, 0.9875, 0.91, std::vector<double>(9, 0.5)};
    save_metrics_csv(path, rows);

    const auto back = load_metrics_csv(path);
    REQUIRE(back.size() == 2);
    for (size_t i = 0; i < 2; ++i) {
        CHECK(back[i].run_id == rows[i].run_id);
        CHECK(back[i].variant == rows[i].variant);
        CHECK(back[i].alpha == doctest::Approx(rows[i].alpha));
        CHECK(back[i].epoch == rows[i].epoch);
        CHECK(back[i].pred_acc == doctest::Approx(rows[i].pred_acc).epsilon(1e-9));
        CHECK(back[i].expl_fid == doctest::Approx(rows[i].expl_fid).epsilon(1e-9));
        REQUIRE(back[i].f1.size() == rows[i].f1.size());  // ts keeps 3, chess keeps 9
        for (size_t f = 0; f < back[i].f1.size(); ++f)
            CHECK(back[i].f1[f] == doctest::Approx(rows[i].f1[f]).epsilon(1e-9));
    }

    // a foreign header is rejected
    {
        std::ofstream bad(path);
        bad << "nope\n";
    }
    CHECK_THROWS(load_metrics_csv(path));
    std::remove(path);
}
