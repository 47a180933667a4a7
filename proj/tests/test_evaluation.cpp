#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <random>

#include "swarmnet/errors.hpp"
#include "swarmnet/evaluation.hpp"
#include "oracles.hpp"

using namespace swarmnet;
using namespace swarmnet::eval;

namespace {

std::vector<ScoredSample> make(std::initializer_list<double> pos, std::initializer_list<double> neg) {
    std::vector<ScoredSample> s;
    for (double p : pos) s.push_back({Label::positive, p});
    for (double n : neg) s.push_back({Label::negative, n});
    return s;
}

} // namespace

TEST_CASE("confusion uses the >= rule") {
    const auto s = make({0.5, 0.2}, {0.5, 0.1});
    const auto c = confusion(s, 0.5);
    CHECK(c == ConfusionCounts{1, 1, 1, 1});
    CHECK(confusion(s, 0.0) == ConfusionCounts{2, 2, 0, 0});
}

TEST_CASE("confusion rejects empty or unlabeled input") {
    CHECK_THROWS_AS(confusion(std::vector<ScoredSample>{}, 0.5), EmptyInputError);
    std::vector<ScoredSample> s{{Label::unknown, 0.3}};
    CHECK_THROWS_AS(confusion(s, 0.5), InconsistencyError);
}

TEST_CASE("paper confusion matrices") {
    // TP, FP, TN, FN
    CHECK(sensitivity({38, 0, 44, 1}) == doctest::Approx(38.0 / 39.0));
    CHECK(std::round(10000 * sensitivity({38, 0, 44, 1})) / 100 == 97.44);
    CHECK(std::round(10000 * specificity({38, 0, 44, 1})) / 100 == 100.00);
    CHECK(std::round(10000 * sensitivity({47, 1, 30, 1})) / 100 == 97.92);
    CHECK(std::round(10000 * specificity({47, 1, 30, 1})) / 100 == 96.77);
    CHECK(std::round(10000 * sensitivity({27, 1, 35, 0})) / 100 == 100.00);
    CHECK(std::round(10000 * specificity({27, 1, 35, 0})) / 100 == 97.22);
}

TEST_CASE("undefined metrics raise") {
    CHECK_THROWS_AS(sensitivity({0, 3, 2, 0}), UndefinedMetricError);
    CHECK_THROWS_AS(specificity({3, 0, 0, 2}), UndefinedMetricError);
    CHECK_THROWS_AS(roc_auc(make({0.3, 0.4}, {})), UndefinedMetricError);
}

TEST_CASE("sweep endpoints") {
    const auto s = make({0.9, 0.4, 0.0}, {0.6, 0.1, 1.0});
    const std::vector<double> lo{0.0};
    const auto a = threshold_sweep(s, lo);
    CHECK(a[0].sensitivity == 1.0);
    CHECK(a[0].specificity == 0.0);
    const std::vector<double> hi{1.0 + 1e-9};
    const auto b = threshold_sweep(s, hi);
    CHECK(b[0].sensitivity == 0.0);
    CHECK(b[0].specificity == 1.0);
}

TEST_CASE("sweep grid must be strictly increasing and non-empty") {
    const auto s = make({0.9}, {0.1});
    CHECK_THROWS(threshold_sweep(s, std::vector<double>{}));
    CHECK_THROWS(threshold_sweep(s, std::vector<double>{0.2, 0.2}));
    CHECK_THROWS(threshold_sweep(s, std::vector<double>{0.5, 0.1}));
}

TEST_CASE("sweep is monotone and matches brute force") {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> q(0, 20);
    std::vector<ScoredSample> s;
    for (int i = 0; i < 60; ++i) s.push_back({i % 3 ? Label::negative : Label::positive, q(rng) / 20.0});
    const auto grid = default_threshold_grid(101);
    const auto sweep = threshold_sweep(s, grid);
    REQUIRE(sweep.size() == 101);
    for (std::size_t i = 0; i < sweep.size(); ++i) {
        const auto c = oracle::brute_confusion(s, grid[i]);
        CHECK(sweep[i].sensitivity == sensitivity(c));
        CHECK(sweep[i].specificity == specificity(c));
        if (i > 0) {
            CHECK(sweep[i].sensitivity <= sweep[i - 1].sensitivity);
            CHECK(sweep[i].specificity >= sweep[i - 1].specificity);
        }
    }
}

TEST_CASE("default grid") {
    const auto g = default_threshold_grid(101);
    CHECK(g.front() == 0.0);
    CHECK(g.back() == 1.0);
    CHECK(g[50] == 0.5);
    CHECK_THROWS(default_threshold_grid(1));
}

TEST_CASE("AUC small cases") {
    CHECK(roc_auc(make({0.9, 0.4}, {0.6, 0.1})).auc == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(roc_auc(make({0.3, 0.3, 0.3}, {0.3, 0.3})).auc == 0.5);
    CHECK(roc_auc(make({0.9, 0.8}, {0.2, 0.1})).auc == 1.0);
    CHECK(roc_auc(make({0.1}, {0.9})).auc == 0.0);
}

TEST_CASE("ROC is a staircase from (0,0) to (1,1)") {
    const auto roc = roc_auc(make({0.9, 0.5, 0.5, 0.2}, {0.7, 0.5, 0.1}));
    REQUIRE(roc.points.size() >= 2);
    CHECK(roc.points.front() == RocPoint{0.0, 0.0});
    CHECK(roc.points.back() == RocPoint{1.0, 1.0});
    for (std::size_t i = 1; i < roc.points.size(); ++i) {
        CHECK(roc.points[i].fpr >= roc.points[i - 1].fpr);
        CHECK(roc.points[i].tpr >= roc.points[i - 1].tpr);
    }
}

TEST_CASE("exhaustive: AUC equals Mann-Whitney for every small multiset") {
    // symbols 0..9: label = symbol / 5, score = (symbol % 5) / 4
    const double alphabet[5] = {0.0, 0.25, 0.5, 0.75, 1.0};
    long checked = 0;
    std::vector<int> pick;
    std::function<void(int)> rec = [&](int from) {
        if (!pick.empty()) {
            std::vector<ScoredSample> s;
            for (int sym : pick) s.push_back({sym >= 5 ? Label::positive : Label::negative, alphabet[sym % 5]});
            const bool both = std::any_of(pick.begin(), pick.end(), [](int v) { return v >= 5; }) &&
                              std::any_of(pick.begin(), pick.end(), [](int v) { return v < 5; });
            if (both) {
                const double got = roc_auc(s).auc;
                const double want = oracle::mann_whitney(s);
                if (std::abs(got - want) > 1e-12) FAIL("mismatch, size " << s.size());
                ++checked;
            }
        }
        if (pick.size() == 6) return;
        for (int sym = from; sym < 10; ++sym) {
            pick.push_back(sym);
            rec(sym);
            pick.pop_back();
        }
    };
    rec(0);
    CHECK(checked > 4000);
}

TEST_CASE("AUC is invariant to sample order") {
    auto s = make({0.9, 0.4, 0.4, 0.6}, {0.6, 0.1, 0.4});
    const double a = roc_auc(s).auc;
    std::mt19937_64 rng(1);
    for (int i = 0; i < 10; ++i) {
        std::shuffle(s.begin(), s.end(), rng);
        CHECK(roc_auc(s).auc == a);
    }
}

TEST_CASE("report: confusion equals sweep entry at the threshold, JSON round-trips") {
    std::vector<WellScore> wells{{"a", Label::positive, 0.91}, {"b", Label::positive, 0.42}, {"c", Label::negative, 0.5},
                                 {"d", Label::negative, 0.07}, {"e", Label::positive, 0.5}};
    const auto grid = default_threshold_grid(101);
    const auto r = build_report(wells, 0.5, grid, "abc123");
    const auto it = std::find_if(r.sweep.begin(), r.sweep.end(), [](const SweepPoint& p) { return p.threshold == 0.5; });
    REQUIRE(it != r.sweep.end());
    CHECK(it->sensitivity == r.sensitivity);
    CHECK(it->specificity == r.specificity);
    CHECK(r.confusion == ConfusionCounts{2, 1, 1, 1});

    const auto back = report_from_json(nlohmann::json::parse(to_json(r).dump()));
    CHECK(back.per_well_scores == r.per_well_scores);
    CHECK(back.confusion == r.confusion);
    CHECK(back.sweep == r.sweep);
    CHECK(back.roc == r.roc);
    CHECK(back.auc == r.auc);
    CHECK(back.threshold == r.threshold);
    CHECK(back.dataset_fingerprint == "abc123");
}

TEST_CASE("plots are written") {
    const auto dir = std::filesystem::temp_directory_path() / "swarmnet_test_plots";
    std::filesystem::remove_all(dir);
    std::vector<WellScore> wells{{"a", Label::positive, 0.9}, {"b", Label::negative, 0.2}};
    const auto grid = default_threshold_grid(11);
    const auto files = write_plots(build_report(wells, 0.5, grid), dir, "run1");
    REQUIRE(files.size() == 3);
    for (const auto& f : files) {
        CHECK(std::filesystem::exists(f));
        CHECK(std::filesystem::file_size(f) > 100);
    }
    std::filesystem::remove_all(dir);
}
