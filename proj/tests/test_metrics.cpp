#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

#include "w2s/errors.hpp"
#include "w2s/metrics.hpp"
#include "w2s/wafer.hpp"

using namespace w2s;

TEST_CASE("confusion counts") {
    const std::vector<int> labels{0, 0, 1, 1}, preds{0, 1, 1, 1};
    CHECK(confusion(labels, preds, 2) == ConfusionMatrix::from_rows({{1, 1}, {0, 2}}));
    CHECK(confusion(labels, labels, 2) == ConfusionMatrix::from_rows({{2, 0}, {0, 2}}));

    const auto empty = confusion({}, {}, 9);
    CHECK(empty.total() == 0);
    CHECK(empty == ConfusionMatrix(9));

    const std::vector<int> short_preds{0, 1};
    CHECK_THROWS_AS(confusion(labels, short_preds, 2), InputError);
    const std::vector<int> out_of_range{0, 0, 1, 2};
    CHECK_THROWS_AS(confusion(labels, out_of_range, 2), InputError);
    CHECK_THROWS_AS(ConfusionMatrix::from_rows({{1, 2}, {3}}), InputError);
}

TEST_CASE("per-class stats by hand") {
    const auto r = per_class_stats(ConfusionMatrix::from_rows({{3, 1}, {2, 4}}));
    CHECK(*r.overall_accuracy == doctest::Approx(0.7));
    CHECK(*r.per_class[0].recall == doctest::Approx(0.75));
    CHECK(*r.per_class[0].precision == doctest::Approx(0.6));
    CHECK(*r.per_class[0].f1 == doctest::Approx(2.0 * 0.45 / 1.35));
    CHECK(*r.per_class[0].accuracy == doctest::Approx(0.7));
    CHECK(*r.per_class[1].recall == doctest::Approx(4.0 / 6.0));
    CHECK(*r.per_class[1].precision == doctest::Approx(0.8));
    CHECK(r.per_class[0].support == 4);

    const auto perfect = per_class_stats(ConfusionMatrix::from_rows({{5, 0}, {0, 5}}));
    CHECK(*perfect.overall_accuracy == 1.0);
    for (const auto& s : perfect.per_class) CHECK(*s.recall == 1.0);
}

TEST_CASE("undefined ratios stay undefined") {
    const auto r = per_class_stats(ConfusionMatrix::from_rows({{2, 0, 0}, {1, 0, 0}, {0, 0, 0}}));
    CHECK_FALSE(r.per_class[2].recall.has_value());      // no true samples
    CHECK_FALSE(r.per_class[1].precision.has_value());   // never predicted
    CHECK(*r.per_class[1].recall == 0.0);
    CHECK_FALSE(r.per_class[1].f1.has_value());
    CHECK_FALSE(per_class_stats(ConfusionMatrix(3)).overall_accuracy.has_value());

    std::ostringstream machine, human;
    write_metrics_report(machine, r);
    print_metrics_table(human, r);
    CHECK(machine.str().find("2.recall: null") != std::string::npos);
    CHECK(machine.str().find("nan") == std::string::npos);
    CHECK(human.str().find("—") != std::string::npos);
}

TEST_CASE("f1 symmetry") {
    CHECK(*f1_score(0.3, 0.9) == *f1_score(0.9, 0.3));
    CHECK(*f1_score(0.4, 0.4) == doctest::Approx(0.4));
    CHECK_FALSE(f1_score(0.0, 0.0).has_value());
    CHECK_FALSE(f1_score(std::nullopt, 0.5).has_value());
}

TEST_CASE("relabeling permutes the stats") {
    std::mt19937_64 rng(9);
    std::uniform_int_distribution<int> count(0, 6);
    for (int trial = 0; trial < 50; ++trial) {
        const int c = 2 + trial % 8;
        ConfusionMatrix cm(c);
        for (int i = 0; i < c; ++i)
            for (int j = 0; j < c; ++j) cm(i, j) = count(rng);
        std::vector<int> perm(static_cast<std::size_t>(c));
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        ConfusionMatrix moved(c);
        for (int i = 0; i < c; ++i)
            for (int j = 0; j < c; ++j) moved(perm[i], perm[j]) = cm(i, j);

        const auto a = per_class_stats(cm), b = per_class_stats(moved);
        CHECK(a.overall_accuracy == b.overall_accuracy);
        for (int i = 0; i < c; ++i) {
            const auto& x = a.per_class[static_cast<std::size_t>(i)];
            const auto& y = b.per_class[static_cast<std::size_t>(perm[i])];
            CHECK(x.recall == y.recall);
            CHECK(x.precision == y.precision);
            CHECK(x.f1 == y.f1);
            CHECK(x.accuracy == y.accuracy);
            CHECK(x.support == y.support);
        }
        CHECK(cm.trace() <= cm.total());
    }
}

TEST_CASE("recall ignores samples of other classes") {
    auto cm = ConfusionMatrix::from_rows({{3, 1, 0}, {2, 4, 1}, {0, 0, 5}});
    const auto before = per_class_stats(cm).per_class[0].recall;
    cm(1, 0) += 7;
    cm(2, 2) += 3;
    CHECK(per_class_stats(cm).per_class[0].recall == before);
}

TEST_CASE("report schema names every class") {
    ConfusionMatrix cm(9);
    for (int i = 0; i < 9; ++i) cm(i, i) = i + 1;
    const auto r = per_class_stats(cm);
    std::ostringstream report, csv;
    write_metrics_report(report, r, class_names());
    write_confusion_csv(csv, cm, class_names());
    CHECK(report.str().rfind("overall_accuracy: 1", 0) == 0);
    for (const auto& name : class_names()) {
        for (const char* key : {".accuracy: ", ".recall: ", ".precision: ", ".f1: ", ".support: "}) {
            CHECK(report.str().find(name + key) != std::string::npos);
        }
        CHECK(csv.str().find(name) != std::string::npos);
    }
    std::string line;
    std::istringstream rows(csv.str());
    int n = 0;
    while (std::getline(rows, line)) ++n;
    CHECK(n == 10);
}
