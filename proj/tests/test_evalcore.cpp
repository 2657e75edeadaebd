#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "mval/evalcore.hpp"
#include "mval/rng.hpp"

using namespace mval;

TEST_CASE("perfectly separable 1-D data yields probabilities ordered with the feature") {
    Design x;
    std::vector<double> feature, y;
    for (int i = 0; i < 40; ++i) {
        feature.push_back(i < 20 ? -1.0 - i * 0.01 : 1.0 + i * 0.01);
        y.push_back(i < 20 ? 0.0 : 1.0);
    }
    x.add_col(feature);
    ModelSpec spec;
    const FitResult fit = fit_model(x, y, spec);
    const std::vector<double> probs = predict(x, fit, ModelSpec::Task::binary);
    for (std::size_t i = 0; i + 1 < probs.size(); ++i)
        if (feature[i] < feature[i + 1]) CHECK(probs[i] <= probs[i + 1]);
    CHECK(auc(probs, y) == 1.0);
}

TEST_CASE("exactly linear continuous target is recovered at lambda=0") {
    Design train, test;
    std::vector<double> xt, yt, xs;
    Rng rng(2);
    for (int i = 0; i < 50; ++i) {
        const double v = rng.next_normal();
        xt.push_back(v);
        yt.push_back(2.5 * v - 1.25);
    }
    for (int i = 0; i < 10; ++i) xs.push_back(rng.next_normal());
    train.add_col(xt);
    test.add_col(xs);
    ModelSpec spec;
    spec.task = ModelSpec::Task::continuous;
    spec.lambda = 0.0;
    const FitResult fit = fit_model(train, yt, spec);
    const std::vector<double> preds = predict(test, fit, spec.task);
    for (std::size_t i = 0; i < preds.size(); ++i)
        CHECK(preds[i] == doctest::Approx(2.5 * xs[i] - 1.25).epsilon(1e-8));
}

TEST_CASE("single-class training targets are rejected") {
    Design x;
    x.add_col({1.0, 2.0, 3.0});
    ModelSpec spec;
    try {
        fit_model(x, {1.0, 1.0, 1.0}, spec);
        FAIL("expected SingleClassTrain");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::single_class_train);
    }
}

TEST_CASE("equal probabilities give AUC 0.5") {
    CHECK(auc({0.4, 0.4, 0.4, 0.4}, {0.0, 1.0, 0.0, 1.0}) == 0.5);
}

TEST_CASE("predicting the mean gives R^2 = 0") {
    const std::vector<double> targets{1.0, 2.0, 3.0, 4.0};
    const std::vector<double> preds(4, 2.5);
    CHECK(r2(preds, targets) == doctest::Approx(0.0));
}

TEST_CASE("log loss matches the hand-computed example") {
    // labels [0,1], probs [0.25, 0.75] -> -0.5*(ln 0.75 + ln 0.75)
    CHECK(logloss({0.25, 0.75}, {0.0, 1.0}) == doctest::Approx(0.287682).epsilon(1e-6));
    CHECK(logloss({0.25, 0.75}, {0.0, 1.0}) ==
          doctest::Approx(-std::log(0.75)).epsilon(1e-12));
}

TEST_CASE("log loss clamps extreme probabilities instead of overflowing") {
    const double v = logloss({0.0, 1.0}, {1.0, 0.0});
    CHECK(std::isfinite(v));
    CHECK(v > 20.0);
}

TEST_CASE("AUC is invariant to strictly monotone transforms of the scores") {
    Rng rng(5);
    std::vector<double> probs, labels;
    for (int i = 0; i < 200; ++i) {
        probs.push_back(rng.next_double());
        labels.push_back(rng.next_double() < 0.4 ? 1.0 : 0.0);
    }
    const double base = auc(probs, labels);
    std::vector<double> warped = probs;
    for (double& p : warped) p = std::tanh(3.0 * p) + 2.0;
    CHECK(auc(warped, labels) == doctest::Approx(base).epsilon(1e-15));
}

TEST_CASE("AUC equals the brute-force all-pairs count with half credit for ties") {
    Rng rng(9);
    for (int rep = 0; rep < 60; ++rep) {
        const std::size_t n = 3 + rng.next_below(198);
        std::vector<double> probs(n), labels(n);
        bool pos = false, neg = false;
        for (std::size_t i = 0; i < n; ++i) {
            // quantized probabilities provoke ties
            probs[i] = static_cast<double>(rng.next_below(12)) / 11.0;
            labels[i] = rng.next_double() < 0.5 ? 1.0 : 0.0;
            (labels[i] == 1.0 ? pos : neg) = true;
        }
        if (!pos || !neg) continue;
        double wins = 0.0, pairs = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (labels[i] != 1.0) continue;
            for (std::size_t j = 0; j < n; ++j) {
                if (labels[j] != 0.0) continue;
                pairs += 1.0;
                if (probs[i] > probs[j]) wins += 1.0;
                else if (probs[i] == probs[j]) wins += 0.5;
            }
        }
        CHECK(std::abs(auc(probs, labels) - wins / pairs) <= 1e-12);
    }
}

TEST_CASE("RMSE is zero iff predictions equal targets elementwise") {
    CHECK(rmse({1.0, 2.0}, {1.0, 2.0}) == 0.0);
    CHECK(rmse({1.0, 2.0 + 1e-9}, {1.0, 2.0}) > 0.0);
}

TEST_CASE("metrics are bitwise deterministic") {
    Rng rng(77);
    std::vector<double> probs, labels;
    for (int i = 0; i < 500; ++i) {
        probs.push_back(rng.next_double());
        labels.push_back(rng.next_double() < 0.5 ? 1.0 : 0.0);
    }
    const double a1 = auc(probs, labels), a2 = auc(probs, labels);
    const double l1 = logloss(probs, labels), l2 = logloss(probs, labels);
    CHECK(std::memcmp(&a1, &a2, sizeof(double)) == 0);
    CHECK(std::memcmp(&l1, &l2, sizeof(double)) == 0);
}

TEST_CASE("empty and degenerate metric inputs raise the documented errors") {
    CHECK_THROWS_AS(auc({}, {}), Error);
    try {
        r2({1.0, 2.0}, {3.0, 3.0});
        FAIL("expected ZeroVarianceTarget");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::zero_variance_target);
    }
    try {
        auc({0.5, 0.5}, {1.0, 1.0});
        FAIL("expected ZeroVarianceTarget");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::zero_variance_target);
    }
}

TEST_CASE("model fits are deterministic given identical inputs") {
    Rng rng(3);
    Design x;
    std::vector<double> c1(200), c2(200), y(200);
    for (std::size_t i = 0; i < 200; ++i) {
        c1[i] = rng.next_normal();
        c2[i] = rng.next_normal();
        y[i] = rng.next_double() < 1.0 / (1.0 + std::exp(-c1[i])) ? 1.0 : 0.0;
    }
    x.add_col(c1);
    x.add_col(c2);
    ModelSpec spec;
    const FitResult f1 = fit_model(x, y, spec);
    const FitResult f2 = fit_model(x, y, spec);
    REQUIRE(f1.coef.size() == f2.coef.size());
    CHECK(std::memcmp(f1.coef.data(), f2.coef.data(), f1.coef.size() * sizeof(double)) == 0);
}

TEST_CASE("missing design cells are rejected") {
    Design x;
    x.add_col({1.0, kMissing, 2.0});
    ModelSpec spec;
    spec.task = ModelSpec::Task::continuous;
    CHECK_THROWS_AS(fit_model(x, {1.0, 2.0, 3.0}, spec), Error);
}
