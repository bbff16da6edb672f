#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "stgllm/experiments.hpp"
#include "stgllm/metrics.hpp"
#include "test_util.hpp"

using namespace stgllm;

namespace {

// Independent reference implementation: plain double loops, no shared
// accumulation code with the library.
struct OracleResult {
    double mae = 0, rmse = 0;
    bool has_mape = false;
    double mape = 0;
};

OracleResult oracle_metrics(const std::vector<Mat>& pred, const std::vector<Mat>& target,
                            double threshold) {
    double sae = 0, sse = 0, sape = 0;
    long long n = 0, m = 0;
    for (size_t w = 0; w < pred.size(); ++w) {
        for (int i = 0; i < pred[w].rows; ++i) {
            for (int h = 0; h < pred[w].cols; ++h) {
                const double y = target[w](i, h);
                const double e = pred[w](i, h) - y;
                sae += std::fabs(e);
                sse += e * e;
                n += 1;
                if (std::fabs(y) > threshold) {
                    sape += std::fabs(e / y);
                    m += 1;
                }
            }
        }
    }
    OracleResult r;
    r.mae = sae / n;
    r.rmse = std::sqrt(sse / n);
    if (m > 0) {
        r.has_mape = true;
        r.mape = 100.0 * sape / m;
    }
    return r;
}

std::vector<Mat> random_set(int windows, int n, int p, uint64_t seed, double scale = 10.0) {
    Rng rng(seed);
    std::vector<Mat> out;
    for (int w = 0; w < windows; ++w) {
        Mat m(n, p);
        for (auto& v : m.v) v = scale * rng.normal();
        out.push_back(std::move(m));
    }
    return out;
}

}  // namespace

TEST_CASE("hand-computed example") {
    // y=[0,100], ŷ=[5,90], threshold 0 (exclusive): zero target is masked
    Mat pred(1, 2), target(1, 2);
    pred(0, 0) = 5;
    pred(0, 1) = 90;
    target(0, 0) = 0;
    target(0, 1) = 100;
    const MetricsReport rep = compute_metrics({pred}, {target}, 0.0);
    CHECK(rep.mae == doctest::Approx(7.5));
    CHECK(rep.rmse == doctest::Approx(std::sqrt((25.0 + 100.0) / 2.0)));
    REQUIRE(rep.mape.has_value());
    CHECK(*rep.mape == doctest::Approx(10.0));
    CHECK(rep.mape_count == 1);
}

TEST_CASE("perfect prediction scores zero everywhere") {
    const auto t = random_set(3, 4, 5, 1);
    const MetricsReport rep = compute_metrics(t, t, 0.1);
    CHECK(rep.mae == 0.0);
    CHECK(rep.rmse == 0.0);
    REQUIRE(rep.mape.has_value());
    CHECK(*rep.mape == 0.0);
}

TEST_CASE("constant offset gives MAE == RMSE == c") {
    const auto t = random_set(2, 3, 4, 2);
    auto p = t;
    for (auto& m : p)
        for (auto& v : m.v) v += 3.5;
    const MetricsReport rep = compute_metrics(p, t, 0.1);
    CHECK(rep.mae == doctest::Approx(3.5));
    CHECK(rep.rmse == doctest::Approx(3.5));
}

TEST_CASE("fully masked targets leave MAPE undefined, not zero") {
    Mat pred(2, 2), target(2, 2);  // zero targets
    for (auto& v : pred.v) v = 1.0;
    const MetricsReport rep = compute_metrics({pred}, {target}, 0.1);
    CHECK_FALSE(rep.mape.has_value());
    for (const auto& m : rep.per_horizon_mape) CHECK_FALSE(m.has_value());
    CHECK(rep.mape_count == 0);
}

TEST_CASE("agrees with the double-loop oracle on 100 random triples") {
    Rng rng(33);
    for (int trial = 0; trial < 100; ++trial) {
        const int windows = 1 + static_cast<int>(rng.below(4));
        const int n = 1 + static_cast<int>(rng.below(6));
        const int p = 1 + static_cast<int>(rng.below(5));
        const double threshold = trial % 3 == 0 ? 0.0 : rng.uniform(0.0, 5.0);
        const auto pred = random_set(windows, n, p, 1000 + trial);
        const auto target = random_set(windows, n, p, 2000 + trial);
        const MetricsReport rep = compute_metrics(pred, target, threshold);
        const OracleResult ora = oracle_metrics(pred, target, threshold);
        CHECK(rep.mae == doctest::Approx(ora.mae).epsilon(1e-10));
        CHECK(rep.rmse == doctest::Approx(ora.rmse).epsilon(1e-10));
        CHECK(rep.mape.has_value() == ora.has_mape);
        if (ora.has_mape) CHECK(*rep.mape == doctest::Approx(ora.mape).epsilon(1e-10));
        CHECK(rep.rmse >= rep.mae);
    }
}

TEST_CASE("added noise strictly increases MAE and RMSE") {
    const auto target = random_set(3, 5, 4, 7);
    Rng rng(8);
    std::vector<Mat> noise;
    for (const auto& t : target) {
        Mat m(t.rows, t.cols);
        for (auto& v : m.v) v = rng.normal();
        noise.push_back(std::move(m));
    }
    double prev_mae = 0, prev_rmse = 0;
    for (double sigma : {0.0, 0.5, 1.0, 2.0, 4.0}) {
        auto pred = target;
        for (size_t w = 0; w < pred.size(); ++w)
            for (size_t i = 0; i < pred[w].v.size(); ++i)
                pred[w].v[i] += sigma * noise[w].v[i];
        const MetricsReport rep = compute_metrics(pred, target, 0.1);
        if (sigma > 0.0) {
            CHECK(rep.mae > prev_mae);
            CHECK(rep.rmse > prev_rmse);
        }
        prev_mae = rep.mae;
        prev_rmse = rep.rmse;
    }
}

TEST_CASE("persistence baseline") {
    SUBCASE("constant series has zero error") {
        WindowSample w;
        w.x = Tensor({4, 3, 1});
        w.y = Tensor({2, 3});
        for (auto& v : w.x.data) v = 7.0f;
        for (auto& v : w.y.data) v = 7.0f;
        const Mat pred = Baselines::persistence(w);
        Mat target(3, 2);
        for (auto& v : target.v) v = 7.0;
        const MetricsReport rep = compute_metrics({pred}, {target}, 0.1);
        CHECK(rep.mae == 0.0);
        CHECK(rep.rmse == 0.0);
    }
    SUBCASE("repeats the last observed value") {
        WindowSample w;
        w.x = Tensor({3, 2, 1});
        w.y = Tensor({2, 2});
        for (int t = 0; t < 3; ++t)
            for (int n = 0; n < 2; ++n) w.x.at3(t, n, 0) = static_cast<float>(10 * n + t);
        const Mat pred = Baselines::persistence(w);
        for (int n = 0; n < 2; ++n)
            for (int h = 0; h < 2; ++h) CHECK(pred(n, h) == 10 * n + 2);
    }
}

TEST_CASE("historical average answers the per-(node,tod) train mean") {
    SeriesDataset ds;
    ds.name = "ha";
    ds.num_steps = 8;
    ds.num_nodes = 1;
    ds.num_features = 1;
    ds.interval_minutes = 360;  // 4 steps/day
    ds.values = Tensor({8, 1, 1});
    // two days: tod 0 sees {1, 5}, tod 1 sees {2, 6}, ...
    for (int t = 0; t < 8; ++t) ds.values.at3(t, 0, 0) = static_cast<float>(t + 1);
    const Baselines b = Baselines::fit(ds, Segment{0, 8});

    WindowSample w;
    w.x = Tensor({2, 1, 1});
    w.y = Tensor({2, 1});
    w.tod_index = 1;  // forecasting tods 2 and 3
    const Mat pred = b.forecast(BaselineKind::HistoricalAverage, w);
    CHECK(pred(0, 0) == doctest::Approx((3.0 + 7.0) / 2));
    CHECK(pred(0, 1) == doctest::Approx((4.0 + 8.0) / 2));
}

TEST_CASE("historical average requires a fitted table") {
    Baselines b;
    WindowSample w;
    w.x = Tensor({2, 1, 1});
    w.y = Tensor({1, 1});
    CHECK_THROWS_AS(b.forecast(BaselineKind::HistoricalAverage, w), StgError);
    CHECK(Baselines::persistence(w).rows == 1);  // persistence needs no fit
}

TEST_CASE("historical average error sits near the generator noise level") {
    // coupling 0: series = level + daily + weekly + noise; the per-(node,tod)
    // mean removes the level and daily parts, so the residual is the noise
    // plus the small weekly term
    const SeriesDataset ds = generate_synthetic(6, 288 * 14, 0.0, 11);
    SplitSpec spec;
    const SplitResult split = split_and_window(ds, spec);
    const Baselines b = Baselines::fit(ds, split.train_seg);
    const MetricsReport rep = evaluate_baseline(b, BaselineKind::HistoricalAverage, split.test, 0.1);
    const double expected = kSyntheticNoiseSigma * std::sqrt(2.0 / M_PI);
    CHECK(rep.mae > 0.6 * expected);
    CHECK(rep.mae < 1.6 * expected);
}

TEST_CASE("unknown names are rejected") {
    CHECK_THROWS_AS(parse_baseline("zeros"), StgError);
    CHECK_THROWS_AS(build_variant("no-everything", ModelConfig::desk()), StgError);
    CHECK_THROWS_AS(parse_variant("Full"), StgError);
}

TEST_CASE("median helper") {
    CHECK(median({3.0, 1.0, 2.0}) == 2.0);
    CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
    CHECK_THROWS_AS(median({}), StgError);
}
