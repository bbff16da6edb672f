#pragma once

#include <optional>
#include <string>
#include <vector>

#include "stgllm/dataset.hpp"
#include "stgllm/tensor.hpp"

namespace stgllm {

// MAE/RMSE/MAPE in de-normalized units, averaged over all W·N·P entries and
// broken out per horizon. MAPE averages only entries with |y| above the mask
// threshold; it is absent (not zero) when every entry is masked.
struct MetricsReport {
    double mae = 0.0;
    double rmse = 0.0;
    std::optional<double> mape;  // percent
    std::vector<double> per_horizon_mae;
    std::vector<double> per_horizon_rmse;
    std::vector<std::optional<double>> per_horizon_mape;
    int64_t count = 0;
    int64_t mape_count = 0;
    double mask_threshold = 0.0;
    std::string config_fingerprint;
};

// pred/target: one N×P matrix per window, identical shapes.
MetricsReport compute_metrics(const std::vector<Mat>& pred, const std::vector<Mat>& target,
                              double mask_threshold);

enum class BaselineKind { Persistence, HistoricalAverage };
BaselineKind parse_baseline(const std::string& name);

// Persistence repeats the last observed value; historical-average answers the
// train-segment mean per (node, time-of-day slot). Raw (de-normalized) units.
class Baselines {
public:
    // Historical-average table from the dataset's calendar over [seg.begin, seg.end).
    static Baselines fit(const SeriesDataset& ds, Segment train_seg);

    Mat forecast(BaselineKind kind, const WindowSample& w) const;

    static Mat persistence(const WindowSample& w);

private:
    int k1_ = 0;
    int n_nodes_ = 0;
    std::vector<double> table_;  // N×K1 means
    bool fitted_ = false;
};

MetricsReport evaluate_baseline(const Baselines& b, BaselineKind kind,
                                const std::vector<WindowSample>& windows, double mask_threshold);

}  // namespace stgllm
