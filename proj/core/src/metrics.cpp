#include "stgllm/metrics.hpp"

#include <cmath>

namespace stgllm {

MetricsReport compute_metrics(const std::vector<Mat>& pred, const std::vector<Mat>& target,
                              double mask_threshold) {
    require(pred.size() == target.size(), ErrorCode::ShapeMismatch,
            "compute_metrics: window counts differ");
    require(!pred.empty(), ErrorCode::ShapeMismatch, "compute_metrics: no windows");
    const int p = pred[0].cols;

    // sufficient statistics per horizon: count, Σ|e|, Σe², masked count, Σ|e/y|
    std::vector<int64_t> cnt(static_cast<size_t>(p), 0), mcnt(static_cast<size_t>(p), 0);
    std::vector<double> sae(static_cast<size_t>(p), 0.0), sse(static_cast<size_t>(p), 0.0),
        sape(static_cast<size_t>(p), 0.0);

    for (size_t w = 0; w < pred.size(); ++w) {
        const Mat& a = pred[w];
        const Mat& b = target[w];
        require(a.rows == b.rows && a.cols == b.cols && a.cols == p, ErrorCode::ShapeMismatch,
                "compute_metrics: shape mismatch at window " + std::to_string(w));
        for (int i = 0; i < a.rows; ++i) {
            const double* ar = a.row(i);
            const double* br = b.row(i);
            for (int h = 0; h < p; ++h) {
                const double e = ar[h] - br[h];
                const auto hh = static_cast<size_t>(h);
                cnt[hh] += 1;
                sae[hh] += std::abs(e);
                sse[hh] += e * e;
                if (std::abs(br[h]) > mask_threshold) {
                    mcnt[hh] += 1;
                    sape[hh] += std::abs(e / br[h]);
                }
            }
        }
    }

    MetricsReport rep;
    rep.mask_threshold = mask_threshold;
    int64_t total = 0, mtotal = 0;
    double tae = 0.0, tse = 0.0, tape = 0.0;
    for (int h = 0; h < p; ++h) {
        const auto hh = static_cast<size_t>(h);
        rep.per_horizon_mae.push_back(sae[hh] / static_cast<double>(cnt[hh]));
        rep.per_horizon_rmse.push_back(std::sqrt(sse[hh] / static_cast<double>(cnt[hh])));
        if (mcnt[hh] > 0)
            rep.per_horizon_mape.push_back(100.0 * sape[hh] / static_cast<double>(mcnt[hh]));
        else
            rep.per_horizon_mape.push_back(std::nullopt);
        total += cnt[hh];
        mtotal += mcnt[hh];
        tae += sae[hh];
        tse += sse[hh];
        tape += sape[hh];
    }
    rep.count = total;
    rep.mape_count = mtotal;
    rep.mae = tae / static_cast<double>(total);
    rep.rmse = std::sqrt(tse / static_cast<double>(total));
    if (mtotal > 0) rep.mape = 100.0 * tape / static_cast<double>(mtotal);
    return rep;
}

BaselineKind parse_baseline(const std::string& name) {
    if (name == "persistence") return BaselineKind::Persistence;
    if (name == "historical-average") return BaselineKind::HistoricalAverage;
    fail(ErrorCode::UnknownVariant, "unknown baseline '" + name + "'");
}

Baselines Baselines::fit(const SeriesDataset& ds, Segment train_seg) {
    Baselines b;
    b.k1_ = ds.steps_per_day();
    b.n_nodes_ = ds.num_nodes;
    b.table_.assign(static_cast<size_t>(b.k1_) * b.n_nodes_, 0.0);
    std::vector<int64_t> counts(b.table_.size(), 0);
    for (int64_t t = train_seg.begin; t < train_seg.end; ++t) {
        const int tod = static_cast<int>((ds.first_step_index_in_day + t) % b.k1_);
        for (int n = 0; n < b.n_nodes_; ++n) {
            const size_t idx = static_cast<size_t>(n) * b.k1_ + tod;
            b.table_[idx] += ds.value(t, n, 0);
            counts[idx] += 1;
        }
    }
    double overall = 0.0;
    int64_t overall_n = 0;
    for (size_t i = 0; i < b.table_.size(); ++i) {
        overall += b.table_[i];
        overall_n += counts[i];
    }
    overall = overall_n ? overall / static_cast<double>(overall_n) : 0.0;
    for (size_t i = 0; i < b.table_.size(); ++i)
        b.table_[i] = counts[i] ? b.table_[i] / static_cast<double>(counts[i]) : overall;
    b.fitted_ = true;
    return b;
}

Mat Baselines::persistence(const WindowSample& w) {
    const int n = w.num_nodes(), p = w.horizon(), last = w.input_len() - 1;
    Mat out(n, p);
    for (int i = 0; i < n; ++i) {
        const double v = static_cast<double>(w.x.at3(last, i, 0));
        for (int h = 0; h < p; ++h) out(i, h) = v;
    }
    return out;
}

Mat Baselines::forecast(BaselineKind kind, const WindowSample& w) const {
    if (kind == BaselineKind::Persistence) return persistence(w);
    require(fitted_, ErrorCode::InvalidConfig,
            "historical-average requires a table fit on the training segment");
    require(w.num_nodes() == n_nodes_, ErrorCode::ShapeMismatch,
            "historical-average: node count mismatch");
    const int n = w.num_nodes(), p = w.horizon();
    Mat out(n, p);
    for (int h = 0; h < p; ++h) {
        const int tod = static_cast<int>((w.tod_index + 1 + h) % k1_);
        for (int i = 0; i < n; ++i) out(i, h) = table_[static_cast<size_t>(i) * k1_ + tod];
    }
    return out;
}

MetricsReport evaluate_baseline(const Baselines& b, BaselineKind kind,
                                const std::vector<WindowSample>& windows, double mask_threshold) {
    std::vector<Mat> preds(windows.size()), targets(windows.size());
    for (size_t i = 0; i < windows.size(); ++i) {
        preds[i] = b.forecast(kind, windows[i]);
        Mat t(windows[i].num_nodes(), windows[i].horizon());
        for (int h = 0; h < windows[i].horizon(); ++h)
            for (int n = 0; n < windows[i].num_nodes(); ++n)
                t(n, h) = static_cast<double>(windows[i].y.at2(h, n));
        targets[i] = std::move(t);
    }
    return compute_metrics(preds, targets, mask_threshold);
}

}  // namespace stgllm
