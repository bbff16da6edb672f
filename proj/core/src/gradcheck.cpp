#include "stgllm/gradcheck.hpp"

#include <cmath>

namespace stgllm {

std::vector<WindowSample> make_random_windows(const ModelConfig& cfg, int n_nodes, int count,
                                              uint64_t seed) {
    Rng rng(seed);
    std::vector<WindowSample> out;
    out.reserve(static_cast<size_t>(count));
    for (int c = 0; c < count; ++c) {
        WindowSample w;
        w.x = Tensor({cfg.input_len, n_nodes, cfg.num_features});
        w.y = Tensor({cfg.horizon, n_nodes});
        for (auto& v : w.x.data) v = static_cast<float>(rng.normal(0.4, 1.3));
        for (auto& v : w.y.data) v = static_cast<float>(rng.normal(0.4, 1.3));
        w.t_last = 100 + c;
        w.tod_index = static_cast<int>(rng.below(static_cast<uint64_t>(cfg.k1)));
        w.dow_index = static_cast<int>(rng.below(static_cast<uint64_t>(cfg.k2)));
        out.push_back(std::move(w));
    }
    return out;
}

double batch_loss(const ForecastModel& model, const std::vector<WindowSample>& batch,
                  double huber_delta) {
    double sum = 0.0;
    for (const auto& w : batch) {
        PipelineCache cache;
        const Mat pred = model.forward(w, cache);
        sum += huber_loss(pred, target_of(w), huber_delta);
    }
    return sum / static_cast<double>(batch.size());
}

GradCheckReport run_grad_check(const GradCheckConfig& cfg) {
    cfg.model.validate();
    GradCheckReport rep;
    rep.points = cfg.n_points;

    for (int point = 0; point < cfg.n_points; ++point) {
        const uint64_t point_seed = seed_for(cfg.seed, "point-" + std::to_string(point));
        ForecastModel model = ForecastModel::random_init(cfg.model, point_seed);
        model.set_scaler(Scaler{0.37, 1.31});
        model.set_calendar(CalendarMeta{1440 / cfg.model.k1, cfg.model.k1});
        const auto batch =
            make_random_windows(cfg.model, cfg.n_nodes, cfg.batch, point_seed ^ 0xabcdefull);

        GradStore grads(model.params());
        std::vector<const WindowSample*> ptrs;
        for (const auto& w : batch) ptrs.push_back(&w);
        batch_forward_backward(model, ptrs, cfg.huber_delta, grads);

        for (const std::string& name : grads.names()) {
            const auto& analytic = *grads.find(name);
            auto& entry = model.params().at(name);
            double max_abs_diff = 0.0, max_mag = 1e-10;
            for (size_t k = 0; k < analytic.size(); ++k) {
                const float original = entry.tensor.data[k];
                model.params().set_coord(entry, static_cast<int64_t>(k),
                                         static_cast<double>(original) + cfg.fd_step);
                const double hi_x = entry.mirror.v[k];
                const double hi_loss = batch_loss(model, batch, cfg.huber_delta);
                model.params().set_coord(entry, static_cast<int64_t>(k),
                                         static_cast<double>(original) - cfg.fd_step);
                const double lo_x = entry.mirror.v[k];
                const double lo_loss = batch_loss(model, batch, cfg.huber_delta);
                model.params().set_coord(entry, static_cast<int64_t>(k),
                                         static_cast<double>(original));

                const double fd = (hi_loss - lo_loss) / (hi_x - lo_x);
                max_abs_diff = std::max(max_abs_diff, std::abs(analytic[k] - fd));
                max_mag = std::max({max_mag, std::abs(analytic[k]), std::abs(fd)});
            }
            const double rel = max_abs_diff / max_mag;
            auto it = std::find_if(rep.tensors.begin(), rep.tensors.end(),
                                   [&](const auto& t) { return t.name == name; });
            if (it == rep.tensors.end()) {
                rep.tensors.push_back({name, rel});
            } else {
                it->rel_err = std::max(it->rel_err, rel);
            }
        }
    }

    for (const auto& t : rep.tensors) {
        if (t.rel_err > rep.max_rel_err) {
            rep.max_rel_err = t.rel_err;
            rep.worst_tensor = t.name;
        }
    }
    return rep;
}

}  // namespace stgllm
