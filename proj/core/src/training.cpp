#include "stgllm/training.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "stgllm/metrics.hpp"

namespace stgllm {

double huber_loss(const Mat& pred, const Mat& target, double delta) {
    require(pred.rows == target.rows && pred.cols == target.cols, ErrorCode::ShapeMismatch,
            "huber_loss: shapes differ");
    double sum = 0.0;
    for (size_t i = 0; i < pred.v.size(); ++i) {
        const double e = pred.v[i] - target.v[i];
        const double a = std::abs(e);
        sum += a <= delta ? 0.5 * e * e : delta * (a - 0.5 * delta);
    }
    return sum / static_cast<double>(pred.v.size());
}

Mat huber_loss_grad(const Mat& pred, const Mat& target, double delta) {
    require(pred.rows == target.rows && pred.cols == target.cols, ErrorCode::ShapeMismatch,
            "huber_loss_grad: shapes differ");
    Mat g(pred.rows, pred.cols);
    const double inv = 1.0 / static_cast<double>(pred.v.size());
    for (size_t i = 0; i < pred.v.size(); ++i) {
        const double e = pred.v[i] - target.v[i];
        g.v[i] = (std::abs(e) <= delta ? e : (e > 0 ? delta : -delta)) * inv;
    }
    return g;
}

void adam_step(ParamStore& store, const GradStore& grads, TrainState& state,
               const TrainConfig& cfg) {
    state.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (size_t i = 0; i < store.size(); ++i) {
        auto& e = store.entry(i);
        if (!e.spec.trainable) continue;
        const auto* g = grads.find(e.spec.name);
        require(g != nullptr, ErrorCode::MissingTensor,
                "adam_step: no gradient buffer for " + e.spec.name);
        auto& m = state.m[e.spec.name];
        auto& v = state.v[e.spec.name];
        if (m.empty()) m.assign(g->size(), 0.0);
        if (v.empty()) v.assign(g->size(), 0.0);
        const bool decay = !e.spec.decay_exempt && cfg.weight_decay > 0.0;
        for (size_t k = 0; k < g->size(); ++k) {
            double gk = (*g)[k];
            if (decay) gk += cfg.weight_decay * e.mirror.v[k];
            m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * gk;
            v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * gk * gk;
            const double mhat = m[k] / bc1;
            const double vhat = v[k] / bc2;
            const double next = e.mirror.v[k] - cfg.lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);
            store.set_coord(e, static_cast<int64_t>(k), next);
        }
    }
}

double batch_forward_backward(const ForecastModel& model,
                              const std::vector<const WindowSample*>& batch, double huber_delta,
                              GradStore& grads, BatchWorkspace* ws) {
    const int b = static_cast<int>(batch.size());
    require(b > 0, ErrorCode::EmptyTrainingSet, "empty batch");
    std::vector<double> losses(static_cast<size_t>(b), 0.0);
    BatchWorkspace local;
    BatchWorkspace& work = ws ? *ws : local;
    while (work.slots.size() < static_cast<size_t>(b)) work.slots.emplace_back(model.params());
    auto& slot = work.slots;
    for (int i = 0; i < b; ++i) slot[static_cast<size_t>(i)].zero();

#pragma omp parallel for schedule(static)
    for (int i = 0; i < b; ++i) {
        const WindowSample& w = *batch[static_cast<size_t>(i)];
        PipelineCache cache;
        const Mat pred = model.forward(w, cache);
        const Mat target = target_of(w);
        losses[static_cast<size_t>(i)] = huber_loss(pred, target, huber_delta);
        const Mat dpred = huber_loss_grad(pred, target, huber_delta);
        model.backward(w, cache, dpred, slot[static_cast<size_t>(i)]);
    }

    // fixed-order reduction keeps training bit-reproducible
    double loss = 0.0;
    const double inv = 1.0 / static_cast<double>(b);
    for (int i = 0; i < b; ++i) {
        loss += losses[static_cast<size_t>(i)];
        grads.add_scaled(slot[static_cast<size_t>(i)], inv);
    }
    return loss * inv;
}

namespace {

struct ValScore {
    double mae = 0.0, rmse = 0.0, mape = 0.0;
};

ValScore validate(const ForecastModel& model, const std::vector<WindowSample>& val,
                  double mask_threshold) {
    std::vector<Mat> preds(val.size()), targets(val.size());
#pragma omp parallel for schedule(static)
    for (int i = 0; i < static_cast<int>(val.size()); ++i) {
        preds[static_cast<size_t>(i)] = model.predict(val[static_cast<size_t>(i)]);
        targets[static_cast<size_t>(i)] = target_of(val[static_cast<size_t>(i)]);
    }
    const MetricsReport rep = compute_metrics(preds, targets, mask_threshold);
    return {rep.mae, rep.rmse, rep.mape.value_or(std::nan(""))};
}

std::vector<float> snapshot_trainable(const ParamStore& store) {
    std::vector<float> out;
    for (size_t i = 0; i < store.size(); ++i) {
        const auto& e = store.entry(i);
        if (!e.spec.trainable) continue;
        out.insert(out.end(), e.tensor.data.begin(), e.tensor.data.end());
    }
    return out;
}

void restore_trainable(ParamStore& store, const std::vector<float>& snap) {
    size_t off = 0;
    for (size_t i = 0; i < store.size(); ++i) {
        auto& e = store.entry(i);
        if (!e.spec.trainable) continue;
        std::vector<float> vals(snap.begin() + static_cast<std::ptrdiff_t>(off),
                                snap.begin() + static_cast<std::ptrdiff_t>(off) +
                                    static_cast<std::ptrdiff_t>(e.tensor.data.size()));
        off += e.tensor.data.size();
        store.set_values(e.spec.name, vals);
    }
}

}  // namespace

TrainResult train(ForecastModel& model, const std::vector<WindowSample>& train_set,
                  const std::vector<WindowSample>& val_set, const TrainConfig& cfg) {
    cfg.validate();
    require(!train_set.empty(), ErrorCode::EmptyTrainingSet, "train: empty training set");
    require(!val_set.empty(), ErrorCode::EmptyTrainingSet, "train: empty validation set");

    Rng shuffle_rng(cfg.seed);
    TrainState state;
    state.best_val_metric = std::numeric_limits<double>::infinity();
    GradStore grads(model.params());
    BatchWorkspace workspace;
    TrainResult result;

    std::vector<int64_t> order(train_set.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int64_t>(i);

    std::vector<float> best = snapshot_trainable(model.params());

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        // Fisher-Yates shuffle with the pinned RNG
        for (int64_t i = static_cast<int64_t>(order.size()) - 1; i > 0; --i) {
            const auto j = static_cast<int64_t>(shuffle_rng.below(static_cast<uint64_t>(i + 1)));
            std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
        }

        double epoch_loss = 0.0;
        int batches = 0;
        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
            const size_t stop = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
            std::vector<const WindowSample*> batch;
            batch.reserve(stop - start);
            for (size_t i = start; i < stop; ++i)
                batch.push_back(&train_set[static_cast<size_t>(order[i])]);
            grads.zero();
            const double loss =
                batch_forward_backward(model, batch, cfg.huber_delta, grads, &workspace);
            if (!std::isfinite(loss))
                fail(ErrorCode::NonFiniteLoss, "non-finite loss in epoch " +
                                                   std::to_string(epoch) + ", batch " +
                                                   std::to_string(batches));
            adam_step(model.params(), grads, state, cfg);
            epoch_loss += loss;
            ++batches;
            ++result.steps_taken;
        }

        const ValScore vs = validate(model, val_set, cfg.mape_mask_threshold);
        const auto t1 = std::chrono::steady_clock::now();
        EpochLog log;
        log.epoch = epoch;
        log.train_loss = epoch_loss / batches;
        log.val_mae = vs.mae;
        log.val_rmse = vs.rmse;
        log.val_mape = vs.mape;
        log.lr = cfg.lr;
        log.seconds = std::chrono::duration<double>(t1 - t0).count();
        result.log.push_back(log);

        if (vs.mae < state.best_val_metric) {
            state.best_val_metric = vs.mae;
            state.epochs_since_improvement = 0;
            result.best_epoch = epoch;
            result.best_val_mae = vs.mae;
            best = snapshot_trainable(model.params());
        } else {
            state.epochs_since_improvement += 1;
            if (state.epochs_since_improvement >= cfg.patience) break;
        }
    }

    restore_trainable(model.params(), best);
    return result;
}

std::string train_log_to_jsonl(const TrainResult& result) {
    std::ostringstream out;
    out.precision(17);
    for (const auto& e : result.log) {
        out << "{\"epoch\":" << e.epoch << ",\"train_loss\":" << e.train_loss
            << ",\"val_mae\":" << e.val_mae << ",\"val_rmse\":" << e.val_rmse << ",\"val_mape\":";
        if (std::isnan(e.val_mape))
            out << "null";
        else
            out << e.val_mape;
        out << ",\"lr\":" << e.lr << ",\"seconds\":" << e.seconds << "}\n";
    }
    return out.str();
}

}  // namespace stgllm
