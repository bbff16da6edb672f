#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "stgllm/model.hpp"
#include "stgllm/gradcheck.hpp"
#include "stgllm/metrics.hpp"
#include "test_util.hpp"

using namespace stgllm;

namespace {

ModelConfig desk_small() {
    ModelConfig cfg = ModelConfig::desk();
    cfg.c1 = 8;
    cfg.c2 = 8;
    cfg.k1 = 12;
    return cfg;
}

}  // namespace

TEST_CASE("predict is deterministic and shaped NxP for every variant") {
    for (const char* name : {"full", "no-llm", "no-pe", "no-tokenizer", "no-adapter"}) {
        ModelConfig cfg = build_variant(name, desk_small());
        ForecastModel model = ForecastModel::random_init(cfg, 11);
        model.set_scaler(Scaler{3.0, 2.0});
        const auto windows = make_random_windows(cfg, 5, 2, 101);
        const Mat a = model.predict(windows[0]);
        const Mat b = model.predict(windows[0]);
        CHECK(a.rows == 5);
        CHECK(a.cols == cfg.horizon);
        CHECK(a.v == b.v);
    }
}

TEST_CASE("no-llm with identity-rigged adapter is affine in the window") {
    ModelConfig cfg = build_variant("no-llm", desk_small());
    ForecastModel model = ForecastModel::random_init(cfg, 3);
    model.set_scaler(Scaler{0.0, 1.0});

    auto windows = make_random_windows(cfg, 4, 2, 55);
    WindowSample wa = windows[0], wb = windows[1];
    wb.tod_index = wa.tod_index;  // keep the affine map fixed
    wb.dow_index = wa.dow_index;

    const double alpha = 0.25;
    WindowSample mix = wa;
    for (size_t i = 0; i < mix.x.data.size(); ++i)
        mix.x.data[i] = static_cast<float>(alpha * wa.x.data[i] + (1 - alpha) * wb.x.data[i]);

    const Mat pa = model.predict(wa);
    const Mat pb = model.predict(wb);
    const Mat pm = model.predict(mix);
    for (size_t i = 0; i < pm.v.size(); ++i)
        CHECK(pm.v[i] ==
              doctest::Approx(alpha * pa.v[i] + (1 - alpha) * pb.v[i]).epsilon(1e-6));
}

TEST_CASE("disabled prompt pathway ignores the template entirely") {
    ModelConfig cfg = desk_small();
    cfg.use_prompt = false;
    cfg.prompt_template = "this text must not matter {weekday}";
    ForecastModel a = ForecastModel::random_init(cfg, 5);
    cfg.prompt_template = "different {weekday}";
    ForecastModel b = ForecastModel::random_init(cfg, 5);
    const auto windows = make_random_windows(cfg, 3, 1, 7);
    CHECK(a.predict(windows[0]).v == b.predict(windows[0]).v);
}

TEST_CASE("prompt pathway is live and restores bit-exactly when disabled") {
    ModelConfig cfg = desk_small();
    cfg.use_temporal_embeddings = false;  // Table-4 setting
    ForecastModel model = ForecastModel::random_init(cfg, 5);
    model.set_scaler(Scaler{1.0, 4.0});
    model.set_calendar(CalendarMeta{5, 288});
    const auto windows = make_random_windows(cfg, 3, 1, 77);

    const Mat off1 = model.predict(windows[0]);
    model.set_use_prompt(true);
    const Mat on = model.predict(windows[0]);
    model.set_use_prompt(false);
    const Mat off2 = model.predict(windows[0]);

    CHECK(off1.v == off2.v);  // bit-exact restore
    double diff = 0.0;
    for (size_t i = 0; i < on.v.size(); ++i) diff += std::abs(on.v[i] - off1.v[i]);
    CHECK(diff > 0.0);
}

TEST_CASE("prompt token count is M+N with prompt rows first") {
    ModelConfig cfg = desk_small();
    cfg.use_prompt = true;
    ForecastModel model = ForecastModel::random_init(cfg, 5);
    model.set_calendar(CalendarMeta{5, 288});
    const auto windows = make_random_windows(cfg, 3, 1, 78);

    PipelineCache cache;
    model.forward(windows[0], cache);
    const std::string text =
        render_time_prompt(windows[0], CalendarMeta{5, 288}, 3, cfg.prompt_template);
    CHECK(cache.prompt_rows == static_cast<int>(text.size()));  // byte-level M
    CHECK(cache.combined.rows == cache.prompt_rows + 3);
    // prompt rows first: they equal the wte lookups
    const Mat expected =
        encode_prompt(text, model.vocab(), model.params().m("wte"), cfg.backbone.context_len);
    for (int j = 0; j < cache.combined.cols; ++j)
        CHECK(cache.combined(0, j) == expected(0, j));
}

TEST_CASE("rigged echo decoder reproduces the persistence baseline through the scaler") {
    ModelConfig cfg = desk_small();
    ForecastModel model = ForecastModel::random_init(cfg, 9);
    model.set_scaler(Scaler{57.5, 13.25});

    auto& store = model.params();
    const int width = cfg.token_width();
    store.set_values("adapter.W2",
                     std::vector<float>(static_cast<size_t>(64 * width), 0.0f));
    store.set_values("adapter.b2", std::vector<float>(static_cast<size_t>(width), 0.0f));
    store.set_values("adapter.b3", std::vector<float>(static_cast<size_t>(cfg.horizon), 0.0f));
    // W3 selects the last input step (feature 0) for every horizon
    std::vector<float> w3(static_cast<size_t>(width * cfg.horizon), 0.0f);
    const int last_idx = (cfg.input_len - 1) * cfg.num_features;
    for (int h = 0; h < cfg.horizon; ++h)
        w3[static_cast<size_t>(last_idx * cfg.horizon + h)] = 1.0f;
    store.set_values("adapter.W3", w3);

    const auto windows = make_random_windows(cfg, 6, 3, 33);
    for (const auto& w : windows) {
        const Mat pred = model.predict(w);
        const Mat base = Baselines::persistence(w);
        for (size_t i = 0; i < pred.v.size(); ++i)
            CHECK(pred.v[i] == doctest::Approx(base.v[i]).epsilon(1e-9));
    }
}

TEST_CASE("stage errors carry the failing stage in the message") {
    ModelConfig cfg = desk_small();
    ForecastModel model = ForecastModel::random_init(cfg, 9);
    auto windows = make_random_windows(cfg, 3, 1, 3);
    windows[0].tod_index = cfg.k1 + 5;  // invalid lookup
    try {
        model.predict(windows[0]);
        FAIL("expected error");
    } catch (const StgError& e) {
        CHECK(std::string(e.what()).find("tokenize") != std::string::npos);
    }
}

TEST_CASE("window shape mismatches are rejected") {
    ModelConfig cfg = desk_small();
    ForecastModel model = ForecastModel::random_init(cfg, 9);
    auto windows = make_random_windows(cfg, 3, 1, 3);
    windows[0].x = Tensor({cfg.input_len + 1, 3, 1});
    CHECK_THROWS_AS(model.predict(windows[0]), StgError);
}

TEST_CASE("checkpoint save/load preserves predictions bit-exactly") {
    ModelConfig cfg = build_variant("no-tokenizer", desk_small());
    ForecastModel model = ForecastModel::random_init(cfg, 21);
    model.set_scaler(Scaler{10.0, 5.0});
    TempDir dir("model_ckpt");
    model.save(dir.str());
    ForecastModel back = ForecastModel::from_checkpoint(dir.str());
    const auto windows = make_random_windows(cfg, 4, 2, 5);
    CHECK(model.predict(windows[0]).v == back.predict(windows[0]).v);
}
