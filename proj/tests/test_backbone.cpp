#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "stgllm/backbone.hpp"
#include "stgllm/checkpoint.hpp"
#include "test_util.hpp"

using namespace stgllm;

namespace {

ParamStore make_store(const ModelConfig& cfg, uint64_t seed) {
    ParamStore store;
    for (const auto& spec : build_param_specs(cfg)) store.add(spec);
    store.init_random(seed);
    return store;
}

Mat random_tokens(int s, int d, uint64_t seed) {
    Mat m(s, d);
    Rng rng(seed);
    for (auto& v : m.v) v = rng.normal();
    return m;
}

ModelConfig small_cfg() {
    ModelConfig cfg = ModelConfig::tiny();
    cfg.backbone.n_layers = 2;
    cfg.backbone.d_model = 16;
    cfg.backbone.n_heads = 4;
    cfg.backbone.context_len = 32;
    return cfg;
}

}  // namespace

TEST_CASE("forward preserves the token shape") {
    const ModelConfig cfg = small_cfg();
    const ParamStore store = make_store(cfg, 5);
    const auto w = BackboneWeights::from_store(store, cfg.backbone.n_layers);
    const Mat x = random_tokens(7, cfg.backbone.d_model, 9);
    const Mat h = backbone_forward(x, w, cfg.backbone, 0, nullptr);
    CHECK(h.rows == x.rows);
    CHECK(h.cols == x.cols);
}

TEST_CASE("context overflow errors") {
    const ModelConfig cfg = small_cfg();
    const ParamStore store = make_store(cfg, 5);
    const auto w = BackboneWeights::from_store(store, cfg.backbone.n_layers);
    const Mat x = random_tokens(cfg.backbone.context_len + 1, cfg.backbone.d_model, 9);
    try {
        backbone_forward(x, w, cfg.backbone, 0, nullptr);
        FAIL("expected overflow");
    } catch (const StgError& e) {
        CHECK(e.code() == ErrorCode::ContextOverflow);
    }
}

TEST_CASE("zeroed projections reduce a block to ln_f(x + wpe)") {
    ModelConfig cfg = small_cfg();
    cfg.backbone.n_layers = 1;
    ParamStore store = make_store(cfg, 5);
    for (const char* name : {"blocks.0.attn.proj.w", "blocks.0.attn.proj.b",
                             "blocks.0.ffn.proj.w", "blocks.0.ffn.proj.b"}) {
        auto& e = store.at(name);
        store.set_values(name, std::vector<float>(e.tensor.data.size(), 0.0f));
    }
    const auto w = BackboneWeights::from_store(store, 1);
    const Mat x = random_tokens(5, cfg.backbone.d_model, 11);
    const Mat h = backbone_forward(x, w, cfg.backbone, 0, nullptr);

    Mat xpe = x;
    for (int i = 0; i < x.rows; ++i)
        for (int j = 0; j < x.cols; ++j) xpe(i, j) += store.m("wpe")(i, j);
    Mat expect;
    layer_norm_forward(xpe, store.m("ln_f.g"), store.m("ln_f.b"), cfg.backbone.ln_eps, expect,
                       nullptr, nullptr);
    for (size_t i = 0; i < h.v.size(); ++i) CHECK(h.v[i] == doctest::Approx(expect.v[i]));
}

TEST_CASE("layer norm of [1,2,3] matches the closed form") {
    Mat x(1, 3);
    x(0, 0) = 1;
    x(0, 1) = 2;
    x(0, 2) = 3;
    Mat g(1, 3), b(1, 3);
    for (auto& v : g.v) v = 1.0;
    Mat y;
    layer_norm_forward(x, g, b, 1e-5, y, nullptr, nullptr);
    CHECK(y(0, 0) == doctest::Approx(-1.2247).epsilon(1e-3));
    CHECK(y(0, 1) == doctest::Approx(0.0).epsilon(1e-3));
    CHECK(y(0, 2) == doctest::Approx(1.2247).epsilon(1e-3));
}

TEST_CASE("causal mask: outputs ignore later positions") {
    const ModelConfig cfg = small_cfg();
    const ParamStore store = make_store(cfg, 7);
    const auto w = BackboneWeights::from_store(store, cfg.backbone.n_layers);
    const int s = 9, probe = 4;
    const Mat x = random_tokens(s, cfg.backbone.d_model, 13);
    const Mat h0 = backbone_forward(x, w, cfg.backbone, 0, nullptr);

    Rng rng(99);
    for (int trial = 0; trial < 5; ++trial) {
        Mat xp = x;
        for (int i = probe + 1; i < s; ++i)
            for (int j = 0; j < xp.cols; ++j) xp(i, j) += rng.normal();
        const Mat hp = backbone_forward(xp, w, cfg.backbone, 0, nullptr);
        for (int i = 0; i <= probe; ++i)
            for (int j = 0; j < hp.cols; ++j) CHECK(hp(i, j) == h0(i, j));  // bit-identical
    }
}

TEST_CASE("bidirectional graph span lets graph rows see later graph rows") {
    ModelConfig cfg = small_cfg();
    cfg.backbone.bidirectional_graph_span = true;
    const ParamStore store = make_store(cfg, 7);
    const auto w = BackboneWeights::from_store(store, cfg.backbone.n_layers);
    const int s = 9, graph_start = 3;
    const Mat x = random_tokens(s, cfg.backbone.d_model, 13);
    const Mat h0 = backbone_forward(x, w, cfg.backbone, graph_start, nullptr);
    Mat xp = x;
    xp(s - 1, 0) += 1.0;  // last graph token
    const Mat hp = backbone_forward(xp, w, cfg.backbone, graph_start, nullptr);
    double diff = 0.0;
    for (int j = 0; j < hp.cols; ++j) diff += std::abs(hp(graph_start, j) - h0(graph_start, j));
    CHECK(diff > 0.0);
    // prompt rows stay causal
    for (int i = 0; i < graph_start; ++i)
        for (int j = 0; j < hp.cols; ++j) CHECK(hp(i, j) == h0(i, j));
}

TEST_CASE("attention rows are probability vectors") {
    const ModelConfig cfg = small_cfg();
    const ParamStore store = make_store(cfg, 15);
    const auto w = BackboneWeights::from_store(store, cfg.backbone.n_layers);
    const int s = 8;
    BackboneCache cache;
    backbone_forward(random_tokens(s, cfg.backbone.d_model, 3), w, cfg.backbone, 0, &cache);
    for (const auto& layer : cache.layers) {
        for (int r = 0; r < layer.probs.rows; ++r) {
            double sum = 0.0;
            for (int c = 0; c < layer.probs.cols; ++c) {
                CHECK(layer.probs(r, c) >= 0.0);
                sum += layer.probs(r, c);
            }
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-5));
        }
    }
}

TEST_CASE("parameter ledger reproduces the reference accounting exactly") {
    const ModelConfig cfg = ModelConfig::reference();
    const CountLedger led = count_parameters(build_param_specs(cfg));
    CHECK(led.group_count(groups::kTokenizer) == 18880);
    CHECK(led.group_count(groups::kAdapter) == 217640);
    CHECK(led.group_count(groups::kPositional) == 786432);
    CHECK(led.group_count(groups::kLayerNorm) == 10752);
    CHECK(led.trainable_total == 1033704);
    CHECK(led.total == 60885480);
    CHECK(led.trainable_pct == doctest::Approx(1.70).epsilon(0.005));
    for (const auto& row : led.rows) {
        const bool should_train = row.group == groups::kTokenizer ||
                                  row.group == groups::kAdapter ||
                                  row.group == groups::kPositional ||
                                  row.group == groups::kLayerNorm;
        CHECK(row.trainable == should_train);
    }
}

TEST_CASE("degenerate embedding dims zero out the tokenizer group") {
    ModelConfig cfg = ModelConfig::reference();
    cfg.c1 = 0;
    cfg.c2 = 0;
    cfg.k1 = 1;
    const CountLedger led = count_parameters(build_param_specs(cfg));
    CHECK(led.group_count(groups::kTokenizer) == 0);
}

TEST_CASE("no-pe drops exactly the positional row from the trainable total") {
    const ModelConfig base = ModelConfig::reference();
    const ModelConfig nope = build_variant("no-pe", base);
    const CountLedger a = count_parameters(build_param_specs(base));
    const CountLedger b = count_parameters(build_param_specs(nope));
    CHECK(a.trainable_total - b.trainable_total == 786432);
    CHECK(a.total == b.total);
}

TEST_CASE("every tensor belongs to exactly one partition") {
    for (const char* name : {"full", "no-llm", "no-pe", "no-tokenizer", "no-adapter"}) {
        ModelConfig base = ModelConfig::desk();
        if (std::string(name) == "no-adapter") base.c1 = base.c2 = 20;  // padding must fit D=64
        const ModelConfig cfg = build_variant(name, base);
        const CountLedger led = count_parameters(build_param_specs(cfg));
        int64_t frozen = 0;
        for (const auto& row : led.rows)
            if (!row.trainable) frozen += row.count;
        CHECK(frozen + led.trainable_total == led.total);
    }
}

TEST_CASE("checkpoint round trip") {
    const ModelConfig cfg = small_cfg();
    ParamStore store = make_store(cfg, 31);
    const Scaler scaler{12.5, 3.25};
    TempDir dir("ckpt");

    save_checkpoint(store, cfg, scaler, dir.str());
    const Checkpoint back = load_checkpoint(dir.str());
    CHECK(back.scaler.mean == scaler.mean);
    CHECK(back.scaler.std == scaler.std);
    CHECK(back.config.backbone.d_model == cfg.backbone.d_model);
    CHECK(back.params.size() == store.size());
    for (size_t i = 0; i < store.size(); ++i) {
        const auto& a = store.entry(i);
        const auto& b = back.params.at(a.spec.name);
        CHECK(a.tensor.data == b.tensor.data);  // bit-equal
    }
}

TEST_CASE("missing tensor is named in the error") {
    const ModelConfig cfg = small_cfg();
    ParamStore store = make_store(cfg, 31);
    TempDir dir("ckpt_missing");
    save_checkpoint(store, cfg, Scaler{}, dir.str());

    // strip ln_f.g from the index
    nlohmann::json index;
    {
        std::ifstream in(dir.path / "index.json");
        in >> index;
    }
    REQUIRE(index.at("tensors").contains("ln_f.g"));
    index["tensors"].erase("ln_f.g");
    {
        std::ofstream out(dir.path / "index.json");
        out << index.dump(2);
    }

    try {
        load_checkpoint(dir.str());
        FAIL("expected missing tensor");
    } catch (const StgError& e) {
        CHECK(e.code() == ErrorCode::MissingTensor);
        CHECK(std::string(e.what()).find("ln_f.g") != std::string::npos);
    }
}

TEST_CASE("truncated tensors.bin errors") {
    const ModelConfig cfg = small_cfg();
    ParamStore store = make_store(cfg, 31);
    TempDir dir("ckpt_trunc");
    save_checkpoint(store, cfg, Scaler{}, dir.str());
    const auto size = std::filesystem::file_size(dir.path / "tensors.bin");
    std::filesystem::resize_file(dir.path / "tensors.bin", size - 8);
    try {
        load_checkpoint(dir.str());
        FAIL("expected truncation error");
    } catch (const StgError& e) {
        CHECK(e.code() == ErrorCode::TruncatedPayload);
    }
}

TEST_CASE("random init is deterministic per seed") {
    const ModelConfig cfg = small_cfg();
    const ParamStore a = make_store(cfg, 77);
    const ParamStore b = make_store(cfg, 77);
    const ParamStore c = make_store(cfg, 78);
    bool any_diff = false;
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a.entry(i).tensor.data == b.entry(i).tensor.data);
        if (a.entry(i).tensor.data != c.entry(i).tensor.data) any_diff = true;
    }
    CHECK(any_diff);
}
