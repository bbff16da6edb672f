#include "stgllm/params.hpp"

#include <cmath>

namespace stgllm {

namespace {

ParamSpec weight(std::string name, std::vector<int64_t> shape, bool trainable, std::string group,
                 InitKind init, double scale) {
    ParamSpec s;
    s.name = std::move(name);
    s.shape = std::move(shape);
    s.trainable = trainable;
    s.decay_exempt = false;
    s.group = std::move(group);
    s.init = init;
    s.init_scale = scale;
    return s;
}

ParamSpec bias(std::string name, int64_t n, bool trainable, std::string group) {
    ParamSpec s;
    s.name = std::move(name);
    s.shape = {n};
    s.trainable = trainable;
    s.decay_exempt = true;
    s.group = std::move(group);
    s.init = InitKind::Zero;
    return s;
}

ParamSpec ln_param(std::string name, int64_t n, bool gain) {
    ParamSpec s;
    s.name = std::move(name);
    s.shape = {n};
    s.trainable = true;
    s.decay_exempt = true;
    s.group = groups::kLayerNorm;
    s.init = gain ? InitKind::One : InitKind::Zero;
    return s;
}

double fan_in_scale(int64_t fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); }

}  // namespace

std::vector<ParamSpec> build_param_specs(const ModelConfig& cfg) {
    cfg.validate();
    std::vector<ParamSpec> specs;
    const int D = cfg.backbone.d_model;
    const int width = cfg.token_width();
    const int P = cfg.horizon;
    const bool has_backbone = cfg.variant != VariantKind::NoLlm;
    const bool wpe_trainable = cfg.variant != VariantKind::NoPe;

    // tokenizer group
    if (cfg.variant == VariantKind::NoTokenizer) {
        const int pw = cfg.patch_len * cfg.num_features;
        specs.push_back(weight("patch.w", {pw, D}, true, groups::kTokenizer, InitKind::Uniform,
                               fan_in_scale(pw)));
        specs.push_back(bias("patch.b", D, true, groups::kTokenizer));
    } else if (cfg.temporal_enabled()) {
        if (cfg.c1 > 0)
            specs.push_back(weight("tokenizer.B_td", {cfg.k1, cfg.c1}, true, groups::kTokenizer,
                                   InitKind::Uniform, fan_in_scale(cfg.c1)));
        if (cfg.c2 > 0)
            specs.push_back(weight("tokenizer.B_dw", {cfg.k2, cfg.c2}, true, groups::kTokenizer,
                                   InitKind::Uniform, fan_in_scale(cfg.c2)));
    }

    // adapter group
    if (cfg.variant == VariantKind::NoAdapter) {
        specs.push_back(
            weight("out.w", {D, P}, true, groups::kAdapter, InitKind::Uniform, fan_in_scale(D)));
        specs.push_back(bias("out.b", P, true, groups::kAdapter));
    } else {
        if (cfg.variant != VariantKind::NoTokenizer) {
            specs.push_back(weight("adapter.W1", {width, D}, true, groups::kAdapter,
                                   InitKind::Uniform, fan_in_scale(width)));
            specs.push_back(bias("adapter.b1", D, true, groups::kAdapter));
        }
        specs.push_back(weight("adapter.W2", {D, width}, true, groups::kAdapter, InitKind::Uniform,
                               fan_in_scale(D)));
        specs.push_back(bias("adapter.b2", width, true, groups::kAdapter));
        specs.push_back(weight("adapter.W3", {width, P}, true, groups::kAdapter, InitKind::Uniform,
                               fan_in_scale(width)));
        specs.push_back(bias("adapter.b3", P, true, groups::kAdapter));
    }

    if (!has_backbone) return specs;

    const auto& bb = cfg.backbone;
    specs.push_back(weight("wte", {bb.vocab_size, D}, false, groups::kTokenEmbedding,
                           InitKind::Normal, 0.02));
    specs.push_back(weight("wpe", {bb.context_len, D}, wpe_trainable, groups::kPositional,
                           InitKind::Normal, 0.02));
    for (int l = 0; l < bb.n_layers; ++l) {
        const std::string p = "blocks." + std::to_string(l) + ".";
        specs.push_back(ln_param(p + "ln1.g", D, true));
        specs.push_back(ln_param(p + "ln1.b", D, false));
        specs.push_back(weight(p + "attn.qkv.w", {D, 3 * D}, false, groups::kAttentionFfn,
                               InitKind::Normal, 0.02));
        specs.push_back(bias(p + "attn.qkv.b", 3 * D, false, groups::kAttentionFfn));
        specs.push_back(weight(p + "attn.proj.w", {D, D}, false, groups::kAttentionFfn,
                               InitKind::Normal, 0.02));
        specs.push_back(bias(p + "attn.proj.b", D, false, groups::kAttentionFfn));
        specs.push_back(ln_param(p + "ln2.g", D, true));
        specs.push_back(ln_param(p + "ln2.b", D, false));
        specs.push_back(weight(p + "ffn.fc.w", {D, bb.ffn_mult * D}, false, groups::kAttentionFfn,
                               InitKind::Normal, 0.02));
        specs.push_back(bias(p + "ffn.fc.b", bb.ffn_mult * D, false, groups::kAttentionFfn));
        specs.push_back(weight(p + "ffn.proj.w", {bb.ffn_mult * D, D}, false, groups::kAttentionFfn,
                               InitKind::Normal, 0.02));
        specs.push_back(bias(p + "ffn.proj.b", D, false, groups::kAttentionFfn));
    }
    specs.push_back(ln_param("ln_f.g", D, true));
    specs.push_back(ln_param("ln_f.b", D, false));
    return specs;
}

int64_t CountLedger::group_count(const std::string& group) const {
    for (const auto& r : rows)
        if (r.group == group) return r.count;
    return 0;
}

CountLedger count_parameters(const std::vector<ParamSpec>& specs) {
    // fixed row order: the four trainable groups first, then frozen ones
    const char* order[] = {groups::kTokenizer,      groups::kAdapter,
                           groups::kPositional,     groups::kLayerNorm,
                           groups::kTokenEmbedding, groups::kAttentionFfn};
    CountLedger led;
    for (const char* g : order) {
        CountLedger::Row row;
        row.group = g;
        bool any = false;
        for (const auto& s : specs) {
            if (s.group != g) continue;
            row.count += s.numel();
            row.trainable = s.trainable;
            any = true;
        }
        if (any) led.rows.push_back(row);
    }
    for (const auto& s : specs) {
        led.total += s.numel();
        if (s.trainable) led.trainable_total += s.numel();
    }
    for (auto& r : led.rows)
        r.ratio_pct = led.total ? 100.0 * static_cast<double>(r.count) / static_cast<double>(led.total) : 0.0;
    led.trainable_pct =
        led.total ? 100.0 * static_cast<double>(led.trainable_total) / static_cast<double>(led.total) : 0.0;
    return led;
}

void ParamStore::add(const ParamSpec& spec) {
    require(!has(spec.name), ErrorCode::InvalidConfig, "duplicate parameter " + spec.name);
    Entry e;
    e.spec = spec;
    e.tensor = Tensor(spec.shape);
    if (spec.shape.size() == 2) {
        e.mirror = Mat(static_cast<int>(spec.shape[0]), static_cast<int>(spec.shape[1]));
    } else {
        e.mirror = Mat(1, static_cast<int>(e.tensor.numel()));
    }
    index_[spec.name] = entries_.size();
    entries_.push_back(std::move(e));
}

void ParamStore::init_random(uint64_t seed) {
    for (auto& e : entries_) {
        Rng rng(seed_for(seed, e.spec.name));
        auto& d = e.tensor.data;
        switch (e.spec.init) {
            case InitKind::Zero:
                std::fill(d.begin(), d.end(), 0.0f);
                break;
            case InitKind::One:
                std::fill(d.begin(), d.end(), 1.0f);
                break;
            case InitKind::Uniform:
                for (auto& x : d)
                    x = static_cast<float>(rng.uniform(-e.spec.init_scale, e.spec.init_scale));
                break;
            case InitKind::Normal:
                for (auto& x : d) x = static_cast<float>(rng.normal(0.0, e.spec.init_scale));
                break;
        }
        for (size_t i = 0; i < d.size(); ++i) e.mirror.v[i] = static_cast<double>(d[i]);
    }
}

ParamStore::Entry& ParamStore::at(const std::string& name) {
    auto it = index_.find(name);
    require(it != index_.end(), ErrorCode::MissingTensor, "no parameter named " + name);
    return entries_[it->second];
}

const ParamStore::Entry& ParamStore::at(const std::string& name) const {
    auto it = index_.find(name);
    require(it != index_.end(), ErrorCode::MissingTensor, "no parameter named " + name);
    return entries_[it->second];
}

void ParamStore::set_values(const std::string& name, const std::vector<float>& values) {
    Entry& e = at(name);
    require(values.size() == e.tensor.data.size(), ErrorCode::ShapeMismatch,
            name + ": value count mismatch");
    e.tensor.data = values;
    for (size_t i = 0; i < values.size(); ++i) e.mirror.v[i] = static_cast<double>(values[i]);
}

std::vector<ParamSpec> ParamStore::specs() const {
    std::vector<ParamSpec> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.spec);
    return out;
}

CountLedger ParamStore::ledger() const { return count_parameters(specs()); }

GradStore::GradStore(const ParamStore& store) {
    for (size_t i = 0; i < store.size(); ++i) {
        const auto& e = store.entry(i);
        if (!e.spec.trainable) continue;
        index_[e.spec.name] = names_.size();
        names_.push_back(e.spec.name);
        bufs_.emplace_back(static_cast<size_t>(e.tensor.numel()), 0.0);
    }
}

std::vector<double>* GradStore::find(const std::string& name) {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &bufs_[it->second];
}

const std::vector<double>* GradStore::find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &bufs_[it->second];
}

void GradStore::zero() {
    for (auto& b : bufs_) std::fill(b.begin(), b.end(), 0.0);
}

void GradStore::add_scaled(const GradStore& other, double scale) {
    for (size_t i = 0; i < names_.size(); ++i) {
        const auto* src = other.find(names_[i]);
        if (!src) continue;
        auto& dst = bufs_[i];
        for (size_t j = 0; j < dst.size(); ++j) dst[j] += scale * (*src)[j];
    }
}

}  // namespace stgllm
