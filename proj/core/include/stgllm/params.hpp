#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "stgllm/config.hpp"
#include "stgllm/tensor.hpp"

namespace stgllm {

enum class InitKind { Zero, One, Uniform, Normal };

// Parameter groups mirror the accounting table rows.
namespace groups {
inline constexpr const char* kTokenizer = "stg_tokenizer";
inline constexpr const char* kAdapter = "stg_adapter";
inline constexpr const char* kPositional = "position_embeddings";
inline constexpr const char* kLayerNorm = "layer_norm";
inline constexpr const char* kTokenEmbedding = "token_embeddings";
inline constexpr const char* kAttentionFfn = "attention_ffn";
}  // namespace groups

struct ParamSpec {
    std::string name;
    std::vector<int64_t> shape;
    bool trainable = false;
    bool decay_exempt = false;  // biases and layer-norm gains/biases skip weight decay
    std::string group;
    InitKind init = InitKind::Zero;
    double init_scale = 0.0;

    int64_t numel() const { return Tensor::numel_of(shape); }
};

// The named-tensor partition for a given model configuration.
// Reference partition: {wpe, all ln*.{g,b}, tokenizer.*, adapter.*} trainable,
// everything else frozen; ablation variants adjust it.
std::vector<ParamSpec> build_param_specs(const ModelConfig& cfg);

struct CountLedger {
    struct Row {
        std::string group;
        int64_t count = 0;
        bool trainable = false;
        double ratio_pct = 0.0;  // of the grand total
    };
    std::vector<Row> rows;
    int64_t total = 0;
    int64_t trainable_total = 0;
    double trainable_pct = 0.0;

    int64_t group_count(const std::string& group) const;
};

CountLedger count_parameters(const std::vector<ParamSpec>& specs);

// Parameter storage. Values live as f32 (the checkpoint dtype) with a double
// mirror used by all compute; the mirror always equals the widened f32 value.
class ParamStore {
public:
    struct Entry {
        ParamSpec spec;
        Tensor tensor;
        Mat mirror;
    };

    void add(const ParamSpec& spec);
    void init_random(uint64_t seed);

    bool has(const std::string& name) const { return index_.count(name) > 0; }
    Entry& at(const std::string& name);
    const Entry& at(const std::string& name) const;
    const Mat& m(const std::string& name) const { return at(name).mirror; }

    size_t size() const { return entries_.size(); }
    Entry& entry(size_t i) { return entries_[i]; }
    const Entry& entry(size_t i) const { return entries_[i]; }

    // Overwrites tensor contents (load path); refreshes the mirror.
    void set_values(const std::string& name, const std::vector<float>& values);
    // Writes one coordinate in double and re-widens from f32 (optimizer path).
    void set_coord(Entry& e, int64_t i, double value) {
        e.tensor.data[static_cast<size_t>(i)] = static_cast<float>(value);
        e.mirror.v[static_cast<size_t>(i)] =
            static_cast<double>(e.tensor.data[static_cast<size_t>(i)]);
    }

    std::vector<ParamSpec> specs() const;
    CountLedger ledger() const;

private:
    std::vector<Entry> entries_;
    std::unordered_map<std::string, size_t> index_;
};

// Per-tensor gradient buffers; entries exist only for trainable tensors.
class GradStore {
public:
    explicit GradStore(const ParamStore& store);
    GradStore() = default;

    bool has(const std::string& name) const { return index_.count(name) > 0; }
    // nullptr for frozen tensors — backward passes skip accumulation through it
    std::vector<double>* find(const std::string& name);
    const std::vector<double>* find(const std::string& name) const;

    void zero();
    void add_scaled(const GradStore& other, double scale);

    const std::vector<std::string>& names() const { return names_; }

private:
    std::vector<std::string> names_;
    std::vector<std::vector<double>> bufs_;
    std::unordered_map<std::string, size_t> index_;
};

}  // namespace stgllm
