#pragma once

#include <string>
#include <vector>

#include "stgllm/dataset.hpp"
#include "stgllm/tensor.hpp"

namespace stgllm {

// Byte-level text tokenizer (vocab 257 = 256 bytes + pad) by default, so any
// byte sequence is encodable. An external vocab (JSON list of token strings)
// is matched greedily by longest prefix and may fail with EncodeFailure.
struct TextVocab {
    enum class Mode { ByteLevel, External };
    Mode mode = Mode::ByteLevel;
    int vocab_size = 257;
    std::vector<std::string> tokens;  // external mode only

    static TextVocab byte_level() { return TextVocab{}; }
    static TextVocab from_file(const std::string& path);

    std::vector<int> encode(const std::string& text) const;
    std::string decode(const std::vector<int>& ids) const;
};

// Token-id lookup through the embedding table: M×D, M = token count.
Mat encode_prompt(const std::string& text, const TextVocab& vocab, const Mat& wte,
                  int context_len);

struct CalendarMeta {
    int interval_minutes = 5;
    int steps_per_day = 288;
};

// Deterministic fill of {n_nodes} {start} {end} {weekday} {horizon} into the
// template. An empty template selects a built-in one: clock-time phrasing for
// sub-daily data, date-level phrasing for intervals of a day or more.
std::string render_time_prompt(const WindowSample& window, const CalendarMeta& cal, int n_nodes,
                               const std::string& tmpl = "");
std::string render_time_prompt(const WindowSample& window, const SeriesDataset& ds,
                               const std::string& tmpl = "");

}  // namespace stgllm
