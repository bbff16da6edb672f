#include "stgllm/prompt.hpp"

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

namespace stgllm {

TextVocab TextVocab::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::MissingFile, "cannot open vocab file " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::BadMeta, path + ": " + e.what());
    }
    require(j.is_array() && !j.empty(), ErrorCode::BadMeta, path + ": expected a JSON list");
    TextVocab v;
    v.mode = Mode::External;
    for (const auto& t : j) v.tokens.push_back(t.get<std::string>());
    v.vocab_size = static_cast<int>(v.tokens.size());
    return v;
}

std::vector<int> TextVocab::encode(const std::string& text) const {
    std::vector<int> ids;
    if (mode == Mode::ByteLevel) {
        ids.reserve(text.size());
        for (unsigned char c : text) ids.push_back(static_cast<int>(c));
        return ids;
    }
    // greedy longest match
    size_t pos = 0;
    while (pos < text.size()) {
        int best = -1;
        size_t best_len = 0;
        for (size_t i = 0; i < tokens.size(); ++i) {
            const auto& t = tokens[i];
            if (t.empty() || t.size() <= best_len) continue;
            if (text.compare(pos, t.size(), t) == 0) {
                best = static_cast<int>(i);
                best_len = t.size();
            }
        }
        if (best < 0)
            fail(ErrorCode::EncodeFailure,
                 "no vocab token matches text at byte " + std::to_string(pos));
        ids.push_back(best);
        pos += best_len;
    }
    return ids;
}

std::string TextVocab::decode(const std::vector<int>& ids) const {
    std::string out;
    for (int id : ids) {
        if (mode == Mode::ByteLevel) {
            require(id >= 0 && id < 256, ErrorCode::IndexOutOfRange, "byte id out of range");
            out.push_back(static_cast<char>(id));
        } else {
            require(id >= 0 && id < static_cast<int>(tokens.size()), ErrorCode::IndexOutOfRange,
                    "token id out of range");
            out += tokens[static_cast<size_t>(id)];
        }
    }
    return out;
}

Mat encode_prompt(const std::string& text, const TextVocab& vocab, const Mat& wte,
                  int context_len) {
    const auto ids = vocab.encode(text);
    const int m = static_cast<int>(ids.size());
    if (context_len > 0 && m > context_len)
        fail(ErrorCode::ContextOverflow,
             "prompt encodes to " + std::to_string(m) + " tokens, context is " +
                 std::to_string(context_len));
    Mat out(m, wte.cols);
    for (int i = 0; i < m; ++i) {
        require(ids[static_cast<size_t>(i)] < wte.rows, ErrorCode::IndexOutOfRange,
                "token id exceeds embedding table");
        std::copy(wte.row(ids[static_cast<size_t>(i)]), wte.row(ids[static_cast<size_t>(i)]) + wte.cols,
                  out.row(i));
    }
    return out;
}

namespace {

const char* kWeekdays[7] = {"Monday",   "Tuesday", "Wednesday", "Thursday",
                            "Friday",   "Saturday", "Sunday"};

const char* kSubDailyTemplate =
    "Given the historical traffic values for {n_nodes} nodes from {start} to {end} on "
    "{weekday}. Your task is to predict the traffic values for the next {horizon}. The "
    "historical traffic values of each node are as follows.";

const char* kDailyTemplate =
    "Given the historical daily values for {n_nodes} nodes ending on {weekday}. Your task is "
    "to predict the values for the next {horizon}. The historical values of each node are as "
    "follows.";

std::string clock_of(int step_in_day, int interval_minutes) {
    const int minutes = step_in_day * interval_minutes;
    const int hh = (minutes / 60) % 24;
    const int mm = minutes % 60;
    char buf[8];
    std::snprintf(buf, sizeof(buf), "%02d:%02d", hh, mm);
    return buf;
}

std::string horizon_text(int p, int interval_minutes) {
    if (interval_minutes >= 1440) {
        return p == 1 ? "one day" : std::to_string(p) + " days";
    }
    const int total = p * interval_minutes;
    if (total % 60 == 0) {
        const int hours = total / 60;
        return hours == 1 ? "one hour" : std::to_string(hours) + " hours";
    }
    return std::to_string(total) + " minutes";
}

void replace_all(std::string& s, const std::string& key, const std::string& value) {
    size_t pos = 0;
    while ((pos = s.find(key, pos)) != std::string::npos) {
        s.replace(pos, key.size(), value);
        pos += value.size();
    }
}

}  // namespace

std::string render_time_prompt(const WindowSample& window, const CalendarMeta& cal, int n_nodes,
                               const std::string& tmpl) {
    const bool daily = cal.interval_minutes >= 1440;
    std::string out = !tmpl.empty() ? tmpl : (daily ? kDailyTemplate : kSubDailyTemplate);

    const int k1 = cal.steps_per_day;
    const int end_tod = window.tod_index;
    const int start_tod = ((end_tod - (window.input_len() - 1)) % k1 + k1) % k1;
    std::string start_text, end_text;
    if (daily) {
        const int start_dow = ((window.dow_index - (window.input_len() - 1)) % 7 + 7) % 7;
        start_text = kWeekdays[start_dow];
        end_text = kWeekdays[window.dow_index];
    } else {
        start_text = clock_of(start_tod, cal.interval_minutes);
        end_text = clock_of(end_tod, cal.interval_minutes);
    }

    replace_all(out, "{n_nodes}", std::to_string(n_nodes));
    replace_all(out, "{start}", start_text);
    replace_all(out, "{end}", end_text);
    replace_all(out, "{weekday}", kWeekdays[window.dow_index % 7]);
    replace_all(out, "{horizon}", horizon_text(window.horizon(), cal.interval_minutes));
    return out;
}

std::string render_time_prompt(const WindowSample& window, const SeriesDataset& ds,
                               const std::string& tmpl) {
    return render_time_prompt(window, CalendarMeta{ds.interval_minutes, ds.steps_per_day()},
                              ds.num_nodes, tmpl);
}

}  // namespace stgllm
