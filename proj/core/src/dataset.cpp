#include "stgllm/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace stgllm {

int SeriesDataset::steps_per_day() const {
    if (interval_minutes >= 1440) return 1;
    return 1440 / interval_minutes;
}

void SeriesDataset::validate() const {
    require(num_steps > 0 && num_nodes > 0 && num_features > 0, ErrorCode::BadMeta,
            name + ": non-positive dimensions");
    require(interval_minutes > 0, ErrorCode::BadMeta, name + ": interval_minutes must be positive");
    require(interval_minutes >= 1440 ? interval_minutes == 1440 : 1440 % interval_minutes == 0,
            ErrorCode::BadMeta, name + ": interval_minutes must divide a day (or equal one day)");
    const int k1 = steps_per_day();
    require(first_step_day_of_week >= 0 && first_step_day_of_week < 7, ErrorCode::BadMeta,
            name + ": first_step_day_of_week out of [0,7)");
    require(first_step_index_in_day >= 0 && first_step_index_in_day < k1, ErrorCode::BadMeta,
            name + ": first_step_index_in_day out of [0,steps_per_day)");
    require(values.same_shape({num_steps, num_nodes, num_features}), ErrorCode::ShapeMismatch,
            name + ": payload shape does not match descriptor");
    for (float v : values.data) {
        if (!std::isfinite(v)) fail(ErrorCode::NonFiniteData, name + ": NaN/Inf in payload");
    }
    for (auto [a, b] : edges) {
        require(a >= 0 && a < num_nodes && b >= 0 && b < num_nodes, ErrorCode::BadMeta,
                name + ": edge references node index >= N");
    }
}

void SplitSpec::validate() const {
    require(train_ratio > 0 && val_ratio > 0 && test_ratio > 0, ErrorCode::InvalidConfig,
            "split ratios must be positive");
    require(std::abs(train_ratio + val_ratio + test_ratio - 1.0) < 1e-9, ErrorCode::InvalidConfig,
            "split ratios must sum to 1");
    require(input_len > 0 && horizon > 0, ErrorCode::InvalidConfig, "L and P must be positive");
}

namespace {

json load_json_file(const fs::path& path, ErrorCode missing_code) {
    std::ifstream in(path);
    if (!in) fail(missing_code, "cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        fail(ErrorCode::BadMeta, path.string() + ": " + e.what());
    }
    return j;
}

std::vector<float> read_csv_payload(const fs::path& path, int64_t expect_cols) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::MissingFile, "cannot open " + path.string());
    std::vector<float> out;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<float> row;
        row.reserve(static_cast<size_t>(expect_cols));
        const char* p = line.c_str();
        const char* end = p + line.size();
        bool numeric = true;
        while (p < end) {
            while (p < end && (*p == ' ' || *p == '\t')) ++p;
            const char* tok_end = p;
            while (tok_end < end && *tok_end != ',') ++tok_end;
            float v = 0.0f;
            auto [ptr, ec] = std::from_chars(p, tok_end, v);
            if (ec != std::errc() || ptr == p) {
                numeric = false;
                break;
            }
            row.push_back(v);
            p = tok_end < end ? tok_end + 1 : end;
        }
        if (!numeric) {
            // header row permitted only on the first line
            if (first) {
                first = false;
                continue;
            }
            fail(ErrorCode::ShapeMismatch, path.string() + ": non-numeric row");
        }
        first = false;
        if (static_cast<int64_t>(row.size()) != expect_cols)
            fail(ErrorCode::ShapeMismatch, path.string() + ": row has " +
                                               std::to_string(row.size()) + " columns, expected " +
                                               std::to_string(expect_cols));
        out.insert(out.end(), row.begin(), row.end());
    }
    return out;
}

}  // namespace

SeriesDataset load_dataset(const std::string& dir) {
    const fs::path root(dir);
    const json meta = load_json_file(root / "meta.json", ErrorCode::MissingFile);

    SeriesDataset ds;
    try {
        ds.name = meta.at("name").get<std::string>();
        ds.num_nodes = meta.at("num_nodes").get<int>();
        ds.num_features = meta.at("num_features").get<int>();
        ds.num_steps = meta.at("num_steps").get<int64_t>();
        ds.interval_minutes = meta.at("interval_minutes").get<int>();
        ds.first_step_day_of_week = meta.at("first_step_day_of_week").get<int>();
        ds.first_step_index_in_day = meta.at("first_step_index_in_day").get<int>();
    } catch (const json::exception& e) {
        fail(ErrorCode::BadMeta, dir + "/meta.json: " + e.what());
    }
    if (meta.contains("edges")) {
        for (const auto& e : meta.at("edges")) {
            ds.edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
        }
    }

    const int64_t expect = ds.num_steps * ds.num_nodes * ds.num_features;
    const fs::path bin = root / "data.bin";
    const fs::path csv = root / "data.csv";
    ds.values = Tensor({ds.num_steps, ds.num_nodes, ds.num_features});
    if (fs::exists(bin)) {
        const auto bytes = fs::file_size(bin);
        if (bytes != static_cast<uintmax_t>(expect) * sizeof(float))
            fail(ErrorCode::ShapeMismatch,
                 bin.string() + ": payload holds " + std::to_string(bytes / sizeof(float)) +
                     " floats, descriptor expects " + std::to_string(expect));
        std::ifstream in(bin, std::ios::binary);
        if (!in) fail(ErrorCode::MissingFile, "cannot open " + bin.string());
        in.read(reinterpret_cast<char*>(ds.values.data.data()),
                static_cast<std::streamsize>(expect * sizeof(float)));
        if (!in) fail(ErrorCode::TruncatedPayload, bin.string() + ": short read");
    } else if (fs::exists(csv)) {
        auto vals = read_csv_payload(csv, static_cast<int64_t>(ds.num_nodes) * ds.num_features);
        if (static_cast<int64_t>(vals.size()) != expect)
            fail(ErrorCode::ShapeMismatch,
                 csv.string() + ": payload holds " + std::to_string(vals.size()) +
                     " values, descriptor expects " + std::to_string(expect));
        ds.values.data = std::move(vals);
    } else {
        fail(ErrorCode::MissingFile, dir + ": neither data.bin nor data.csv present");
    }

    ds.validate();
    return ds;
}

void save_dataset(const SeriesDataset& ds, const std::string& dir, bool as_csv) {
    ds.validate();
    const fs::path root(dir);
    fs::create_directories(root);

    json meta = {
        {"name", ds.name},
        {"num_nodes", ds.num_nodes},
        {"num_features", ds.num_features},
        {"num_steps", ds.num_steps},
        {"interval_minutes", ds.interval_minutes},
        {"first_step_day_of_week", ds.first_step_day_of_week},
        {"first_step_index_in_day", ds.first_step_index_in_day},
    };
    if (!ds.edges.empty()) {
        json edges = json::array();
        for (auto [a, b] : ds.edges) edges.push_back({a, b});
        meta["edges"] = edges;
    }
    std::ofstream mout(root / "meta.json");
    if (!mout) fail(ErrorCode::IoFailure, "cannot write " + (root / "meta.json").string());
    mout << meta.dump(2) << "\n";

    if (as_csv) {
        std::ofstream out(root / "data.csv");
        if (!out) fail(ErrorCode::IoFailure, "cannot write data.csv");
        out.precision(9);  // round-trippable float32
        const int64_t cols = static_cast<int64_t>(ds.num_nodes) * ds.num_features;
        for (int64_t t = 0; t < ds.num_steps; ++t) {
            for (int64_t c = 0; c < cols; ++c) {
                if (c) out << ',';
                out << ds.values.data[static_cast<size_t>(t * cols + c)];
            }
            out << '\n';
        }
    } else {
        std::ofstream out(root / "data.bin", std::ios::binary);
        if (!out) fail(ErrorCode::IoFailure, "cannot write data.bin");
        out.write(reinterpret_cast<const char*>(ds.values.data.data()),
                  static_cast<std::streamsize>(ds.values.data.size() * sizeof(float)));
    }
}

Scaler fit_scaler(const SeriesDataset& ds, Segment seg) {
    require(seg.length() > 0, ErrorCode::SegmentTooShort, "scaler: empty segment");
    double sum = 0.0;
    for (int64_t t = seg.begin; t < seg.end; ++t)
        for (int n = 0; n < ds.num_nodes; ++n) sum += ds.value(t, n, 0);
    const double count = static_cast<double>(seg.length()) * ds.num_nodes;
    const double mean = sum / count;
    double sq = 0.0;
    for (int64_t t = seg.begin; t < seg.end; ++t)
        for (int n = 0; n < ds.num_nodes; ++n) {
            const double d = ds.value(t, n, 0) - mean;
            sq += d * d;
        }
    const double std = std::sqrt(sq / count);
    require(std > 0.0, ErrorCode::NonFiniteData, "scaler: zero variance on training segment");
    return Scaler{mean, std};
}

namespace {

std::vector<WindowSample> windows_in_segment(const SeriesDataset& ds, Segment seg,
                                             const SplitSpec& spec, const char* which) {
    const int64_t L = spec.input_len, P = spec.horizon;
    const int64_t count = seg.length() - L - P + 1;
    if (count < 1)
        fail(ErrorCode::SegmentTooShort,
             std::string(which) + " segment of length " + std::to_string(seg.length()) +
                 " cannot fit one window of L+P=" + std::to_string(L + P));
    const int k1 = ds.steps_per_day();
    std::vector<WindowSample> out;
    out.reserve(static_cast<size_t>(count));
    for (int64_t s = seg.begin; s + L + P <= seg.end; ++s) {
        WindowSample w;
        w.x = Tensor({L, ds.num_nodes, ds.num_features});
        w.y = Tensor({P, ds.num_nodes});
        for (int64_t t = 0; t < L; ++t)
            for (int n = 0; n < ds.num_nodes; ++n)
                for (int f = 0; f < ds.num_features; ++f)
                    w.x.at3(t, n, f) = ds.value(s + t, n, f);
        for (int64_t h = 0; h < P; ++h)
            for (int n = 0; n < ds.num_nodes; ++n) w.y.at2(h, n) = ds.value(s + L + h, n, 0);
        w.t_last = s + L - 1;
        const int64_t abs_idx = ds.first_step_index_in_day + w.t_last;
        w.tod_index = static_cast<int>(abs_idx % k1);
        w.dow_index = static_cast<int>((ds.first_step_day_of_week + abs_idx / k1) % 7);
        out.push_back(std::move(w));
    }
    return out;
}

}  // namespace

SplitResult split_and_window(const SeriesDataset& ds, const SplitSpec& spec) {
    spec.validate();
    ds.validate();
    const int64_t T = ds.num_steps;
    const auto n_train = static_cast<int64_t>(std::floor(spec.train_ratio * static_cast<double>(T)));
    const auto n_val = static_cast<int64_t>(std::floor(spec.val_ratio * static_cast<double>(T)));

    SplitResult r;
    r.train_seg = {0, n_train};
    r.val_seg = {n_train, n_train + n_val};
    r.test_seg = {n_train + n_val, T};
    r.scaler = fit_scaler(ds, r.train_seg);
    r.train = windows_in_segment(ds, r.train_seg, spec, "train");
    r.val = windows_in_segment(ds, r.val_seg, spec, "val");
    r.test = windows_in_segment(ds, r.test_seg, spec, "test");
    return r;
}

SeriesDataset generate_synthetic(int n_nodes, int64_t n_steps, double coupling, uint64_t seed) {
    require(n_nodes >= 2, ErrorCode::InvalidConfig, "synthetic: need at least 2 nodes");
    require(coupling >= 0.0 && coupling <= 1.0, ErrorCode::InvalidConfig,
            "synthetic: coupling must be in [0,1]");
    SeriesDataset ds;
    ds.name = "synthetic-n" + std::to_string(n_nodes) + "-c" + std::to_string(coupling);
    ds.num_steps = n_steps;
    ds.num_nodes = n_nodes;
    ds.num_features = 1;
    ds.interval_minutes = 5;
    ds.first_step_day_of_week = 0;
    ds.first_step_index_in_day = 0;
    const int k1 = ds.steps_per_day();
    require(n_steps >= 2 * k1, ErrorCode::InvalidConfig,
            "synthetic: need at least two days of steps");

    Rng rng(seed);
    std::vector<double> amp(n_nodes), phase(n_nodes), wamp(n_nodes), wphase(n_nodes);
    std::vector<std::vector<int>> nbrs(n_nodes);
    const int n_nbrs = std::min(3, n_nodes - 1);
    for (int i = 0; i < n_nodes; ++i) {
        amp[i] = rng.uniform(20.0, 40.0);
        phase[i] = rng.uniform(0.0, 2.0 * M_PI);
        wamp[i] = rng.uniform(2.0, 4.0);
        wphase[i] = rng.uniform(0.0, 2.0 * M_PI);
        while (static_cast<int>(nbrs[i].size()) < n_nbrs) {
            const int j = static_cast<int>(rng.below(static_cast<uint64_t>(n_nodes)));
            if (j == i) continue;
            if (std::find(nbrs[i].begin(), nbrs[i].end(), j) == nbrs[i].end()) nbrs[i].push_back(j);
        }
    }

    ds.values = Tensor({n_steps, n_nodes, 1});
    std::vector<double> prev(n_nodes, kSyntheticBaseLevel);
    const double day_w = 2.0 * M_PI / k1;
    const double week_w = 2.0 * M_PI / (7.0 * k1);
    for (int64_t t = 0; t < n_steps; ++t) {
        std::vector<double> cur(n_nodes);
        for (int i = 0; i < n_nodes; ++i) {
            double x = kSyntheticBaseLevel + amp[i] * std::sin(day_w * static_cast<double>(t) + phase[i]) +
                       wamp[i] * std::sin(week_w * static_cast<double>(t) + wphase[i]) +
                       kSyntheticNoiseSigma * rng.normal();
            if (t > 0 && coupling > 0.0) {
                double lag = 0.0;
                for (int j : nbrs[i]) lag += prev[j] - kSyntheticBaseLevel;
                x += coupling * lag / static_cast<double>(nbrs[i].size());
            }
            cur[i] = x;
            ds.values.at3(t, i, 0) = static_cast<float>(x);
        }
        prev = cur;
    }
    for (int i = 0; i < n_nodes; ++i)
        for (int j : nbrs[i]) ds.edges.emplace_back(i, j);
    ds.validate();
    return ds;
}

SeriesDataset generate_exchange_like(uint64_t seed) {
    SeriesDataset ds;
    ds.name = "ExchangeRate";
    ds.num_steps = 7588;
    ds.num_nodes = 8;
    ds.num_features = 1;
    ds.interval_minutes = 1440;
    ds.first_step_day_of_week = 0;
    ds.first_step_index_in_day = 0;

    Rng rng(seed);
    const int n = ds.num_nodes;
    std::vector<double> anchor(n), level(n);
    for (int i = 0; i < n; ++i) {
        anchor[i] = rng.uniform(0.5, 2.0);
        level[i] = anchor[i];
    }
    const double revert = 0.02;       // pull toward the anchor
    const double level_sigma = 0.0025;  // random-walk step, relative
    const double obs_sigma = 0.006;     // observation noise, relative
    ds.values = Tensor({ds.num_steps, n, 1});
    for (int64_t t = 0; t < ds.num_steps; ++t) {
        for (int i = 0; i < n; ++i) {
            level[i] += revert * (anchor[i] - level[i]) + level_sigma * anchor[i] * rng.normal();
            const double obs = level[i] + obs_sigma * anchor[i] * rng.normal();
            ds.values.at3(t, i, 0) = static_cast<float>(obs);
        }
    }
    ds.validate();
    return ds;
}

std::vector<WindowSample> sample_few_shot(const std::vector<WindowSample>& train, int64_t n,
                                          uint64_t seed) {
    const int64_t total = static_cast<int64_t>(train.size());
    require(n >= 0, ErrorCode::InvalidConfig, "few-shot: n must be >= 0");
    if (n > total)
        fail(ErrorCode::SampleTooLarge,
             "few-shot: n=" + std::to_string(n) + " exceeds " + std::to_string(total) + " windows");
    if (n == 0) return {};

    // partial Fisher-Yates over an index vector
    std::vector<int64_t> idx(train.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int64_t>(i);
    Rng rng(seed);
    std::vector<WindowSample> out;
    out.reserve(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
        const auto j = i + static_cast<int64_t>(rng.below(static_cast<uint64_t>(total - i)));
        std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
        out.push_back(train[static_cast<size_t>(idx[static_cast<size_t>(i)])]);
    }
    return out;
}

}  // namespace stgllm
