#include "stgllm/checkpoint.hpp"

#include <filesystem>
#include <fstream>

#include "json_util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace stgllm {

void save_checkpoint(const ParamStore& params, const ModelConfig& config, const Scaler& scaler,
                     const std::string& dir) {
    fs::create_directories(dir);
    json index;
    index["config"] = to_json(config);
    index["scaler"] = to_json(scaler);
    json tensors = json::object();

    std::ofstream bin(fs::path(dir) / "tensors.bin", std::ios::binary);
    if (!bin) fail(ErrorCode::IoFailure, "cannot write tensors.bin under " + dir);
    int64_t offset = 0;
    for (size_t i = 0; i < params.size(); ++i) {
        const auto& e = params.entry(i);
        const int64_t bytes = e.tensor.numel() * static_cast<int64_t>(sizeof(float));
        tensors[e.spec.name] = {{"dtype", "f32"},
                                {"shape", e.spec.shape},
                                {"byte_offset", offset},
                                {"byte_len", bytes}};
        bin.write(reinterpret_cast<const char*>(e.tensor.data.data()),
                  static_cast<std::streamsize>(bytes));
        offset += bytes;
    }
    if (!bin) fail(ErrorCode::IoFailure, "short write to tensors.bin under " + dir);
    index["tensors"] = std::move(tensors);

    std::ofstream out(fs::path(dir) / "index.json");
    if (!out) fail(ErrorCode::IoFailure, "cannot write index.json under " + dir);
    out << index.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::string& dir) {
    const fs::path index_path = fs::path(dir) / "index.json";
    std::ifstream in(index_path);
    if (!in) fail(ErrorCode::MissingFile, "cannot open " + index_path.string());
    json index;
    try {
        in >> index;
    } catch (const json::exception& e) {
        fail(ErrorCode::BadMeta, index_path.string() + ": " + e.what());
    }

    Checkpoint ck;
    try {
        ck.config = model_from_json(index.at("config"));
        ck.scaler = scaler_from_json(index.at("scaler"));
    } catch (const json::exception& e) {
        fail(ErrorCode::BadMeta, index_path.string() + ": " + e.what());
    }
    ck.config.validate();

    const fs::path bin_path = fs::path(dir) / "tensors.bin";
    if (!fs::exists(bin_path)) fail(ErrorCode::MissingFile, "missing " + bin_path.string());
    const auto bin_size = static_cast<int64_t>(fs::file_size(bin_path));
    std::ifstream bin(bin_path, std::ios::binary);
    if (!bin) fail(ErrorCode::MissingFile, "cannot open " + bin_path.string());

    const json& tensors = index.at("tensors");
    for (const auto& spec : build_param_specs(ck.config)) {
        auto it = tensors.find(spec.name);
        if (it == tensors.end())
            fail(ErrorCode::MissingTensor, "archive is missing tensor '" + spec.name + "'");
        const auto shape = it->at("shape").get<std::vector<int64_t>>();
        if (shape != spec.shape)
            fail(ErrorCode::ShapeMismatch,
                 "tensor '" + spec.name + "' has archived shape inconsistent with the config");
        const auto dtype = it->at("dtype").get<std::string>();
        require(dtype == "f32", ErrorCode::BadMeta, spec.name + ": unsupported dtype " + dtype);
        const auto offset = it->at("byte_offset").get<int64_t>();
        const auto len = it->at("byte_len").get<int64_t>();
        require(len == spec.numel() * static_cast<int64_t>(sizeof(float)),
                ErrorCode::ShapeMismatch, spec.name + ": byte_len inconsistent with shape");
        if (offset < 0 || offset + len > bin_size)
            fail(ErrorCode::TruncatedPayload,
                 "tensor '" + spec.name + "' extends past the end of tensors.bin");

        ck.params.add(spec);
        std::vector<float> values(static_cast<size_t>(spec.numel()));
        bin.seekg(offset);
        bin.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(len));
        if (!bin) fail(ErrorCode::TruncatedPayload, spec.name + ": short read from tensors.bin");
        ck.params.set_values(spec.name, values);
    }
    return ck;
}

}  // namespace stgllm
