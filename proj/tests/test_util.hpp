#pragma once

#include <filesystem>
#include <random>
#include <string>

// Scratch directory under the build tree, removed on destruction.
struct TempDir {
    std::filesystem::path path;

    explicit TempDir(const std::string& tag) {
        static std::mt19937_64 rng(std::random_device{}());
        path = std::filesystem::temp_directory_path() /
               ("stgllm_" + tag + "_" + std::to_string(rng()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::string str() const { return path.string(); }
    std::string sub(const std::string& name) const { return (path / name).string(); }
};
