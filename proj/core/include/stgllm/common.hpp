#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace stgllm {

enum class ErrorCode {
    MissingFile,
    BadMeta,
    ShapeMismatch,
    NonFiniteData,
    SegmentTooShort,
    IndexOutOfRange,
    WidthMismatch,
    ContextOverflow,
    MissingTensor,
    TruncatedPayload,
    UnknownVariant,
    NonFiniteLoss,
    EmptyTrainingSet,
    SampleTooLarge,
    EncodeFailure,
    InvalidConfig,
    IoFailure,
};

const char* error_code_name(ErrorCode code);

class StgError : public std::runtime_error {
public:
    StgError(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& msg) {
    throw StgError(code, msg);
}

inline void require(bool cond, ErrorCode code, const std::string& msg) {
    if (!cond) fail(code, msg);
}

// Deterministic RNG. mt19937_64 is pinned by the standard; the draw helpers
// below are hand-rolled because std distributions are implementation-defined.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    // [0,1) with 53 random bits
    double uniform01() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Box-Muller with cached spare
    double normal(double mean = 0.0, double stddev = 1.0);

    // uniform integer in [0,n), n > 0
    uint64_t below(uint64_t n);

private:
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

uint64_t fnv1a(std::string_view s);

// Stable per-tensor seed so initialization does not depend on registration order.
uint64_t seed_for(uint64_t seed, std::string_view name);

}  // namespace stgllm
