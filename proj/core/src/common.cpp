#include "stgllm/common.hpp"

#include <cmath>

namespace stgllm {

const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::MissingFile: return "missing_file";
        case ErrorCode::BadMeta: return "bad_meta";
        case ErrorCode::ShapeMismatch: return "shape_mismatch";
        case ErrorCode::NonFiniteData: return "non_finite_data";
        case ErrorCode::SegmentTooShort: return "segment_too_short";
        case ErrorCode::IndexOutOfRange: return "index_out_of_range";
        case ErrorCode::WidthMismatch: return "width_mismatch";
        case ErrorCode::ContextOverflow: return "context_overflow";
        case ErrorCode::MissingTensor: return "missing_tensor";
        case ErrorCode::TruncatedPayload: return "truncated_payload";
        case ErrorCode::UnknownVariant: return "unknown_variant";
        case ErrorCode::NonFiniteLoss: return "non_finite_loss";
        case ErrorCode::EmptyTrainingSet: return "empty_training_set";
        case ErrorCode::SampleTooLarge: return "sample_too_large";
        case ErrorCode::EncodeFailure: return "encode_failure";
        case ErrorCode::InvalidConfig: return "invalid_config";
        case ErrorCode::IoFailure: return "io_failure";
    }
    return "unknown";
}

double Rng::normal(double mean, double stddev) {
    if (has_spare_) {
        has_spare_ = false;
        return mean + stddev * spare_;
    }
    double u1 = 0.0;
    do {
        u1 = uniform01();
    } while (u1 <= 0.0);
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return mean + stddev * r * std::cos(theta);
}

uint64_t Rng::below(uint64_t n) {
    // multiply-shift; bias is < 2^-64 per draw, irrelevant at our scales
    const uint64_t x = gen_();
    return static_cast<uint64_t>((static_cast<__uint128_t>(x) * n) >> 64);
}

uint64_t fnv1a(std::string_view s) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

uint64_t seed_for(uint64_t seed, std::string_view name) {
    uint64_t z = seed ^ fnv1a(name);
    // splitmix64 finalizer
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

}  // namespace stgllm
