#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#if defined(__GLIBC__)
#include <malloc.h>
#endif
#if defined(__SSE2__)
#include <pmmintrin.h>
#include <xmmintrin.h>
#endif

namespace adagad {

/// Base class for all library errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed or inconsistent input data (bad files, bad config values).
struct ValidationError : Error {
    using Error::Error;
};

/// Degenerate numeric input, e.g. a zero-norm signal in a Rayleigh quotient.
struct DegenerateSignalError : Error {
    using Error::Error;
};

/// Training-time failure (non-finite loss, exhausted sampling budget, ...).
struct RuntimeFailure : Error {
    using Error::Error;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ValidationError(msg);
}

// FNV-1a, used for config hashing. Stable across platforms by construction.
inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 1469598103934665603ull) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

/// Process-wide runtime tuning, called once from each binary's main():
/// - keep large heap blocks out of mmap so the n x n training temporaries
///   don't round-trip through the kernel on every allocation;
/// - flush subnormal floats to zero: saturated sigmoids otherwise produce
///   subnormal operands whose ~100-cycle penalty dominates late training
///   epochs. Values below ~1e-308 are noise for every loss used here.
inline void tune_runtime() {
#if defined(__GLIBC__)
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
#if defined(__SSE2__)
    _MM_SET_FLUSH_ZERO_MODE(_MM_FLUSH_ZERO_ON);
    _MM_SET_DENORMALS_ZERO_MODE(_MM_DENORMALS_ZERO_ON);
#endif
}

}  // namespace adagad
