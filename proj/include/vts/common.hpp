#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace vts {

using Real = double;

// Error taxonomy shared across modules. Everything user-facing maps to one
// of these so the CLI can translate to exit codes uniformly.
struct InvalidArgument : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct SampleRateMismatch : InvalidArgument {
    using InvalidArgument::InvalidArgument;
};
struct InsufficientLength : InvalidArgument {
    using InvalidArgument::InvalidArgument;
};
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct UnsupportedFormat : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ChecksumFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IncompatibleCheckpoint : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct InvalidConfiguration : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Mono waveform. Samples are dimensionless amplitudes, nominally in [-1, 1].
struct AudioClip {
    std::vector<float> samples;
    int sample_rate = 24000;

    std::size_t size() const { return samples.size(); }
    double seconds() const {
        return static_cast<double>(samples.size()) / sample_rate;
    }
};

// Seeded RNG used everywhere randomness is needed. One instance per logical
// owner (model init, data order, dropout) so streams do not interfere.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    double uniform(double lo, double hi) {
        std::uniform_real_distribution<double> d(lo, hi);
        return d(gen_);
    }
    double normal(double mean = 0.0, double stddev = 1.0) {
        std::normal_distribution<double> d(mean, stddev);
        return d(gen_);
    }
    std::uint64_t next_u64() { return gen_(); }
    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        std::uniform_int_distribution<std::uint64_t> d(0, n - 1);
        return d(gen_);
    }
    std::mt19937_64& engine() { return gen_; }

private:
    std::mt19937_64 gen_;
};

// Stable string hash for deriving per-id seeds (speaker ids, file names).
inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace vts
