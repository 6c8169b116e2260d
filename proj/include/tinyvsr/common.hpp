// Copyright (c) 2026 tinyvsr contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

namespace tinyvsr {

// Error taxonomy, mapped to CLI exit codes: config/contract -> 2, runtime/io -> 1.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DimensionError : ConfigError {
    using ConfigError::ConfigError;
};
struct ContractError : ConfigError {
    using ConfigError::ConfigError;
};
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct TrainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

template <typename... Args>
std::string str_cat(Args&&... args) {
    std::ostringstream os;
    (os << ... << args);
    return os.str();
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    // splitmix64 step; decorrelates per-item child streams
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Deterministic RNG. The mt19937_64 engine is algorithm-pinned by the
// standard; the std distributions are not, so the transforms live here.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // uniform in [0, 1) with 53-bit resolution
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {  // inclusive
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<std::int64_t>(engine_() % span);
    }

    // Box-Muller with cached spare
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 == 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double sigma) { return mean + sigma * normal(); }

    double log_uniform(double lo, double hi) { return std::exp(uniform(std::log(lo), std::log(hi))); }

    Rng fork(std::uint64_t stream) const { return Rng(mix_seed(seed_, stream)); }

    std::string serialize() const {
        std::uint64_t spare_bits = 0;
        std::memcpy(&spare_bits, &spare_, sizeof spare_bits);
        std::ostringstream os;
        os << engine_ << ' ' << (has_spare_ ? 1 : 0) << ' ' << spare_bits << ' ' << seed_;
        return os.str();
    }

    static Rng deserialize(const std::string& s) {
        std::istringstream is(s);
        Rng r(0);
        int spare_flag = 0;
        std::uint64_t spare_bits = 0;
        is >> r.engine_ >> spare_flag >> spare_bits >> r.seed_;
        if (!is) throw IoError("bad rng state string");
        std::memcpy(&r.spare_, &spare_bits, sizeof r.spare_);
        r.has_spare_ = spare_flag != 0;
        return r;
    }

private:
    std::uint64_t seed_ = 0;
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace tinyvsr
