#pragma once

#include <cmath>
#include <cstdint>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace noma {

using Vec = std::vector<double>;

// ---------------------------------------------------------------------------
// Errors. Each carries the process exit code used by the CLI:
//   1 = bad configuration / bad arguments
//   2 = infeasible instance
//   3 = I/O failure
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
public:
    Error(std::string msg, int exit_code)
        : std::runtime_error(std::move(msg)), exit_code_(exit_code) {}
    int exit_code() const { return exit_code_; }

private:
    int exit_code_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(std::string msg) : Error(std::move(msg), 1) {}
};

class InfeasibleError : public Error {
public:
    explicit InfeasibleError(std::string msg) : Error(std::move(msg), 2) {}
};

// A base station with at least one associated user is required wherever a
// per-user capacity is evaluated; querying an empty one is a contract breach.
class UndefinedLoadError : public InfeasibleError {
public:
    explicit UndefinedLoadError(std::string msg) : InfeasibleError(std::move(msg)) {}
};

class IoError : public Error {
public:
    explicit IoError(std::string msg) : Error(std::move(msg), 3) {}
};

class FileVersionError : public IoError {
public:
    explicit FileVersionError(std::string msg) : IoError(std::move(msg)) {}
};

class FileTruncatedError : public IoError {
public:
    explicit FileTruncatedError(std::string msg) : IoError(std::move(msg)) {}
};

class FileChecksumError : public IoError {
public:
    explicit FileChecksumError(std::string msg) : IoError(std::move(msg)) {}
};

// ---------------------------------------------------------------------------
// Dense row-major matrix. Deliberately minimal; every numerical kernel that
// matters lives in neural.cpp.
// ---------------------------------------------------------------------------

struct Matrix {
    int rows = 0;
    int cols = 0;
    Vec data;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}

    double* row(int r) { return data.data() + static_cast<size_t>(r) * cols; }
    const double* row(int r) const { return data.data() + static_cast<size_t>(r) * cols; }
    double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

    bool operator==(const Matrix& o) const {
        return rows == o.rows && cols == o.cols && data == o.data;
    }
};

// ---------------------------------------------------------------------------
// Deterministic RNG. All randomness in the project flows through this wrapper
// so that results do not depend on the standard library's distribution
// implementations.
// ---------------------------------------------------------------------------

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Independent stream k of a master seed.
inline uint64_t derive_seed(uint64_t master, uint64_t stream) {
    return splitmix64(master ^ splitmix64(stream + 1));
}

class Rng {
public:
    explicit Rng(uint64_t seed) : s_(splitmix64(seed ^ 0xD1B54A32D192ED03ull)) {
        if (s_ == 0) s_ = 0x9E3779B97F4A7C15ull;
    }

    uint64_t next_u64() {
        // xorshift64*; small, fast, reproducible everywhere.
        s_ ^= s_ >> 12;
        s_ ^= s_ << 25;
        s_ ^= s_ >> 27;
        return s_ * 0x2545F4914F6CDD1Dull;
    }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Unit-mean exponential.
    double exponential() {
        double u;
        do { u = uniform(); } while (u >= 1.0);
        return -std::log(1.0 - u);
    }

    // Uniform integer in [0, n).
    uint64_t uniform_int(uint64_t n) { return next_u64() % n; }

private:
    uint64_t s_;
};

// FNV-1a 64-bit, used as the payload checksum of every binary file format.
inline uint64_t fnv1a64(const void* bytes, size_t n) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    uint64_t h = 0xCBF29CE484222325ull;
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001B3ull;
    }
    return h;
}

}  // namespace noma
