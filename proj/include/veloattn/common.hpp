#pragma once

// Shared basics: dense row-major matrix, deterministic RNG, error types,
// float formatting/parsing helpers used by the file formats.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace veloattn {

// ---------------------------------------------------------------------------
// Errors. The CLI maps these onto its exit-code contract
// (config -> 2, data -> 3, numeric -> 4).
// ---------------------------------------------------------------------------

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ArgumentError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DimensionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Precision { Single, Double };

inline Precision parse_precision(std::string_view s) {
    if (s == "single" || s == "float" || s == "f32") return Precision::Single;
    if (s == "double" || s == "f64") return Precision::Double;
    throw ConfigError("unknown precision '" + std::string(s) + "' (expected single|double)");
}

// ---------------------------------------------------------------------------
// Matrix: dense row-major. rows() x cols(), contiguous storage.
// ---------------------------------------------------------------------------

template <class T>
class Matrix {
public:
    Matrix() = default;
    Matrix(size_t rows, size_t cols, T fill = T(0)) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    void resize(size_t rows, size_t cols) {
        rows_ = rows;
        cols_ = cols;
        data_.assign(rows * cols, T(0));
    }

    size_t rows() const { return rows_; }
    size_t cols() const { return cols_; }
    size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T& operator()(size_t r, size_t c) { return data_[r * cols_ + c]; }
    const T& operator()(size_t r, size_t c) const { return data_[r * cols_ + c]; }

    T* row(size_t r) { return data_.data() + r * cols_; }
    const T* row(size_t r) const { return data_.data() + r * cols_; }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    auto begin() { return data_.begin(); }
    auto end() { return data_.end(); }
    auto begin() const { return data_.begin(); }
    auto end() const { return data_.end(); }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    bool operator==(const Matrix& o) const {
        return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
    }

private:
    size_t rows_ = 0, cols_ = 0;
    std::vector<T> data_;
};

template <class T, class U>
Matrix<T> matrix_cast(const Matrix<U>& m) {
    Matrix<T> out(m.rows(), m.cols());
    for (size_t i = 0; i < m.size(); ++i) out.data()[i] = static_cast<T>(m.data()[i]);
    return out;
}

template <class T>
bool all_finite(const T* p, size_t n) {
    for (size_t i = 0; i < n; ++i)
        if (!std::isfinite(static_cast<double>(p[i]))) return false;
    return true;
}

template <class T>
bool all_finite(const std::vector<T>& v) {
    return all_finite(v.data(), v.size());
}

template <class T>
bool all_finite(const Matrix<T>& m) {
    return all_finite(m.data(), m.size());
}

// ---------------------------------------------------------------------------
// Rng: mt19937_64 with explicitly coded distributions so that sequences are
// reproducible independent of the standard library build.
// ---------------------------------------------------------------------------

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Derives a stream seed from a base seed and an index (scan id, epoch, ...).
inline uint64_t mix_seed(uint64_t base, uint64_t index) {
    return splitmix64(base ^ splitmix64(index + 0x632BE59BD9B4E019ULL));
}

class Rng {
public:
    explicit Rng(uint64_t seed = 0) : state_(seed) {}

    uint64_t next_u64() { return state_(); }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // inclusive integer range
    int64_t uniform_int(int64_t lo, int64_t hi) {
        if (hi < lo) throw ArgumentError("uniform_int: empty range");
        uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
        return lo + static_cast<int64_t>(next_u64() % span);
    }

    // Box-Muller, cosine branch only: consumes exactly two draws per call.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    double normal(double mu, double sigma) { return mu + sigma * normal(); }

    // Student-t via normal / sqrt(chi2(nu)/nu); chi2 built from normals.
    double student_t(int nu, double scale) {
        double z = normal();
        double chi2 = 0.0;
        for (int i = 0; i < nu; ++i) {
            double g = normal();
            chi2 += g * g;
        }
        return scale * z / std::sqrt(chi2 / static_cast<double>(nu));
    }

    // Fisher-Yates
    template <class V>
    void shuffle(V& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(uniform_int(0, static_cast<int64_t>(i) - 1));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 state_;
};

// ---------------------------------------------------------------------------
// Number formatting: shortest decimal that round-trips exactly.
// ---------------------------------------------------------------------------

inline std::string format_shortest(double v) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw DataError("malformed number '" + std::string(s) + "'");
    return v;
}

inline long parse_long(std::string_view s) {
    long v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw DataError("malformed integer '" + std::string(s) + "'");
    return v;
}

} // namespace veloattn
