#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rrlstm {

/// Shape or length disagreement between arguments.
struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Malformed or unusable input data (files, frames, segments).
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Non-finite loss or undefined statistic.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using Vector = std::vector<double>;

/**
 * Dense row-major matrix of doubles.
 *
 * Also used for multichannel sequences: one row per time step,
 * one column per channel.
 */
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

    bool empty() const { return data.empty(); }
    friend bool operator==(const Matrix&, const Matrix&) = default;
};

inline void require(bool cond, const std::string& what) {
    if (!cond) throw DimensionError(what);
}

}  // namespace rrlstm
