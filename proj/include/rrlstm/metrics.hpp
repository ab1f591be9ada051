#pragma once

#include <cmath>
#include <span>

#include "rrlstm/tensor.hpp"

namespace rrlstm {

/// Nash-Sutcliffe efficiency: 1 - SSE / sum((y - mean(y))^2).
inline double nse(std::span<const double> predicted, std::span<const double> observed) {
    if (predicted.size() != observed.size()) throw DimensionError("nse: length mismatch");
    if (observed.size() < 2) throw DimensionError("nse: need at least two points");
    double mean = 0.0;
    for (double y : observed) mean += y;
    mean /= static_cast<double>(observed.size());
    double sse = 0.0;
    double sst = 0.0;
    for (std::size_t t = 0; t < observed.size(); ++t) {
        sse += (predicted[t] - observed[t]) * (predicted[t] - observed[t]);
        sst += (observed[t] - mean) * (observed[t] - mean);
    }
    if (!(sst > 0.0)) throw NumericalError("nse: observed series has zero variance");
    return 1.0 - sse / sst;
}

inline double rmse(std::span<const double> predicted, std::span<const double> observed) {
    if (predicted.size() != observed.size()) throw DimensionError("rmse: length mismatch");
    if (observed.empty()) throw DimensionError("rmse: empty input");
    double sse = 0.0;
    for (std::size_t t = 0; t < observed.size(); ++t) sse += (predicted[t] - observed[t]) * (predicted[t] - observed[t]);
    return std::sqrt(sse / static_cast<double>(observed.size()));
}

}  // namespace rrlstm
