#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "msdon/error.hpp"

namespace msdon {

// Uniformly sampled real signal starting at t = 0.
struct TimeSeries {
    double dt = 1.0;
    std::vector<double> values;

    TimeSeries() = default;
    TimeSeries(double step, std::vector<double> v) : dt(step), values(std::move(v))
    {
        detail::require(dt > 0.0 && std::isfinite(dt), "TimeSeries: dt must be positive");
    }

    std::size_t size() const { return values.size(); }
    bool empty() const { return values.empty(); }
    double time(std::size_t i) const { return dt * static_cast<double>(i); }
    // Time of the last sample; zero for a single-sample series.
    double duration() const { return values.empty() ? 0.0 : dt * static_cast<double>(values.size() - 1); }
    double sample_rate() const { return 1.0 / dt; }

    double operator[](std::size_t i) const { return values[i]; }
    double& operator[](std::size_t i) { return values[i]; }
};

inline double max_abs(const std::vector<double>& v)
{
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

// Discrete L2 relative error ||a - b|| / ||b||.
inline double relative_l2_error(const std::vector<double>& a, const std::vector<double>& b)
{
    detail::require(a.size() == b.size(), "relative_l2_error: size mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - b[i]) * (a[i] - b[i]);
        den += b[i] * b[i];
    }
    if (den == 0.0) return num == 0.0 ? 0.0 : INFINITY;
    return std::sqrt(num / den);
}

} // namespace msdon
