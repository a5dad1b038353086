#pragma once

#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace dotsim {

struct Axis {
    std::string name;
    std::string unit;
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
};

Axis inline linspace_axis(std::string name, std::string unit, double lo,
                          double hi, std::size_t n) {
    if (n < 2) throw std::invalid_argument("linspace_axis: need n >= 2");
    Axis ax{std::move(name), std::move(unit), {}};
    ax.values.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        ax.values[i] = lo + (hi - lo) * static_cast<double>(i) /
                                static_cast<double>(n - 1);
    return ax;
}

/// Free-form provenance attached to simulated data: bias points, seeds,
/// evolution times. Serialized with the data.
struct Metadata {
    std::map<std::string, double> scalars;
    std::map<std::string, std::string> strings;
    std::map<std::string, std::vector<double>> vectors;

    double scalar_or(const std::string& key, double fallback) const {
        auto it = scalars.find(key);
        return it == scalars.end() ? fallback : it->second;
    }
};

struct TimeTrace {
    std::vector<double> times;      ///< ns, uniform grid
    std::vector<double> p_singlet;  ///< values in [0, 1]
    Metadata meta;
};

/// 2D scan, row-major: data[iy * x.size() + ix].
struct ScanGrid {
    Axis x;
    Axis y;
    std::vector<double> data;
    Metadata meta;

    double at(std::size_t iy, std::size_t ix) const {
        return data[iy * x.size() + ix];
    }
    double& at(std::size_t iy, std::size_t ix) {
        return data[iy * x.size() + ix];
    }
};

}
