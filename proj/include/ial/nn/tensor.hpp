#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace ial::nn {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& s);

/// Row-major double tensor.
struct Tensor {
    Shape shape;
    std::vector<double> values;

    Tensor() = default;
    explicit Tensor(Shape s, double fill = 0.0) : shape(std::move(s)), values(shape_size(shape), fill) {}
    Tensor(Shape s, std::vector<double> v);

    std::size_t size() const { return values.size(); }
    std::size_t dim(std::size_t i) const { return shape[i]; }
    std::size_t rank() const { return shape.size(); }

    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }

    std::span<double> span() { return values; }
    std::span<const double> span() const { return values; }

    void fill(double v) { std::fill(values.begin(), values.end(), v); }
    /// Same values, new shape of equal element count. Throws ShapeMismatch.
    Tensor reshaped(Shape s) const;

    bool operator==(const Tensor&) const = default;
};

/// Throws ShapeMismatch with `what` unless a.shape == expected.
void require_shape(const Tensor& t, const Shape& expected, const char* what);

}  // namespace ial::nn
