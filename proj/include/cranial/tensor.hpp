#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace cranial {

/// (batch, channels, depth, height, width).
struct Shape {
    std::int64_t n = 1, c = 1, d = 1, h = 1, w = 1;

    std::int64_t numel() const { return n * c * d * h * w; }
    std::int64_t spatial() const { return d * h * w; }
    bool operator==(const Shape&) const = default;
};

std::string to_string(const Shape& s);

/// Dense float64 NCDHW array (w fastest).
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0)
        : shape_(shape), data_(static_cast<std::size_t>(shape.numel()), fill) {}
    Tensor(Shape shape, std::vector<double> data);

    const Shape& shape() const { return shape_; }
    std::int64_t numel() const { return shape_.numel(); }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }
    std::vector<double>& storage() { return data_; }

    double& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
    double operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

    double& at(std::int64_t n, std::int64_t c, std::int64_t z, std::int64_t y, std::int64_t x) {
        return data_[static_cast<std::size_t>(offset(n, c, z, y, x))];
    }
    double at(std::int64_t n, std::int64_t c, std::int64_t z, std::int64_t y, std::int64_t x) const {
        return data_[static_cast<std::size_t>(offset(n, c, z, y, x))];
    }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }
    bool empty() const { return data_.empty(); }

private:
    std::int64_t offset(std::int64_t n, std::int64_t c, std::int64_t z, std::int64_t y, std::int64_t x) const {
        return (((n * shape_.c + c) * shape_.d + z) * shape_.h + y) * shape_.w + x;
    }

    Shape shape_{0, 0, 0, 0, 0};
    std::vector<double> data_;
};

}  // namespace cranial
