#include "cranial/tensor.hpp"

#include "cranial/error.hpp"

namespace cranial {

std::string to_string(const Shape& s) {
    return "(" + std::to_string(s.n) + "," + std::to_string(s.c) + "," + std::to_string(s.d) + "," +
           std::to_string(s.h) + "," + std::to_string(s.w) + ")";
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
    if (static_cast<std::int64_t>(data_.size()) != shape_.numel()) {
        throw Error(ErrorKind::ShapeMismatch, "tensor data size " + std::to_string(data_.size()) +
                                                  " does not match shape " + to_string(shape_));
    }
}

}  // namespace cranial
