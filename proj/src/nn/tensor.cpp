#include "ial/nn/tensor.hpp"

#include "ial/error.hpp"

namespace ial::nn {

std::string shape_string(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

Tensor::Tensor(Shape s, std::vector<double> v) : shape(std::move(s)), values(std::move(v)) {
    if (values.size() != shape_size(shape)) {
        throw Error(ErrorCode::ShapeMismatch, std::to_string(values.size()) + " values for shape " + shape_string(shape));
    }
}

Tensor Tensor::reshaped(Shape s) const {
    if (shape_size(s) != values.size()) {
        throw Error(ErrorCode::ShapeMismatch, "cannot reshape " + shape_string(shape) + " to " + shape_string(s));
    }
    return Tensor(std::move(s), values);
}

void require_shape(const Tensor& t, const Shape& expected, const char* what) {
    if (t.shape != expected) {
        throw Error(ErrorCode::ShapeMismatch,
                    std::string(what) + ": got " + shape_string(t.shape) + ", expected " + shape_string(expected));
    }
}

}  // namespace ial::nn
