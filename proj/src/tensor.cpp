#include "enzkit/tensor.hpp"

#include <algorithm>

namespace enzkit {

Tensor::Tensor(int r, int c, std::vector<double> values, bool req, std::string nm)
    : rows(r), cols(c), data(std::move(values)), requires_grad(req), name(std::move(nm)) {
    if (rows < 0 || cols < 0) {
        throw ShapeError("tensor extents must be non-negative, got " + shape_str(*this));
    }
    if (data.size() != static_cast<size_t>(rows) * static_cast<size_t>(cols)) {
        throw ShapeError("tensor data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(*this));
    }
    check_finite(data, name.empty() ? "tensor" : name);
    grad.assign(data.size(), 0.0);
}

TensorPtr make_tensor(int rows, int cols, std::vector<double> values, bool requires_grad,
                      std::string name) {
    return std::make_shared<Tensor>(rows, cols, std::move(values), requires_grad,
                                    std::move(name));
}

TensorPtr zeros(int rows, int cols, bool requires_grad, std::string name) {
    return make_tensor(rows, cols,
                       std::vector<double>(static_cast<size_t>(rows) * cols, 0.0),
                       requires_grad, std::move(name));
}

TensorPtr full(int rows, int cols, double value, bool requires_grad, std::string name) {
    return make_tensor(rows, cols,
                       std::vector<double>(static_cast<size_t>(rows) * cols, value),
                       requires_grad, std::move(name));
}

TensorPtr scalar(double value, bool requires_grad) {
    return make_tensor(1, 1, {value}, requires_grad);
}

void check_finite(const std::vector<double>& values, const std::string& what) {
    for (size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) {
            throw NumericError(what + " contains non-finite value at flat index " +
                               std::to_string(i));
        }
    }
}

std::string shape_str(const Tensor& t) {
    return std::to_string(t.rows) + "x" + std::to_string(t.cols);
}

}  // namespace enzkit
