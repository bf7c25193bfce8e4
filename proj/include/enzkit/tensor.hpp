#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "enzkit/errors.hpp"

namespace enzkit {

/**
 * Dense rank-<=2 tensor: row-major double values plus a same-shape gradient
 * accumulator. Values are immutable after construction on the forward path;
 * only `grad` is written during reverse passes. Vectors are 1xC or Cx1 by
 * convention.
 */
struct Tensor {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;
    std::vector<double> grad;
    bool requires_grad = false;
    std::string name;  // non-empty for named parameters

    Tensor(int r, int c, std::vector<double> values, bool req = false, std::string nm = "");

    int size() const { return rows * cols; }
    double& at(int i, int j) { return data[static_cast<size_t>(i) * cols + j]; }
    double at(int i, int j) const { return data[static_cast<size_t>(i) * cols + j]; }
    double& grad_at(int i, int j) { return grad[static_cast<size_t>(i) * cols + j]; }
    double grad_at(int i, int j) const { return grad[static_cast<size_t>(i) * cols + j]; }

    void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
};

using TensorPtr = std::shared_ptr<Tensor>;

TensorPtr make_tensor(int rows, int cols, std::vector<double> values, bool requires_grad = false,
                      std::string name = "");
TensorPtr zeros(int rows, int cols, bool requires_grad = false, std::string name = "");
TensorPtr full(int rows, int cols, double value, bool requires_grad = false,
               std::string name = "");
TensorPtr scalar(double value, bool requires_grad = false);

// Throws NumericError naming `what` if any element is NaN or infinite.
void check_finite(const std::vector<double>& values, const std::string& what);

std::string shape_str(const Tensor& t);

}  // namespace enzkit
