#pragma once

#include <functional>
#include <vector>

#include "enzkit/tensor.hpp"

namespace enzkit {

/**
 * Records a single forward computation and replays it in reverse for gradient
 * accumulation. Traversal order is the fixed insertion order of the recorded
 * ops; identical inputs always produce bitwise-identical outputs and grads.
 * A tape is single-threaded; independent tapes may run on separate threads.
 */
class Tape {
public:
    // --- op catalog -------------------------------------------------------

    TensorPtr matmul(const TensorPtr& a, const TensorPtr& b);     // a(LxD) * b(DxK)
    TensorPtr matmul_nt(const TensorPtr& a, const TensorPtr& b);  // a(LxD) * b(KxD)^T
    TensorPtr transpose(const TensorPtr& x);
    TensorPtr add(const TensorPtr& a, const TensorPtr& b);
    TensorPtr sub(const TensorPtr& a, const TensorPtr& b);
    TensorPtr mul(const TensorPtr& a, const TensorPtr& b);  // elementwise
    TensorPtr add_rowvec(const TensorPtr& x, const TensorPtr& v);  // x(LxD) + v(1xD) per row
    TensorPtr scale(const TensorPtr& x, double c);
    TensorPtr scale_by(const TensorPtr& x, const TensorPtr& s);   // s is 1x1
    TensorPtr div_by(const TensorPtr& x, const TensorPtr& s);     // s is 1x1, nonzero
    TensorPtr softmax_rows(const TensorPtr& x);
    TensorPtr layer_norm(const TensorPtr& x, const TensorPtr& gain, const TensorPtr& bias,
                         double eps = 1e-5);
    TensorPtr gelu(const TensorPtr& x);  // exact erf form
    TensorPtr mean_pool_rows(const TensorPtr& x);
    TensorPtr gather_rows(const TensorPtr& x, const std::vector<int>& idx);
    // base with rows[idx[i]] += delta[i]; all other rows copied bitwise.
    TensorPtr row_update_add(const TensorPtr& base, const std::vector<int>& idx,
                             const TensorPtr& delta);
    TensorPtr broadcast_rows(const TensorPtr& v, int rows);  // v is 1xD
    TensorPtr concat_cols(const TensorPtr& a, const TensorPtr& b);
    TensorPtr gather_cols(const TensorPtr& x, const std::vector<int>& idx);  // x is 1xN
    TensorPtr scatter_cols(const TensorPtr& x, const std::vector<int>& idx, int n);
    TensorPtr cell(const TensorPtr& x, int i, int j);  // 1x1 view copy
    TensorPtr sum_all(const TensorPtr& x);             // 1x1
    TensorPtr sum_sq(const TensorPtr& x);              // 1x1, sum of squares
    TensorPtr exp(const TensorPtr& x);
    TensorPtr clamp(const TensorPtr& x, double lo, double hi);

    // --- reverse pass -----------------------------------------------------

    // Seeds d(root)/d(root) = 1 and replays the record in reverse. Root must
    // be 1x1. Grads accumulate into each tensor's grad slot.
    void backward(const TensorPtr& root);

    // Replays in reverse without seeding; callers pre-load grad slots of the
    // outputs they care about (used when several roots are seeded at once).
    void backward_seeded();

    size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        std::function<void()> backward;
    };
    std::vector<Node> nodes_;

    TensorPtr emit(int rows, int cols, std::vector<double> values, bool requires_grad,
                   const char* op_name);
};

}  // namespace enzkit
