#include "enzkit/tape.hpp"

#include <algorithm>
#include <cmath>

namespace enzkit {

namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

double norm_cdf(double x) { return 0.5 * (1.0 + std::erf(x * kInvSqrt2)); }
double norm_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.rows != b.rows || a.cols != b.cols) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " +
                         shape_str(b));
    }
}

}  // namespace

TensorPtr Tape::emit(int rows, int cols, std::vector<double> values, bool requires_grad,
                     const char* op_name) {
    check_finite(values, op_name);
    auto out = std::make_shared<Tensor>(rows, cols, std::move(values), requires_grad);
    return out;
}

TensorPtr Tape::matmul(const TensorPtr& a, const TensorPtr& b) {
    if (a->cols != b->rows) {
        throw ShapeError("matmul: inner extents differ, " + shape_str(*a) + " * " +
                         shape_str(*b));
    }
    const int L = a->rows, D = a->cols, K = b->cols;
    std::vector<double> out(static_cast<size_t>(L) * K, 0.0);
    for (int i = 0; i < L; ++i) {
        for (int d = 0; d < D; ++d) {
            const double av = a->at(i, d);
            for (int k = 0; k < K; ++k) out[static_cast<size_t>(i) * K + k] += av * b->at(d, k);
        }
    }
    const bool req = a->requires_grad || b->requires_grad;
    TensorPtr result = emit(L, K, std::move(out), req, "matmul");
    if (req) {
        nodes_.push_back(Node{[a, b, result, L, D, K]() {
            if (a->requires_grad) {
                // dA += dC * B^T
                for (int i = 0; i < L; ++i)
                    for (int k = 0; k < K; ++k) {
                        const double g = result->grad_at(i, k);
                        if (g == 0.0) continue;
                        for (int d = 0; d < D; ++d) a->grad_at(i, d) += g * b->at(d, k);
                    }
            }
            if (b->requires_grad) {
                // dB += A^T * dC
                for (int i = 0; i < L; ++i)
                    for (int d = 0; d < D; ++d) {
                        const double av = a->at(i, d);
                        if (av == 0.0) continue;
                        for (int k = 0; k < K; ++k)
                            b->grad_at(d, k) += av * result->grad_at(i, k);
                    }
            }
        }});
    }
    return result;
}

TensorPtr Tape::matmul_nt(const TensorPtr& a, const TensorPtr& b) {
    if (a->cols != b->cols) {
        throw ShapeError("matmul_nt: inner extents differ, " + shape_str(*a) + " * " +
                         shape_str(*b) + "^T");
    }
    const int L = a->rows, D = a->cols, K = b->rows;
    std::vector<double> out(static_cast<size_t>(L) * K, 0.0);
    for (int i = 0; i < L; ++i)
        for (int k = 0; k < K; ++k) {
            double acc = 0.0;
            for (int d = 0; d < D; ++d) acc += a->at(i, d) * b->at(k, d);
            out[static_cast<size_t>(i) * K + k] = acc;
        }
    const bool req = a->requires_grad || b->requires_grad;
    TensorPtr result = emit(L, K, std::move(out), req, "matmul_nt");
    if (req) {
        nodes_.push_back(Node{[a, b, result, L, D, K]() {
            if (a->requires_grad) {
                for (int i = 0; i < L; ++i)
                    for (int k = 0; k < K; ++k) {
                        const double g = result->grad_at(i, k);
                        if (g == 0.0) continue;
                        for (int d = 0; d < D; ++d) a->grad_at(i, d) += g * b->at(k, d);
                    }
            }
            if (b->requires_grad) {
                for (int i = 0; i < L; ++i)
                    for (int k = 0; k < K; ++k) {
                        const double g = result->grad_at(i, k);
                        if (g == 0.0) continue;
                        for (int d = 0; d < D; ++d) b->grad_at(k, d) += g * a->at(i, d);
                    }
            }
        }});
    }
    return result;
}

TensorPtr Tape::transpose(const TensorPtr& x) {
    const int R = x->rows, C = x->cols;
    std::vector<double> out(static_cast<size_t>(R) * C);
    for (int i = 0; i < R; ++i)
        for (int j = 0; j < C; ++j) out[static_cast<size_t>(j) * R + i] = x->at(i, j);
    TensorPtr result = emit(C, R, std::move(out), x->requires_grad, "transpose");
    if (x->requires_grad) {
        nodes_.push_back(Node{[x, result, R, C]() {
            for (int i = 0; i < R; ++i)
                for (int j = 0; j < C; ++j) x->grad_at(i, j) += result->grad_at(j, i);
        }});
    }
    return result;
}

TensorPtr Tape::add(const TensorPtr& a, const TensorPtr& b) {
    require_same_shape(*a, *b, "add");
    std::vector<double> out(a->data.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a->data[i] + b->data[i];
    const bool req = a->requires_grad || b->requires_grad;
    TensorPtr result = emit(a->rows, a->cols, std::move(out), req, "add");
    if (req) {
        nodes_.push_back(Node{[a, b, result]() {
            if (a->requires_grad)
                for (size_t i = 0; i < a->grad.size(); ++i) a->grad[i] += result->grad[i];
            if (b->requires_grad)
                for (size_t i = 0; i < b->grad.size(); ++i) b->grad[i] += result->grad[i];
        }});
    }
    return result;
}

TensorPtr Tape::sub(const TensorPtr& a, const TensorPtr& b) {
    require_same_shape(*a, *b, "sub");
    std::vector<double> out(a->data.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a->data[i] - b->data[i];
    const bool req = a->requires_grad || b->requires_grad;
    TensorPtr result = emit(a->rows, a->cols, std::move(out), req, "sub");
    if (req) {
        nodes_.push_back(Node{[a, b, result]() {
            if (a->requires_grad)
                for (size_t i = 0; i < a->grad.size(); ++i) a->grad[i] += result->grad[i];
            if (b->requires_grad)
                for (size_t i = 0; i < b->grad.size(); ++i) b->grad[i] -= result->grad[i];
        }});
    }
    return result;
}

TensorPtr Tape::mul(const TensorPtr& a, const TensorPtr& b) {
    require_same_shape(*a, *b, "mul");
    std::vector<double> out(a->data.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a->data[i] * b->data[i];
    const bool req = a->requires_grad || b->requires_grad;
    TensorPtr result = emit(a->rows, a->cols, std::move(out), req, "mul");
    if (req) {
        nodes_.push_back(Node{[a, b, result]() {
            if (a->requires_grad)
                for (size_t i = 0; i < a->grad.size(); ++i)
                    a->grad[i] += result->grad[i] * b->data[i];
            if (b->requires_grad)
                for (size_t i = 0; i < b->grad.size(); ++i)
                    b->grad[i] += result->grad[i] * a->data[i];
        }});
    }
    return result;
}

TensorPtr Tape::add_rowvec(const TensorPtr& x, const TensorPtr& v) {
    if (v->rows != 1 || v->cols != x->cols) {
        throw ShapeError("add_rowvec: expected 1x" + std::to_string(x->cols) + " vector, got " +
                         shape_str(*v));
    }
    const int L = x->rows, D = x->cols;
    std::vector<double> out(x->data.size());
    for (int i = 0; i < L; ++i)
        for (int j = 0; j < D; ++j)
            out[static_cast<size_t>(i) * D + j] = x->at(i, j) + v->data[j];
    const bool req = x->requires_grad || v->requires_grad;
    TensorPtr result = emit(L, D, std::move(out), req, "add_rowvec");
    if (req) {
        nodes_.push_back(Node{[x, v, result, L, D]() {
            if (x->requires_grad)
                for (size_t i = 0; i < x->grad.size(); ++i) x->grad[i] += result->grad[i];
            if (v->requires_grad)
                for (int i = 0; i < L; ++i)
                    for (int j = 0; j < D; ++j) v->grad[j] += result->grad_at(i, j);
        }});
    }
    return result;
}

TensorPtr Tape::scale(const TensorPtr& x, double c) {
    std::vector<double> out(x->data.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = x->data[i] * c;
    TensorPtr result = emit(x->rows, x->cols, std::move(out), x->requires_grad, "scale");
    if (x->requires_grad) {
        nodes_.push_back(Node{[x, result, c]() {
            for (size_t i = 0; i < x->grad.size(); ++i) x->grad[i] += result->grad[i] * c;
        }});
    }
    return result;
}

TensorPtr Tape::scale_by(const TensorPtr& x, const TensorPtr& s) {
    if (s->rows != 1 || s->cols != 1) {
        throw ShapeError("scale_by: scalar operand must be 1x1, got " + shape_str(*s));
    }
    const double sv = s->data[0];
    std::vector<double> out(x->data.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = x->data[i] * sv;
    const bool req = x->requires_grad || s->requires_grad;
    TensorPtr result = emit(x->rows, x->cols, std::move(out), req, "scale_by");
    if (req) {
        nodes_.push_back(Node{[x, s, result, sv]() {
            if (x->requires_grad)
                for (size_t i = 0; i < x->grad.size(); ++i) x->grad[i] += result->grad[i] * sv;
            if (s->requires_grad) {
                double acc = 0.0;
                for (size_t i = 0; i < x->data.size(); ++i) acc += result->grad[i] * x->data[i];
                s->grad[0] += acc;
            }
        }});
    }
    return result;
}

TensorPtr Tape::div_by(const TensorPtr& x, const TensorPtr& s) {
    if (s->rows != 1 || s->cols != 1) {
        throw ShapeError("div_by: scalar operand must be 1x1, got " + shape_str(*s));
    }
    const double sv = s->data[0];
    if (sv == 0.0) throw NumericError("div_by: division by zero");
    std::vector<double> out(x->data.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = x->data[i] / sv;
    const bool req = x->requires_grad || s->requires_grad;
    TensorPtr result = emit(x->rows, x->cols, std::move(out), req, "div_by");
    if (req) {
        nodes_.push_back(Node{[x, s, result, sv]() {
            if (x->requires_grad)
                for (size_t i = 0; i < x->grad.size(); ++i) x->grad[i] += result->grad[i] / sv;
            if (s->requires_grad) {
                double acc = 0.0;
                for (size_t i = 0; i < x->data.size(); ++i)
                    acc += result->grad[i] * (-x->data[i] / (sv * sv));
                s->grad[0] += acc;
            }
        }});
    }
    return result;
}

TensorPtr Tape::softmax_rows(const TensorPtr& x) {
    const int L = x->rows, K = x->cols;
    std::vector<double> out(x->data.size());
    for (int i = 0; i < L; ++i) {
        double mx = x->at(i, 0);
        for (int j = 1; j < K; ++j) mx = std::max(mx, x->at(i, j));
        double denom = 0.0;
        for (int j = 0; j < K; ++j) {
            const double e = std::exp(x->at(i, j) - mx);
            out[static_cast<size_t>(i) * K + j] = e;
            denom += e;
        }
        for (int j = 0; j < K; ++j) out[static_cast<size_t>(i) * K + j] /= denom;
    }
    TensorPtr result =
        emit(L, K, std::move(out), x->requires_grad, "softmax_rows");
    if (x->requires_grad) {
        nodes_.push_back(Node{[x, result, L, K]() {
            for (int i = 0; i < L; ++i) {
                double dot = 0.0;
                for (int j = 0; j < K; ++j) dot += result->at(i, j) * result->grad_at(i, j);
                for (int j = 0; j < K; ++j)
                    x->grad_at(i, j) += result->at(i, j) * (result->grad_at(i, j) - dot);
            }
        }});
    }
    return result;
}

TensorPtr Tape::layer_norm(const TensorPtr& x, const TensorPtr& gain, const TensorPtr& bias,
                           double eps) {
    const int L = x->rows, D = x->cols;
    if (gain->rows != 1 || gain->cols != D || bias->rows != 1 || bias->cols != D) {
        throw ShapeError("layer_norm: gain/bias must be 1x" + std::to_string(D));
    }
    if (!(eps > 0.0)) throw PreconditionError("layer_norm: eps must be positive");
    std::vector<double> out(x->data.size());
    auto xhat = std::make_shared<std::vector<double>>(x->data.size());
    auto inv_sigma = std::make_shared<std::vector<double>>(L);
    for (int i = 0; i < L; ++i) {
        double m = 0.0;
        for (int j = 0; j < D; ++j) m += x->at(i, j);
        m /= D;
        double var = 0.0;
        for (int j = 0; j < D; ++j) {
            const double c = x->at(i, j) - m;
            var += c * c;
        }
        var /= D;
        const double is = 1.0 / std::sqrt(var + eps);
        (*inv_sigma)[i] = is;
        for (int j = 0; j < D; ++j) {
            const double h = (x->at(i, j) - m) * is;
            (*xhat)[static_cast<size_t>(i) * D + j] = h;
            out[static_cast<size_t>(i) * D + j] = gain->data[j] * h + bias->data[j];
        }
    }
    const bool req = x->requires_grad || gain->requires_grad || bias->requires_grad;
    TensorPtr result = emit(L, D, std::move(out), req, "layer_norm");
    if (req) {
        nodes_.push_back(Node{[x, gain, bias, result, xhat, inv_sigma, L, D]() {
            for (int i = 0; i < L; ++i) {
                if (gain->requires_grad || bias->requires_grad) {
                    for (int j = 0; j < D; ++j) {
                        const double g = result->grad_at(i, j);
                        if (gain->requires_grad)
                            gain->grad[j] += g * (*xhat)[static_cast<size_t>(i) * D + j];
                        if (bias->requires_grad) bias->grad[j] += g;
                    }
                }
                if (x->requires_grad) {
                    double mean_dh = 0.0, mean_dh_h = 0.0;
                    for (int j = 0; j < D; ++j) {
                        const double dh = result->grad_at(i, j) * gain->data[j];
                        const double h = (*xhat)[static_cast<size_t>(i) * D + j];
                        mean_dh += dh;
                        mean_dh_h += dh * h;
                    }
                    mean_dh /= D;
                    mean_dh_h /= D;
                    const double is = (*inv_sigma)[i];
                    for (int j = 0; j < D; ++j) {
                        const double dh = result->grad_at(i, j) * gain->data[j];
                        const double h = (*xhat)[static_cast<size_t>(i) * D + j];
                        x->grad_at(i, j) += is * (dh - mean_dh - h * mean_dh_h);
                    }
                }
            }
        }});
    }
    return result;
}

TensorPtr Tape::gelu(const TensorPtr& x) {
    std::vector<double> out(x->data.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = x->data[i] * norm_cdf(x->data[i]);
    TensorPtr result = emit(x->rows, x->cols, std::move(out), x->requires_grad, "gelu");
    if (x->requires_grad) {
        nodes_.push_back(Node{[x, result]() {
            for (size_t i = 0; i < x->grad.size(); ++i) {
                const double v = x->data[i];
                x->grad[i] += result->grad[i] * (norm_cdf(v) + v * norm_pdf(v));
            }
        }});
    }
    return result;
}

TensorPtr Tape::mean_pool_rows(const TensorPtr& x) {
    const int L = x->rows, D = x->cols;
    if (L < 1) throw PreconditionError("mean_pool_rows: empty pool (no rows)");
    std::vector<double> out(static_cast<size_t>(D), 0.0);
    for (int i = 0; i < L; ++i)
        for (int j = 0; j < D; ++j) out[j] += x->at(i, j);
    for (int j = 0; j < D; ++j) out[j] /= L;
    TensorPtr result =
        emit(1, D, std::move(out), x->requires_grad, "mean_pool_rows");
    if (x->requires_grad) {
        nodes_.push_back(Node{[x, result, L, D]() {
            for (int i = 0; i < L; ++i)
                for (int j = 0; j < D; ++j) x->grad_at(i, j) += result->grad[j] / L;
        }});
    }
    return result;
}

TensorPtr Tape::gather_rows(const TensorPtr& x, const std::vector<int>& idx) {
    const int D = x->cols;
    for (int r : idx) {
        if (r < 0 || r >= x->rows) {
            throw ShapeError("gather_rows: index " + std::to_string(r) + " out of range for " +
                             shape_str(*x));
        }
    }
    std::vector<double> out(idx.size() * static_cast<size_t>(D));
    for (size_t i = 0; i < idx.size(); ++i)
        for (int j = 0; j < D; ++j)
            out[i * D + j] = x->at(idx[i], j);
    TensorPtr result = emit(static_cast<int>(idx.size()), D, std::move(out), x->requires_grad,
                            "gather_rows");
    if (x->requires_grad) {
        auto indices = idx;
        nodes_.push_back(Node{[x, result, indices, D]() {
            for (size_t i = 0; i < indices.size(); ++i)
                for (int j = 0; j < D; ++j)
                    x->grad_at(indices[i], j) += result->grad[i * D + j];
        }});
    }
    return result;
}

TensorPtr Tape::row_update_add(const TensorPtr& base, const std::vector<int>& idx,
                               const TensorPtr& delta) {
    const int D = base->cols;
    if (delta->rows != static_cast<int>(idx.size()) || delta->cols != D) {
        throw ShapeError("row_update_add: delta " + shape_str(*delta) + " does not match " +
                         std::to_string(idx.size()) + " indices over " + shape_str(*base));
    }
    for (int r : idx) {
        if (r < 0 || r >= base->rows) {
            throw ShapeError("row_update_add: index " + std::to_string(r) +
                             " out of range for " + shape_str(*base));
        }
    }
    std::vector<double> out = base->data;
    for (size_t i = 0; i < idx.size(); ++i)
        for (int j = 0; j < D; ++j) out[static_cast<size_t>(idx[i]) * D + j] += delta->at(
            static_cast<int>(i), j);
    const bool req = base->requires_grad || delta->requires_grad;
    TensorPtr result = emit(base->rows, D, std::move(out), req, "row_update_add");
    if (req) {
        auto indices = idx;
        nodes_.push_back(Node{[base, delta, result, indices, D]() {
            if (base->requires_grad)
                for (size_t i = 0; i < base->grad.size(); ++i)
                    base->grad[i] += result->grad[i];
            if (delta->requires_grad)
                for (size_t i = 0; i < indices.size(); ++i)
                    for (int j = 0; j < D; ++j)
                        delta->grad[i * D + j] += result->grad_at(indices[i], j);
        }});
    }
    return result;
}

TensorPtr Tape::broadcast_rows(const TensorPtr& v, int rows) {
    if (v->rows != 1) throw ShapeError("broadcast_rows: source must be 1xD, got " + shape_str(*v));
    const int D = v->cols;
    std::vector<double> out(static_cast<size_t>(rows) * D);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < D; ++j) out[static_cast<size_t>(i) * D + j] = v->data[j];
    TensorPtr result = emit(rows, D, std::move(out), v->requires_grad, "broadcast_rows");
    if (v->requires_grad) {
        nodes_.push_back(Node{[v, result, rows, D]() {
            for (int i = 0; i < rows; ++i)
                for (int j = 0; j < D; ++j) v->grad[j] += result->grad_at(i, j);
        }});
    }
    return result;
}

TensorPtr Tape::concat_cols(const TensorPtr& a, const TensorPtr& b) {
    if (a->rows != b->rows) {
        throw ShapeError("concat_cols: row counts differ, " + shape_str(*a) + " vs " +
                         shape_str(*b));
    }
    const int L = a->rows, Ca = a->cols, Cb = b->cols;
    std::vector<double> out(static_cast<size_t>(L) * (Ca + Cb));
    for (int i = 0; i < L; ++i) {
        for (int j = 0; j < Ca; ++j) out[static_cast<size_t>(i) * (Ca + Cb) + j] = a->at(i, j);
        for (int j = 0; j < Cb; ++j)
            out[static_cast<size_t>(i) * (Ca + Cb) + Ca + j] = b->at(i, j);
    }
    const bool req = a->requires_grad || b->requires_grad;
    TensorPtr result = emit(L, Ca + Cb, std::move(out), req, "concat_cols");
    if (req) {
        nodes_.push_back(Node{[a, b, result, L, Ca, Cb]() {
            for (int i = 0; i < L; ++i) {
                if (a->requires_grad)
                    for (int j = 0; j < Ca; ++j) a->grad_at(i, j) += result->grad_at(i, j);
                if (b->requires_grad)
                    for (int j = 0; j < Cb; ++j) b->grad_at(i, j) += result->grad_at(i, Ca + j);
            }
        }});
    }
    return result;
}

TensorPtr Tape::gather_cols(const TensorPtr& x, const std::vector<int>& idx) {
    if (x->rows != 1) throw ShapeError("gather_cols: source must be 1xN, got " + shape_str(*x));
    for (int c : idx)
        if (c < 0 || c >= x->cols)
            throw ShapeError("gather_cols: index " + std::to_string(c) + " out of range");
    std::vector<double> out(idx.size());
    for (size_t i = 0; i < idx.size(); ++i) out[i] = x->data[idx[i]];
    TensorPtr result = emit(1, static_cast<int>(idx.size()), std::move(out), x->requires_grad,
                            "gather_cols");
    if (x->requires_grad) {
        auto indices = idx;
        nodes_.push_back(Node{[x, result, indices]() {
            for (size_t i = 0; i < indices.size(); ++i)
                x->grad[indices[i]] += result->grad[i];
        }});
    }
    return result;
}

TensorPtr Tape::scatter_cols(const TensorPtr& x, const std::vector<int>& idx, int n) {
    if (x->rows != 1 || x->cols != static_cast<int>(idx.size())) {
        throw ShapeError("scatter_cols: source must be 1x" + std::to_string(idx.size()));
    }
    for (int c : idx)
        if (c < 0 || c >= n)
            throw ShapeError("scatter_cols: index " + std::to_string(c) + " out of range");
    std::vector<double> out(static_cast<size_t>(n), 0.0);
    for (size_t i = 0; i < idx.size(); ++i) out[idx[i]] = x->data[i];
    TensorPtr result = emit(1, n, std::move(out), x->requires_grad, "scatter_cols");
    if (x->requires_grad) {
        auto indices = idx;
        nodes_.push_back(Node{[x, result, indices]() {
            for (size_t i = 0; i < indices.size(); ++i)
                x->grad[i] += result->grad[indices[i]];
        }});
    }
    return result;
}

TensorPtr Tape::cell(const TensorPtr& x, int i, int j) {
    if (i < 0 || i >= x->rows || j < 0 || j >= x->cols) {
        throw ShapeError("cell: (" + std::to_string(i) + "," + std::to_string(j) +
                         ") out of range for " + shape_str(*x));
    }
    TensorPtr result = emit(1, 1, {x->at(i, j)}, x->requires_grad, "cell");
    if (x->requires_grad) {
        nodes_.push_back(
            Node{[x, result, i, j]() { x->grad_at(i, j) += result->grad[0]; }});
    }
    return result;
}

TensorPtr Tape::sum_all(const TensorPtr& x) {
    double acc = 0.0;
    for (double v : x->data) acc += v;
    TensorPtr result = emit(1, 1, {acc}, x->requires_grad, "sum_all");
    if (x->requires_grad) {
        nodes_.push_back(Node{[x, result]() {
            for (size_t i = 0; i < x->grad.size(); ++i) x->grad[i] += result->grad[0];
        }});
    }
    return result;
}

TensorPtr Tape::sum_sq(const TensorPtr& x) {
    double acc = 0.0;
    for (double v : x->data) acc += v * v;
    TensorPtr result = emit(1, 1, {acc}, x->requires_grad, "sum_sq");
    if (x->requires_grad) {
        nodes_.push_back(Node{[x, result]() {
            for (size_t i = 0; i < x->grad.size(); ++i)
                x->grad[i] += result->grad[0] * 2.0 * x->data[i];
        }});
    }
    return result;
}

TensorPtr Tape::exp(const TensorPtr& x) {
    std::vector<double> out(x->data.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = std::exp(x->data[i]);
    TensorPtr result = emit(x->rows, x->cols, std::move(out), x->requires_grad, "exp");
    if (x->requires_grad) {
        nodes_.push_back(Node{[x, result]() {
            for (size_t i = 0; i < x->grad.size(); ++i)
                x->grad[i] += result->grad[i] * result->data[i];
        }});
    }
    return result;
}

TensorPtr Tape::clamp(const TensorPtr& x, double lo, double hi) {
    if (!(lo <= hi)) throw PreconditionError("clamp: lo must not exceed hi");
    std::vector<double> out(x->data.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = std::min(hi, std::max(lo, x->data[i]));
    TensorPtr result = emit(x->rows, x->cols, std::move(out), x->requires_grad, "clamp");
    if (x->requires_grad) {
        nodes_.push_back(Node{[x, result, lo, hi]() {
            for (size_t i = 0; i < x->grad.size(); ++i) {
                if (x->data[i] > lo && x->data[i] < hi) x->grad[i] += result->grad[i];
            }
        }});
    }
    return result;
}

void Tape::backward(const TensorPtr& root) {
    if (root->rows != 1 || root->cols != 1) {
        throw ShapeError("backward: root must be a 1x1 scalar, got " + shape_str(*root));
    }
    root->grad[0] = 1.0;
    backward_seeded();
}

void Tape::backward_seeded() {
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->backward();
}

}  // namespace enzkit
