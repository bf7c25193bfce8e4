#include "enzkit/grad_check.hpp"

#include <cmath>

namespace enzkit {

std::vector<GradCheckReport> grad_check(const std::function<TensorPtr(Tape&)>& loss_fn,
                                        const std::vector<TensorPtr>& params, double h) {
    if (!(h > 0.0)) throw PreconditionError("grad_check: step h must be positive");

    for (const auto& p : params) p->zero_grad();
    {
        Tape tape;
        TensorPtr loss = loss_fn(tape);
        if (loss->rows != 1 || loss->cols != 1) {
            throw ShapeError("grad_check: loss function must return a 1x1 scalar");
        }
        tape.backward(loss);
    }

    auto eval = [&loss_fn]() {
        Tape tape;
        return loss_fn(tape)->data[0];
    };

    std::vector<GradCheckReport> reports;
    reports.reserve(params.size());
    for (const auto& p : params) {
        GradCheckReport rep;
        rep.param = p->name.empty() ? "<unnamed>" : p->name;
        for (int i = 0; i < p->rows; ++i) {
            for (int j = 0; j < p->cols; ++j) {
                const double saved = p->at(i, j);
                p->at(i, j) = saved + h;
                const double f_plus = eval();
                p->at(i, j) = saved - h;
                const double f_minus = eval();
                p->at(i, j) = saved;
                if (!std::isfinite(f_plus) || !std::isfinite(f_minus)) {
                    throw NumericError("grad_check: non-finite loss while perturbing " +
                                       rep.param);
                }
                const double numeric = (f_plus - f_minus) / (2.0 * h);
                const double err = rel_error(p->grad_at(i, j), numeric);
                if (err > rep.max_rel_error) {
                    rep.max_rel_error = err;
                    rep.worst_row = i;
                    rep.worst_col = j;
                }
            }
        }
        reports.push_back(std::move(rep));
    }
    return reports;
}

}  // namespace enzkit
