#include "enzkit/metrics.hpp"

#include <cmath>
#include <sstream>

#include "enzkit/errors.hpp"

namespace enzkit {

MetricsReport compute_metrics(const std::vector<double>& predictions,
                              const std::vector<double>& targets) {
    if (predictions.size() != targets.size() || predictions.empty()) {
        throw PreconditionError("compute_metrics: need equal, non-empty vectors");
    }
    const int n = static_cast<int>(predictions.size());
    MetricsReport rep;
    rep.count = n;

    double mean_t = 0.0, mean_p = 0.0;
    for (int i = 0; i < n; ++i) {
        mean_t += targets[i];
        mean_p += predictions[i];
    }
    mean_t /= n;
    mean_p /= n;

    double ss_res = 0.0, ss_tot = 0.0, abs_sum = 0.0;
    double cov = 0.0, var_t = 0.0, var_p = 0.0;
    for (int i = 0; i < n; ++i) {
        const double e = predictions[i] - targets[i];
        ss_res += e * e;
        abs_sum += std::fabs(e);
        const double dt = targets[i] - mean_t;
        const double dp = predictions[i] - mean_p;
        ss_tot += dt * dt;
        cov += dt * dp;
        var_t += dt * dt;
        var_p += dp * dp;
    }
    rep.rmse = std::sqrt(ss_res / n);
    rep.mae = abs_sum / n;
    if (ss_tot == 0.0) {
        rep.r2_defined = false;
    } else {
        rep.r2 = 1.0 - ss_res / ss_tot;
    }
    if (var_t == 0.0 || var_p == 0.0) {
        rep.pcc_defined = false;
    } else {
        rep.pcc = cov / std::sqrt(var_t * var_p);
    }
    return rep;
}

std::string MetricsReport::to_kv_lines() const {
    std::ostringstream out;
    char buf[40];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.6f", v);
        return std::string(buf);
    };
    out << "r2=" << (r2_defined ? num(r2) : "NA") << "\n";
    out << "pcc=" << (pcc_defined ? num(pcc) : "NA") << "\n";
    out << "rmse=" << num(rmse) << "\n";
    out << "mae=" << num(mae) << "\n";
    out << "count=" << count << "\n";
    return out.str();
}

std::vector<SamplePrediction> predict_all(const Model& model,
                                          const std::vector<SampleRecord>& records) {
    std::vector<SamplePrediction> out;
    out.reserve(records.size());
    for (const auto& rec : records) {
        Tape tape;
        auto fwd = model_forward(tape, model, rec, DropoutCtx::off());
        out.push_back(SamplePrediction{rec.id, fwd.mu->data[0], fwd.log_var->data[0], rec.z});
    }
    return out;
}

MetricsReport evaluate(const Model& model, const std::vector<SampleRecord>& records) {
    if (records.empty()) throw PreconditionError("evaluate: empty dataset");
    std::vector<double> preds, targets;
    for (const auto& p : predict_all(model, records)) {
        preds.push_back(p.mu);
        targets.push_back(p.target_z);
    }
    return compute_metrics(preds, targets);
}

}  // namespace enzkit
