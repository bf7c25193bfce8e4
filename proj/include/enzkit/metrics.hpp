#pragma once

#include <string>
#include <vector>

#include "enzkit/model.hpp"

namespace enzkit {

/**
 * Regression metrics in log10 target space. When the targets have zero
 * variance the coefficient of determination and the correlation are
 * undefined and flagged rather than reported.
 */
struct MetricsReport {
    double r2 = 0.0;
    double pcc = 0.0;
    double rmse = 0.0;
    double mae = 0.0;
    int count = 0;
    bool r2_defined = true;
    bool pcc_defined = true;

    std::string to_kv_lines() const;
};

MetricsReport compute_metrics(const std::vector<double>& predictions,
                              const std::vector<double>& targets);

struct SamplePrediction {
    std::string id;
    double mu = 0.0;
    double log_var = 0.0;
    double target_z = 0.0;
};

// Forward every record in evaluation mode (no dropout) with the given model.
std::vector<SamplePrediction> predict_all(const Model& model,
                                          const std::vector<SampleRecord>& records);

MetricsReport evaluate(const Model& model, const std::vector<SampleRecord>& records);

}  // namespace enzkit
