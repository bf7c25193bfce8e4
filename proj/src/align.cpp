#include "enzkit/align.hpp"

#include <algorithm>
#include <cmath>

#include "enzkit/errors.hpp"

namespace enzkit {

StageSummaries stage_summaries(Tape& tape, const TensorPtr& h0, const TensorPtr& h1,
                               const TensorPtr& h2) {
    if (h0->rows != h1->rows || h0->cols != h1->cols) {
        throw ShapeError("stage_summaries: stage 0/1 shapes differ, " + shape_str(*h0) +
                         " vs " + shape_str(*h1));
    }
    if (h2->rows != 1 || h2->cols != h0->cols) {
        throw ShapeError("stage_summaries: stage 2 must be 1x" + std::to_string(h0->cols));
    }
    return StageSummaries{tape.mean_pool_rows(h0), tape.mean_pool_rows(h1), h2};
}

TensorPtr rbf_kernel(Tape& tape, const TensorPtr& a, const TensorPtr& b, double sigma) {
    if (!(sigma > 0.0)) throw PreconditionError("rbf_kernel: sigma must be positive");
    auto sq = tape.sum_sq(tape.sub(a, b));
    return tape.exp(tape.scale(sq, -1.0 / (2.0 * sigma * sigma)));
}

double rbf_kernel_value(const std::vector<double>& a, const std::vector<double>& b,
                        double sigma) {
    double sq = 0.0;
    for (size_t i = 0; i < a.size(); ++i) sq += (a[i] - b[i]) * (a[i] - b[i]);
    return std::exp(-sq / (2.0 * sigma * sigma));
}

double median_bandwidth(const std::vector<const Tensor*>& points) {
    if (points.size() < 2) {
        throw PreconditionError("median_bandwidth: need at least two points");
    }
    std::vector<double> dists;
    dists.reserve(points.size() * (points.size() - 1) / 2);
    for (size_t p = 0; p < points.size(); ++p) {
        for (size_t q = p + 1; q < points.size(); ++q) {
            double sq = 0.0;
            for (size_t i = 0; i < points[p]->data.size(); ++i) {
                const double d = points[p]->data[i] - points[q]->data[i];
                sq += d * d;
            }
            const double dist = std::sqrt(sq);
            if (dist != 0.0) dists.push_back(dist);
        }
    }
    if (dists.empty()) return 1.0;  // every pair coincides
    std::sort(dists.begin(), dists.end());
    const size_t n = dists.size();
    if (n % 2 == 1) return dists[n / 2];
    return 0.5 * (dists[n / 2 - 1] + dists[n / 2]);
}

TensorPtr mmd2(Tape& tape, const std::vector<TensorPtr>& set_a,
               const std::vector<TensorPtr>& set_b, double sigma) {
    const size_t na = set_a.size(), nb = set_b.size();
    if (na < 2 || nb < 2) {
        throw PreconditionError("mmd2: both sets need at least two points, got " +
                                std::to_string(na) + " and " + std::to_string(nb));
    }
    auto within = [&](const std::vector<TensorPtr>& s) -> TensorPtr {
        TensorPtr acc;
        for (size_t p = 0; p < s.size(); ++p) {
            for (size_t q = p + 1; q < s.size(); ++q) {
                auto k = rbf_kernel(tape, s[p], s[q], sigma);
                acc = acc ? tape.add(acc, k) : k;
            }
        }
        // each unordered pair appears twice in the diagonal-free double sum
        return tape.scale(acc, 2.0 / (static_cast<double>(s.size()) * s.size()));
    };
    TensorPtr cross_acc;
    for (size_t p = 0; p < na; ++p) {
        for (size_t q = 0; q < nb; ++q) {
            auto k = rbf_kernel(tape, set_a[p], set_b[q], sigma);
            cross_acc = cross_acc ? tape.add(cross_acc, k) : k;
        }
    }
    auto cross = tape.scale(cross_acc, -2.0 / (static_cast<double>(na) * nb));
    return tape.add(tape.add(within(set_a), within(set_b)), cross);
}

std::pair<double, double> alignment_bandwidths(const std::vector<StageSummaries>& batch,
                                               const KernelConfig& config) {
    if (config.mode == KernelConfig::Mode::fixed) {
        if (!(config.sigma > 0.0)) throw PreconditionError("fixed bandwidth must be positive");
        return {config.sigma, config.sigma};
    }
    std::vector<const Tensor*> union1, union2;
    for (const auto& s : batch) {
        union1.push_back(s.z1.get());
        union2.push_back(s.z2.get());
    }
    for (const auto& s : batch) {
        union1.push_back(s.z0.get());
        union2.push_back(s.z0.get());
    }
    return {median_bandwidth(union1), median_bandwidth(union2)};
}

TensorPtr alignment_loss(Tape& tape, const std::vector<StageSummaries>& batch,
                         const KernelConfig& config) {
    if (batch.size() < 2) {
        throw PreconditionError("alignment_loss: batch must contain at least 2 samples");
    }
    const auto [sigma1, sigma2] = alignment_bandwidths(batch, config);
    return alignment_loss(tape, batch, sigma1, sigma2);
}

TensorPtr alignment_loss(Tape& tape, const std::vector<StageSummaries>& batch, double sigma1,
                         double sigma2) {
    if (batch.size() < 2) {
        throw PreconditionError("alignment_loss: batch must contain at least 2 samples");
    }
    std::vector<TensorPtr> z0, z1, z2;
    for (const auto& s : batch) {
        z0.push_back(s.z0);
        z1.push_back(s.z1);
        z2.push_back(s.z2);
    }
    return tape.add(mmd2(tape, z1, z0, sigma1), mmd2(tape, z2, z0, sigma2));
}

}  // namespace enzkit
