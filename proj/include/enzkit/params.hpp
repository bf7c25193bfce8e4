#pragma once

#include <string>
#include <vector>

#include "enzkit/rng.hpp"
#include "enzkit/tensor.hpp"

namespace enzkit {

/**
 * Ordered registry of named model parameters. Registration order is the
 * canonical order used for checkpoint sections, optimizer state, and
 * fixed-order gradient accumulation. Frozen entries are never updated and
 * never receive gradients (requires_grad stays false).
 */
class ParamRegistry {
public:
    struct Entry {
        std::string name;
        TensorPtr tensor;
        bool frozen = false;
    };

    // Initializers draw from a stateless stream keyed by (seed, name) so the
    // same name always gets the same values regardless of registration order.
    TensorPtr add_normal(const std::string& name, int rows, int cols, double stddev,
                         std::uint64_t seed, bool frozen = false);
    TensorPtr add_xavier(const std::string& name, int rows, int cols, std::uint64_t seed,
                         bool frozen = false);
    TensorPtr add_zeros(const std::string& name, int rows, int cols, bool frozen = false);
    TensorPtr add_ones(const std::string& name, int rows, int cols, bool frozen = false);

    const std::vector<Entry>& entries() const { return entries_; }
    TensorPtr find(const std::string& name) const;  // throws ConfigError if absent

    std::vector<TensorPtr> trainable() const;
    void zero_trainable_grads() const;

    // Deep copy: trainable tensors are cloned, frozen tensors are shared
    // (they are read-only on the forward path).
    ParamRegistry clone_for_worker() const;

    size_t trainable_scalar_count() const;

private:
    TensorPtr add(const std::string& name, int rows, int cols, std::vector<double> values,
                  bool frozen);
    std::vector<Entry> entries_;
};

}  // namespace enzkit
