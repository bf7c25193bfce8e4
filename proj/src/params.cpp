#include "enzkit/params.hpp"

#include <cmath>

#include "enzkit/errors.hpp"

namespace enzkit {

TensorPtr ParamRegistry::add(const std::string& name, int rows, int cols,
                             std::vector<double> values, bool frozen) {
    for (const auto& e : entries_) {
        if (e.name == name) throw ConfigError("duplicate parameter name: " + name);
    }
    auto t = make_tensor(rows, cols, std::move(values), !frozen, name);
    entries_.push_back(Entry{name, t, frozen});
    return t;
}

TensorPtr ParamRegistry::add_normal(const std::string& name, int rows, int cols, double stddev,
                                    std::uint64_t seed, bool frozen) {
    Rng rng(mix(seed, hash_str(name)));
    std::vector<double> v(static_cast<size_t>(rows) * cols);
    for (auto& x : v) x = rng.normal(0.0, stddev);
    return add(name, rows, cols, std::move(v), frozen);
}

TensorPtr ParamRegistry::add_xavier(const std::string& name, int rows, int cols,
                                    std::uint64_t seed, bool frozen) {
    const double stddev = std::sqrt(2.0 / (rows + cols));
    return add_normal(name, rows, cols, stddev, seed, frozen);
}

TensorPtr ParamRegistry::add_zeros(const std::string& name, int rows, int cols, bool frozen) {
    return add(name, rows, cols, std::vector<double>(static_cast<size_t>(rows) * cols, 0.0),
               frozen);
}

TensorPtr ParamRegistry::add_ones(const std::string& name, int rows, int cols, bool frozen) {
    return add(name, rows, cols, std::vector<double>(static_cast<size_t>(rows) * cols, 1.0),
               frozen);
}

TensorPtr ParamRegistry::find(const std::string& name) const {
    for (const auto& e : entries_) {
        if (e.name == name) return e.tensor;
    }
    throw ConfigError("unknown parameter: " + name);
}

std::vector<TensorPtr> ParamRegistry::trainable() const {
    std::vector<TensorPtr> out;
    for (const auto& e : entries_) {
        if (!e.frozen) out.push_back(e.tensor);
    }
    return out;
}

void ParamRegistry::zero_trainable_grads() const {
    for (const auto& e : entries_) {
        if (!e.frozen) e.tensor->zero_grad();
    }
}

ParamRegistry ParamRegistry::clone_for_worker() const {
    ParamRegistry copy;
    copy.entries_.reserve(entries_.size());
    for (const auto& e : entries_) {
        if (e.frozen) {
            copy.entries_.push_back(e);
        } else {
            auto t = make_tensor(e.tensor->rows, e.tensor->cols, e.tensor->data, true, e.name);
            copy.entries_.push_back(Entry{e.name, t, false});
        }
    }
    return copy;
}

size_t ParamRegistry::trainable_scalar_count() const {
    size_t n = 0;
    for (const auto& e : entries_) {
        if (!e.frozen) n += e.tensor->data.size();
    }
    return n;
}

}  // namespace enzkit
