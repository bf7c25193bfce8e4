#include "enzkit/train.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <thread>

#include "enzkit/errors.hpp"
#include "enzkit/rng.hpp"

namespace enzkit {

bool wants_weight_decay(const ParamRegistry::Entry& entry) {
    return !entry.frozen && entry.tensor->rows > 1 && entry.tensor->cols > 1;
}

AdamW::AdamW(const ParamRegistry& reg, double lr, double weight_decay)
    : lr_(lr), weight_decay_(weight_decay) {
    for (const auto& e : reg.entries()) {
        if (e.frozen) continue;
        m_.emplace_back(e.tensor->data.size(), 0.0);
        v_.emplace_back(e.tensor->data.size(), 0.0);
    }
}

void AdamW::step(const ParamRegistry& reg) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
    size_t slot = 0;
    for (const auto& e : reg.entries()) {
        if (e.frozen) continue;
        auto& m = m_[slot];
        auto& v = v_[slot];
        ++slot;
        const bool decay = wants_weight_decay(e);
        auto& data = e.tensor->data;
        auto& grad = e.tensor->grad;
        for (size_t i = 0; i < data.size(); ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            double update = lr_ * mhat / (std::sqrt(vhat) + eps);
            if (decay) update += lr_ * weight_decay_ * data[i];
            data[i] -= update;
        }
        check_finite(data, "optimizer update for " + e.name);
    }
}

namespace {

struct SampleSlot {
    Tape tape;
    SampleForward fwd;
    std::vector<double> grad_buffer;
};

void seed_grad(const TensorPtr& live, const TensorPtr& leaf) {
    if (live && leaf) live->grad = leaf->grad;
}

void extract_trainable_grads(const ParamRegistry& reg, std::vector<double>& buffer) {
    buffer.clear();
    for (const auto& e : reg.entries()) {
        if (e.frozen) continue;
        buffer.insert(buffer.end(), e.tensor->grad.begin(), e.tensor->grad.end());
    }
}

// Fan a worker function out over [0, count) with stride scheduling; worker 0
// runs on the calling thread. Exceptions propagate to the caller.
void parallel_over(int count, int workers, const std::function<void(int, int)>& fn) {
    const int w = std::min(workers, count);
    if (w <= 1) {
        fn(0, 1);
        return;
    }
    std::vector<std::exception_ptr> errors(w);
    std::vector<std::thread> threads;
    for (int t = 1; t < w; ++t) {
        threads.emplace_back([&, t]() {
            try {
                fn(t, w);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    try {
        fn(0, w);
    } catch (...) {
        errors[0] = std::current_exception();
    }
    for (auto& th : threads) th.join();
    for (auto& err : errors) {
        if (err) std::rethrow_exception(err);
    }
}

std::string batch_id_list(const std::vector<const SampleRecord*>& batch) {
    std::ostringstream out;
    for (size_t i = 0; i < batch.size(); ++i) {
        if (i) out << ", ";
        out << batch[i]->id;
    }
    return out.str();
}

}  // namespace

BatchLoss composite_loss(
    Tape& tape, const Model& model, const std::vector<const SampleRecord*>& samples,
    const std::optional<std::pair<double, double>>& frozen_bandwidths) {
    std::vector<SampleHandles> handles;
    handles.reserve(samples.size());
    for (const auto* rec : samples) {
        auto fwd = model_forward(tape, model, *rec, DropoutCtx::off());
        handles.push_back(handles_of(fwd, rec->z));
    }
    return compose_batch_loss(tape, model, handles, frozen_bandwidths);
}

TrainResult train(const TrainConfig& cfg, const std::vector<SampleRecord>& data) {
    cfg.validate();
    if (data.empty()) throw PreconditionError("train: empty dataset");
    for (const auto& rec : data) {
        if (rec.endpoint != cfg.endpoint) {
            throw DataError("train: sample " + rec.id + " has endpoint " +
                            to_string(rec.endpoint) + " but the run is configured for " +
                            to_string(cfg.endpoint));
        }
    }

    TrainResult result{Model::build(cfg), {}};
    Model& model = result.model;
    AdamW opt(model.reg, cfg.learning_rate, cfg.weight_decay);

    const int worker_count = std::max(1, cfg.workers);
    std::vector<Model> workers;
    workers.reserve(worker_count);
    for (int w = 0; w < worker_count; ++w) workers.push_back(model.clone_for_worker());

    bool warned_short_batch = false;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<int> order(data.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
        Rng shuffle_rng(mix(mix(cfg.seed, hash_str("shuffle")), epoch));
        shuffle_rng.shuffle(order);

        std::vector<std::vector<int>> batches;
        for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const size_t end = std::min(order.size(), start + cfg.batch_size);
            batches.emplace_back(order.begin() + start, order.begin() + end);
        }
        if (cfg.use_esda && batches.size() > 1 && batches.back().size() < 2) {
            batches.pop_back();  // alignment needs two samples per batch
        }

        EpochLog elog;
        elog.expert_usage.assign(cfg.experts, 0);
        double task_weight = 0.0;
        double align_batches = 0.0, balance_batches = 0.0;

        for (size_t b = 0; b < batches.size(); ++b) {
            std::vector<const SampleRecord*> batch;
            for (int idx : batches[b]) batch.push_back(&data[idx]);
            const int batch_size = static_cast<int>(batch.size());
            const size_t epoch_offset = b * cfg.batch_size;

            try {
                for (int w = 0; w < worker_count; ++w) workers[w].copy_trainable_from(model);
                std::vector<SampleSlot> slots(batch_size);

                // phase A: per-sample forwards on private parameter copies
                parallel_over(batch_size, worker_count, [&](int w, int stride) {
                    for (int i = w; i < batch_size; i += stride) {
                        const auto ctx = cfg.lora_dropout > 0.0
                                             ? DropoutCtx::train(cfg.seed, epoch,
                                                                 epoch_offset + i)
                                             : DropoutCtx::off();
                        slots[i].fwd = model_forward(slots[i].tape, workers[w], *batch[i], ctx);
                    }
                });

                // phase B: coupled losses over value leaves, single tape
                Tape batch_tape;
                std::vector<SampleHandles> leaves;
                leaves.reserve(batch_size);
                for (int i = 0; i < batch_size; ++i) {
                    leaves.push_back(leaf_copies_of(slots[i].fwd, batch[i]->z));
                }
                BatchLoss loss = compose_batch_loss(batch_tape, model, leaves);
                if (loss.align_skipped && !warned_short_batch) {
                    std::fprintf(stderr,
                                 "[warn] batch of %d: alignment loss needs >= 2 samples, "
                                 "skipping the term\n",
                                 batch_size);
                    warned_short_batch = true;
                }
                batch_tape.backward(loss.total);

                // phase C: per-sample reverse passes seeded with leaf adjoints
                parallel_over(batch_size, worker_count, [&](int w, int stride) {
                    for (int i = w; i < batch_size; i += stride) {
                        workers[w].reg.zero_trainable_grads();
                        seed_grad(slots[i].fwd.mu, leaves[i].mu);
                        seed_grad(slots[i].fwd.log_var, leaves[i].log_var);
                        seed_grad(slots[i].fwd.alpha_tilde, leaves[i].alpha_tilde);
                        seed_grad(slots[i].fwd.z0, leaves[i].z0);
                        seed_grad(slots[i].fwd.z1, leaves[i].z1);
                        seed_grad(slots[i].fwd.z2, leaves[i].z2);
                        slots[i].tape.backward_seeded();
                        extract_trainable_grads(workers[w].reg, slots[i].grad_buffer);
                    }
                });

                // fixed-order reduction, then one optimizer step
                model.reg.zero_trainable_grads();
                for (int i = 0; i < batch_size; ++i) {
                    size_t off = 0;
                    for (const auto& e : model.reg.entries()) {
                        if (e.frozen) continue;
                        auto& grad = e.tensor->grad;
                        for (size_t j = 0; j < grad.size(); ++j)
                            grad[j] += slots[i].grad_buffer[off++];
                    }
                }
                opt.step(model.reg);
                model.reg.zero_trainable_grads();

                elog.mean_task += loss.task->data[0] * batch_size;
                task_weight += batch_size;
                if (loss.balance) {
                    elog.mean_balance += loss.balance->data[0];
                    balance_batches += 1.0;
                }
                if (loss.align) {
                    elog.mean_align += loss.align->data[0];
                    align_batches += 1.0;
                }
                elog.mean_total += loss.total->data[0];
                for (int i = 0; i < batch_size; ++i) {
                    for (int sel : slots[i].fwd.selected) ++elog.expert_usage[sel];
                }
                ++elog.batches;
            } catch (const NumericError& e) {
                std::fprintf(stderr,
                             "[abort] non-finite value in epoch %d batch %zu (samples: %s)\n",
                             epoch, b, batch_id_list(batch).c_str());
                throw NumericError("training aborted in epoch " + std::to_string(epoch) +
                                   ", batch " + std::to_string(b) + " (samples: " +
                                   batch_id_list(batch) + "): " + e.what());
            }
        }

        if (task_weight > 0.0) elog.mean_task /= task_weight;
        if (balance_batches > 0.0) elog.mean_balance /= balance_batches;
        if (align_batches > 0.0) elog.mean_align /= align_batches;
        if (elog.batches > 0) elog.mean_total /= elog.batches;
        result.log.push_back(std::move(elog));
    }
    return result;
}

std::vector<ModuleGradReport> gradcheck_model(const TrainConfig& cfg,
                                              const std::vector<SampleRecord>& samples,
                                              double h) {
    if (samples.empty()) throw PreconditionError("gradcheck_model: empty sample set");
    Model model = Model::build(cfg);
    std::vector<const SampleRecord*> ptrs;
    for (const auto& rec : samples) ptrs.push_back(&rec);

    // freeze the alignment bandwidths at their unperturbed values so the
    // kernel width is a constant of differentiation
    std::optional<std::pair<double, double>> frozen;
    if (model.has_stages() && cfg.use_esda && samples.size() >= 2) {
        Tape probe;
        std::vector<StageSummaries> batch;
        for (const auto* rec : ptrs) {
            auto fwd = model_forward(probe, model, *rec, DropoutCtx::off());
            batch.push_back(StageSummaries{fwd.z0, fwd.z1, fwd.z2});
        }
        frozen = alignment_bandwidths(batch, cfg.esda_bandwidth > 0.0
                                                 ? KernelConfig::fixed(cfg.esda_bandwidth)
                                                 : KernelConfig::median());
    }

    auto loss_fn = [&](Tape& tape) { return composite_loss(tape, model, ptrs, frozen).total; };
    auto reports = grad_check(loss_fn, model.reg.trainable(), h);

    std::map<std::string, GradCheckReport> worst;
    for (const auto& rep : reports) {
        const auto dot = rep.param.find('.');
        const std::string module = dot == std::string::npos ? rep.param : rep.param.substr(0, dot);
        auto it = worst.find(module);
        if (it == worst.end() || rep.max_rel_error > it->second.max_rel_error) {
            worst[module] = rep;
        }
    }
    std::vector<ModuleGradReport> out;
    for (const auto& [module, rep] : worst) out.push_back(ModuleGradReport{module, rep});
    return out;
}

}  // namespace enzkit
