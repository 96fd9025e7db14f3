#pragma once

#include <chrono>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "quatfm/data.hpp"
#include "quatfm/gradients.hpp"
#include "quatfm/model.hpp"

namespace quatfm {

struct TrainConfig {
    ModelKind kind = ModelKind::qfm;
    std::size_t d = 8;
    std::size_t l = 1;          // qnfm depth
    double rho = 0.1;           // qnfm dropout ratio, in [0,1)
    std::size_t batch_size = 512;
    double lr = 1e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::size_t max_epochs = 30;
    std::size_t patience = 3;   // consecutive validation-loss rises tolerated
    std::uint64_t seed = 1;
    VariantConfig variant;
    std::size_t threads = 1;

    void validate() const;
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Binary cross-entropy of pre-sigmoid scores, with probabilities clamped to
// [1e-12, 1-1e-12] so saturated predictions stay finite.
double instance_log_loss(double score, int label);
double log_loss_sum(std::span<const double> scores, std::span<const int> labels);
double log_loss_mean(std::span<const double> scores, std::span<const int> labels);

// d(log loss)/d(score) = sigmoid(score) - label
inline double log_loss_grad(double score, int label) {
    return sigmoid(score) - static_cast<double>(label);
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

template <class P>
struct AdamState {
    P m, v;          // first/second moment accumulators, parameter-shaped
    std::size_t t = 0;  // applied update count
};

template <class P>
AdamState<P> make_adam_state(const P& params) {
    return {zeros_like(params), zeros_like(params), 0};
}

// Bias-corrected Adam update applied elementwise. grad must already be
// averaged over the batch.
template <class P>
void adam_step(P& params, const P& grad, AdamState<P>& st, double lr, double beta1, double beta2,
               double eps) {
    st.t += 1;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(st.t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(st.t));
    auto ps = named_segments(params);
    auto gs = named_segments(grad);
    auto ms = named_segments(st.m);
    auto vs = named_segments(st.v);
    for (std::size_t s = 0; s < ps.size(); ++s) {
        check_same_size(ps[s].second.size(), gs[s].second.size(), "adam_step");
        for (std::size_t k = 0; k < ps[s].second.size(); ++k) {
            const double g = gs[s].second[k];
            double& m = ms[s].second[k];
            double& v = vs[s].second[k];
            m = beta1 * m + (1.0 - beta1) * g;
            v = beta2 * v + (1.0 - beta2) * g * g;
            ps[s].second[k] -= lr * (m / bc1) / (std::sqrt(v / bc2) + eps);
        }
    }
}

// ---------------------------------------------------------------------------
// Early stopping: halt once validation loss has risen strictly for
// `patience` consecutive epochs; the kept model is the best-validation
// snapshot, not the last.
// ---------------------------------------------------------------------------

struct EarlyStopMonitor {
    std::size_t patience = 3;
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_epoch = 0;
    double last = std::numeric_limits<double>::infinity();
    std::size_t consecutive_rises = 0;

    // Returns true when training should stop. Epochs are 1-based.
    bool observe(std::size_t epoch, double val_loss) {
        if (val_loss < best) {
            best = val_loss;
            best_epoch = epoch;
        }
        if (epoch > 1 && val_loss > last) {
            ++consecutive_rises;
        } else {
            consecutive_rises = 0;
        }
        last = val_loss;
        return consecutive_rises >= patience;
    }
};

struct EpochStats {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double seconds = 0.0;
};

// ---------------------------------------------------------------------------
// Per-kind hooks used by the generic loop
// ---------------------------------------------------------------------------

inline double eval_score(const FmParams& p, const SparseInstance& inst, const VariantConfig&) {
    return fm_forward(p, inst);
}
inline double eval_score(const QfmParams& p, const SparseInstance& inst,
                         const VariantConfig& variant) {
    return qfm_forward(p, inst, variant);
}
inline double eval_score(const QnfmParams& p, const SparseInstance& inst,
                         const VariantConfig& variant) {
    return qnfm_forward(p, inst, variant);
}

// Train-mode forward + gradient accumulation for one instance; returns the
// (train-mode) score.
inline double train_step_instance(const FmParams& p, const SparseInstance& inst,
                                  const VariantConfig&, double /*rho*/, Rng /*rng*/,
                                  FmParams& grad) {
    const double yhat = fm_forward(p, inst);
    fm_backward(p, inst, log_loss_grad(yhat, inst.label), grad);
    return yhat;
}
inline double train_step_instance(const QfmParams& p, const SparseInstance& inst,
                                  const VariantConfig& variant, double /*rho*/, Rng /*rng*/,
                                  QfmParams& grad) {
    const double yhat = qfm_forward(p, inst, variant);
    qfm_backward(p, inst, variant, log_loss_grad(yhat, inst.label), grad);
    return yhat;
}
inline double train_step_instance(const QnfmParams& p, const SparseInstance& inst,
                                  const VariantConfig& variant, double rho, Rng rng,
                                  QnfmParams& grad) {
    QnfmTrace trace;
    const double yhat = qnfm_forward_traced(p, inst, variant, Mode::train, rho, &rng, trace);
    qnfm_backprop(p, inst, variant, trace, log_loss_grad(yhat, inst.label), grad);
    return yhat;
}

template <class P>
std::vector<double> eval_scores(const P& params, const Dataset& ds, const VariantConfig& variant) {
    std::vector<double> out;
    out.reserve(ds.size());
    for (const auto& inst : ds.instances) out.push_back(eval_score(params, inst, variant));
    return out;
}

template <class P>
double eval_log_loss(const P& params, const Dataset& ds, const VariantConfig& variant) {
    double total = 0.0;
    for (const auto& inst : ds.instances)
        total += instance_log_loss(eval_score(params, inst, variant), inst.label);
    return total / static_cast<double>(ds.size());
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

template <class P>
struct TrainOutcome {
    P params;                 // best-validation snapshot
    std::size_t best_epoch = 0;
    std::vector<EpochStats> history;
};

namespace detail {

// Accumulates gradients and train loss for one batch. The per-instance rng
// stream depends only on (seed, epoch, instance index), so results are
// independent of how instances are distributed over workers; with more than
// one worker, per-chunk buffers are reduced in fixed chunk order.
template <class P>
double batch_gradients(const P& params, const Dataset& ds, std::span<const std::size_t> batch,
                       const TrainConfig& cfg, std::uint64_t epoch_stream,
                       GradientBuffer<P>& buffer, std::vector<GradientBuffer<P>>& scratch) {
    buffer.reset();
    const std::size_t workers =
        std::max<std::size_t>(1, std::min(cfg.threads, batch.size()));
    if (workers == 1) {
        double loss = 0.0;
        for (const std::size_t idx : batch) {
            const auto& inst = ds.instances[idx];
            Rng rng(Rng::mix(epoch_stream, idx));
            const double yhat =
                train_step_instance(params, inst, cfg.variant, cfg.rho, rng, buffer.grads);
            buffer.instances += 1;
            loss += instance_log_loss(yhat, inst.label);
        }
        return loss;
    }

    if (scratch.size() < workers) scratch.resize(workers, make_gradient_buffer(params));
    std::vector<double> losses(workers, 0.0);
    std::vector<std::thread> pool;
    const std::size_t chunk = (batch.size() + workers - 1) / workers;
    for (std::size_t wi = 0; wi < workers; ++wi) {
        const std::size_t lo = wi * chunk;
        const std::size_t hi = std::min(batch.size(), lo + chunk);
        scratch[wi].reset();
        pool.emplace_back([&, wi, lo, hi] {
            for (std::size_t k = lo; k < hi; ++k) {
                const std::size_t idx = batch[k];
                const auto& inst = ds.instances[idx];
                Rng rng(Rng::mix(epoch_stream, idx));
                const double yhat = train_step_instance(params, inst, cfg.variant, cfg.rho, rng,
                                                        scratch[wi].grads);
                scratch[wi].instances += 1;
                losses[wi] += instance_log_loss(yhat, inst.label);
            }
        });
    }
    double loss = 0.0;
    for (std::size_t wi = 0; wi < workers; ++wi) {
        pool[wi].join();
        axpy_all(buffer.grads, scratch[wi].grads, 1.0);
        buffer.instances += scratch[wi].instances;
        loss += losses[wi];
    }
    return loss;
}

}  // namespace detail

template <class P>
TrainOutcome<P> train_model(const TrainConfig& cfg, P params, const Dataset& train_ds,
                            const Dataset& val_ds) {
    cfg.validate();
    if (train_ds.instances.empty() || val_ds.instances.empty())
        throw std::invalid_argument("train_model: datasets must be nonempty");

    TrainOutcome<P> out;
    out.params = params;  // fall back to the initial state if no epoch runs
    AdamState<P> adam = make_adam_state(params);
    EarlyStopMonitor stop{cfg.patience};
    GradientBuffer<P> buffer = make_gradient_buffer(params);
    std::vector<GradientBuffer<P>> scratch;

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const std::uint64_t epoch_stream = Rng::mix(cfg.seed, 0xe90c + epoch);
        const auto batches =
            shuffled_batches(train_ds.size(), cfg.batch_size, Rng::mix(cfg.seed, epoch));

        double train_loss = 0.0;
        for (const auto& batch : batches) {
            train_loss += detail::batch_gradients(params, train_ds, batch, cfg, epoch_stream,
                                                  buffer, scratch);
            buffer.average();
            adam_step(params, buffer.grads, adam, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps);
        }
        train_loss /= static_cast<double>(train_ds.size());

        const double val_loss = eval_log_loss(params, val_ds, cfg.variant);
        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        const bool improved = val_loss < stop.best;
        const bool halt = stop.observe(epoch, val_loss);
        if (improved) {
            out.params = params;
            out.best_epoch = epoch;
        }
        out.history.push_back({epoch, train_loss, val_loss, seconds});
        if (halt) break;
    }
    return out;
}

// Kind-dispatching wrapper for callers that only know the configuration.
struct TrainedModel {
    TrainConfig config;
    std::variant<FmParams, QfmParams, QnfmParams> params;
    std::size_t best_epoch = 0;
    std::vector<EpochStats> history;
};

TrainedModel train(const TrainConfig& cfg, const Dataset& train_ds, const Dataset& val_ds);

// Validation log loss of a trained model's best snapshot.
double trained_val_loss(const TrainedModel& m, const Dataset& val_ds);

// ---------------------------------------------------------------------------
// Grid search
// ---------------------------------------------------------------------------

struct GridCell {
    TrainConfig config;
    double val_loss = 0.0;
    std::size_t best_epoch = 0;
};

struct GridResult {
    std::vector<GridCell> cells;
    std::size_t best_index = 0;
};

std::vector<TrainConfig> expand_grid(const TrainConfig& base, std::span<const std::size_t> ds,
                                     std::span<const std::size_t> ls,
                                     std::span<const double> rhos);

GridResult grid_search(std::span<const TrainConfig> cells, const Dataset& train_ds,
                       const Dataset& val_ds);

// History CSV: a config-echo comment header, then epoch,train_loss,val_loss,seconds.
std::string history_csv(const TrainConfig& cfg, std::span<const EpochStats> history);

}  // namespace quatfm
