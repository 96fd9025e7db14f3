#pragma once

#include <cstdint>
#include <stdexcept>

#include "quatfm/model.hpp"

namespace quatfm {

// Analytic reverse-mode gradients. Each quaternion operation's backward is
// the transpose of its 4x4 sign pattern; everything below accumulates
// upstream * d(yhat)/d(theta) into a structure-matching buffer, so batch
// gradients are plain sums of per-instance calls.

// Structure-matching accumulator for a mini-batch: parameter-shaped partial
// sums plus the instance count used for averaging before an optimizer step.
template <class P>
struct GradientBuffer {
    P grads;
    std::size_t instances = 0;

    void reset() {
        scale_all(grads, 0.0);
        instances = 0;
    }

    // Turns the accumulated sums into per-instance means.
    void average() {
        if (instances > 1) scale_all(grads, 1.0 / static_cast<double>(instances));
    }
};

template <class P>
GradientBuffer<P> make_gradient_buffer(const P& params) {
    return {zeros_like(params), 0};
}

void fm_backward(const FmParams& p, const SparseInstance& inst, double upstream, FmParams& grad);

void qfm_backward(const QfmParams& p, const SparseInstance& inst, const VariantConfig& variant,
                  double upstream, QfmParams& grad);

// Backward from a recorded forward trace (replays the trace's dropout mask).
void qnfm_backprop(const QnfmParams& p, const SparseInstance& inst, const VariantConfig& variant,
                   const QnfmTrace& trace, double upstream, QnfmParams& grad);

// Convenience form that re-runs the forward internally. In train mode the
// rng must be a copy of the state the paired forward pass consumed, so the
// dropout mask is replayed exactly.
void qnfm_backward(const QnfmParams& p, const SparseInstance& inst, const VariantConfig& variant,
                   double upstream, Mode mode, double rho, Rng rng, QnfmParams& grad);

// Central finite difference (f(t+h e_k) - f(t-h e_k)) / 2h of an arbitrary
// scalar function of the parameters, perturbing the coord-th trainable
// scalar in segment order. The verification oracle for every backward above.
template <class P, class Fwd>
double finite_difference(P& params, std::size_t coord, double h, Fwd&& f) {
    if (h <= 0.0) throw std::invalid_argument("finite_difference: h must be positive");
    double* target = nullptr;
    std::size_t offset = 0;
    visit_segments(params, [&](const std::string&, std::span<double> s) {
        if (target == nullptr && coord < offset + s.size()) target = &s[coord - offset];
        offset += s.size();
    });
    if (target == nullptr) throw std::out_of_range("finite_difference: coordinate out of range");

    const double saved = *target;
    *target = saved + h;
    const double plus = f(static_cast<const P&>(params));
    *target = saved - h;
    const double minus = f(static_cast<const P&>(params));
    *target = saved;
    return (plus - minus) / (2.0 * h);
}

// Reads the coord-th trainable scalar of a gradient buffer in segment order.
template <class P>
double scalar_at(const P& params, std::size_t coord) {
    const double* found = nullptr;
    std::size_t offset = 0;
    visit_segments(params, [&](const std::string&, std::span<const double> s) {
        if (found == nullptr && coord < offset + s.size()) found = &s[coord - offset];
        offset += s.size();
    });
    if (found == nullptr) throw std::out_of_range("scalar_at: coordinate out of range");
    return *found;
}

}  // namespace quatfm
