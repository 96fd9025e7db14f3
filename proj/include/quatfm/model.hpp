#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "quatfm/data.hpp"
#include "quatfm/quaternion.hpp"
#include "quatfm/rng.hpp"

namespace quatfm {

enum class ModelKind { fm, qfm, qnfm };
enum class Mode { train, eval };

// Ablation axes. Defaults are the full models: Hamilton pair products taken
// in both orientations, with residual connections in the deep variant.
enum class Interaction { hamilton, dot_product };
enum class Direction { two_way, one_way };
enum class PoolingKind { hamilton, elementwise_real };

struct VariantConfig {
    Interaction interaction = Interaction::hamilton;
    Direction direction = Direction::two_way;
    PoolingKind pooling = PoolingKind::hamilton;
    bool residual = true;
};

std::string to_string(ModelKind k);
ModelKind model_kind_from_string(const std::string& s);

// ---------------------------------------------------------------------------
// Parameter structures. These double as gradient buffers and Adam moment
// buffers: zeros_like() gives a structure-matching accumulator.
// ---------------------------------------------------------------------------

// Plain second-order factorization machine (the real-valued baseline).
struct FmParams {
    std::size_t n = 0;
    std::size_t d = 0;  // embedding dimension d_fm
    double w0 = 0.0;
    std::vector<double> w;
    RealMatrix v;  // n x d
};

// Quaternion factorization machine: the four embedding matrices carry the
// same scalar budget as one real n x 4d matrix.
struct QfmParams {
    std::size_t n = 0;
    std::size_t d = 0;  // quaternion latent dimension
    double w0 = 0.0;
    std::vector<double> w;
    RealMatrix mr, ma, mb, mc;  // each n x d
};

struct QnfmLayer {
    QuaternionMatrix w;      // d x d
    QuaternionVector bias;   // d
};

// Deep extension: QFM embedding block plus a residual quaternion
// feed-forward stack and an output projection.
struct QnfmParams {
    QfmParams emb;
    std::vector<QnfmLayer> layers;
    QuaternionVector p;  // output projection, dimension d

    std::size_t n() const { return emb.n; }
    std::size_t d() const { return emb.d; }
    std::size_t depth() const { return layers.size(); }
};

// Gaussian init with std 1/sqrt(4d) on embedding/weight cores (1/sqrt(d_fm)
// for the real FM), zero biases and linear weights, w0 = logit of the
// training positive rate.
FmParams init_fm(std::size_t n, std::size_t d_fm, std::uint64_t seed, double pos_rate = 0.5);
QfmParams init_qfm(std::size_t n, std::size_t d, std::uint64_t seed, double pos_rate = 0.5);
QnfmParams init_qnfm(std::size_t n, std::size_t d, std::size_t l, std::uint64_t seed,
                     double pos_rate = 0.5);

FmParams zeros_like(const FmParams& p);
QfmParams zeros_like(const QfmParams& p);
QnfmParams zeros_like(const QnfmParams& p);

// ---------------------------------------------------------------------------
// Trainable-scalar traversal. Every walk below visits the same segments in
// the same fixed order (also the checkpoint layout): w0, w, embeddings in
// (r,a,b,c) order, then per layer W cores and bias cores, then p cores.
// ---------------------------------------------------------------------------

namespace detail {
template <class P>
using scalar_t = std::conditional_t<std::is_const_v<P>, const double, double>;
}

template <class P, class F>
    requires std::same_as<std::remove_const_t<P>, FmParams>
void visit_segments(P& p, F&& f) {
    f(std::string("w0"), std::span<detail::scalar_t<P>>(&p.w0, 1));
    f(std::string("w"), std::span<detail::scalar_t<P>>(p.w));
    f(std::string("V"), std::span<detail::scalar_t<P>>(p.v.data));
}

template <class P, class F>
    requires std::same_as<std::remove_const_t<P>, QfmParams>
void visit_segments(P& p, F&& f) {
    f(std::string("w0"), std::span<detail::scalar_t<P>>(&p.w0, 1));
    f(std::string("w"), std::span<detail::scalar_t<P>>(p.w));
    f(std::string("Mr"), std::span<detail::scalar_t<P>>(p.mr.data));
    f(std::string("Ma"), std::span<detail::scalar_t<P>>(p.ma.data));
    f(std::string("Mb"), std::span<detail::scalar_t<P>>(p.mb.data));
    f(std::string("Mc"), std::span<detail::scalar_t<P>>(p.mc.data));
}

template <class P, class F>
    requires std::same_as<std::remove_const_t<P>, QnfmParams>
void visit_segments(P& p, F&& f) {
    visit_segments(p.emb, f);
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        auto& layer = p.layers[l];
        const std::string wl = "W" + std::to_string(l + 1);
        const std::string bl = "b" + std::to_string(l + 1);
        f(wl + ".r", std::span<detail::scalar_t<P>>(layer.w.rw.data));
        f(wl + ".a", std::span<detail::scalar_t<P>>(layer.w.aw.data));
        f(wl + ".b", std::span<detail::scalar_t<P>>(layer.w.bw.data));
        f(wl + ".c", std::span<detail::scalar_t<P>>(layer.w.cw.data));
        f(bl + ".r", std::span<detail::scalar_t<P>>(layer.bias.r));
        f(bl + ".a", std::span<detail::scalar_t<P>>(layer.bias.a));
        f(bl + ".b", std::span<detail::scalar_t<P>>(layer.bias.b));
        f(bl + ".c", std::span<detail::scalar_t<P>>(layer.bias.c));
    }
    f(std::string("p.r"), std::span<detail::scalar_t<P>>(p.p.r));
    f(std::string("p.a"), std::span<detail::scalar_t<P>>(p.p.a));
    f(std::string("p.b"), std::span<detail::scalar_t<P>>(p.p.b));
    f(std::string("p.c"), std::span<detail::scalar_t<P>>(p.p.c));
}

template <class P>
auto named_segments(P& p) {
    using D = detail::scalar_t<P>;
    std::vector<std::pair<std::string, std::span<D>>> out;
    visit_segments(p, [&](std::string name, std::span<D> s) { out.emplace_back(std::move(name), s); });
    return out;
}

template <class P>
std::size_t count_scalars(const P& p) {
    std::size_t total = 0;
    visit_segments(p, [&](const std::string&, std::span<const double> s) { total += s.size(); });
    return total;
}

template <class P>
void scale_all(P& p, double s) {
    visit_segments(p, [&](const std::string&, std::span<double> seg) {
        for (double& x : seg) x *= s;
    });
}

// dst += s * src (structures must match shape)
template <class P>
void axpy_all(P& dst, const P& src, double s) {
    auto d = named_segments(dst);
    auto v = named_segments(src);
    for (std::size_t i = 0; i < d.size(); ++i) {
        check_same_size(d[i].second.size(), v[i].second.size(), "axpy_all");
        for (std::size_t k = 0; k < d[i].second.size(); ++k) d[i].second[k] += s * v[i].second[k];
    }
}

// Closed-form trainable-scalar counts:
//   fm   -> 1 + n + n*d
//   qfm  -> 1 + n + 4nd      (matches fm at d_fm = 4d)
//   qnfm -> qfm + l*(4d^2 + 4d) + 4d
std::size_t param_count(ModelKind kind, std::size_t n, std::size_t d, std::size_t l = 0);

// ---------------------------------------------------------------------------
// Forward passes
// ---------------------------------------------------------------------------

// w0 + sum_i w_i x_i over the instance's nonzeros.
double linear_term(double w0, std::span<const double> w, const SparseInstance& inst);

// Quaternion embeddings of the instance's nonzero features: rows of the four
// embedding matrices scaled by the feature value.
std::vector<QuaternionVector> embed(const QfmParams& p, const SparseInstance& inst);

double fm_forward(const FmParams& p, const SparseInstance& inst);

// Channel-restricted pair products for the dot-product / pure element-wise
// ablations: each core pair interacts only within its own channel.
Quaternion channel_dot(const QuaternionVector& u, const QuaternionVector& v);
QuaternionVector channel_elementwise(const QuaternionVector& u, const QuaternionVector& v);

// Pairwise interaction sum, straight from its definition: the double loop
// over ordered feature pairs (both orientations for two_way, i<j only for
// one_way; the diagonal i=j is always excluded).
Quaternion qfm_interaction(std::span<const QuaternionVector> embeds, Interaction kind,
                           Direction dir);

// O(m*d) rewriting of the two-way Hamilton interaction via bilinearity:
// S (x) S - sum_i v_i (x) v_i with S = sum_i v_i.
Quaternion qfm_interaction_fast(std::span<const QuaternionVector> embeds);

// Production path: the bilinear identity for two_way, a prefix-sum scan for
// one_way; handles both pair-product kinds. Agrees with qfm_interaction.
Quaternion interaction_sum(std::span<const QuaternionVector> embeds, Interaction kind,
                           Direction dir);

double qfm_forward(const QfmParams& p, const SparseInstance& inst, const VariantConfig& variant);

// Interaction pooling: vector-valued analogues of the above.
QuaternionVector qnfm_pooling(std::span<const QuaternionVector> embeds, std::size_t d,
                              PoolingKind kind, Direction dir);
QuaternionVector qnfm_pooling_fast(std::span<const QuaternionVector> embeds, std::size_t d);
QuaternionVector pooling_sum(std::span<const QuaternionVector> embeds, std::size_t d,
                             PoolingKind kind, Direction dir);

// Per-instance forward records needed to backpropagate without re-deriving
// intermediates. `keep` holds the per-coordinate dropout scales (0 or
// 1/(1-rho)); empty in eval mode.
struct QnfmTrace {
    std::vector<QuaternionVector> embeds;
    QuaternionVector pooled;
    std::vector<QuaternionVector> pre;     // W h + b per layer
    std::vector<QuaternionVector> hidden;  // layer outputs after residual + dropout
    std::vector<std::vector<double>> keep;
    double yhat = 0.0;
};

// Residual quaternion feed-forward stack with split-ReLU activations. In
// train mode, dropout zeroes whole quaternion coordinates (all four cores
// together) with probability rho and rescales survivors by 1/(1-rho), so
// eval mode needs no compensation. rng supplies the masks and must be
// replayed for a matching backward pass.
QuaternionVector qnfm_ffn(const QnfmParams& p, const QuaternionVector& v,
                          const VariantConfig& variant, Mode mode = Mode::eval,
                          double rho = 0.0, Rng* rng = nullptr);

double qnfm_forward(const QnfmParams& p, const SparseInstance& inst,
                    const VariantConfig& variant, Mode mode = Mode::eval, double rho = 0.0,
                    Rng* rng = nullptr);

// Same forward, recording the trace for the backward pass.
double qnfm_forward_traced(const QnfmParams& p, const SparseInstance& inst,
                           const VariantConfig& variant, Mode mode, double rho, Rng* rng,
                           QnfmTrace& trace);

// ---------------------------------------------------------------------------
// Checkpoints: binary container (native little-endian f64) holding kind,
// variant flags, shapes and all segments in visit order. Round-trips are
// lossless.
// ---------------------------------------------------------------------------

struct Checkpoint {
    ModelKind kind = ModelKind::fm;
    VariantConfig variant;
    std::variant<FmParams, QfmParams, QnfmParams> params;
};

void save_checkpoint(const std::string& path, const VariantConfig& variant, const FmParams& p);
void save_checkpoint(const std::string& path, const VariantConfig& variant, const QfmParams& p);
void save_checkpoint(const std::string& path, const VariantConfig& variant, const QnfmParams& p);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace quatfm
