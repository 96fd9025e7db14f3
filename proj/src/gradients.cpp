#include "quatfm/gradients.hpp"

namespace quatfm {

namespace {

// Adjoints of the pair products. For u * v with upstream g on the output,
// the left/right input gradients reuse the Hamilton sign pattern with the
// signs transposed. The scalar-g forms serve the inner products (the
// upstream is a quaternion scalar); the vector-g forms serve the
// element-wise products.

void add_adj_left(const Quaternion& g, const QuaternionVector& v, Interaction kind,
                  QuaternionVector& out, double sign = 1.0) {
    if (kind == Interaction::hamilton) {
        for (std::size_t k = 0; k < v.dim(); ++k) {
            out.r[k] += sign * (g.r * v.r[k] + g.a * v.a[k] + g.b * v.b[k] + g.c * v.c[k]);
            out.a[k] += sign * (-g.r * v.a[k] + g.a * v.r[k] - g.b * v.c[k] + g.c * v.b[k]);
            out.b[k] += sign * (-g.r * v.b[k] + g.a * v.c[k] + g.b * v.r[k] - g.c * v.a[k]);
            out.c[k] += sign * (-g.r * v.c[k] - g.a * v.b[k] + g.b * v.a[k] + g.c * v.r[k]);
        }
    } else {
        for (std::size_t k = 0; k < v.dim(); ++k) {
            out.r[k] += sign * g.r * v.r[k];
            out.a[k] += sign * g.a * v.a[k];
            out.b[k] += sign * g.b * v.b[k];
            out.c[k] += sign * g.c * v.c[k];
        }
    }
}

void add_adj_right(const Quaternion& g, const QuaternionVector& u, Interaction kind,
                   QuaternionVector& out, double sign = 1.0) {
    if (kind == Interaction::hamilton) {
        for (std::size_t k = 0; k < u.dim(); ++k) {
            out.r[k] += sign * (g.r * u.r[k] + g.a * u.a[k] + g.b * u.b[k] + g.c * u.c[k]);
            out.a[k] += sign * (-g.r * u.a[k] + g.a * u.r[k] + g.b * u.c[k] - g.c * u.b[k]);
            out.b[k] += sign * (-g.r * u.b[k] - g.a * u.c[k] + g.b * u.r[k] + g.c * u.a[k]);
            out.c[k] += sign * (-g.r * u.c[k] + g.a * u.b[k] - g.b * u.a[k] + g.c * u.r[k]);
        }
    } else {
        for (std::size_t k = 0; k < u.dim(); ++k) {
            out.r[k] += sign * g.r * u.r[k];
            out.a[k] += sign * g.a * u.a[k];
            out.b[k] += sign * g.b * u.b[k];
            out.c[k] += sign * g.c * u.c[k];
        }
    }
}

void add_adj_left(const QuaternionVector& g, const QuaternionVector& v, PoolingKind kind,
                  QuaternionVector& out, double sign = 1.0) {
    if (kind == PoolingKind::hamilton) {
        for (std::size_t k = 0; k < v.dim(); ++k) {
            out.r[k] += sign * (g.r[k] * v.r[k] + g.a[k] * v.a[k] + g.b[k] * v.b[k] + g.c[k] * v.c[k]);
            out.a[k] += sign * (-g.r[k] * v.a[k] + g.a[k] * v.r[k] - g.b[k] * v.c[k] + g.c[k] * v.b[k]);
            out.b[k] += sign * (-g.r[k] * v.b[k] + g.a[k] * v.c[k] + g.b[k] * v.r[k] - g.c[k] * v.a[k]);
            out.c[k] += sign * (-g.r[k] * v.c[k] - g.a[k] * v.b[k] + g.b[k] * v.a[k] + g.c[k] * v.r[k]);
        }
    } else {
        for (std::size_t k = 0; k < v.dim(); ++k) {
            out.r[k] += sign * g.r[k] * v.r[k];
            out.a[k] += sign * g.a[k] * v.a[k];
            out.b[k] += sign * g.b[k] * v.b[k];
            out.c[k] += sign * g.c[k] * v.c[k];
        }
    }
}

void add_adj_right(const QuaternionVector& g, const QuaternionVector& u, PoolingKind kind,
                   QuaternionVector& out, double sign = 1.0) {
    if (kind == PoolingKind::hamilton) {
        for (std::size_t k = 0; k < u.dim(); ++k) {
            out.r[k] += sign * (g.r[k] * u.r[k] + g.a[k] * u.a[k] + g.b[k] * u.b[k] + g.c[k] * u.c[k]);
            out.a[k] += sign * (-g.r[k] * u.a[k] + g.a[k] * u.r[k] + g.b[k] * u.c[k] - g.c[k] * u.b[k]);
            out.b[k] += sign * (-g.r[k] * u.b[k] - g.a[k] * u.c[k] + g.b[k] * u.r[k] + g.c[k] * u.a[k]);
            out.c[k] += sign * (-g.r[k] * u.c[k] + g.a[k] * u.b[k] - g.b[k] * u.a[k] + g.c[k] * u.r[k]);
        }
    } else {
        for (std::size_t k = 0; k < u.dim(); ++k) {
            out.r[k] += sign * g.r[k] * u.r[k];
            out.a[k] += sign * g.a[k] * u.a[k];
            out.b[k] += sign * g.b[k] * u.b[k];
            out.c[k] += sign * g.c[k] * u.c[k];
        }
    }
}

// Input and weight gradients of qmat_vec: transposed sign pattern for the
// input, outer products for the four weight cores.
void qmat_vec_backward(const QuaternionMatrix& w, const QuaternionVector& h,
                       const QuaternionVector& g, QuaternionMatrix& grad_w,
                       QuaternionVector& grad_h) {
    matvec_t_acc(w.rw, g.r, grad_h.r, 1.0);
    matvec_t_acc(w.aw, g.a, grad_h.r, 1.0);
    matvec_t_acc(w.bw, g.b, grad_h.r, 1.0);
    matvec_t_acc(w.cw, g.c, grad_h.r, 1.0);

    matvec_t_acc(w.aw, g.r, grad_h.a, -1.0);
    matvec_t_acc(w.rw, g.a, grad_h.a, 1.0);
    matvec_t_acc(w.cw, g.b, grad_h.a, 1.0);
    matvec_t_acc(w.bw, g.c, grad_h.a, -1.0);

    matvec_t_acc(w.bw, g.r, grad_h.b, -1.0);
    matvec_t_acc(w.cw, g.a, grad_h.b, -1.0);
    matvec_t_acc(w.rw, g.b, grad_h.b, 1.0);
    matvec_t_acc(w.aw, g.c, grad_h.b, 1.0);

    matvec_t_acc(w.cw, g.r, grad_h.c, -1.0);
    matvec_t_acc(w.bw, g.a, grad_h.c, 1.0);
    matvec_t_acc(w.aw, g.b, grad_h.c, -1.0);
    matvec_t_acc(w.rw, g.c, grad_h.c, 1.0);

    outer_acc(grad_w.rw, g.r, h.r, 1.0);
    outer_acc(grad_w.rw, g.a, h.a, 1.0);
    outer_acc(grad_w.rw, g.b, h.b, 1.0);
    outer_acc(grad_w.rw, g.c, h.c, 1.0);

    outer_acc(grad_w.aw, g.r, h.a, -1.0);
    outer_acc(grad_w.aw, g.a, h.r, 1.0);
    outer_acc(grad_w.aw, g.b, h.c, -1.0);
    outer_acc(grad_w.aw, g.c, h.b, 1.0);

    outer_acc(grad_w.bw, g.r, h.b, -1.0);
    outer_acc(grad_w.bw, g.a, h.c, 1.0);
    outer_acc(grad_w.bw, g.b, h.r, 1.0);
    outer_acc(grad_w.bw, g.c, h.a, -1.0);

    outer_acc(grad_w.cw, g.r, h.c, -1.0);
    outer_acc(grad_w.cw, g.a, h.b, -1.0);
    outer_acc(grad_w.cw, g.b, h.a, 1.0);
    outer_acc(grad_w.cw, g.c, h.r, 1.0);
}

// Gradients of the pairwise sums with respect to each embedding, written
// through the same forms the forward uses: the bilinear identity for
// two_way, prefix scans for one_way. Templated over scalar/vector upstream.
template <class G, class Kind>
std::vector<QuaternionVector> pair_sum_backward(const std::vector<QuaternionVector>& embeds,
                                                const G& g, Kind kind, Direction dir,
                                                std::size_t d) {
    std::vector<QuaternionVector> grads(embeds.size(), QuaternionVector(d));
    if (embeds.size() < 2) return grads;

    QuaternionVector total(d);
    for (const auto& e : embeds) add_in_place(total, e);

    if (dir == Direction::two_way) {
        QuaternionVector common(d);
        add_adj_left(g, total, kind, common);
        add_adj_right(g, total, kind, common);
        for (std::size_t i = 0; i < embeds.size(); ++i) {
            grads[i] = common;
            add_adj_left(g, embeds[i], kind, grads[i], -1.0);
            add_adj_right(g, embeds[i], kind, grads[i], -1.0);
        }
        return grads;
    }

    // one_way: d/d(e_i) sum_{i<j} P(e_i, e_j)
    //   = adjL(g, sum_{j>i} e_j) + adjR(g, sum_{j<i} e_j)
    QuaternionVector before(d);  // sum of embeds preceding i
    for (std::size_t i = 0; i < embeds.size(); ++i) {
        QuaternionVector after = total - before - embeds[i];
        add_adj_left(g, after, kind, grads[i]);
        add_adj_right(g, before, kind, grads[i]);
        add_in_place(before, embeds[i]);
    }
    return grads;
}

// Scatters embedding-space gradients back into the four embedding matrices,
// undoing the feature-value scaling, and fills the linear-term gradients.
void embedding_backward(const SparseInstance& inst,
                        const std::vector<QuaternionVector>& embed_grads, double upstream,
                        QfmParams& grad) {
    grad.w0 += upstream;
    for (std::size_t f = 0; f < inst.indices.size(); ++f) {
        const std::uint32_t i = inst.indices[f];
        const double x = inst.values[f];
        grad.w[i] += upstream * x;
        axpy(x, embed_grads[f].r, grad.mr.row(i));
        axpy(x, embed_grads[f].a, grad.ma.row(i));
        axpy(x, embed_grads[f].b, grad.mb.row(i));
        axpy(x, embed_grads[f].c, grad.mc.row(i));
    }
}

}  // namespace

void fm_backward(const FmParams& p, const SparseInstance& inst, double upstream, FmParams& grad) {
    grad.w0 += upstream;
    std::vector<double> acc(p.d, 0.0);
    for (std::size_t f = 0; f < inst.indices.size(); ++f) {
        const std::uint32_t i = inst.indices[f];
        if (i >= p.n) throw std::out_of_range("fm_backward: feature index out of range");
        const double x = inst.values[f];
        grad.w[i] += upstream * x;
        axpy(x, p.v.row(i), acc);
    }
    // d/dV_i of (|S|^2 - sum_j |x_j V_j|^2)/2 = x_i S - x_i^2 V_i
    for (std::size_t f = 0; f < inst.indices.size(); ++f) {
        const std::uint32_t i = inst.indices[f];
        const double x = inst.values[f];
        auto row = grad.v.row(i);
        const auto vrow = p.v.row(i);
        for (std::size_t k = 0; k < p.d; ++k)
            row[k] += upstream * (x * acc[k] - x * x * vrow[k]);
    }
}

void qfm_backward(const QfmParams& p, const SparseInstance& inst, const VariantConfig& variant,
                  double upstream, QfmParams& grad) {
    const auto embeds = embed(p, inst);
    const double u4 = upstream / 4.0;  // core-average mapping spreads upstream evenly
    const Quaternion g{u4, u4, u4, u4};
    const auto embed_grads =
        pair_sum_backward(embeds, g, variant.interaction, variant.direction, p.d);
    embedding_backward(inst, embed_grads, upstream, grad);
}

void qnfm_backprop(const QnfmParams& p, const SparseInstance& inst, const VariantConfig& variant,
                   const QnfmTrace& trace, double upstream, QnfmParams& grad) {
    const std::size_t d = p.d();
    const std::size_t depth = p.layers.size();
    if (trace.pre.size() != depth || grad.layers.size() != depth)
        throw std::invalid_argument("qnfm_backprop: trace/gradient shape mismatch");

    const QuaternionVector& h_last = depth == 0 ? trace.pooled : trace.hidden.back();

    const double u4 = upstream / 4.0;
    const Quaternion g{u4, u4, u4, u4};

    // yhat = ... + map_to_real(p (x) h_last)
    add_adj_left(g, h_last, Interaction::hamilton, grad.p);
    QuaternionVector g_h(d);
    add_adj_right(g, p.p, Interaction::hamilton, g_h);

    for (std::size_t l = depth; l-- > 0;) {
        const QuaternionVector& input = l == 0 ? trace.pooled : trace.hidden[l - 1];
        const QuaternionVector& pre = trace.pre[l];

        if (!trace.keep[l].empty()) {
            for (std::size_t k = 0; k < d; ++k) {
                const double s = trace.keep[l][k];
                g_h.r[k] *= s;
                g_h.a[k] *= s;
                g_h.b[k] *= s;
                g_h.c[k] *= s;
            }
        }

        // split ReLU gate; subgradient at 0 is 0
        QuaternionVector g_z(d);
        for (std::size_t k = 0; k < d; ++k) {
            g_z.r[k] = pre.r[k] > 0.0 ? g_h.r[k] : 0.0;
            g_z.a[k] = pre.a[k] > 0.0 ? g_h.a[k] : 0.0;
            g_z.b[k] = pre.b[k] > 0.0 ? g_h.b[k] : 0.0;
            g_z.c[k] = pre.c[k] > 0.0 ? g_h.c[k] : 0.0;
        }

        add_in_place(grad.layers[l].bias, g_z);

        QuaternionVector g_input(d);
        if (variant.residual) g_input = g_h;  // identity branch
        qmat_vec_backward(p.layers[l].w, input, g_z, grad.layers[l].w, g_input);
        g_h = std::move(g_input);
    }

    const auto embed_grads =
        pair_sum_backward(trace.embeds, g_h, variant.pooling, variant.direction, d);
    embedding_backward(inst, embed_grads, upstream, grad.emb);
}

void qnfm_backward(const QnfmParams& p, const SparseInstance& inst, const VariantConfig& variant,
                   double upstream, Mode mode, double rho, Rng rng, QnfmParams& grad) {
    QnfmTrace trace;
    qnfm_forward_traced(p, inst, variant, mode, rho, &rng, trace);
    qnfm_backprop(p, inst, variant, trace, upstream, grad);
}

}  // namespace quatfm
