#include "quatfm/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace quatfm {

std::string to_string(ModelKind k) {
    switch (k) {
        case ModelKind::fm: return "fm";
        case ModelKind::qfm: return "qfm";
        case ModelKind::qnfm: return "qnfm";
    }
    throw std::invalid_argument("unknown model kind");
}

ModelKind model_kind_from_string(const std::string& s) {
    if (s == "fm") return ModelKind::fm;
    if (s == "qfm") return ModelKind::qfm;
    if (s == "qnfm") return ModelKind::qnfm;
    throw std::invalid_argument("unknown model kind: " + s);
}

namespace {

double logit(double p) {
    const double q = std::min(std::max(p, 1e-6), 1.0 - 1e-6);
    return std::log(q / (1.0 - q));
}

void fill_gaussian(std::span<double> out, double sigma, Rng& rng) {
    for (double& x : out) x = sigma * rng.normal();
}

void check_index_range(const SparseInstance& inst, std::size_t n) {
    for (const std::uint32_t i : inst.indices) {
        if (i >= n)
            throw std::out_of_range("feature index " + std::to_string(i) +
                                    " out of range for n=" + std::to_string(n));
    }
}

}  // namespace

FmParams init_fm(std::size_t n, std::size_t d_fm, std::uint64_t seed, double pos_rate) {
    if (n == 0 || d_fm == 0) throw std::invalid_argument("init_fm: n and d must be >= 1");
    FmParams p;
    p.n = n;
    p.d = d_fm;
    p.w0 = logit(pos_rate);
    p.w.assign(n, 0.0);
    p.v = RealMatrix(n, d_fm);
    Rng rng(Rng::mix(seed, 0xf100u));
    fill_gaussian(p.v.data, 1.0 / std::sqrt(static_cast<double>(d_fm)), rng);
    return p;
}

QfmParams init_qfm(std::size_t n, std::size_t d, std::uint64_t seed, double pos_rate) {
    if (n == 0 || d == 0) throw std::invalid_argument("init_qfm: n and d must be >= 1");
    QfmParams p;
    p.n = n;
    p.d = d;
    p.w0 = logit(pos_rate);
    p.w.assign(n, 0.0);
    const double sigma = 1.0 / std::sqrt(4.0 * static_cast<double>(d));
    Rng rng(Rng::mix(seed, 0x9f00u));
    for (RealMatrix* m : {&p.mr, &p.ma, &p.mb, &p.mc}) {
        *m = RealMatrix(n, d);
        fill_gaussian(m->data, sigma, rng);
    }
    return p;
}

QnfmParams init_qnfm(std::size_t n, std::size_t d, std::size_t l, std::uint64_t seed,
                     double pos_rate) {
    if (l == 0) throw std::invalid_argument("init_qnfm: depth l must be >= 1");
    QnfmParams p;
    p.emb = init_qfm(n, d, seed, pos_rate);
    const double sigma = 1.0 / std::sqrt(4.0 * static_cast<double>(d));
    Rng rng(Rng::mix(seed, 0x9ffeu));
    p.layers.resize(l);
    for (auto& layer : p.layers) {
        layer.w = QuaternionMatrix(d, d);
        for (RealMatrix* m : {&layer.w.rw, &layer.w.aw, &layer.w.bw, &layer.w.cw})
            fill_gaussian(m->data, sigma, rng);
        layer.bias = QuaternionVector(d);
    }
    p.p = QuaternionVector(d);
    fill_gaussian(p.p.r, sigma, rng);
    fill_gaussian(p.p.a, sigma, rng);
    fill_gaussian(p.p.b, sigma, rng);
    fill_gaussian(p.p.c, sigma, rng);
    return p;
}

FmParams zeros_like(const FmParams& p) {
    FmParams z;
    z.n = p.n;
    z.d = p.d;
    z.w.assign(p.w.size(), 0.0);
    z.v = RealMatrix(p.v.rows, p.v.cols);
    return z;
}

QfmParams zeros_like(const QfmParams& p) {
    QfmParams z;
    z.n = p.n;
    z.d = p.d;
    z.w.assign(p.w.size(), 0.0);
    z.mr = RealMatrix(p.mr.rows, p.mr.cols);
    z.ma = RealMatrix(p.ma.rows, p.ma.cols);
    z.mb = RealMatrix(p.mb.rows, p.mb.cols);
    z.mc = RealMatrix(p.mc.rows, p.mc.cols);
    return z;
}

QnfmParams zeros_like(const QnfmParams& p) {
    QnfmParams z;
    z.emb = zeros_like(p.emb);
    z.layers.resize(p.layers.size());
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        z.layers[l].w = QuaternionMatrix(p.layers[l].w.rows(), p.layers[l].w.cols());
        z.layers[l].bias = QuaternionVector(p.layers[l].bias.dim());
    }
    z.p = QuaternionVector(p.p.dim());
    return z;
}

std::size_t param_count(ModelKind kind, std::size_t n, std::size_t d, std::size_t l) {
    if (n == 0 || d == 0) throw std::invalid_argument("param_count: n and d must be >= 1");
    switch (kind) {
        case ModelKind::fm:
            return 1 + n + n * d;
        case ModelKind::qfm:
            return 1 + n + 4 * n * d;
        case ModelKind::qnfm:
            if (l == 0) throw std::invalid_argument("param_count: qnfm depth must be >= 1");
            return 1 + n + 4 * n * d + l * (4 * d * d + 4 * d) + 4 * d;
    }
    throw std::invalid_argument("param_count: unknown model kind");
}

double linear_term(double w0, std::span<const double> w, const SparseInstance& inst) {
    double s = w0;
    for (std::size_t f = 0; f < inst.indices.size(); ++f) {
        const std::uint32_t i = inst.indices[f];
        if (i >= w.size())
            throw std::out_of_range("feature index " + std::to_string(i) + " out of range");
        s += w[i] * inst.values[f];
    }
    return s;
}

std::vector<QuaternionVector> embed(const QfmParams& p, const SparseInstance& inst) {
    check_index_range(inst, p.n);
    std::vector<QuaternionVector> out;
    out.reserve(inst.indices.size());
    for (std::size_t f = 0; f < inst.indices.size(); ++f) {
        const std::uint32_t i = inst.indices[f];
        const double x = inst.values[f];
        QuaternionVector qv(p.d);
        const auto rr = p.mr.row(i), ra = p.ma.row(i), rb = p.mb.row(i), rc = p.mc.row(i);
        for (std::size_t k = 0; k < p.d; ++k) {
            qv.r[k] = x * rr[k];
            qv.a[k] = x * ra[k];
            qv.b[k] = x * rb[k];
            qv.c[k] = x * rc[k];
        }
        out.push_back(std::move(qv));
    }
    return out;
}

double fm_forward(const FmParams& p, const SparseInstance& inst) {
    check_index_range(inst, p.n);
    double s = linear_term(p.w0, p.w, inst);
    // sum_{i<j} (V_i.V_j) x_i x_j = (|S|^2 - sum_i |x_i V_i|^2) / 2
    std::vector<double> acc(p.d, 0.0);
    double sq = 0.0;
    for (std::size_t f = 0; f < inst.indices.size(); ++f) {
        const auto row = p.v.row(inst.indices[f]);
        const double x = inst.values[f];
        for (std::size_t k = 0; k < p.d; ++k) {
            const double z = x * row[k];
            acc[k] += z;
            sq += z * z;
        }
    }
    double s2 = 0.0;
    for (const double z : acc) s2 += z * z;
    return s + 0.5 * (s2 - sq);
}

Quaternion channel_dot(const QuaternionVector& u, const QuaternionVector& v) {
    check_same_dim(u, v, "channel_dot");
    return {dot(u.r, v.r), dot(u.a, v.a), dot(u.b, v.b), dot(u.c, v.c)};
}

QuaternionVector channel_elementwise(const QuaternionVector& u, const QuaternionVector& v) {
    check_same_dim(u, v, "channel_elementwise");
    QuaternionVector out(u.dim());
    for (std::size_t k = 0; k < u.dim(); ++k) {
        out.r[k] = u.r[k] * v.r[k];
        out.a[k] = u.a[k] * v.a[k];
        out.b[k] = u.b[k] * v.b[k];
        out.c[k] = u.c[k] * v.c[k];
    }
    return out;
}

namespace {

Quaternion pair_scalar(const QuaternionVector& u, const QuaternionVector& v, Interaction kind) {
    return kind == Interaction::hamilton ? inner_hamilton_product(u, v) : channel_dot(u, v);
}

QuaternionVector pair_vector(const QuaternionVector& u, const QuaternionVector& v,
                             PoolingKind kind) {
    return kind == PoolingKind::hamilton ? elementwise_hamilton_product(u, v)
                                         : channel_elementwise(u, v);
}

void add_in_place(Quaternion& q, const Quaternion& other) {
    q.r += other.r;
    q.a += other.a;
    q.b += other.b;
    q.c += other.c;
}

}  // namespace

Quaternion qfm_interaction(std::span<const QuaternionVector> embeds, Interaction kind,
                           Direction dir) {
    Quaternion total{};
    for (std::size_t i = 0; i < embeds.size(); ++i) {
        for (std::size_t j = i + 1; j < embeds.size(); ++j) {
            add_in_place(total, pair_scalar(embeds[i], embeds[j], kind));
            if (dir == Direction::two_way)
                add_in_place(total, pair_scalar(embeds[j], embeds[i], kind));
        }
    }
    return total;
}

Quaternion qfm_interaction_fast(std::span<const QuaternionVector> embeds) {
    return interaction_sum(embeds, Interaction::hamilton, Direction::two_way);
}

Quaternion interaction_sum(std::span<const QuaternionVector> embeds, Interaction kind,
                           Direction dir) {
    if (embeds.size() < 2) return {};
    const std::size_t d = embeds[0].dim();
    if (dir == Direction::two_way) {
        QuaternionVector s(d);
        for (const auto& e : embeds) ::quatfm::add_in_place(s, e);
        Quaternion total = pair_scalar(s, s, kind);
        for (const auto& e : embeds) {
            const Quaternion diag = pair_scalar(e, e, kind);
            total = total - diag;
        }
        return total;
    }
    // one_way: sum_{i<j} P(v_i, v_j) = sum_j P(prefix_{j-1}, v_j)
    QuaternionVector prefix(d);
    Quaternion total{};
    for (std::size_t j = 0; j < embeds.size(); ++j) {
        if (j > 0) add_in_place(total, pair_scalar(prefix, embeds[j], kind));
        ::quatfm::add_in_place(prefix, embeds[j]);
    }
    return total;
}

double qfm_forward(const QfmParams& p, const SparseInstance& inst, const VariantConfig& variant) {
    const auto embeds = embed(p, inst);
    const Quaternion h = interaction_sum(embeds, variant.interaction, variant.direction);
    return linear_term(p.w0, p.w, inst) + map_to_real(h);
}

QuaternionVector qnfm_pooling(std::span<const QuaternionVector> embeds, std::size_t d,
                              PoolingKind kind, Direction dir) {
    QuaternionVector total(d);
    for (std::size_t i = 0; i < embeds.size(); ++i) {
        for (std::size_t j = i + 1; j < embeds.size(); ++j) {
            ::quatfm::add_in_place(total, pair_vector(embeds[i], embeds[j], kind));
            if (dir == Direction::two_way)
                ::quatfm::add_in_place(total, pair_vector(embeds[j], embeds[i], kind));
        }
    }
    return total;
}

QuaternionVector qnfm_pooling_fast(std::span<const QuaternionVector> embeds, std::size_t d) {
    return pooling_sum(embeds, d, PoolingKind::hamilton, Direction::two_way);
}

QuaternionVector pooling_sum(std::span<const QuaternionVector> embeds, std::size_t d,
                             PoolingKind kind, Direction dir) {
    if (embeds.size() < 2) return QuaternionVector(d);
    if (dir == Direction::two_way) {
        QuaternionVector s(d);
        for (const auto& e : embeds) ::quatfm::add_in_place(s, e);
        QuaternionVector total = pair_vector(s, s, kind);
        for (const auto& e : embeds) {
            const QuaternionVector diag = pair_vector(e, e, kind);
            for (std::size_t k = 0; k < d; ++k) {
                total.r[k] -= diag.r[k];
                total.a[k] -= diag.a[k];
                total.b[k] -= diag.b[k];
                total.c[k] -= diag.c[k];
            }
        }
        return total;
    }
    QuaternionVector prefix(d);
    QuaternionVector total(d);
    for (std::size_t j = 0; j < embeds.size(); ++j) {
        if (j > 0) ::quatfm::add_in_place(total, pair_vector(prefix, embeds[j], kind));
        ::quatfm::add_in_place(prefix, embeds[j]);
    }
    return total;
}

namespace {

// Single FFN implementation behind qnfm_ffn and the traced forward.
QuaternionVector ffn_run(const QnfmParams& p, const QuaternionVector& v,
                         const VariantConfig& variant, Mode mode, double rho, Rng* rng,
                         QnfmTrace* trace) {
    if (v.dim() != p.d())
        throw std::invalid_argument("qnfm_ffn: input dimension does not match model d");
    const bool use_dropout = mode == Mode::train && rho > 0.0;
    if (use_dropout && rng == nullptr)
        throw std::invalid_argument("qnfm_ffn: train-mode dropout needs an rng mask source");
    if (rho < 0.0 || rho >= 1.0)
        throw std::invalid_argument("qnfm_ffn: rho must lie in [0,1)");

    QuaternionVector h = v;
    for (const auto& layer : p.layers) {
        QuaternionVector z = qmat_vec(layer.w, h);
        ::quatfm::add_in_place(z, layer.bias);
        QuaternionVector s = split_relu(z);
        QuaternionVector out = variant.residual ? h + s : std::move(s);
        std::vector<double> keep;
        if (use_dropout) {
            keep.resize(out.dim());
            const double inv = 1.0 / (1.0 - rho);
            for (std::size_t k = 0; k < out.dim(); ++k) {
                keep[k] = rng->uniform() >= rho ? inv : 0.0;
                out.r[k] *= keep[k];
                out.a[k] *= keep[k];
                out.b[k] *= keep[k];
                out.c[k] *= keep[k];
            }
        }
        if (trace) {
            trace->pre.push_back(std::move(z));
            trace->keep.push_back(std::move(keep));
            trace->hidden.push_back(out);
        }
        h = std::move(out);
    }
    return h;
}

}  // namespace

QuaternionVector qnfm_ffn(const QnfmParams& p, const QuaternionVector& v,
                          const VariantConfig& variant, Mode mode, double rho, Rng* rng) {
    return ffn_run(p, v, variant, mode, rho, rng, nullptr);
}

double qnfm_forward_traced(const QnfmParams& p, const SparseInstance& inst,
                           const VariantConfig& variant, Mode mode, double rho, Rng* rng,
                           QnfmTrace& trace) {
    trace = QnfmTrace{};
    trace.embeds = embed(p.emb, inst);
    trace.pooled = pooling_sum(trace.embeds, p.d(), variant.pooling, variant.direction);
    const QuaternionVector h = ffn_run(p, trace.pooled, variant, mode, rho, rng, &trace);
    const Quaternion q = inner_hamilton_product(p.p, h);
    trace.yhat = linear_term(p.emb.w0, p.emb.w, inst) + map_to_real(q);
    return trace.yhat;
}

double qnfm_forward(const QnfmParams& p, const SparseInstance& inst,
                    const VariantConfig& variant, Mode mode, double rho, Rng* rng) {
    const auto embeds = embed(p.emb, inst);
    const QuaternionVector pooled = pooling_sum(embeds, p.d(), variant.pooling, variant.direction);
    const QuaternionVector h = ffn_run(p, pooled, variant, mode, rho, rng, nullptr);
    const Quaternion q = inner_hamilton_product(p.p, h);
    return linear_term(p.emb.w0, p.emb.w, inst) + map_to_real(q);
}

// ---------------------------------------------------------------------------
// Checkpoint I/O
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'Q', 'F', 'M', 'C', 'K', 'P', 'T', '1'};

void write_u64(std::ostream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint64_t read_u64(std::istream& in) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}

template <class P>
void write_body(std::ostream& out, ModelKind kind, const VariantConfig& variant, const P& p,
                std::uint64_t n, std::uint64_t d, std::uint64_t l) {
    out.write(kMagic, sizeof kMagic);
    const std::uint8_t flags[8] = {
        static_cast<std::uint8_t>(kind),
        static_cast<std::uint8_t>(variant.interaction),
        static_cast<std::uint8_t>(variant.direction),
        static_cast<std::uint8_t>(variant.pooling),
        static_cast<std::uint8_t>(variant.residual ? 1 : 0),
        0, 0, 0,
    };
    out.write(reinterpret_cast<const char*>(flags), sizeof flags);
    write_u64(out, n);
    write_u64(out, d);
    write_u64(out, l);
    visit_segments(p, [&](const std::string&, std::span<const double> s) {
        out.write(reinterpret_cast<const char*>(s.data()),
                  static_cast<std::streamsize>(s.size() * sizeof(double)));
    });
}

template <class P>
void read_body(std::istream& in, P& p) {
    visit_segments(p, [&](const std::string&, std::span<double> s) {
        in.read(reinterpret_cast<char*>(s.data()),
                static_cast<std::streamsize>(s.size() * sizeof(double)));
    });
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    return out;
}

}  // namespace

void save_checkpoint(const std::string& path, const VariantConfig& variant, const FmParams& p) {
    auto out = open_out(path);
    write_body(out, ModelKind::fm, variant, p, p.n, p.d, 0);
    if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

void save_checkpoint(const std::string& path, const VariantConfig& variant, const QfmParams& p) {
    auto out = open_out(path);
    write_body(out, ModelKind::qfm, variant, p, p.n, p.d, 0);
    if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

void save_checkpoint(const std::string& path, const VariantConfig& variant, const QnfmParams& p) {
    auto out = open_out(path);
    write_body(out, ModelKind::qnfm, variant, p, p.n(), p.d(), p.depth());
    if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);

    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0)
        throw std::runtime_error("not a checkpoint file: " + path);

    std::uint8_t flags[8];
    in.read(reinterpret_cast<char*>(flags), sizeof flags);
    Checkpoint ck;
    ck.kind = static_cast<ModelKind>(flags[0]);
    ck.variant.interaction = static_cast<Interaction>(flags[1]);
    ck.variant.direction = static_cast<Direction>(flags[2]);
    ck.variant.pooling = static_cast<PoolingKind>(flags[3]);
    ck.variant.residual = flags[4] != 0;

    const std::size_t n = read_u64(in);
    const std::size_t d = read_u64(in);
    const std::size_t l = read_u64(in);

    switch (ck.kind) {
        case ModelKind::fm: {
            FmParams p = zeros_like(init_fm(n, d, 0));
            read_body(in, p);
            ck.params = std::move(p);
            break;
        }
        case ModelKind::qfm: {
            QfmParams p = zeros_like(init_qfm(n, d, 0));
            read_body(in, p);
            ck.params = std::move(p);
            break;
        }
        case ModelKind::qnfm: {
            QnfmParams p = zeros_like(init_qnfm(n, d, l, 0));
            read_body(in, p);
            ck.params = std::move(p);
            break;
        }
        default:
            throw std::runtime_error("checkpoint has unknown model kind");
    }
    if (!in) throw std::runtime_error("checkpoint truncated: " + path);
    return ck;
}

}  // namespace quatfm
