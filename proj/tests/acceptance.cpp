// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Criteria pin the algebra, the fast-path equivalences, gradient
// correctness, parameter accounting, the fm reduction, a synthetic
// end-to-end training run, early stopping, metric oracles and the linear
// time scaling of one-epoch training.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "quatfm/gradients.hpp"
#include "quatfm/metrics.hpp"
#include "quatfm/model.hpp"
#include "quatfm/training.hpp"

using namespace quatfm;

namespace {

int failures = 0;

void report(int id, const char* name, bool ok, const std::string& detail = "") {
    std::printf("[%s] criterion %d: %s%s%s\n", ok ? "PASS" : "FAIL", id, name,
                detail.empty() ? "" : " -- ", detail.c_str());
    if (!ok) ++failures;
}

bool rel_close(double got, double want, double rel, double abs_floor = 0.0) {
    return std::abs(got - want) <= std::max(abs_floor, rel * std::abs(want));
}

bool quat_rel_close(const Quaternion& got, const Quaternion& want, double rel, double abs_floor) {
    return rel_close(got.r, want.r, rel, abs_floor) && rel_close(got.a, want.a, rel, abs_floor) &&
           rel_close(got.b, want.b, rel, abs_floor) && rel_close(got.c, want.c, rel, abs_floor);
}

Quaternion random_quat(Rng& rng) { return {rng.normal(), rng.normal(), rng.normal(), rng.normal()}; }

QuaternionVector random_qvec(Rng& rng, std::size_t d) {
    QuaternionVector v(d);
    for (std::size_t k = 0; k < d; ++k) {
        v.r[k] = rng.normal();
        v.a[k] = rng.normal();
        v.b[k] = rng.normal();
        v.c[k] = rng.normal();
    }
    return v;
}

SparseInstance random_instance(Rng& rng, std::size_t n, std::size_t nonzeros, bool unit_values) {
    SparseInstance inst;
    std::vector<std::uint32_t> pool(n);
    for (std::size_t i = 0; i < n; ++i) pool[i] = static_cast<std::uint32_t>(i);
    shuffle(pool, rng);
    pool.resize(std::min(nonzeros, n));
    std::sort(pool.begin(), pool.end());
    inst.indices = pool;
    for (std::size_t i = 0; i < pool.size(); ++i)
        inst.values.push_back(unit_values ? 1.0 : 0.5 + rng.uniform());
    inst.label = rng.uniform() < 0.5 ? 0 : 1;
    return inst;
}

template <class P>
void randomize(P& params, Rng& rng, double scale = 0.4) {
    visit_segments(params, [&](const std::string&, std::span<double> s) {
        for (double& x : s) x = scale * rng.normal();
    });
}

// ---------------------------------------------------------------------------
// 1. quaternion algebra
// ---------------------------------------------------------------------------
bool criterion1() {
    const Quaternion one{1, 0, 0, 0}, i{0, 1, 0, 0}, j{0, 0, 1, 0}, k{0, 0, 0, 1};
    const Quaternion minus_one = -1.0 * one;
    auto eq = [](const Quaternion& x, const Quaternion& y) {
        return x.r == y.r && x.a == y.a && x.b == y.b && x.c == y.c;
    };
    bool ok = eq(i * i, minus_one) && eq(j * j, minus_one) && eq(k * k, minus_one) &&
              eq(i * j * k, minus_one) && eq(i * j, k) && eq(j * i, -1.0 * k) && eq(j * k, i) &&
              eq(k * j, -1.0 * i) && eq(k * i, j) && eq(i * k, -1.0 * j);

    Rng rng(1001);
    for (int t = 0; t < 1000 && ok; ++t) {
        const Quaternion q1 = random_quat(rng), q2 = random_quat(rng), q3 = random_quat(rng);
        ok = quat_rel_close((q1 * q2) * q3, q1 * (q2 * q3), 1e-12, 1e-12) &&
             rel_close(norm(q1 * q2), norm(q1) * norm(q2), 1e-12);
    }
    return ok;
}

// ---------------------------------------------------------------------------
// 2. fast bilinear paths equal the brute-force pair sums
// ---------------------------------------------------------------------------
bool criterion2() {
    Rng rng(1002);
    for (const std::size_t d : {1u, 2u, 4u, 8u}) {
        for (std::size_t m = 2; m <= 25; ++m) {
            for (int seed = 0; seed < 50; ++seed) {
                std::vector<QuaternionVector> embeds;
                embeds.reserve(m);
                for (std::size_t e = 0; e < m; ++e) embeds.push_back(random_qvec(rng, d));

                const Quaternion brute =
                    qfm_interaction(embeds, Interaction::hamilton, Direction::two_way);
                if (!quat_rel_close(qfm_interaction_fast(embeds), brute, 1e-10, 1e-10))
                    return false;

                const QuaternionVector pool_brute =
                    qnfm_pooling(embeds, d, PoolingKind::hamilton, Direction::two_way);
                const QuaternionVector pool_fast = qnfm_pooling_fast(embeds, d);
                for (std::size_t c = 0; c < d; ++c) {
                    if (!rel_close(pool_fast.r[c], pool_brute.r[c], 1e-10, 1e-10) ||
                        !rel_close(pool_fast.a[c], pool_brute.a[c], 1e-10, 1e-10) ||
                        !rel_close(pool_fast.b[c], pool_brute.b[c], 1e-10, 1e-10) ||
                        !rel_close(pool_fast.c[c], pool_brute.c[c], 1e-10, 1e-10))
                        return false;
                }
            }
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// 3. analytic gradients vs central finite differences
// ---------------------------------------------------------------------------
bool grad_entry_ok(double analytic, double fd) {
    const double diff = std::abs(analytic - fd);
    if (diff < 1e-7) return true;
    return diff / std::max(std::abs(analytic), std::abs(fd)) < 1e-4;
}

template <class P, class Fwd>
bool sweep_ok(P& params, const P& analytic, Fwd&& eval) {
    const std::size_t total = count_scalars(params);
    for (std::size_t coord = 0; coord < total; ++coord) {
        const double fd = finite_difference(params, coord, 1e-5, eval);
        if (!grad_entry_ok(scalar_at(analytic, coord), fd)) return false;
    }
    return true;
}

bool near_relu_kink(const QnfmTrace& trace) {
    for (const auto& pre : trace.pre)
        for (std::size_t k = 0; k < pre.dim(); ++k)
            if (std::abs(pre.r[k]) < 1e-3 || std::abs(pre.a[k]) < 1e-3 ||
                std::abs(pre.b[k]) < 1e-3 || std::abs(pre.c[k]) < 1e-3)
                return true;
    return false;
}

bool criterion3() {
    Rng rng(1003);
    const int configs_per_combo = 20;

    for (int t = 0; t < configs_per_combo; ++t) {
        const std::size_t n = 5 + rng.below(12);
        FmParams p = init_fm(n, 1 + rng.below(8), rng.next_u64());
        randomize(p, rng);
        const SparseInstance inst = random_instance(rng, n, 2 + rng.below(7), false);
        FmParams grad = zeros_like(p);
        fm_backward(p, inst, 1.0, grad);
        if (!sweep_ok(p, grad, [&](const FmParams& q) { return fm_forward(q, inst); }))
            return false;
    }

    for (const auto kind : {Interaction::hamilton, Interaction::dot_product}) {
        for (const auto dir : {Direction::two_way, Direction::one_way}) {
            VariantConfig variant;
            variant.interaction = kind;
            variant.direction = dir;
            for (int t = 0; t < configs_per_combo; ++t) {
                const std::size_t n = 5 + rng.below(12);
                QfmParams p = init_qfm(n, 1 + rng.below(8), rng.next_u64());
                randomize(p, rng);
                const SparseInstance inst = random_instance(rng, n, 2 + rng.below(7), false);
                QfmParams grad = zeros_like(p);
                qfm_backward(p, inst, variant, 1.0, grad);
                if (!sweep_ok(p, grad,
                              [&](const QfmParams& q) { return qfm_forward(q, inst, variant); }))
                    return false;
            }
        }
    }

    for (const auto pooling : {PoolingKind::hamilton, PoolingKind::elementwise_real}) {
        for (const auto dir : {Direction::two_way, Direction::one_way}) {
            for (const bool residual : {true, false}) {
                VariantConfig variant;
                variant.pooling = pooling;
                variant.direction = dir;
                variant.residual = residual;
                for (int t = 0; t < configs_per_combo; ++t) {
                    const std::size_t n = 5 + rng.below(12);
                    const std::size_t d = 1 + rng.below(8);
                    const std::size_t l = 1 + rng.below(3);
                    QnfmParams p;
                    SparseInstance inst;
                    bool clear = false;
                    for (int attempt = 0; attempt < 500 && !clear; ++attempt) {
                        p = init_qnfm(n, d, l, rng.next_u64());
                        randomize(p, rng);
                        inst = random_instance(rng, n, 2 + rng.below(7), false);
                        QnfmTrace trace;
                        qnfm_forward_traced(p, inst, variant, Mode::eval, 0.0, nullptr, trace);
                        clear = !near_relu_kink(trace);
                    }
                    if (!clear) return false;
                    QnfmParams grad = zeros_like(p);
                    qnfm_backward(p, inst, variant, 1.0, Mode::eval, 0.0, Rng(0), grad);
                    if (!sweep_ok(p, grad, [&](const QnfmParams& q) {
                            return qnfm_forward(q, inst, variant);
                        }))
                        return false;
                }
            }
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// 4. parameter accounting
// ---------------------------------------------------------------------------
QfmParams qfm_shape(std::size_t n, std::size_t d) {
    QfmParams p;
    p.n = n;
    p.d = d;
    p.w.assign(n, 0.0);
    p.mr = RealMatrix(n, d);
    p.ma = RealMatrix(n, d);
    p.mb = RealMatrix(n, d);
    p.mc = RealMatrix(n, d);
    return p;
}

bool criterion4() {
    for (const std::size_t n : {std::size_t{10}, std::size_t{1000}, std::size_t{100000}}) {
        for (const std::size_t d : {4u, 16u, 64u}) {
            // structural walks equal the closed forms, exactly
            FmParams fm;
            fm.n = n;
            fm.d = 4 * d;
            fm.w.assign(n, 0.0);
            fm.v = RealMatrix(n, 4 * d);
            if (count_scalars(fm) != param_count(ModelKind::fm, n, 4 * d)) return false;

            const QfmParams qfm = qfm_shape(n, d);
            if (count_scalars(qfm) != param_count(ModelKind::qfm, n, d)) return false;

            // matched capacity: qfm total equals fm total at d_fm = 4d
            if (param_count(ModelKind::qfm, n, d) != param_count(ModelKind::fm, n, 4 * d))
                return false;

            for (std::size_t l = 1; l <= 5; ++l) {
                QnfmParams qnfm;
                qnfm.emb = qfm_shape(n, d);
                qnfm.layers.resize(l);
                for (auto& layer : qnfm.layers) {
                    layer.w = QuaternionMatrix(d, d);
                    layer.bias = QuaternionVector(d);
                }
                qnfm.p = QuaternionVector(d);
                if (count_scalars(qnfm) != param_count(ModelKind::qnfm, n, d, l)) return false;

                const std::size_t extra =
                    param_count(ModelKind::qnfm, n, d, l) - param_count(ModelKind::qfm, n, d);
                if (extra != l * (4 * d * d + 4 * d) + 4 * d) return false;
            }

            // one quaternion layer holds exactly a quarter of the weights of
            // the equivalent real layer on 4d neurons
            if (4 * (4 * d * d) != 16 * d * d) return false;
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// 5. fm reduction of qfm with zero imaginary cores
// ---------------------------------------------------------------------------
bool criterion5() {
    Rng rng(1005);
    const std::size_t n = 40, d = 6;
    FmParams fm = init_fm(n, d, 55);
    randomize(fm, rng);
    QfmParams qfm = qfm_shape(n, d);
    qfm.w0 = fm.w0;
    qfm.w = fm.w;
    qfm.mr = fm.v;

    const VariantConfig def;
    for (int t = 0; t < 100; ++t) {
        const SparseInstance inst = random_instance(rng, n, 5, false);
        const double linear = linear_term(fm.w0, fm.w, inst);
        const double want = linear + 0.5 * (fm_forward(fm, inst) - linear);
        if (!rel_close(qfm_forward(qfm, inst, def), want, 1e-12, 1e-12)) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// 6. synthetic end-to-end training
// ---------------------------------------------------------------------------
bool criterion6(std::string& detail, SyntheticData& syn_out, std::array<Dataset, 3>& parts_out) {
    syn_out = generate_synthetic(10, 100, 62500, 20240817, 8);
    parts_out = split_dataset(syn_out.data, 0.8, 0.1, 0.1, 99);
    const Dataset& train_ds = parts_out[0];
    const Dataset& val_ds = parts_out[1];
    const Dataset& test_ds = parts_out[2];
    if (train_ds.size() != 50000 || val_ds.size() != 6250 || test_ds.size() != 6250) {
        detail = "bad split sizes";
        return false;
    }

    TrainConfig qfm_cfg;
    qfm_cfg.kind = ModelKind::qfm;
    qfm_cfg.d = 8;
    qfm_cfg.lr = 1e-3;
    qfm_cfg.batch_size = 512;
    qfm_cfg.max_epochs = 30;
    qfm_cfg.patience = 3;
    qfm_cfg.seed = 4242;

    const double untrained_auc =
        evaluate(init_qfm(train_ds.n, qfm_cfg.d, qfm_cfg.seed, 0.5), test_ds, qfm_cfg.variant)
            .auc;

    const TrainedModel qfm_model = train(qfm_cfg, train_ds, val_ds);
    const double qfm_auc =
        evaluate(std::get<QfmParams>(qfm_model.params), test_ds, qfm_cfg.variant).auc;

    TrainConfig qnfm_cfg = qfm_cfg;
    qnfm_cfg.kind = ModelKind::qnfm;
    qnfm_cfg.l = 1;
    qnfm_cfg.rho = 0.1;
    const TrainedModel qnfm_model = train(qnfm_cfg, train_ds, val_ds);
    const double qnfm_auc =
        evaluate(std::get<QnfmParams>(qnfm_model.params), test_ds, qnfm_cfg.variant).auc;

    char buf[160];
    std::snprintf(buf, sizeof buf, "qfm_auc=%.4f qnfm_auc=%.4f untrained_auc=%.4f", qfm_auc,
                  qnfm_auc, untrained_auc);
    detail = buf;

    return qfm_auc >= 0.70 && qnfm_auc >= 0.70 && qnfm_auc >= qfm_auc - 0.02 &&
           qfm_auc >= untrained_auc + 0.15 && qnfm_auc >= untrained_auc + 0.15;
}

// ---------------------------------------------------------------------------
// 7. early stopping
// ---------------------------------------------------------------------------
bool criterion7() {
    EarlyStopMonitor monitor{3};
    const double losses[] = {0.6, 0.5, 0.52, 0.54, 0.56};
    std::size_t stopped_at = 0;
    for (std::size_t e = 1; e <= 5; ++e) {
        if (monitor.observe(e, losses[e - 1])) {
            stopped_at = e;
            break;
        }
    }
    if (stopped_at != 5 || monitor.best_epoch != 2) return false;

    // never fires early on a non-increasing sequence
    EarlyStopMonitor flat{3};
    for (std::size_t e = 1; e <= 20; ++e)
        if (flat.observe(e, 0.5)) return false;

    // the training loop returns the best-validation snapshot
    const SyntheticData syn = generate_synthetic(5, 8, 800, 31);
    const auto parts = split_dataset(syn.data, 0.8, 0.1, 0.1, 3);
    TrainConfig cfg;
    cfg.kind = ModelKind::qfm;
    cfg.d = 4;
    cfg.lr = 5e-2;  // deliberately high so validation loss oscillates
    cfg.batch_size = 64;
    cfg.max_epochs = 40;
    cfg.patience = 3;
    cfg.seed = 17;
    const TrainedModel m = train(cfg, parts[0], parts[1]);
    std::size_t want_best = 0;
    double best_loss = std::numeric_limits<double>::infinity();
    for (const auto& e : m.history) {
        if (e.val_loss < best_loss) {
            best_loss = e.val_loss;
            want_best = e.epoch;
        }
    }
    return m.best_epoch == want_best;
}

// ---------------------------------------------------------------------------
// 8. metric oracles
// ---------------------------------------------------------------------------
double auc_bruteforce(const std::vector<double>& scores, const std::vector<int>& labels) {
    double wins = 0.0;
    std::size_t pos = 0, neg = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!labels[i]) continue;
        ++pos;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j]) continue;
            if (scores[i] > scores[j]) wins += 1.0;
            else if (scores[i] == scores[j]) wins += 0.5;
        }
    }
    for (const int y : labels) neg += y ? 0 : 1;
    return wins / (static_cast<double>(pos) * static_cast<double>(neg));
}

bool criterion8() {
    Rng rng(1008);
    for (int t = 0; t < 200; ++t) {
        const std::size_t count = 10 + rng.below(990);
        std::vector<double> scores(count);
        std::vector<int> labels(count);
        const bool quantized = t % 2 == 0;
        for (std::size_t i = 0; i < count; ++i) {
            scores[i] = quantized ? static_cast<double>(rng.below(10)) : rng.normal();
            labels[i] = rng.uniform() < 0.35 ? 1 : 0;
        }
        labels[0] = 1;
        labels[1] = 0;
        if (auc(scores, labels) != auc_bruteforce(scores, labels)) return false;
    }

    for (int t = 0; t < 100; ++t) {
        const double s = 10.0 * (rng.uniform() - 0.5);
        const int y = t % 2;
        const double h = 1e-6;
        const double fd = (instance_log_loss(s + h, y) - instance_log_loss(s - h, y)) / (2 * h);
        if (std::abs(fd - log_loss_grad(s, y)) > 1e-8) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// 9. linear scaling of one-epoch training time
// ---------------------------------------------------------------------------
bool criterion9(const Dataset& train_ds, std::string& detail) {
    Dataset val;
    val.n = train_ds.n;
    val.instances.assign(train_ds.instances.begin(), train_ds.instances.begin() + 500);

    TrainConfig cfg;
    cfg.kind = ModelKind::qfm;
    cfg.d = 8;
    cfg.lr = 1e-3;
    cfg.batch_size = 512;
    cfg.max_epochs = 1;
    cfg.seed = 5;

    const std::vector<double> fractions{0.2, 0.4, 0.6, 0.8, 1.0};
    std::vector<std::pair<double, double>> points;
    for (const double f : fractions) {
        Dataset part;
        part.n = train_ds.n;
        const auto count = static_cast<std::size_t>(f * static_cast<double>(train_ds.size()));
        part.instances.assign(train_ds.instances.begin(),
                              train_ds.instances.begin() + static_cast<std::ptrdiff_t>(count));
        double best = std::numeric_limits<double>::infinity();
        for (int r = 0; r < 3; ++r) {
            const TrainedModel m = train(cfg, part, val);
            best = std::min(best, m.history.at(0).seconds);
        }
        points.emplace_back(f, best);
    }

    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double m = static_cast<double>(points.size());
    for (const auto& [x, y] : points) {
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    const double intercept = (sy - slope * sx) / m;
    double ss_res = 0, ss_tot = 0;
    for (const auto& [x, y] : points) {
        ss_res += (y - (slope * x + intercept)) * (y - (slope * x + intercept));
        ss_tot += (y - sy / m) * (y - sy / m);
    }
    const double r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;

    char buf[64];
    std::snprintf(buf, sizeof buf, "r2=%.4f", r2);
    detail = buf;
    return r2 >= 0.9;
}

}  // namespace

int run_all() {
    report(1, "quaternion algebra (basis rules, associativity, norm)", criterion1());
    report(2, "fast interaction/pooling paths equal brute force", criterion2());
    report(3, "analytic gradients match finite differences", criterion3());
    report(4, "parameter accounting formulas", criterion4());
    report(5, "qfm reduces to halved-interaction fm", criterion5());

    std::string detail6;
    SyntheticData syn;
    std::array<Dataset, 3> parts;
    const bool ok6 = criterion6(detail6, syn, parts);
    report(6, "synthetic end-to-end training", ok6, detail6);

    report(7, "early stopping rule and best snapshot", criterion7());
    report(8, "metric oracles (auc rank vs pairwise, loss derivative)", criterion8());

    std::string detail9;
    const bool ok9 = criterion9(parts[0], detail9);
    report(9, "one-epoch training time scales linearly", ok9, detail9);

    if (failures > 0) {
        std::printf("%d criterion(s) failed\n", failures);
        return 1;
    }
    std::printf("all acceptance criteria passed\n");
    return 0;
}

int main() {
    try {
        return run_all();
    } catch (const std::exception& e) {
        std::printf("[FAIL] acceptance aborted: %s\n", e.what());
        return 1;
    }
}
