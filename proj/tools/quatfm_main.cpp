// quatfm: command-line driver for synthetic data generation, training,
// evaluation, parameter accounting, gradient checking and scaling runs.

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "quatfm/gradients.hpp"
#include "quatfm/metrics.hpp"
#include "quatfm/model.hpp"
#include "quatfm/training.hpp"

using namespace quatfm;

namespace {

std::size_t env_threads() {
    const char* v = std::getenv("QUATFM_THREADS");
    if (v == nullptr) return 1;
    const long n = std::strtol(v, nullptr, 10);
    return n >= 1 ? static_cast<std::size_t>(n) : 1;
}

struct VariantFlags {
    std::string interaction = "hamilton";
    std::string direction = "two-way";
    std::string pooling = "hamilton";
    std::string residual = "on";

    void add_to(CLI::App* cmd) {
        cmd->add_option("--variant-interaction", interaction, "Pair product for the interaction")
            ->check(CLI::IsMember({"hamilton", "dot"}));
        cmd->add_option("--variant-direction", direction, "Pair orientations to sum")
            ->check(CLI::IsMember({"two-way", "one-way"}));
        cmd->add_option("--variant-pooling", pooling, "Pair product for interaction pooling")
            ->check(CLI::IsMember({"hamilton", "elementwise"}));
        cmd->add_option("--variant-residual", residual, "Residual connections in the FFN")
            ->check(CLI::IsMember({"on", "off"}));
    }

    VariantConfig to_config() const {
        VariantConfig v;
        v.interaction = interaction == "dot" ? Interaction::dot_product : Interaction::hamilton;
        v.direction = direction == "one-way" ? Direction::one_way : Direction::two_way;
        v.pooling =
            pooling == "elementwise" ? PoolingKind::elementwise_real : PoolingKind::hamilton;
        v.residual = residual == "on";
        return v;
    }
};

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
    if (!out) throw std::runtime_error("write failed: " + path);
}

int cmd_gen_synthetic(std::size_t fields, std::size_t features_per_field, std::size_t instances,
                      std::uint64_t seed, std::size_t teacher_rank, const std::string& out) {
    const SyntheticData syn =
        generate_synthetic(fields, features_per_field, instances, seed, teacher_rank);
    const auto parts = split_dataset(syn.data, 0.8, 0.1, 0.1, seed);
    save_dataset(parts[0], out + ".train.txt");
    save_dataset(parts[1], out + ".val.txt");
    save_dataset(parts[2], out + ".test.txt");
    save_teacher(syn.teacher, syn.data.n, out + ".teacher.txt");
    std::cerr << "n=" << syn.data.n << " train=" << parts[0].size() << " val=" << parts[1].size()
              << " test=" << parts[2].size() << "\n";
    return 0;
}

int cmd_train(const TrainConfig& cfg, const std::string& train_path, const std::string& val_path,
              const std::string& test_path, const std::string& out,
              const std::string& history_path) {
    Dataset train_ds = load_dataset(train_path);
    Dataset val_ds = load_dataset(val_path);
    Dataset test_ds;
    if (!test_path.empty()) test_ds = load_dataset(test_path);

    const std::size_t n = std::max({train_ds.n, val_ds.n, test_ds.n});
    train_ds.n = val_ds.n = n;
    if (!test_path.empty()) test_ds.n = n;

    const TrainedModel m = train(cfg, train_ds, val_ds);

    std::visit([&](const auto& p) { save_checkpoint(out, cfg.variant, p); }, m.params);
    write_file(history_path.empty() ? out + ".history.csv" : history_path,
               history_csv(cfg, m.history));

    std::cerr << "epochs_run=" << m.history.size() << " best_epoch=" << m.best_epoch << "\n";
    std::visit(
        [&](const auto& p) {
            std::cout << "val " << evaluate(p, val_ds, cfg.variant).to_line() << "\n";
            if (!test_path.empty())
                std::cout << "test " << evaluate(p, test_ds, cfg.variant).to_line() << "\n";
        },
        m.params);
    return 0;
}

int cmd_evaluate(const std::string& checkpoint_path, const std::string& data_path) {
    const Checkpoint ck = load_checkpoint(checkpoint_path);
    const std::size_t model_n = std::visit(
        [](const auto& p) {
            if constexpr (std::is_same_v<std::decay_t<decltype(p)>, QnfmParams>)
                return p.n();
            else
                return p.n;
        },
        ck.params);
    const Dataset ds = load_dataset(data_path, model_n);
    std::visit(
        [&](const auto& p) { std::cout << evaluate(p, ds, ck.variant).to_line() << "\n"; },
        ck.params);
    return 0;
}

int cmd_param_count(const std::string& model, std::size_t n, std::size_t d, std::size_t l) {
    const ModelKind kind = model_kind_from_string(model);
    const std::size_t formula = param_count(kind, n, d, kind == ModelKind::qnfm ? l : 0);
    std::size_t walked = 0;
    switch (kind) {
        case ModelKind::fm: walked = count_scalars(init_fm(n, d, 0)); break;
        case ModelKind::qfm: walked = count_scalars(init_qfm(n, d, 0)); break;
        case ModelKind::qnfm: walked = count_scalars(init_qnfm(n, d, l, 0)); break;
    }
    const std::size_t fm_total = param_count(ModelKind::fm, n, kind == ModelKind::fm ? d : 4 * d);
    std::cout << "model=" << model << " n=" << n << " d=" << d;
    if (kind == ModelKind::qnfm) std::cout << " l=" << l;
    std::cout << " formula=" << formula << " structural=" << walked
              << " fm_equivalent_total=" << fm_total
              << " extra_vs_fm=" << (formula - fm_total) << "\n";
    if (walked != formula) {
        std::cerr << "parameter accounting mismatch: formula=" << formula
                  << " structural=" << walked << "\n";
        return 1;
    }
    return 0;
}

// Shared by `grad-check` and the negative control: sweeps random
// configurations, comparing every analytic partial against central
// differences, and reports the worst error per parameter group.
struct GradCheckReport {
    std::map<std::string, double> worst;
    bool ok = true;
};

bool grad_entry_ok(double analytic, double fd, double* err_out) {
    const double diff = std::abs(analytic - fd);
    if (diff < 1e-7) {
        *err_out = 0.0;
        return true;
    }
    const double rel = diff / std::max(std::abs(analytic), std::abs(fd));
    *err_out = rel;
    return rel < 1e-4;
}

template <class P, class Fwd>
void sweep_params(P& params, const P& analytic, Fwd&& eval, GradCheckReport& report) {
    std::size_t offset = 0;
    auto segs = named_segments(params);
    for (const auto& [name, span] : segs) {
        const std::string group = name.substr(0, name.find('.'));
        for (std::size_t k = 0; k < span.size(); ++k) {
            const double fd = finite_difference(params, offset + k, 1e-5, eval);
            double err = 0.0;
            if (!grad_entry_ok(scalar_at(analytic, offset + k), fd, &err)) report.ok = false;
            auto& worst = report.worst[group];
            worst = std::max(worst, err);
        }
        offset += span.size();
    }
}

bool near_relu_kink(const QnfmTrace& trace) {
    for (const auto& pre : trace.pre)
        for (std::size_t k = 0; k < pre.dim(); ++k)
            if (std::abs(pre.r[k]) < 1e-3 || std::abs(pre.a[k]) < 1e-3 ||
                std::abs(pre.b[k]) < 1e-3 || std::abs(pre.c[k]) < 1e-3)
                return true;
    return false;
}

template <class P>
void randomize(P& params, Rng& rng) {
    visit_segments(params, [&](const std::string&, std::span<double> s) {
        for (double& x : s) x = 0.4 * rng.normal();
    });
}

SparseInstance random_check_instance(Rng& rng, std::size_t n, std::size_t nonzeros) {
    SparseInstance inst;
    std::vector<std::uint32_t> pool(n);
    for (std::size_t i = 0; i < n; ++i) pool[i] = static_cast<std::uint32_t>(i);
    shuffle(pool, rng);
    pool.resize(std::min(nonzeros, n));
    std::sort(pool.begin(), pool.end());
    inst.indices = pool;
    for (std::size_t i = 0; i < pool.size(); ++i) inst.values.push_back(0.5 + rng.uniform());
    return inst;
}

int cmd_grad_check(const std::string& model, std::size_t configs, std::uint64_t seed,
                   bool corrupt) {
    const ModelKind kind = model_kind_from_string(model);
    Rng rng(Rng::mix(seed, 0x6c6cu));
    GradCheckReport report;

    for (std::size_t t = 0; t < configs; ++t) {
        const std::size_t n = 5 + rng.below(10);
        const std::size_t d = 1 + rng.below(8);
        const std::size_t nz = 2 + rng.below(7);
        VariantConfig variant;
        variant.interaction = rng.below(2) ? Interaction::dot_product : Interaction::hamilton;
        variant.direction = rng.below(2) ? Direction::one_way : Direction::two_way;
        variant.pooling = rng.below(2) ? PoolingKind::elementwise_real : PoolingKind::hamilton;
        variant.residual = rng.below(2) != 0;

        switch (kind) {
            case ModelKind::fm: {
                FmParams p = init_fm(n, d, rng.next_u64());
                randomize(p, rng);
                const SparseInstance inst = random_check_instance(rng, n, nz);
                FmParams grad = zeros_like(p);
                fm_backward(p, inst, 1.0, grad);
                if (corrupt) grad.w0 += 0.01;
                sweep_params(p, grad, [&](const FmParams& q) { return fm_forward(q, inst); },
                             report);
                break;
            }
            case ModelKind::qfm: {
                QfmParams p = init_qfm(n, d, rng.next_u64());
                randomize(p, rng);
                const SparseInstance inst = random_check_instance(rng, n, nz);
                QfmParams grad = zeros_like(p);
                qfm_backward(p, inst, variant, 1.0, grad);
                if (corrupt) grad.w0 += 0.01;
                sweep_params(p, grad,
                             [&](const QfmParams& q) { return qfm_forward(q, inst, variant); },
                             report);
                break;
            }
            case ModelKind::qnfm: {
                const std::size_t l = 1 + rng.below(3);
                QnfmParams p = init_qnfm(n, d, l, rng.next_u64());
                SparseInstance inst;
                for (int attempt = 0; attempt < 1000; ++attempt) {
                    randomize(p, rng);
                    inst = random_check_instance(rng, n, nz);
                    QnfmTrace trace;
                    qnfm_forward_traced(p, inst, variant, Mode::eval, 0.0, nullptr, trace);
                    if (!near_relu_kink(trace)) break;
                }
                QnfmParams grad = zeros_like(p);
                qnfm_backward(p, inst, variant, 1.0, Mode::eval, 0.0, Rng(0), grad);
                if (corrupt) grad.emb.w0 += 0.01;
                sweep_params(p, grad,
                             [&](const QnfmParams& q) { return qnfm_forward(q, inst, variant); },
                             report);
                break;
            }
        }
    }

    for (const auto& [group, err] : report.worst)
        std::cout << "group=" << group << " worst_rel_err=" << format_double(err) << "\n";
    std::cout << (report.ok ? "grad-check: PASS" : "grad-check: FAIL") << "\n";
    return report.ok ? 0 : 1;
}

int cmd_scaling(const TrainConfig& base, const std::string& train_path, std::size_t repeats,
                const std::string& out_path) {
    const Dataset full = load_dataset(train_path);
    const std::vector<double> fractions{0.2, 0.4, 0.6, 0.8, 1.0};

    Dataset val;
    val.n = full.n;
    const std::size_t val_count = std::min<std::size_t>(full.size(), 500);
    val.instances.assign(full.instances.begin(),
                         full.instances.begin() + static_cast<std::ptrdiff_t>(val_count));

    std::string csv = "# fractions=";
    for (std::size_t i = 0; i < fractions.size(); ++i)
        csv += (i ? "," : "") + format_double(fractions[i]);
    csv += "\nfraction,seconds\n";

    std::vector<std::pair<double, double>> points;
    for (const double f : fractions) {
        Dataset part;
        part.n = full.n;
        const auto count = static_cast<std::size_t>(f * static_cast<double>(full.size()));
        part.instances.assign(full.instances.begin(),
                              full.instances.begin() + static_cast<std::ptrdiff_t>(count));
        TrainConfig cfg = base;
        cfg.max_epochs = 1;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t r = 0; r < std::max<std::size_t>(repeats, 1); ++r) {
            const TrainedModel m = train(cfg, part, val);
            best = std::min(best, m.history.at(0).seconds);
        }
        csv += format_double(f) + "," + format_double(best) + "\n";
        points.emplace_back(f, best);
    }

    // least-squares line through (fraction, seconds); R^2 to stderr
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& [x, y] : points) {
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double m = static_cast<double>(points.size());
    const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    const double intercept = (sy - slope * sx) / m;
    double ss_res = 0, ss_tot = 0;
    for (const auto& [x, y] : points) {
        ss_res += (y - (slope * x + intercept)) * (y - (slope * x + intercept));
        ss_tot += (y - sy / m) * (y - sy / m);
    }
    const double r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
    std::cerr << "slope=" << slope << " intercept=" << intercept << " r2=" << r2 << "\n";

    if (out_path.empty())
        std::cout << csv;
    else
        write_file(out_path, csv);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Quaternion factorization machines for sparse prediction"};
    app.require_subcommand(1);
    app.fallthrough(true);
    app.set_config("--config", "",
                   "INI config file ([train]/[scaling] sections; flags take precedence)");

    int rc = 0;
    std::function<int()> run;

    // --- gen-synthetic ---
    auto* gen = app.add_subcommand("gen-synthetic", "Generate a planted synthetic dataset");
    std::size_t fields = 10, fpf = 100, instances = 62500, teacher_rank = 8;
    std::uint64_t gen_seed = 7;
    std::string gen_out = "synthetic";
    gen->add_option("--fields", fields, "Feature fields per instance");
    gen->add_option("--features-per-field", fpf, "Features per field");
    gen->add_option("--instances", instances, "Total instances across the 8:1:1 split");
    gen->add_option("--seed", gen_seed, "Generator seed");
    gen->add_option("--teacher-rank", teacher_rank, "Rank of the planted embeddings");
    gen->add_option("--out", gen_out, "Output path prefix");
    gen->callback([&] {
        run = [=] { return cmd_gen_synthetic(fields, fpf, instances, gen_seed, teacher_rank,
                                             gen_out); };
    });

    // shared training options
    TrainConfig cfg;
    cfg.threads = env_threads();
    std::string model = "qfm";
    VariantFlags variants;
    auto add_train_options = [&](CLI::App* cmd) {
        cmd->add_option("--model", model, "fm | qfm | qnfm")
            ->check(CLI::IsMember({"fm", "qfm", "qnfm"}));
        cmd->add_option("--d", cfg.d, "Latent dimension");
        cmd->add_option("--l", cfg.l, "FFN depth (qnfm)");
        cmd->add_option("--rho", cfg.rho, "Dropout ratio (qnfm)");
        cmd->add_option("--batch-size", cfg.batch_size, "Mini-batch size");
        cmd->add_option("--lr", cfg.lr, "Learning rate");
        cmd->add_option("--epochs", cfg.max_epochs, "Maximum epochs");
        cmd->add_option("--patience", cfg.patience, "Early-stopping patience");
        cmd->add_option("--seed", cfg.seed, "Training seed");
        cmd->add_option("--threads", cfg.threads, "Batch-gradient worker count");
        variants.add_to(cmd);
    };

    // --- train ---
    auto* tr = app.add_subcommand("train", "Train a model and write a checkpoint");
    std::string train_path, val_path, test_path, out_path = "model.ckpt", history_path;
    add_train_options(tr);
    tr->add_option("--train", train_path, "Training data file")->required();
    tr->add_option("--val", val_path, "Validation data file")->required();
    tr->add_option("--test", test_path, "Optional test data file");
    tr->add_option("--out", out_path, "Checkpoint output path");
    tr->add_option("--history", history_path, "History CSV path (default <out>.history.csv)");
    tr->callback([&] {
        run = [&, out_path, history_path, train_path, val_path, test_path] {
            TrainConfig c = cfg;
            c.kind = model_kind_from_string(model);
            c.variant = variants.to_config();
            return cmd_train(c, train_path, val_path, test_path, out_path, history_path);
        };
    });

    // --- evaluate ---
    auto* ev = app.add_subcommand("evaluate", "Evaluate a checkpoint on a data file");
    std::string ckpt_path, data_path;
    ev->add_option("--checkpoint", ckpt_path, "Checkpoint path")->required();
    ev->add_option("--data", data_path, "Data file")->required();
    ev->callback([&] { run = [=] { return cmd_evaluate(ckpt_path, data_path); }; });

    // --- param-count ---
    auto* pc = app.add_subcommand("param-count", "Parameter accounting self-test");
    std::size_t pc_n = 1000, pc_d = 8, pc_l = 1;
    std::string pc_model = "qfm";
    pc->add_option("--model", pc_model, "fm | qfm | qnfm")
        ->check(CLI::IsMember({"fm", "qfm", "qnfm"}));
    pc->add_option("--n", pc_n, "Feature count")->required();
    pc->add_option("--d", pc_d, "Latent dimension")->required();
    pc->add_option("--l", pc_l, "FFN depth (qnfm)");
    pc->callback([&] { run = [=] { return cmd_param_count(pc_model, pc_n, pc_d, pc_l); }; });

    // --- grad-check ---
    auto* gc = app.add_subcommand("grad-check", "Analytic vs finite-difference gradient sweep");
    std::string gc_model = "qnfm";
    std::size_t gc_configs = 20;
    std::uint64_t gc_seed = 1;
    bool gc_corrupt = false;
    gc->add_option("--model", gc_model, "fm | qfm | qnfm")
        ->check(CLI::IsMember({"fm", "qfm", "qnfm"}));
    gc->add_option("--configs", gc_configs, "Random configurations to sweep");
    gc->add_option("--seed", gc_seed, "Sweep seed");
    gc->add_flag("--corrupt", gc_corrupt, "Deliberately corrupt one partial (negative control)");
    gc->callback(
        [&] { run = [=] { return cmd_grad_check(gc_model, gc_configs, gc_seed, gc_corrupt); }; });

    // --- scaling ---
    auto* sc = app.add_subcommand("scaling", "One-epoch training time vs data fraction");
    std::string sc_train, sc_out;
    std::size_t sc_repeats = 3;
    add_train_options(sc);
    sc->add_option("--train", sc_train, "Training data file")->required();
    sc->add_option("--repeats", sc_repeats, "Timing repeats per fraction (minimum kept)");
    sc->add_option("--out", sc_out, "CSV output path (default stdout)");
    sc->callback([&] {
        run = [&, sc_train, sc_repeats, sc_out] {
            TrainConfig c = cfg;
            c.kind = model_kind_from_string(model);
            c.variant = variants.to_config();
            return cmd_scaling(c, sc_train, sc_repeats, sc_out);
        };
    });

    CLI11_PARSE(app, argc, argv);

    try {
        rc = run ? run() : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        rc = 1;
    }
    return rc;
}
