#include "quatfm/training.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace quatfm {

void TrainConfig::validate() const {
    if (d == 0) throw std::invalid_argument("config: d must be >= 1");
    if (kind == ModelKind::qnfm && l == 0) throw std::invalid_argument("config: l must be >= 1");
    if (rho < 0.0 || rho >= 1.0) throw std::invalid_argument("config: rho must lie in [0,1)");
    if (batch_size == 0) throw std::invalid_argument("config: batch size must be >= 1");
    if (lr <= 0.0) throw std::invalid_argument("config: learning rate must be positive");
    if (patience == 0) throw std::invalid_argument("config: patience must be >= 1");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0 || eps <= 0.0)
        throw std::invalid_argument("config: bad adam constants");
}

namespace {

constexpr double kProbClamp = 1e-12;

double clamp_prob(double p) { return std::min(std::max(p, kProbClamp), 1.0 - kProbClamp); }

}  // namespace

double instance_log_loss(double score, int label) {
    const double p = clamp_prob(sigmoid(score));
    return label ? -std::log(p) : -std::log(1.0 - p);
}

double log_loss_sum(std::span<const double> scores, std::span<const int> labels) {
    if (scores.empty()) throw std::invalid_argument("log_loss: empty input");
    check_same_size(scores.size(), labels.size(), "log_loss");
    double total = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i)
        total += instance_log_loss(scores[i], labels[i]);
    return total;
}

double log_loss_mean(std::span<const double> scores, std::span<const int> labels) {
    return log_loss_sum(scores, labels) / static_cast<double>(scores.size());
}

namespace {

double dataset_pos_rate(const Dataset& ds) {
    if (ds.instances.empty()) return 0.5;
    std::size_t pos = 0;
    for (const auto& inst : ds.instances) pos += inst.label ? 1 : 0;
    return static_cast<double>(pos) / static_cast<double>(ds.size());
}

}  // namespace

TrainedModel train(const TrainConfig& cfg, const Dataset& train_ds, const Dataset& val_ds) {
    cfg.validate();
    const double pos_rate = dataset_pos_rate(train_ds);
    TrainedModel out;
    out.config = cfg;
    switch (cfg.kind) {
        case ModelKind::fm: {
            auto r = train_model(cfg, init_fm(train_ds.n, cfg.d, cfg.seed, pos_rate), train_ds,
                                 val_ds);
            out.params = std::move(r.params);
            out.best_epoch = r.best_epoch;
            out.history = std::move(r.history);
            break;
        }
        case ModelKind::qfm: {
            auto r = train_model(cfg, init_qfm(train_ds.n, cfg.d, cfg.seed, pos_rate), train_ds,
                                 val_ds);
            out.params = std::move(r.params);
            out.best_epoch = r.best_epoch;
            out.history = std::move(r.history);
            break;
        }
        case ModelKind::qnfm: {
            auto r = train_model(cfg, init_qnfm(train_ds.n, cfg.d, cfg.l, cfg.seed, pos_rate),
                                 train_ds, val_ds);
            out.params = std::move(r.params);
            out.best_epoch = r.best_epoch;
            out.history = std::move(r.history);
            break;
        }
    }
    return out;
}

double trained_val_loss(const TrainedModel& m, const Dataset& val_ds) {
    return std::visit(
        [&](const auto& p) { return eval_log_loss(p, val_ds, m.config.variant); }, m.params);
}

std::vector<TrainConfig> expand_grid(const TrainConfig& base, std::span<const std::size_t> ds,
                                     std::span<const std::size_t> ls,
                                     std::span<const double> rhos) {
    std::vector<TrainConfig> cells;
    const std::vector<std::size_t> one{base.l};
    const std::vector<double> one_rho{base.rho};
    const auto use_ls = (base.kind == ModelKind::qnfm && !ls.empty())
                            ? ls
                            : std::span<const std::size_t>(one);
    const auto use_rhos = (base.kind == ModelKind::qnfm && !rhos.empty())
                              ? rhos
                              : std::span<const double>(one_rho);
    for (const std::size_t d : ds) {
        for (const std::size_t l : use_ls) {
            for (const double rho : use_rhos) {
                TrainConfig c = base;
                c.d = d;
                c.l = l;
                c.rho = rho;
                cells.push_back(c);
            }
        }
    }
    return cells;
}

GridResult grid_search(std::span<const TrainConfig> cells, const Dataset& train_ds,
                       const Dataset& val_ds) {
    if (cells.empty()) throw std::invalid_argument("grid_search: empty grid");
    GridResult out;
    for (const auto& cfg : cells) {
        TrainedModel m = train(cfg, train_ds, val_ds);
        GridCell cell;
        cell.config = cfg;
        cell.best_epoch = m.best_epoch;
        cell.val_loss = trained_val_loss(m, val_ds);
        out.cells.push_back(std::move(cell));
    }
    out.best_index = 0;
    for (std::size_t i = 1; i < out.cells.size(); ++i) {
        if (out.cells[i].val_loss < out.cells[out.best_index].val_loss) out.best_index = i;
    }
    return out;
}

std::string history_csv(const TrainConfig& cfg, std::span<const EpochStats> history) {
    std::ostringstream out;
    out << "# model=" << to_string(cfg.kind) << " d=" << cfg.d << " l=" << cfg.l
        << " rho=" << format_double(cfg.rho) << " batch_size=" << cfg.batch_size
        << " lr=" << format_double(cfg.lr) << " patience=" << cfg.patience
        << " max_epochs=" << cfg.max_epochs << " seed=" << cfg.seed << "\n";
    out << "epoch,train_loss,val_loss,seconds\n";
    for (const auto& e : history) {
        out << e.epoch << ',' << format_double(e.train_loss) << ',' << format_double(e.val_loss)
            << ',' << format_double(e.seconds) << "\n";
    }
    return out.str();
}

}  // namespace quatfm
