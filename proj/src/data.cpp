#include "quatfm/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace quatfm {

namespace {

[[noreturn]] void parse_fail(std::size_t line_no, const std::string& msg) {
    throw std::invalid_argument("line " + std::to_string(line_no) + ": " + msg);
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

std::string format_double(double v) {
    char buf[40];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

Dataset parse_libsvm(std::istream& in, std::optional<std::size_t> n_override) {
    Dataset ds;
    std::optional<std::size_t> header_n;
    std::size_t max_index = 0;
    bool saw_index = false;

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (line.rfind("#n=", 0) == 0 && line_no == 1) {
                char* end = nullptr;
                const unsigned long long v = std::strtoull(line.c_str() + 3, &end, 10);
                if (end == line.c_str() + 3 || *end != '\0')
                    parse_fail(line_no, "bad #n= header");
                header_n = static_cast<std::size_t>(v);
            }
            continue;  // other comment lines are ignored
        }

        std::istringstream ls(line);
        std::string tok;
        if (!(ls >> tok)) continue;

        SparseInstance inst;
        if (tok == "0") {
            inst.label = 0;
        } else if (tok == "1") {
            inst.label = 1;
        } else {
            parse_fail(line_no, "label must be 0 or 1, got '" + tok + "'");
        }

        std::vector<std::pair<std::uint32_t, double>> feats;
        while (ls >> tok) {
            const auto colon = tok.find(':');
            if (colon == std::string::npos || colon == 0 || colon + 1 == tok.size())
                parse_fail(line_no, "expected idx:val, got '" + tok + "'");
            char* end = nullptr;
            const std::string idx_s = tok.substr(0, colon);
            const unsigned long long idx = std::strtoull(idx_s.c_str(), &end, 10);
            if (end != idx_s.c_str() + idx_s.size() || idx_s[0] == '-' || idx > 0xffffffffULL)
                parse_fail(line_no, "bad feature index '" + idx_s + "'");
            const std::string val_s = tok.substr(colon + 1);
            const double val = std::strtod(val_s.c_str(), &end);
            if (end != val_s.c_str() + val_s.size() || !std::isfinite(val))
                parse_fail(line_no, "bad feature value '" + val_s + "'");
            feats.emplace_back(static_cast<std::uint32_t>(idx), val);
        }
        std::sort(feats.begin(), feats.end(),
                  [](const auto& x, const auto& y) { return x.first < y.first; });
        for (std::size_t i = 0; i + 1 < feats.size(); ++i) {
            if (feats[i].first == feats[i + 1].first)
                parse_fail(line_no,
                           "duplicate feature index " + std::to_string(feats[i].first));
        }
        inst.indices.reserve(feats.size());
        inst.values.reserve(feats.size());
        for (const auto& [idx, val] : feats) {
            inst.indices.push_back(idx);
            inst.values.push_back(val);
            max_index = std::max<std::size_t>(max_index, idx);
            saw_index = true;
        }
        ds.instances.push_back(std::move(inst));
    }

    if (n_override) {
        ds.n = *n_override;
    } else if (header_n) {
        ds.n = *header_n;
    } else {
        ds.n = saw_index ? max_index + 1 : 0;
    }
    if (saw_index && max_index >= ds.n)
        throw std::invalid_argument("feature index " + std::to_string(max_index) +
                                    " out of range for n=" + std::to_string(ds.n));
    return ds;
}

Dataset parse_libsvm_string(const std::string& text, std::optional<std::size_t> n_override) {
    std::istringstream in(text);
    return parse_libsvm(in, n_override);
}

Dataset load_dataset(const std::string& path, std::optional<std::size_t> n_override) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset file: " + path);
    return parse_libsvm(in, n_override);
}

std::string serialize(const Dataset& ds) {
    std::string out = "#n=" + std::to_string(ds.n) + "\n";
    for (const auto& inst : ds.instances) {
        out += inst.label ? '1' : '0';
        for (std::size_t i = 0; i < inst.indices.size(); ++i) {
            out += ' ';
            out += std::to_string(inst.indices[i]);
            out += ':';
            out += format_double(inst.values[i]);
        }
        out += '\n';
    }
    return out;
}

void save_dataset(const Dataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write dataset file: " + path);
    out << serialize(ds);
    if (!out) throw std::runtime_error("write failed: " + path);
}

std::array<Dataset, 3> split_dataset(const Dataset& ds, double train_ratio, double val_ratio,
                                     double test_ratio, std::uint64_t seed) {
    if (ds.instances.empty()) throw std::invalid_argument("split_dataset: empty dataset");
    if (train_ratio <= 0.0 || val_ratio <= 0.0 || test_ratio <= 0.0)
        throw std::invalid_argument("split_dataset: ratios must be positive");
    if (std::abs(train_ratio + val_ratio + test_ratio - 1.0) > 1e-9)
        throw std::invalid_argument("split_dataset: ratios must sum to 1");

    const std::size_t total = ds.instances.size();
    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(Rng::mix(seed, 0x5bd1u));
    shuffle(order, rng);

    std::size_t n_train = static_cast<std::size_t>(std::llround(train_ratio * total));
    std::size_t n_val = static_cast<std::size_t>(std::llround(val_ratio * total));
    n_train = std::min(n_train, total);
    n_val = std::min(n_val, total - n_train);

    std::array<Dataset, 3> parts;
    for (auto& p : parts) {
        p.n = ds.n;
        p.field_count = ds.field_count;
    }
    for (std::size_t i = 0; i < total; ++i) {
        const std::size_t which = i < n_train ? 0 : (i < n_train + n_val ? 1 : 2);
        parts[which].instances.push_back(ds.instances[order[i]]);
    }
    return parts;
}

std::vector<std::vector<std::size_t>> shuffled_batches(std::size_t count, std::size_t batch_size,
                                                       std::uint64_t seed) {
    if (batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(Rng::mix(seed, 0xba7cu));
    shuffle(order, rng);

    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < count; start += batch_size) {
        const std::size_t end = std::min(count, start + batch_size);
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return batches;
}

double planted_score(const PlantedTeacher& t, const SparseInstance& inst) {
    // O(m * rank) via the bilinear sum identity:
    //   sum_{i<j} (V_i.V_j) x_i x_j = (|S|^2 - sum_i |x_i V_i|^2) / 2,  S = sum_i x_i V_i.
    double s = t.w0;
    std::vector<double> acc(t.rank, 0.0);
    double sq = 0.0;
    for (std::size_t f = 0; f < inst.indices.size(); ++f) {
        const std::uint32_t i = inst.indices[f];
        const double x = inst.values[f];
        s += t.w[i] * x;
        const auto row = t.v.row(i);
        for (std::size_t k = 0; k < t.rank; ++k) {
            const double z = x * row[k];
            acc[k] += z;
            sq += z * z;
        }
    }
    double s2 = 0.0;
    for (double z : acc) s2 += z * z;
    return s + 0.5 * (s2 - sq);
}

SyntheticData generate_synthetic(std::size_t n_fields, std::size_t features_per_field,
                                 std::size_t n_instances, std::uint64_t seed,
                                 std::size_t teacher_rank) {
    if (n_fields == 0 || features_per_field == 0 || n_instances == 0 || teacher_rank == 0)
        throw std::invalid_argument("generate_synthetic: all counts must be >= 1");

    const std::size_t n = n_fields * features_per_field;

    // Scales tuned on desk-size runs: the linear part carries std ~1.9 and
    // the pairwise part ~1.2. Heavier interaction mixes are not learnable
    // from ~50k instances (feature pairs co-occur a handful of times) and
    // drag trained models toward chance.
    const double w_sigma = 0.60;
    const double v_sigma = 0.25;

    SyntheticData out;
    out.teacher.rank = teacher_rank;
    out.teacher.w0 = 0.0;
    out.teacher.w.assign(n, 0.0);
    out.teacher.v = RealMatrix(n, teacher_rank);

    Rng param_rng(Rng::mix(seed, 0x7ea0u));
    for (auto& wi : out.teacher.w) wi = w_sigma * param_rng.normal();
    for (auto& vij : out.teacher.v.data) vij = v_sigma * param_rng.normal();

    out.data.n = n;
    out.data.field_count = n_fields;
    out.data.instances.reserve(n_instances);

    Rng inst_rng(Rng::mix(seed, 0xda7au));
    for (std::size_t t = 0; t < n_instances; ++t) {
        SparseInstance inst;
        inst.indices.reserve(n_fields);
        inst.values.assign(n_fields, 1.0);
        for (std::size_t f = 0; f < n_fields; ++f) {
            const auto idx = static_cast<std::uint32_t>(
                f * features_per_field + inst_rng.below(features_per_field));
            inst.indices.push_back(idx);
        }
        const double s = planted_score(out.teacher, inst);
        inst.label = inst_rng.uniform() < sigmoid(s) ? 1 : 0;
        out.data.instances.push_back(std::move(inst));
    }
    return out;
}

void save_teacher(const PlantedTeacher& t, std::size_t n, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write teacher file: " + path);
    out << "n=" << n << "\n";
    out << "rank=" << t.rank << "\n";
    out << "w0=" << format_double(t.w0) << "\n";
    out << "w=";
    for (std::size_t i = 0; i < t.w.size(); ++i) out << (i ? " " : "") << format_double(t.w[i]);
    out << "\n";
    for (std::size_t i = 0; i < t.v.rows; ++i) {
        out << "V[" << i << "]=";
        const auto row = t.v.row(i);
        for (std::size_t k = 0; k < row.size(); ++k) out << (k ? " " : "") << format_double(row[k]);
        out << "\n";
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

PlantedTeacher load_teacher(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open teacher file: " + path);

    PlantedTeacher t;
    std::size_t n = 0;
    std::string line;
    auto values_after = [](const std::string& s, std::size_t pos) {
        std::vector<double> vals;
        std::istringstream vs(s.substr(pos));
        double v;
        while (vs >> v) vals.push_back(v);
        return vals;
    };
    while (std::getline(in, line)) {
        if (line.rfind("n=", 0) == 0) {
            n = std::strtoull(line.c_str() + 2, nullptr, 10);
        } else if (line.rfind("rank=", 0) == 0) {
            t.rank = std::strtoull(line.c_str() + 5, nullptr, 10);
        } else if (line.rfind("w0=", 0) == 0) {
            t.w0 = std::strtod(line.c_str() + 3, nullptr);
        } else if (line.rfind("w=", 0) == 0) {
            t.w = values_after(line, 2);
        } else if (line.rfind("V[", 0) == 0) {
            const auto close = line.find("]=");
            if (close == std::string::npos) throw std::runtime_error("bad teacher row: " + line);
            const std::size_t i = std::strtoull(line.c_str() + 2, nullptr, 10);
            if (t.v.rows == 0) t.v = RealMatrix(n, t.rank);
            const auto vals = values_after(line, close + 2);
            if (i >= t.v.rows || vals.size() != t.rank)
                throw std::runtime_error("bad teacher row: " + line);
            std::copy(vals.begin(), vals.end(), t.v.row(i).begin());
        }
    }
    if (t.w.size() != n || t.v.rows != n)
        throw std::runtime_error("teacher file inconsistent: " + path);
    return t;
}

}  // namespace quatfm
