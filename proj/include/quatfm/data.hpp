#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "quatfm/linalg.hpp"
#include "quatfm/rng.hpp"

namespace quatfm {

// One labelled sparse feature vector. Only nonzero features are stored;
// indices are 0-based, strictly increasing, all < the dataset's n.
struct SparseInstance {
    std::vector<std::uint32_t> indices;
    std::vector<double> values;
    int label = 0;  // binary {0,1}
};

struct Dataset {
    std::vector<SparseInstance> instances;
    std::size_t n = 0;  // total feature count; every index < n
    std::optional<std::size_t> field_count;

    std::size_t size() const { return instances.size(); }
};

// Parses the text dataset format: one instance per line as
//   label idx:val idx:val ...
// with label in {0,1}. An optional first line "#n=<int>" declares the total
// feature count (so files may reference features unseen in other splits);
// otherwise n = 1 + max index, or n_override when given (the explicit
// argument wins over the header). Out-of-order indices are sorted; duplicate
// indices, non-binary labels and malformed tokens raise std::invalid_argument
// with the offending line number.
Dataset parse_libsvm(std::istream& in, std::optional<std::size_t> n_override = {});
Dataset parse_libsvm_string(const std::string& text, std::optional<std::size_t> n_override = {});
Dataset load_dataset(const std::string& path, std::optional<std::size_t> n_override = {});

// Canonical text form of a dataset: "#n=<int>" header followed by one line
// per instance, values printed with the shortest digits that round-trip in
// f64. parse(serialize(ds)) == ds and serialize is a fixed point of
// parse-then-serialize.
std::string serialize(const Dataset& ds);
void save_dataset(const Dataset& ds, const std::string& path);

// Shortest decimal form of v that parses back to exactly v.
std::string format_double(double v);

// Random disjoint partition into train/val/test. Ratios must be positive and
// sum to 1 (within 1e-9); sizes match the ratios to within one instance.
// Deterministic for a fixed seed.
std::array<Dataset, 3> split_dataset(const Dataset& ds, double train_ratio, double val_ratio,
                                     double test_ratio, std::uint64_t seed);

// One epoch of shuffled mini-batch index groups. Every instance appears
// exactly once; the final batch may be short.
std::vector<std::vector<std::size_t>> shuffled_batches(std::size_t count, std::size_t batch_size,
                                                       std::uint64_t seed);

// The hidden second-order model behind a synthetic dataset: global bias,
// linear weights and rank-`rank` embeddings scoring instances as
//   s = w0 + sum_i w_i x_i + sum_{i<j} (V_i . V_j) x_i x_j.
struct PlantedTeacher {
    double w0 = 0.0;
    std::vector<double> w;
    RealMatrix v;  // n x rank
    std::size_t rank = 0;
};

// Teacher score of one instance (the generator's own scorer).
double planted_score(const PlantedTeacher& t, const SparseInstance& inst);

struct SyntheticData {
    Dataset data;
    PlantedTeacher teacher;
};

// Synthetic CTR-style data: each instance activates exactly one feature
// (value 1.0) per field, labels drawn Bernoulli(sigmoid(planted score)).
// The teacher is returned for oracle evaluation. Deterministic per seed.
SyntheticData generate_synthetic(std::size_t n_fields, std::size_t features_per_field,
                                 std::size_t n_instances, std::uint64_t seed,
                                 std::size_t teacher_rank = 8);

// Sidecar serialization of the planted parameters (key=value text).
void save_teacher(const PlantedTeacher& t, std::size_t n, const std::string& path);
PlantedTeacher load_teacher(const std::string& path);

}  // namespace quatfm
