#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cage/chain_graph.hpp"
#include "cage/scm.hpp"
#include "cage/table.hpp"

namespace cage {

// Per-column z-score statistics, taken from the training split.
struct Normalization {
    std::vector<std::string> columns;
    Eigen::VectorXd mean;
    Eigen::VectorXd std_dev;
};

struct Dataset {
    Table features;
    Eigen::VectorXd target;
    std::string target_name;
    std::optional<Normalization> normalization;

    Eigen::Index rows() const { return features.rows(); }
    const std::vector<std::string>& feature_names() const { return features.columns; }
    // Features plus the target column, for the fit_* entry points.
    Table with_target() const;
};

enum class SyntheticKind { direct_cause, markovian, mixed };

std::string to_string(SyntheticKind kind);
SyntheticKind synthetic_kind_from_string(const std::string& s);

// Ground-truth generators for the three bundled causal structures.
LinearScm synthetic_scm(SyntheticKind kind);
ChainGraph synthetic_chain_graph(SyntheticKind kind);

struct SyntheticBundle {
    Dataset data;
    LinearScm scm;
    ChainGraph chain;
};

// Samples n rows from the bundled SCM (target column Y) and pairs them with
// the matching chain graph.
SyntheticBundle generate_synthetic(SyntheticKind kind, long n, std::uint64_t seed);

struct CsvLoadReport {
    long rows_kept = 0;
    long rows_dropped = 0;
    std::vector<std::string> columns;
};

// Comma-separated, mandatory header row; rows with missing or unparsable
// cells are dropped and counted.
Dataset load_csv(const std::string& path, const std::string& target,
                 CsvLoadReport* report = nullptr);
void write_csv(const Dataset& d, const std::string& path);

// Seeded shuffle and split at round(fraction*n); no normalization.
std::pair<Dataset, Dataset> shuffle_split(const Dataset& d, double train_fraction,
                                          std::uint64_t seed);

// Z-scores both splits in place using the training split's statistics;
// zero-variance columns normalize to zero with a warning.
void normalize_with_train_stats(Dataset& train, Dataset& test,
                                std::vector<std::string>* warnings = nullptr);

// Seeded shuffle, split at round(fraction*n), then z-score the features of
// both splits with training statistics. Zero-variance columns normalize to
// zero and add a warning. Targets are left untouched.
std::pair<Dataset, Dataset> normalize_split(const Dataset& d, double train_fraction,
                                            std::uint64_t seed,
                                            std::vector<std::string>* warnings = nullptr);

// Inverse of the stored z-score record.
Table denormalize(const Table& features, const Normalization& record);

}  // namespace cage
