#include "cage/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "cage/error.hpp"
#include "cage/rng.hpp"

namespace cage {

Table Dataset::with_target() const {
    Table out = features;
    out.columns.push_back(target_name);
    out.values.conservativeResize(Eigen::NoChange, out.values.cols() + 1);
    out.values.col(out.values.cols() - 1) = target;
    return out;
}

std::string to_string(SyntheticKind kind) {
    switch (kind) {
        case SyntheticKind::direct_cause: return "direct_cause";
        case SyntheticKind::markovian: return "markovian";
        case SyntheticKind::mixed: return "mixed";
    }
    throw Error("synthetic: bad kind");
}

SyntheticKind synthetic_kind_from_string(const std::string& s) {
    if (s == "direct_cause") return SyntheticKind::direct_cause;
    if (s == "markovian") return SyntheticKind::markovian;
    if (s == "mixed") return SyntheticKind::mixed;
    throw Error("synthetic: unknown kind '" + s +
                "' (expected direct_cause|markovian|mixed)");
}

// The N(mu, s) second argument is read as a standard deviation throughout
// (source variables become intercept mu + noise std s).
LinearScm synthetic_scm(SyntheticKind kind) {
    switch (kind) {
        case SyntheticKind::direct_cause:
            return LinearScm({{"X1", 0.0, 1.0}, {"X3", 0.0, 1.0}, {"X2", 0.0, 1.0}, {"Y", 0.0, 1.0}},
                             {{"X1", "Y", 1.0}, {"X2", "Y", 1.0}, {"X3", "Y", 1.0}});
        case SyntheticKind::markovian:
            return LinearScm({{"X1", 1.5, 1.0}, {"X3", 0.5, 2.0}, {"X2", 0.0, 1.0}, {"Y", 0.0, 1.0}},
                             {{"X1", "X2", 1.0},
                              {"X3", "X2", 1.0},
                              {"X1", "Y", 1.0},
                              {"X2", "Y", 2.0},
                              {"X3", "Y", 1.0}});
        case SyntheticKind::mixed:
            return LinearScm({{"X1", 1.5, 1.0},
                              {"X3", 0.5, 2.0},
                              {"X4", 0.0, 1.0},
                              {"X2", 0.0, 1.0},
                              {"Y", 0.0, 1.0}},
                             {{"X1", "X4", 1.0},
                              {"X1", "X2", 1.0},
                              {"X4", "X2", 1.0},
                              {"X2", "Y", 0.3},
                              {"X3", "Y", 1.0},
                              {"X4", "Y", 2.0}});
    }
    throw Error("synthetic: bad kind");
}

// Reconstructed from each SCM's topological ordering: variables share a
// component only when causally unordered; confounded is the default mode
// because within-component variables are marginally independent here.
ChainGraph synthetic_chain_graph(SyntheticKind kind) {
    switch (kind) {
        case SyntheticKind::direct_cause:
            return ChainGraph({{{"X1", "X2", "X3"}, ComponentMode::confounded}},
                              {"X1", "X3", "X2"});
        case SyntheticKind::markovian:
            return ChainGraph({{{"X1", "X3"}, ComponentMode::confounded},
                               {{"X2"}, ComponentMode::confounded}},
                              {"X1", "X3", "X2"});
        case SyntheticKind::mixed:
            return ChainGraph({{{"X1", "X3"}, ComponentMode::confounded},
                               {{"X4"}, ComponentMode::confounded},
                               {{"X2"}, ComponentMode::confounded}},
                              {"X1", "X3", "X4", "X2"});
    }
    throw Error("synthetic: bad kind");
}

SyntheticBundle generate_synthetic(SyntheticKind kind, long n, std::uint64_t seed) {
    LinearScm scm = synthetic_scm(kind);
    Table all = scm.sample(n, seed);
    Dataset data;
    data.features = all.without_column("Y");
    data.target = all.col("Y");
    data.target_name = "Y";
    return SyntheticBundle{std::move(data), std::move(scm), synthetic_chain_graph(kind)};
}

// ---------------------------------------------------------------------------
// CSV.

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.push_back("");
    return cells;
}

bool parse_double(std::string s, double& out) {
    auto b = s.find_first_not_of(" \t\r");
    auto e = s.find_last_not_of(" \t\r");
    if (b == std::string::npos) return false;
    s = s.substr(b, e - b + 1);
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc{} && ptr == last && std::isfinite(out);
}

}  // namespace

Dataset load_csv(const std::string& path, const std::string& target, CsvLoadReport* report) {
    std::ifstream in(path);
    if (!in) throw Error("csv: cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw Error("csv: '" + path + "' is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> header = split_csv_line(line);
    for (auto& h : header) {
        auto b = h.find_first_not_of(" \t");
        auto e = h.find_last_not_of(" \t");
        h = (b == std::string::npos) ? "" : h.substr(b, e - b + 1);
    }

    int target_col = -1;
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == target) target_col = static_cast<int>(i);
    if (target_col < 0) {
        std::string available;
        for (const auto& h : header) available += (available.empty() ? "" : ", ") + h;
        throw Error("csv: no target column '" + target + "' in '" + path +
                    "' (available: " + available + ")");
    }

    std::vector<std::vector<double>> rows;
    long dropped = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells = split_csv_line(line);
        if (cells.size() != header.size()) {
            ++dropped;
            continue;
        }
        std::vector<double> parsed(cells.size());
        bool ok = true;
        for (std::size_t i = 0; i < cells.size() && ok; ++i)
            ok = parse_double(cells[i], parsed[i]);
        if (!ok) {
            ++dropped;
            continue;
        }
        rows.push_back(std::move(parsed));
    }
    if (rows.empty()) throw Error("csv: '" + path + "' has no valid data rows");

    Dataset d;
    d.target_name = header[target_col];
    d.target.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < header.size(); ++i)
        if (static_cast<int>(i) != target_col) d.features.columns.push_back(header[i]);
    d.features.values.resize(static_cast<Eigen::Index>(rows.size()),
                             static_cast<Eigen::Index>(header.size() - 1));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        Eigen::Index c = 0;
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (static_cast<int>(i) == target_col)
                d.target(static_cast<Eigen::Index>(r)) = rows[r][i];
            else
                d.features.values(static_cast<Eigen::Index>(r), c++) = rows[r][i];
        }
    }
    if (report) {
        report->rows_kept = static_cast<long>(rows.size());
        report->rows_dropped = dropped;
        report->columns = header;
    }
    return d;
}

void write_csv(const Dataset& d, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("csv: cannot write '" + path + "'");
    out << std::setprecision(17);
    for (const auto& c : d.features.columns) out << c << ",";
    out << d.target_name << "\n";
    for (Eigen::Index r = 0; r < d.rows(); ++r) {
        for (Eigen::Index c = 0; c < d.features.cols(); ++c) out << d.features.values(r, c) << ",";
        out << d.target(r) << "\n";
    }
    if (!out) throw Error("csv: write to '" + path + "' failed");
}

// ---------------------------------------------------------------------------
// Normalize & split.

std::pair<Dataset, Dataset> shuffle_split(const Dataset& d, double train_fraction,
                                          std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction <= 1.0))
        throw Error("split: train fraction must be in (0, 1]");
    const Eigen::Index n = d.rows();
    if (n < 2 && train_fraction < 1.0)
        throw Error("split: need at least 2 rows to split");

    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    CounterRng rng(seed, 0);
    for (Eigen::Index i = n - 1; i > 0; --i)
        std::swap(order[i], order[rng.uniform_int(static_cast<std::uint64_t>(i + 1))]);

    auto n_train = static_cast<Eigen::Index>(std::llround(train_fraction * static_cast<double>(n)));
    n_train = std::min(std::max<Eigen::Index>(n_train, 1), n);

    auto take = [&](Eigen::Index begin, Eigen::Index count) {
        Dataset out;
        out.features.columns = d.features.columns;
        out.features.values.resize(count, d.features.cols());
        out.target.resize(count);
        out.target_name = d.target_name;
        for (Eigen::Index i = 0; i < count; ++i) {
            out.features.values.row(i) = d.features.values.row(order[begin + i]);
            out.target(i) = d.target(order[begin + i]);
        }
        return out;
    };
    return {take(0, n_train), take(n_train, n - n_train)};
}

void normalize_with_train_stats(Dataset& train, Dataset& test,
                                std::vector<std::string>* warnings) {
    if (train.rows() < 1) throw Error("normalize: empty training split");
    Normalization record;
    record.columns = train.features.columns;
    record.mean = train.features.values.colwise().mean();
    record.std_dev.resize(train.features.cols());
    for (Eigen::Index c = 0; c < train.features.cols(); ++c) {
        Eigen::VectorXd centered = train.features.values.col(c).array() - record.mean(c);
        double denom = static_cast<double>(train.rows() > 1 ? train.rows() - 1 : 1);
        double sd = std::sqrt(centered.squaredNorm() / denom);
        if (sd <= 0.0) {
            if (warnings)
                warnings->push_back("feature '" + train.features.columns[c] +
                                    "' has zero variance in the training split; normalized to 0");
            sd = 0.0;
        }
        record.std_dev(c) = sd;
    }

    auto apply = [&](Dataset& ds) {
        for (Eigen::Index c = 0; c < ds.features.cols(); ++c) {
            if (record.std_dev(c) > 0.0)
                ds.features.values.col(c) =
                    (ds.features.values.col(c).array() - record.mean(c)) / record.std_dev(c);
            else
                ds.features.values.col(c).setZero();
        }
        ds.normalization = record;
    };
    apply(train);
    if (test.rows() > 0) {
        if (test.features.columns != train.features.columns)
            throw Error("normalize: train and test column sets differ");
        apply(test);
    } else {
        test.normalization = record;
    }
}

std::pair<Dataset, Dataset> normalize_split(const Dataset& d, double train_fraction,
                                            std::uint64_t seed,
                                            std::vector<std::string>* warnings) {
    auto [train, test] = shuffle_split(d, train_fraction, seed);
    normalize_with_train_stats(train, test, warnings);
    return {std::move(train), std::move(test)};
}

Table denormalize(const Table& features, const Normalization& record) {
    if (features.columns != record.columns)
        throw Error("denormalize: column set does not match the normalization record");
    Table out = features;
    for (Eigen::Index c = 0; c < out.cols(); ++c) {
        double sd = record.std_dev(c) > 0.0 ? record.std_dev(c) : 0.0;
        out.values.col(c) = out.values.col(c).array() * sd + record.mean(c);
    }
    return out;
}

}  // namespace cage
