#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cage/error.hpp"

namespace cage {

// Column-named numeric table; the common currency between modules.
struct Table {
    std::vector<std::string> columns;
    Eigen::MatrixXd values;  // rows() x columns.size()

    Table() = default;
    Table(std::vector<std::string> cols, Eigen::MatrixXd vals)
        : columns(std::move(cols)), values(std::move(vals)) {
        if (static_cast<std::size_t>(values.cols()) != columns.size())
            throw Error("table: " + std::to_string(columns.size()) + " column names for " +
                        std::to_string(values.cols()) + " value columns");
    }

    Eigen::Index rows() const { return values.rows(); }
    Eigen::Index cols() const { return values.cols(); }

    int column_index(const std::string& name) const {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name) return static_cast<int>(i);
        return -1;
    }

    int require_column(const std::string& name) const {
        int idx = column_index(name);
        if (idx < 0) throw Error("table: no column named '" + name + "'");
        return idx;
    }

    Eigen::VectorXd col(const std::string& name) const {
        return values.col(require_column(name));
    }

    // Copy without the named column (used to split features from a target).
    Table without_column(const std::string& name) const {
        int drop = require_column(name);
        Table out;
        out.values.resize(rows(), cols() - 1);
        Eigen::Index j = 0;
        for (Eigen::Index c = 0; c < cols(); ++c) {
            if (c == drop) continue;
            out.columns.push_back(columns[c]);
            out.values.col(j++) = values.col(c);
        }
        return out;
    }
};

}  // namespace cage
