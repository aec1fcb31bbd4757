#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "flip/errors.hpp"

namespace flip {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Panels store one row per entity and one column per time bin, so a column is
// a full market configuration and is contiguous in memory.
using SignMatrix = Eigen::MatrixXi;    // entries in {-1, +1}
using BinaryMatrix = Eigen::MatrixXi;  // entries in {0, 1}
using PresenceMask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

// Raw open/close prices for N entities over T synchronized (or to-be
// synchronized) time bins. Cells missing from the source file are flagged in
// `present` and removed later by synchronize().
struct PricePanel {
    std::vector<std::string> entities;
    std::vector<std::string> timestamps;
    Matrix open;   // N x T, strictly positive where present
    Matrix close;  // N x T
    PresenceMask present;  // N x T; empty means "all present"

    Index n() const { return open.rows(); }
    Index t() const { return open.cols(); }
    bool has_missing() const { return present.size() > 0 && !present.all(); }

    // Checks shapes, positivity, and strictly increasing timestamp labels.
    void validate() const;
};

// Binary orientations: sign of the intraperiod return of each entity.
struct SignPanel {
    std::vector<std::string> entities;
    std::vector<std::string> timestamps;
    SignMatrix signs;  // N x T, entries exactly -1 or +1

    // Number of zero returns that were resolved by the zero policy when this
    // panel was derived from prices; 0 for synthetic or deserialized panels.
    std::int64_t zero_returns = 0;

    Index n() const { return signs.rows(); }
    Index t() const { return signs.cols(); }
    void validate() const;
};

// Trend-reversal indicators: flips[i][t] = 1 iff entity i changed orientation
// between bins t and t+1 of the source sign panel. Timestamps label the later
// bin of each pair.
struct ReversalPanel {
    std::vector<std::string> entities;
    std::vector<std::string> timestamps;  // length T-1 of the source panel
    BinaryMatrix flips;                   // N x (T-1)

    Index n() const { return flips.rows(); }
    Index t() const { return flips.cols(); }
    void validate() const;
};

// Half-open interval of time-bin indices.
struct TimeRange {
    Index begin = 0;
    Index end = 0;
    Index length() const { return end - begin; }
};

namespace detail {
void require(bool cond, const std::string& msg);
void require_shape(bool cond, const std::string& msg);
}  // namespace detail

}  // namespace flip
