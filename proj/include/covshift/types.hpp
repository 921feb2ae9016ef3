#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace covshift {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Array = Eigen::ArrayXd;
using Index = Eigen::Index;

/// Raised for malformed run parameters and configuration files (CLI exit code 2).
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Raised for unreadable or malformed data files and sample inputs (CLI exit code 3).
struct data_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A finite collection of d-dimensional points, one per row, optionally labeled.
/// The seed records which RNG stream produced the set (0 for hand-built data).
struct SampleSet {
    Matrix points;                 // n x d
    std::optional<Vector> labels;  // length n when present
    std::uint64_t seed = 0;

    [[nodiscard]] Index size() const { return points.rows(); }
    [[nodiscard]] Index dim() const { return points.cols(); }
    [[nodiscard]] Vector point(Index i) const { return points.row(i).transpose(); }
};

inline void validate_sample_set(const SampleSet& s, const char* what = "sample set") {
    if (!s.points.allFinite()) {
        throw std::invalid_argument(std::string(what) + ": non-finite coordinate");
    }
    if (s.labels && s.labels->size() != s.points.rows()) {
        throw std::invalid_argument(std::string(what) + ": label count does not match point count");
    }
    if (s.labels && !s.labels->allFinite()) {
        throw std::invalid_argument(std::string(what) + ": non-finite label");
    }
}

inline SampleSet make_sample_set(Matrix points, std::optional<Vector> labels = std::nullopt,
                                 std::uint64_t seed = 0) {
    SampleSet s{std::move(points), std::move(labels), seed};
    validate_sample_set(s);
    return s;
}

}  // namespace covshift
