#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace mugnn {

// Row-major so that row i is the embedding of entity (or relation) i.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

// Records which side of every non-differentiable point (ReLU, LeakyReLU,
// hinge, clamp, max) a forward pass landed on. Two passes with equal
// signatures evaluate the same smooth branch, which is what finite
// differences need.
struct KinkLog {
    std::vector<std::int64_t> signature;
    double min_slack = std::numeric_limits<double>::infinity();

    void sign(double arg) {
        signature.push_back(arg > 0.0 ? 1 : 0);
        min_slack = std::min(min_slack, std::abs(arg));
    }
    void choice(std::int64_t which, double gap) {
        signature.push_back(which);
        min_slack = std::min(min_slack, std::abs(gap));
    }
};

inline void note_sign(KinkLog* log, double arg) {
    if (log) log->sign(arg);
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace mugnn
