#pragma once

#include <cmath>
#include <string>

#include <Eigen/Core>

#include "isnmf/errors.hpp"

namespace isnmf {

// Column-major dense carriers. Data frames, dictionaries and sufficient
// statistics all live in these; one column = one spectral frame.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

inline void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ShapeMismatch(std::string(what) + ": " + std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                            std::to_string(b.cols()));
}

inline void require_same_size(const Vector& a, const Vector& b, const char* what) {
    if (a.size() != b.size())
        throw ShapeMismatch(std::string(what) + ": " + std::to_string(a.size()) + " vs " +
                            std::to_string(b.size()));
}

/// Checks the nonnegative-matrix invariants: every entry finite and >= 0.
inline void require_nonneg_finite(const Eigen::Ref<const Matrix>& m, const char* what) {
    if (!m.allFinite()) throw NonFiniteEntry(std::string(what) + ": non-finite entry");
    if ((m.array() < 0.0).any()) throw NegativeEntry(std::string(what) + ": negative entry");
}

/// || a - b ||_F, the stopping statistic of the trainers.
inline double frobenius_delta(const Matrix& w_new, const Matrix& w_old) {
    require_same_shape(w_new, w_old, "frobenius_delta");
    return (w_new - w_old).norm();
}

} // namespace isnmf
