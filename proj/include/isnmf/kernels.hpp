#pragma once

#include <cmath>

#include <Eigen/Core>

#include "isnmf/matrix.hpp"

namespace isnmf {

namespace detail {

// d_IS contribution of one entry, written in terms of u = y/x - 1 so that the
// value is accurate (and provably >= 0) when y and x are close.
inline double is_term(double u) {
    const double t = u - std::log1p(u);
    return t > 0.0 ? t : 0.0;
}

inline void require_epsilon(double epsilon) {
    if (!(epsilon > 0.0)) throw NegativeInput("epsilon must be > 0");
}

} // namespace detail

/// Smoothed Itakura-Saito divergence between nonnegative vectors:
///   sum_i (e+y_i)/(e+x_i) - log((e+y_i)/(e+x_i)) - 1.
/// Nonnegative, zero iff y == x, and invariant under joint rescaling of
/// (epsilon, y, x).
inline double is_divergence(const Vector& y, const Vector& x, double epsilon) {
    require_same_size(y, x, "is_divergence");
    detail::require_epsilon(epsilon);
    double acc = 0.0;
    for (Index i = 0; i < y.size(); ++i) {
        if (y[i] < 0.0 || x[i] < 0.0) throw NegativeInput("is_divergence: negative entry");
        const double u = (y[i] - x[i]) / (epsilon + x[i]);
        acc += detail::is_term(u);
    }
    return acc;
}

/// Mean smoothed divergence (1/N) sum_n d_IS(e+v_n, e+W h_n).
inline double objective(const Matrix& v, const Matrix& w, const Matrix& h, double epsilon) {
    detail::require_epsilon(epsilon);
    if (w.rows() != v.rows() || w.cols() != h.rows() || h.cols() != v.cols())
        throw ShapeMismatch("objective: inconsistent V/W/H shapes");
    if (v.cols() == 0) throw EmptyDataset("objective: no columns");
    Matrix approx = w * h;
    double acc = 0.0;
    const double* pv = v.data();
    const double* pa = approx.data();
    for (Index i = 0; i < v.size(); ++i)
        acc += detail::is_term((pv[i] - pa[i]) / (epsilon + pa[i]));
    return acc / static_cast<double>(v.cols());
}

/// Multiplicative MM updates for h at fixed W, minimizing
/// d_IS(e+v, e+Wh). Each iteration applies
///   h_k <- h_k * sqrt( sum_f W_fk (e+v_f)/(e+(Wh)_f)^2
///                    / sum_f W_fk / (e+(Wh)_f) ),
/// which never increases the divergence.
inline Vector solve_h(const Vector& v, const Matrix& w, const Vector& h0, int iters,
                      double epsilon) {
    detail::require_epsilon(epsilon);
    if (v.size() != w.rows()) throw ShapeMismatch("solve_h: v vs W rows");
    if (h0.size() != w.cols()) throw ShapeMismatch("solve_h: h0 vs W cols");
    if ((h0.array() <= 0.0).any()) throw NonPositiveInit("solve_h: h0 must be positive");
    Vector h = h0;
    Vector approx(w.rows()), ratio(w.rows()), num(w.cols()), den(w.cols());
    for (int it = 0; it < iters; ++it) {
        approx.noalias() = w * h;
        approx.array() += epsilon;
        ratio = (v.array() + epsilon) / approx.array().square();
        num.noalias() = w.transpose() * ratio;
        ratio = approx.cwiseInverse();
        den.noalias() = w.transpose() * ratio;
        h.array() *= (num.array() / den.array()).sqrt();
    }
    return h;
}

/// Per-sample sufficient statistics,
///   a_fk = (e+v_f)/(e+(Wh)_f)^2 * h_k * W_fk^2,
///   b_fk = h_k / (e+(Wh)_f).
/// sqrt(a/b) recovers W at an exact reconstruction.
struct SampleStats {
    Matrix a;
    Matrix b;
};

namespace detail {

// Adds one sample's statistics into (a_acc, b_acc); `approx` is scratch of
// size F. Keeps the hot online loop free of matrix temporaries.
inline void accumulate_sample_stats(const Vector& v, const Matrix& w, const Vector& h,
                                    double epsilon, Matrix& a_acc, Matrix& b_acc,
                                    Vector& approx) {
    approx.noalias() = w * h;
    approx.array() += epsilon;
    for (Index k = 0; k < w.cols(); ++k) {
        const double hk = h[k];
        if (hk == 0.0) continue;
        auto wk = w.col(k).array();
        a_acc.col(k).array() +=
            hk * wk.square() * (v.array() + epsilon) / approx.array().square();
        b_acc.col(k).array() += hk / approx.array();
    }
}

} // namespace detail

inline SampleStats sample_stats(const Vector& v, const Matrix& w, const Vector& h,
                                double epsilon) {
    detail::require_epsilon(epsilon);
    if (v.size() != w.rows() || h.size() != w.cols())
        throw ShapeMismatch("sample_stats: inconsistent shapes");
    SampleStats s{Matrix::Zero(w.rows(), w.cols()), Matrix::Zero(w.rows(), w.cols())};
    Vector approx(w.rows());
    detail::accumulate_sample_stats(v, w, h, epsilon, s.a, s.b, approx);
    return s;
}

/// Full-data statistics, equal to the sum of sample_stats over all columns of
/// V but computed as dense products; O(FKN).
inline SampleStats batch_stats(const Matrix& v, const Matrix& w, const Matrix& h,
                               double epsilon) {
    detail::require_epsilon(epsilon);
    if (w.rows() != v.rows() || w.cols() != h.rows() || h.cols() != v.cols())
        throw ShapeMismatch("batch_stats: inconsistent shapes");
    Matrix approx = w * h;
    approx.array() += epsilon;
    SampleStats s;
    s.a.noalias() = ((v.array() + epsilon) / approx.array().square()).matrix() * h.transpose();
    s.a.array() *= w.array().square();
    s.b.noalias() = approx.cwiseInverse() * h.transpose();
    return s;
}

/// Closed-form dictionary update W_fk = sqrt(a_fk / b_fk), the argmin of the
/// auxiliary function. Entries with a = b = 0 carry no information and keep
/// their previous value.
inline Matrix update_w(const Matrix& a, const Matrix& b, const Matrix& w_prev) {
    require_same_shape(a, b, "update_w: a vs b");
    require_same_shape(a, w_prev, "update_w: a vs w_prev");
    Matrix w(a.rows(), a.cols());
    for (Index j = 0; j < a.cols(); ++j) {
        for (Index i = 0; i < a.rows(); ++i) {
            const double ai = a(i, j), bi = b(i, j);
            if (bi > 0.0) {
                w(i, j) = std::sqrt(ai / bi);
            } else if (ai > 0.0) {
                throw InconsistentStats("update_w: a > 0 with b = 0");
            } else {
                w(i, j) = w_prev(i, j);
            }
        }
    }
    return w;
}

/// W-dependent part of the auxiliary function, sum_fk a_fk/W_fk + b_fk W_fk.
/// Requires W > 0 entrywise.
inline double aux_value(const Matrix& a, const Matrix& b, const Matrix& w) {
    require_same_shape(a, b, "aux_value: a vs b");
    require_same_shape(a, w, "aux_value: a vs w");
    return (a.array() / w.array() + b.array() * w.array()).sum();
}

/// The additive constant that completes the auxiliary function built at
/// anchor w_anchor: aux_value(A, B, W) + aux_constant == N * objective at
/// W = w_anchor, and bounds it from above for every positive W. Diagnostic
/// only; constant in W.
inline double aux_constant(const Matrix& v, const Matrix& w_anchor, const Matrix& h,
                           double epsilon) {
    detail::require_epsilon(epsilon);
    if (w_anchor.rows() != v.rows() || w_anchor.cols() != h.rows() || h.cols() != v.cols())
        throw ShapeMismatch("aux_constant: inconsistent shapes");
    Matrix approx = w_anchor * h;
    approx.array() += epsilon;
    auto ve = v.array() + epsilon;
    auto xh = approx.array();
    return (epsilon * ve / xh.square() + epsilon / xh - (ve / xh).log() - 2.0).sum();
}

} // namespace isnmf
