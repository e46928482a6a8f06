#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "isnmf/kernels.hpp"
#include "isnmf/matrix.hpp"

namespace isnmf {

/// Dictionary W bundled with its sufficient statistics A, B. All three share
/// the F x K shape; after any rescale the columns of W sum to one.
struct Dictionary {
    Matrix w;
    Matrix a;
    Matrix b;
};

enum class RestartMode { warm, fresh };

inline const char* to_string(RestartMode m) {
    return m == RestartMode::warm ? "warm" : "fresh";
}

inline RestartMode restart_mode_from_string(const std::string& s) {
    if (s == "warm") return RestartMode::warm;
    if (s == "fresh") return RestartMode::fresh;
    throw UnsupportedFormat("unknown restart mode: " + s);
}

/// Solver parameters shared by the batch and online trainers.
struct SolverConfig {
    int k = 8;                   // number of basis spectra
    double epsilon = 1e-12;      // smoothing floor
    double eta = -1.0;           // stopping threshold; < 0 selects the
                                 // scale-aware default 1e-6*sqrt(F*K), 0 disables
    int beta = 1000;             // mini-batch size
    double r = 0.7;              // forgetting base, rho = r^(beta/N)
    int inner_iters = 0;         // h iterations per visit; 0 selects the mode
                                 // default (1 warm, 100 fresh)
    RestartMode restart = RestartMode::warm;
    std::uint64_t seed = 1;
    int n_seeds = 5;
    std::uint64_t max_epochs_or_samples = 500;  // epoch budget (batch) / sample budget (online)
    double init_stats_weight = 1.0;             // weight of the A0, B0 prior

    void validate() const {
        if (k < 1) throw NegativeInput("config: k must be >= 1");
        if (!(epsilon > 0.0)) throw NegativeInput("config: epsilon must be > 0");
        if (beta < 1) throw NegativeInput("config: beta must be >= 1");
        if (!(r >= 0.0 && r <= 1.0)) throw NegativeInput("config: r must be in [0,1]");
        if (inner_iters < 0) throw NegativeInput("config: inner_iters must be >= 0");
        if (n_seeds < 1) throw NegativeInput("config: n_seeds must be >= 1");
        if (!(init_stats_weight >= 0.0))
            throw NegativeInput("config: init_stats_weight must be >= 0");
    }

    int effective_inner_iters() const {
        if (inner_iters > 0) return inner_iters;
        return restart == RestartMode::warm ? 1 : 100;
    }

    double effective_eta(Index f, Index k_) const {
        if (eta >= 0.0) return eta;
        return 1e-6 * std::sqrt(static_cast<double>(f) * static_cast<double>(k_));
    }
};

/// Normalizes every column of W to unit l1 mass and compensates A, B (and the
/// activations, when given) so that W*H and sqrt(A/B) are unchanged:
///   W_k /= s_k, A_k /= s_k, B_k *= s_k, H_k-th row *= s_k.
inline void rescale_dictionary(Dictionary& dict, Matrix* warm_h = nullptr) {
    require_same_shape(dict.w, dict.a, "rescale_dictionary: w vs a");
    require_same_shape(dict.w, dict.b, "rescale_dictionary: w vs b");
    if (warm_h && warm_h->rows() != dict.w.cols())
        throw ShapeMismatch("rescale_dictionary: warm_h rows vs W cols");
    for (Index k = 0; k < dict.w.cols(); ++k) {
        const double s = dict.w.col(k).sum();
        if (!(s > 0.0)) throw ZeroColumn("rescale_dictionary: dead atom " + std::to_string(k));
        dict.w.col(k) /= s;
        dict.a.col(k) /= s;
        dict.b.col(k) *= s;
        if (warm_h) warm_h->row(k) *= s;
    }
}

} // namespace isnmf
