#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "isnmf/batch.hpp"
#include "isnmf/online.hpp"
#include "isnmf/report.hpp"

namespace isnmf {

/// Held-out fit: refits activations from a fresh (seed-deterministic) random
/// init with `inner_iters` multiplicative updates at frozen W, and returns the
/// mean smoothed divergence per frame. W is never modified.
inline double evaluate_heldout(const Matrix& w, const Matrix& test, double epsilon,
                               int inner_iters = 100, std::uint64_t seed = 0x45u) {
    if (w.rows() != test.rows()) throw ShapeMismatch("evaluate_heldout: W rows vs test rows");
    if (test.cols() == 0) throw EmptyDataset("evaluate_heldout: empty test set");
    const double scale =
        std::max(test.mean(), epsilon) / (static_cast<double>(w.cols()) * w.mean());
    auto rng = make_engine(mix_seed(seed, 0xE7A1ULL));
    Matrix h(w.cols(), test.cols());
    for (Index j = 0; j < h.cols(); ++j)
        for (Index i = 0; i < h.rows(); ++i) h(i, j) = scale * uniform_open01(rng);

    Matrix approx(test.rows(), test.cols()), num(h.rows(), h.cols()), den(h.rows(), h.cols());
    for (int it = 0; it < inner_iters; ++it) {
        approx.noalias() = w * h;
        approx.array() += epsilon;
        num.noalias() = w.transpose() * ((test.array() + epsilon) / approx.array().square()).matrix();
        den.noalias() = w.transpose() * approx.cwiseInverse();
        h.array() *= (num.array() / den.array()).sqrt();
    }
    return objective(test, w, h, epsilon);
}

struct GridPoint {
    double r = 0.7;
    std::uint64_t beta = 1000;
};

enum class TrainMode { batch, online };

struct ExperimentOptions {
    int eval_every_epochs = 1;     // held-out cadence, batch
    int eval_every_commits = 10;   // held-out cadence, online
    int heldout_inner_iters = 100;
    std::string model_dir;         // when set, best dictionaries are written here
};

/// Trains one run per (grid point, seed), recording traces with periodic
/// held-out evaluation (timer paused while evaluating). Seeds are
/// config.seed + i for i in [0, n_seeds). Returns all reports; use
/// select_best_per_grid_point for the best-seed view.
inline std::vector<TrainReport> run_experiment(const Matrix& train, const Matrix& test,
                                               const SolverConfig& base,
                                               const std::vector<GridPoint>& grid,
                                               TrainMode mode,
                                               const ExperimentOptions& opts = {},
                                               const Clock& clock = steady_clock_seconds()) {
    base.validate();
    std::vector<TrainReport> reports;
    for (const auto& gp : grid) {
        for (int s = 0; s < base.n_seeds; ++s) {
            SolverConfig config = base;
            config.r = gp.r;
            config.beta = static_cast<int>(gp.beta);
            config.seed = base.seed + static_cast<std::uint64_t>(s);
            config.n_seeds = 1;

            const Matrix w0 = init_from_samples(train, config.k, config.seed, config.epsilon);
            TrainReport rep;
            if (mode == TrainMode::batch) {
                int since_eval = 0;
                BatchState st = batch_train(
                    train, config, w0, default_h0(train, w0, config.epsilon),
                    [&](BatchState& bs) {
                        if (++since_eval >= opts.eval_every_epochs) {
                            since_eval = 0;
                            bs.trace.points.back().heldout =
                                evaluate_heldout(bs.w, test, config.epsilon,
                                                 opts.heldout_inner_iters, config.seed);
                        }
                        return true;
                    },
                    clock);
                rep = st.trace;
            } else {
                CyclingSource source(train, config.seed);
                int since_eval = 0;
                OnlineState st = online_train(
                    source, config, w0,
                    [&](OnlineState& os) {
                        if (++since_eval >= opts.eval_every_commits) {
                            since_eval = 0;
                            os.trace.points.back().heldout =
                                evaluate_heldout(os.dict.w, test, config.epsilon,
                                                 opts.heldout_inner_iters, config.seed);
                        }
                        return true;
                    },
                    clock);
                rep = st.trace;
                // warm runs over a finite set admit the exact train objective
                if (config.restart == RestartMode::warm)
                    rep.final_train_obj = objective(train, st.dict.w, st.warm_h, config.epsilon);
            }
            reports.push_back(std::move(rep));
        }
    }
    return reports;
}

/// Index of the best (lowest final train objective) report for each grid
/// point, assuming run_experiment's layout: grid-major, n_seeds runs each.
inline std::vector<std::size_t> select_best_per_grid_point(
    const std::vector<TrainReport>& reports, std::size_t grid_size, int n_seeds) {
    std::vector<std::size_t> best;
    for (std::size_t g = 0; g < grid_size; ++g) {
        std::size_t arg = g * static_cast<std::size_t>(n_seeds);
        for (int s = 1; s < n_seeds; ++s) {
            const std::size_t i = g * static_cast<std::size_t>(n_seeds) +
                                  static_cast<std::size_t>(s);
            if (reports[i].final_train_obj < reports[arg].final_train_obj) arg = i;
        }
        best.push_back(arg);
    }
    return best;
}

} // namespace isnmf
