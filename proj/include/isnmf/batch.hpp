#pragma once

#include <chrono>
#include <functional>
#include <utility>

#include "isnmf/kernels.hpp"
#include "isnmf/model.hpp"
#include "isnmf/report.hpp"
#include "isnmf/rng.hpp"

namespace isnmf {

/// Seconds-valued clock, injectable so that runs can be made reproducible in
/// tests. Defaults to std::chrono::steady_clock.
using Clock = std::function<double()>;

inline Clock steady_clock_seconds() {
    return [] {
        return std::chrono::duration<double>(
                   std::chrono::steady_clock::now().time_since_epoch())
            .count();
    };
}

namespace detail {

// Accumulates wall-clock spent in training work, excluding callback and
// evaluation time.
class PausableTimer {
public:
    explicit PausableTimer(Clock clock) : clock_(std::move(clock)) { mark_ = clock_(); }
    void pause() { acc_ += clock_() - mark_; }
    void resume() { mark_ = clock_(); }
    double elapsed() const { return acc_; }

private:
    Clock clock_;
    double acc_ = 0.0;
    double mark_ = 0.0;
};

} // namespace detail

struct BatchState {
    Matrix w;
    Matrix h;
    std::uint64_t epoch = 0;
    double last_delta = 0.0;
    TrainReport trace;
};

/// Invoked after every epoch (timer paused); return false to stop training.
using BatchCallback = std::function<bool(BatchState&)>;

/// Draws K dictionary columns uniformly with replacement from the columns of
/// V, floors each entry at epsilon, and l1-normalizes. Deterministic in seed.
inline Matrix init_from_samples(const Matrix& v, int k, std::uint64_t seed,
                                double epsilon = 1e-12) {
    if (v.cols() < 1) throw EmptyDataset("init_from_samples: empty dataset");
    if (k < 1) throw NegativeInput("init_from_samples: k must be >= 1");
    auto rng = make_engine(mix_seed(seed, 0x57'696e69'74ULL));
    Matrix w(v.rows(), k);
    for (int j = 0; j < k; ++j) {
        const auto idx = uniform_below(rng, static_cast<std::uint64_t>(v.cols()));
        w.col(j) = v.col(static_cast<Index>(idx)).cwiseMax(epsilon);
        w.col(j) /= w.col(j).sum();
    }
    return w;
}

/// Flat initial activations scaled so that W*H matches the data scale:
/// every entry mean(V) / (K * mean(W)).
inline Matrix default_h0(const Matrix& v, const Matrix& w, double epsilon = 1e-12) {
    const double scale =
        std::max(v.mean(), epsilon) / (static_cast<double>(w.cols()) * w.mean());
    return Matrix::Constant(w.cols(), v.cols(), scale);
}

/// Full-data IS-NMF by alternating multiplicative updates. One epoch: a single
/// multiplicative pass over all of H at fixed W, then the closed-form W update
/// from fresh statistics, then the column rescale. Stops when
/// ||W_t - W_{t-1}||_F < eta or the epoch budget runs out.
inline BatchState batch_train(const Matrix& v, const SolverConfig& config, const Matrix& w0,
                              const Matrix& h0, const BatchCallback& callback = {},
                              const Clock& clock = steady_clock_seconds()) {
    config.validate();
    if (v.cols() == 0) throw EmptyDataset("batch_train: empty dataset");
    if (w0.rows() != v.rows() || h0.cols() != v.cols() || h0.rows() != w0.cols())
        throw ShapeMismatch("batch_train: inconsistent V/W0/H0 shapes");
    if ((w0.array() <= 0.0).any() || (h0.array() <= 0.0).any())
        throw NonPositiveInit("batch_train: w0 and h0 must be strictly positive");

    const double eps = config.epsilon;
    const double eta = config.effective_eta(w0.rows(), w0.cols());
    const std::uint64_t max_epochs = config.max_epochs_or_samples;

    BatchState state;
    state.w = w0;
    state.h = h0;
    state.trace.stage = "batch";
    state.trace.config = config;
    state.trace.seed = config.seed;

    double prev_obj = objective(v, state.w, state.h, eps);
    detail::PausableTimer timer(clock);
    Matrix approx(v.rows(), v.cols()), num(h0.rows(), h0.cols()), den(h0.rows(), h0.cols());
    for (std::uint64_t epoch = 1; epoch <= max_epochs; ++epoch) {
        // one multiplicative pass over H at fixed W
        approx.noalias() = state.w * state.h;
        approx.array() += eps;
        num.noalias() =
            state.w.transpose() * ((v.array() + eps) / approx.array().square()).matrix();
        den.noalias() = state.w.transpose() * approx.cwiseInverse();
        state.h.array() *= (num.array() / den.array()).sqrt();

        SampleStats stats = batch_stats(v, state.w, state.h, eps);
        Dictionary dict{update_w(stats.a, stats.b, state.w), std::move(stats.a),
                        std::move(stats.b)};
        if (!dict.w.allFinite())
            throw NumericalFailure("batch_train: non-finite dictionary update");
        rescale_dictionary(dict, &state.h);

        state.last_delta = frobenius_delta(dict.w, state.w);
        state.w = std::move(dict.w);
        state.epoch = epoch;

        const double obj = objective(v, state.w, state.h, eps);
        if (obj > prev_obj + 1e-6 * prev_obj + 1e-15)
            throw DivergedObjective("batch_train: objective increased at epoch " +
                                    std::to_string(epoch));
        prev_obj = obj;

        timer.pause();
        state.trace.points.push_back({epoch, timer.elapsed(), obj, std::nullopt});
        bool go = true;
        if (callback) go = callback(state);
        timer.resume();
        if (!go || state.last_delta < eta) break;
    }
    state.trace.final_train_obj = prev_obj;
    return state;
}

} // namespace isnmf
