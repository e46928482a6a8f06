#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <functional>
#include <istream>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <utility>
#include <vector>

#include "isnmf/batch.hpp"
#include "isnmf/io.hpp"
#include "isnmf/kernels.hpp"
#include "isnmf/model.hpp"
#include "isnmf/report.hpp"
#include "isnmf/rng.hpp"

namespace isnmf {

/// One frame handed to the trainer together with its dataset position (used
/// to address the warm-restart activation column).
struct Sample {
    Vector frame;
    std::uint64_t index = 0;
};

/// Frame provider abstraction: finite datasets are cycled with a fresh
/// permutation per cycle; streams are buffered and permuted per buffer.
class SampleSource {
public:
    virtual ~SampleSource() = default;

    virtual std::optional<Sample> next() = 0;

    /// Repositions to global sample ordinal t. Only seekable sources support
    /// this (needed for exact checkpoint resume).
    virtual void seek(std::uint64_t t) = 0;

    /// Number of distinct frames, when finite (defines rho = r^(beta/N)).
    virtual std::optional<std::uint64_t> size() const = 0;

    /// Whole dataset, when available in memory (warm restarts need it).
    virtual const Matrix* dataset() const { return nullptr; }
};

/// Cycles over the columns of an in-memory dataset, visiting each frame
/// exactly once per cycle in an order re-permuted every cycle. The
/// permutation of cycle c is a pure function of (seed, c), so seek() is exact.
class CyclingSource final : public SampleSource {
public:
    CyclingSource(const Matrix& v, std::uint64_t seed) : v_(&v), seed_(seed) {
        if (v.cols() == 0) throw EmptyDataset("CyclingSource: empty dataset");
        load_cycle(0);
    }

    std::optional<Sample> next() override {
        if (pos_ == perm_.size()) load_cycle(cycle_ + 1);
        const auto col = perm_[pos_++];
        return Sample{v_->col(static_cast<Index>(col)), col};
    }

    void seek(std::uint64_t t) override {
        const auto n = static_cast<std::uint64_t>(v_->cols());
        load_cycle(t / n);
        pos_ = static_cast<std::size_t>(t % n);
    }

    std::optional<std::uint64_t> size() const override {
        return static_cast<std::uint64_t>(v_->cols());
    }

    const Matrix* dataset() const override { return v_; }

private:
    void load_cycle(std::uint64_t cycle) {
        cycle_ = cycle;
        pos_ = 0;
        perm_.resize(static_cast<std::size_t>(v_->cols()));
        std::iota(perm_.begin(), perm_.end(), std::uint64_t(0));
        auto rng = make_engine(mix_seed(seed_, cycle));
        for (std::size_t i = perm_.size(); i > 1; --i)
            std::swap(perm_[i - 1], perm_[static_cast<std::size_t>(uniform_below(rng, i))]);
    }

    const Matrix* v_;
    std::uint64_t seed_;
    std::uint64_t cycle_ = 0;
    std::size_t pos_ = 0;
    std::vector<std::uint64_t> perm_;
};

/// Streams frames produced by a deterministic generator function, buffered
/// and permuted per buffer. Constant memory; seek() regenerates the buffer.
class GeneratorSource final : public SampleSource {
public:
    using Generator = std::function<Vector(std::uint64_t)>;

    GeneratorSource(Generator gen, std::optional<std::uint64_t> total,
                    std::size_t buffer_frames, std::uint64_t seed, bool permute = true)
        : gen_(std::move(gen)),
          total_(total),
          buffer_(std::max<std::size_t>(1, buffer_frames)),
          seed_(seed),
          permute_(permute) {}

    std::optional<Sample> next() override {
        if (total_ && t_ >= *total_) return std::nullopt;
        const std::uint64_t block = t_ / buffer_;
        if (block != loaded_block_ || order_.empty()) load_block(block);
        const std::uint64_t within = t_ % buffer_;
        const std::uint64_t idx = block * buffer_ + order_[static_cast<std::size_t>(within)];
        ++t_;
        return Sample{gen_(idx), idx};
    }

    void seek(std::uint64_t t) override { t_ = t; }

    std::optional<std::uint64_t> size() const override { return std::nullopt; }

private:
    void load_block(std::uint64_t block) {
        std::size_t len = buffer_;
        if (total_) {
            const std::uint64_t start = block * buffer_;
            len = static_cast<std::size_t>(std::min<std::uint64_t>(buffer_, *total_ - start));
        }
        order_.resize(len);
        std::iota(order_.begin(), order_.end(), std::uint64_t(0));
        if (permute_) {
            auto rng = make_engine(mix_seed(seed_, block));
            for (std::size_t i = len; i > 1; --i)
                std::swap(order_[i - 1], order_[static_cast<std::size_t>(uniform_below(rng, i))]);
        }
        loaded_block_ = block;
    }

    Generator gen_;
    std::optional<std::uint64_t> total_;
    std::size_t buffer_;
    std::uint64_t seed_;
    bool permute_;
    std::uint64_t t_ = 0;
    std::uint64_t loaded_block_ = ~std::uint64_t(0);
    std::vector<std::uint64_t> order_;
};

/// Reads the headerless chunked wire format from a stream: repeated
/// [u64 LE frame count | count * F float64 LE frames]. Frames are buffered
/// and permuted per buffer to break local correlations. Not seekable.
class ChunkStreamSource final : public SampleSource {
public:
    ChunkStreamSource(std::istream& in, Index rows, std::size_t buffer_frames,
                      std::uint64_t seed)
        : in_(&in), rows_(rows), buffer_(std::max<std::size_t>(1, buffer_frames)), seed_(seed) {
        if (rows < 1) throw ShapeMismatch("ChunkStreamSource: rows must be >= 1");
    }

    std::optional<Sample> next() override {
        if (ready_.empty() && !fill_buffer()) return std::nullopt;
        Sample s{std::move(ready_.front()), t_++};
        ready_.pop_front();
        return s;
    }

    void seek(std::uint64_t) override {
        throw IoError("ChunkStreamSource: stream input is not seekable");
    }

    std::optional<std::uint64_t> size() const override { return std::nullopt; }

private:
    bool fill_buffer() {
        while (pending_.size() < buffer_ && read_chunk()) {
        }
        if (pending_.empty()) return false;
        const std::size_t len = std::min(buffer_, pending_.size());
        std::vector<std::uint64_t> order(len);
        std::iota(order.begin(), order.end(), std::uint64_t(0));
        auto rng = make_engine(mix_seed(seed_, block_++));
        for (std::size_t i = len; i > 1; --i)
            std::swap(order[i - 1], order[static_cast<std::size_t>(uniform_below(rng, i))]);
        for (std::size_t i = 0; i < len; ++i)
            ready_.push_back(std::move(pending_[static_cast<std::size_t>(order[i])]));
        pending_.erase(pending_.begin(), pending_.begin() + static_cast<std::ptrdiff_t>(len));
        return true;
    }

    bool read_chunk() {
        std::uint64_t count;
        char head[8];
        in_->read(head, 8);
        if (in_->gcount() == 0) return false;
        if (in_->gcount() != 8) throw TruncatedPayload("stream chunk header truncated");
        count = 0;
        for (int i = 0; i < 8; ++i)
            count |= static_cast<std::uint64_t>(static_cast<unsigned char>(head[i])) << (8 * i);
        for (std::uint64_t f = 0; f < count; ++f) {
            Vector frame(rows_);
            detail::read_f64_block(*in_, frame.data(), static_cast<std::size_t>(rows_),
                                   "stream frame");
            if (!frame.allFinite() || (frame.array() < 0).any())
                throw NonFiniteEntry("stream frame with invalid entries");
            pending_.push_back(std::move(frame));
        }
        return true;
    }

    std::istream* in_;
    Index rows_;
    std::size_t buffer_;
    std::uint64_t seed_;
    std::uint64_t t_ = 0;
    std::uint64_t block_ = 0;
    std::vector<Vector> pending_;
    std::deque<Vector> ready_;
};

/// Streaming trainer state: the dictionary with its discounted statistics,
/// the sample counter, and the accumulators of the mini-batch in flight.
struct OnlineState {
    Dictionary dict;
    std::uint64_t t = 0;
    Matrix pending_a;
    Matrix pending_b;
    Matrix warm_h;  // K x N in warm mode, empty in fresh mode
    double rho = 1.0;
    RestartMode restart = RestartMode::fresh;
    std::uint64_t seed = 0;
    double last_delta = std::numeric_limits<double>::infinity();
    std::uint64_t commits = 0;
    TrainReport trace;

    // running mean divergence of the mini-batch in flight (trace proxy)
    double pending_div = 0.0;
    std::uint64_t pending_count = 0;
    double last_minibatch_obj = 0.0;

    // scratch, not part of the logical state
    Vector scratch_approx;
    Vector scratch_h;

    Index rows() const { return dict.w.rows(); }
    Index atoms() const { return dict.w.cols(); }
};

/// Builds the initial online state from a column-normalized positive W0.
/// A0 = delta * W0^2 and B0 = delta * 1 make W0 the exact fixed point of the
/// dictionary update at t = 0. `dataset_size` selects rho = r^(beta/N);
/// an unbounded stream means rho = 1.
inline OnlineState make_online_state(const Matrix& w0, const SolverConfig& config,
                                     std::optional<std::uint64_t> dataset_size,
                                     const Matrix* dataset = nullptr) {
    config.validate();
    if ((w0.array() < 0.0).any() || !w0.allFinite())
        throw NonPositiveInit("online: W0 must be nonnegative and finite");
    for (Index k = 0; k < w0.cols(); ++k) {
        const double s = w0.col(k).sum();
        if (!(s > 0.0)) throw ZeroColumn("online: W0 has an all-zero column");
        if (std::abs(s - 1.0) > 1e-8)
            throw NonPositiveInit("online: W0 columns must be l1-normalized");
    }
    OnlineState st;
    st.dict.w = w0;
    st.dict.a = config.init_stats_weight * w0.array().square();
    st.dict.b = Matrix::Constant(w0.rows(), w0.cols(), config.init_stats_weight);
    st.pending_a = Matrix::Zero(w0.rows(), w0.cols());
    st.pending_b = Matrix::Zero(w0.rows(), w0.cols());
    st.restart = config.restart;
    st.seed = config.seed;
    st.rho = dataset_size
                 ? std::pow(config.r, static_cast<double>(config.beta) /
                                          static_cast<double>(*dataset_size))
                 : 1.0;
    if (config.restart == RestartMode::warm) {
        if (!dataset)
            throw EmptyDataset("online: warm restarts need an in-memory dataset");
        st.warm_h = default_h0(*dataset, w0, config.epsilon);
    }
    st.scratch_approx.resize(w0.rows());
    st.trace.stage = "online";
    st.trace.config = config;
    st.trace.seed = config.seed;
    return st;
}

namespace detail {

// Fresh-restart activation initializer: entries uniform in (0,1] scaled to the
// frame/dictionary magnitudes; a pure function of (seed, t).
inline void fresh_h_init(const Vector& v, const Matrix& w, double epsilon,
                         std::uint64_t seed, std::uint64_t t, Vector& h) {
    const double scale =
        std::max(v.mean(), epsilon) / (static_cast<double>(w.cols()) * w.mean());
    auto rng = make_engine(mix_seed(seed, t));
    h.resize(w.cols());
    for (Index k = 0; k < h.size(); ++k) h[k] = scale * uniform_open01(rng);
}

inline double smoothed_divergence_to(const Vector& v, const Vector& approx_plus_eps,
                                     double epsilon) {
    double acc = 0.0;
    for (Index i = 0; i < v.size(); ++i)
        acc += is_term((v[i] + epsilon - approx_plus_eps[i]) / approx_plus_eps[i]);
    return acc;
}

} // namespace detail

/// Folds the pending mini-batch into the discounted statistics and refreshes
/// the dictionary:
///   A <- rho * A + sum a^(s),  B <- rho * B + sum b^(s),  W <- sqrt(A/B),
/// then the column rescale. Past information is scaled by rho; the fresh
/// mini-batch enters at full weight.
inline void dictionary_commit(OnlineState& state) {
    state.dict.a = state.rho * state.dict.a + state.pending_a;
    state.dict.b = state.rho * state.dict.b + state.pending_b;
    const Matrix w_old = state.dict.w;
    state.dict.w = update_w(state.dict.a, state.dict.b, w_old);
    if (!state.dict.w.allFinite())
        throw NumericalFailure("online: non-finite dictionary update at t = " +
                               std::to_string(state.t));
    rescale_dictionary(state.dict,
                       state.restart == RestartMode::warm ? &state.warm_h : nullptr);
    state.last_delta = frobenius_delta(state.dict.w, w_old);
    state.pending_a.setZero();
    state.pending_b.setZero();
    state.last_minibatch_obj =
        state.pending_count ? state.pending_div / static_cast<double>(state.pending_count)
                            : 0.0;
    state.pending_div = 0.0;
    state.pending_count = 0;
    ++state.commits;
}

/// Processes one sample: fits its activation (warm-started from the stored
/// column or fresh from a (seed, t)-seeded init), accumulates its statistics,
/// and commits the dictionary every beta samples.
inline void online_step(OnlineState& state, const Sample& sample, const SolverConfig& config) {
    if (sample.frame.size() != state.rows())
        throw ShapeMismatch("online_step: frame size vs dictionary rows");
    const double eps = config.epsilon;
    const int iters = config.effective_inner_iters();

    if (state.restart == RestartMode::warm) {
        if (static_cast<Index>(sample.index) >= state.warm_h.cols())
            throw ShapeMismatch("online_step: sample index outside warm activation store");
        state.scratch_h = state.warm_h.col(static_cast<Index>(sample.index));
    } else {
        detail::fresh_h_init(sample.frame, state.dict.w, eps, state.seed, state.t,
                             state.scratch_h);
    }
    state.scratch_h = solve_h(sample.frame, state.dict.w, state.scratch_h, iters, eps);
    if (state.restart == RestartMode::warm)
        state.warm_h.col(static_cast<Index>(sample.index)) = state.scratch_h;

    detail::accumulate_sample_stats(sample.frame, state.dict.w, state.scratch_h, eps,
                                    state.pending_a, state.pending_b, state.scratch_approx);
    // scratch_approx now holds eps + W h
    state.pending_div +=
        detail::smoothed_divergence_to(sample.frame, state.scratch_approx, eps);
    state.pending_count += 1;
    state.t += 1;
    if (state.t % static_cast<std::uint64_t>(config.beta) == 0) dictionary_commit(state);
}

/// Invoked after every dictionary commit (timer paused); return false to stop.
using OnlineCallback = std::function<bool(OnlineState&)>;

/// Continues training from an existing state (used for checkpoint resume).
/// The source is positioned at state.t before any sample is drawn.
inline void online_resume(OnlineState& state, SampleSource& source, const SolverConfig& config,
                          const OnlineCallback& callback = {},
                          const Clock& clock = steady_clock_seconds()) {
    config.validate();
    const std::uint64_t budget = config.max_epochs_or_samples;
    const double eta = config.effective_eta(state.rows(), state.atoms());
    if (state.t > 0 && state.t < budget) source.seek(state.t);

    detail::PausableTimer timer(clock);
    bool stop = false;
    while (!stop) {
        if (state.t >= budget) break;
        auto sample = source.next();
        if (!sample) break;
        online_step(state, *sample, config);
        if (state.t % static_cast<std::uint64_t>(config.beta) == 0) {
            timer.pause();
            state.trace.points.push_back(
                {state.t, timer.elapsed(), state.last_minibatch_obj, std::nullopt});
            if (callback && !callback(state)) stop = true;
            timer.resume();
            if (eta > 0.0 && state.last_delta < eta) stop = true;
        }
    }
    timer.pause();
    if (state.trace.points.empty() && state.pending_count > 0) {
        state.trace.points.push_back(
            {state.t, timer.elapsed(),
             state.pending_div / static_cast<double>(state.pending_count), std::nullopt});
    }
    if (!state.trace.points.empty())
        state.trace.final_train_obj = state.trace.points.back().train_obj;
}

/// Runs the streaming trainer over a sample source until the stopping rule
/// ||W_t - W_{t-beta}||_F < eta holds at a commit boundary, the sample budget
/// is exhausted, or the source ends. Fresh mode keeps O(FK) state; warm mode
/// stores the K x N activations.
inline OnlineState online_train(SampleSource& source, const SolverConfig& config,
                                const Matrix& w0, const OnlineCallback& callback = {},
                                const Clock& clock = steady_clock_seconds()) {
    OnlineState state = make_online_state(w0, config, source.size(), source.dataset());
    online_resume(state, source, config, callback, clock);
    return state;
}

// --- checkpointing ------------------------------------------------------
//
// "ISCK" | u32 version | u32 restart | u64 t | u64 seed | u64 commits |
// f64 rho | matrices W, A, B, pending_a, pending_b [, warm_h in warm mode].
// Together with the (seed, t)-derived per-sample randomness this reproduces
// a fresh-mode run bit-exactly from any boundary.

inline constexpr char kCheckpointMagic[4] = {'I', 'S', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

inline void save_checkpoint(std::ostream& out, const OnlineState& state) {
    detail::write_bytes(out, kCheckpointMagic, 4);
    detail::write_le<std::uint32_t>(out, kCheckpointFormatVersion);
    detail::write_le<std::uint32_t>(out, state.restart == RestartMode::warm ? 0u : 1u);
    detail::write_le<std::uint64_t>(out, state.t);
    detail::write_le<std::uint64_t>(out, state.seed);
    detail::write_le<std::uint64_t>(out, state.commits);
    std::uint64_t rho_bits;
    std::memcpy(&rho_bits, &state.rho, sizeof(rho_bits));
    detail::write_le<std::uint64_t>(out, rho_bits);
    save_matrix(out, state.dict.w);
    save_matrix(out, state.dict.a);
    save_matrix(out, state.dict.b);
    save_matrix(out, state.pending_a);
    save_matrix(out, state.pending_b);
    if (state.restart == RestartMode::warm) save_matrix(out, state.warm_h);
}

inline void save_checkpoint(const std::string& path, const OnlineState& state) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    save_checkpoint(out, state);
    out.flush();
    if (!out) throw IoError("write failed: " + path);
}

inline OnlineState load_checkpoint(std::istream& in) {
    char magic[4];
    detail::read_bytes(in, magic, 4, "checkpoint magic");
    if (std::memcmp(magic, kCheckpointMagic, 4) != 0) throw BadMagic("not a checkpoint file");
    const auto version = detail::read_le<std::uint32_t>(in, "checkpoint version");
    if (version != kCheckpointFormatVersion)
        throw BadMagic("unsupported checkpoint version " + std::to_string(version));
    const auto restart = detail::read_le<std::uint32_t>(in, "restart mode");
    if (restart > 1) throw UnsupportedFormat("invalid restart mode in checkpoint");
    OnlineState st;
    st.restart = restart == 0 ? RestartMode::warm : RestartMode::fresh;
    st.t = detail::read_le<std::uint64_t>(in, "t");
    st.seed = detail::read_le<std::uint64_t>(in, "seed");
    st.commits = detail::read_le<std::uint64_t>(in, "commits");
    const auto rho_bits = detail::read_le<std::uint64_t>(in, "rho");
    std::memcpy(&st.rho, &rho_bits, sizeof(st.rho));
    st.dict.w = load_matrix(in);
    st.dict.a = load_matrix(in);
    st.dict.b = load_matrix(in);
    st.pending_a = load_matrix(in);
    st.pending_b = load_matrix(in);
    if (st.restart == RestartMode::warm) st.warm_h = load_matrix(in);
    st.scratch_approx.resize(st.dict.w.rows());
    st.trace.stage = "online";
    st.trace.seed = st.seed;
    return st;
}

inline OnlineState load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    return load_checkpoint(in);
}

} // namespace isnmf
