#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "isnmf/kernels.hpp"
#include "isnmf/rng.hpp"
#include "oracles.hpp"

using namespace isnmf;

namespace {

Matrix random_positive(Index rows, Index cols, std::uint64_t seed, double lo = 0.05,
                       double hi = 2.0) {
    auto rng = make_engine(seed);
    Matrix m(rows, cols);
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i) m(i, j) = lo + (hi - lo) * uniform01(rng);
    return m;
}

Vector random_positive_vec(Index n, std::uint64_t seed, double lo = 0.05, double hi = 2.0) {
    return random_positive(n, 1, seed, lo, hi).col(0);
}

} // namespace

TEST_CASE("is_divergence values and properties", "[kernels]") {
    const double eps = 1e-12;

    SECTION("zero iff equal") {
        Vector y = random_positive_vec(16, 1);
        CHECK(is_divergence(y, y, eps) == 0.0);
        Vector x = y;
        x[3] *= 1.5;
        CHECK(is_divergence(y, x, eps) > 0.0);
    }

    SECTION("frozen value for (1,1) vs (2,2)") {
        Vector y = Vector::Constant(2, 1.0);
        Vector x = Vector::Constant(2, 2.0);
        const double expect = 2.0 * (0.5 + std::log(2.0) - 1.0);  // 0.38629436...
        CHECK_THAT(is_divergence(y, x, 1e-15), Catch::Matchers::WithinRel(expect, 1e-9));
    }

    SECTION("scale invariance with scaled floor") {
        auto rng = make_engine(7);
        for (int trial = 0; trial < 50; ++trial) {
            Vector y = random_positive_vec(8, 100 + trial);
            Vector x = random_positive_vec(8, 200 + trial);
            const double lambda = 0.01 + 100.0 * uniform01(rng);
            const double d0 = is_divergence(y, x, 1e-9);
            const double d1 = is_divergence(lambda * y, lambda * x, lambda * 1e-9);
            CHECK_THAT(d1, Catch::Matchers::WithinRel(d0, 1e-10));
        }
    }

    SECTION("nonnegative on random pairs, matches the naive formula") {
        for (int trial = 0; trial < 100; ++trial) {
            Vector y = random_positive_vec(12, 300 + trial);
            Vector x = random_positive_vec(12, 400 + trial);
            const double d = is_divergence(y, x, eps);
            CHECK(d >= 0.0);
            CHECK_THAT(d, Catch::Matchers::WithinRel(oracles::is_divergence_naive(y, x, eps),
                                                     1e-10));
        }
    }

    SECTION("errors") {
        Vector y = Vector::Ones(3), x = Vector::Ones(4);
        CHECK_THROWS_AS(is_divergence(y, x, eps), ShapeMismatch);
        Vector neg = Vector::Ones(3);
        neg[0] = -0.5;
        CHECK_THROWS_AS(is_divergence(neg, neg, eps), NegativeInput);
        CHECK_THROWS_AS(is_divergence(y, y, 0.0), NegativeInput);
    }
}

TEST_CASE("solve_h descends and finds optima", "[kernels]") {
    const double eps = 1e-12;

    SECTION("exact reconstruction is a fixed point") {
        Matrix w = random_positive(6, 2, 11);
        Vector h_star = random_positive_vec(2, 12);
        Vector v = w * h_star;
        Vector h = solve_h(v, w, h_star, 25, 1e-14);
        CHECK((h - h_star).cwiseAbs().maxCoeff() < 1e-9);
    }

    SECTION("1-d optimum is v / W") {
        Matrix w(1, 1);
        w << 2.0;
        Vector v(1);
        v << 4.0;
        Vector h0 = Vector::Constant(1, 0.3);
        Vector h = solve_h(v, w, h0, 100, eps);
        CHECK_THAT(h[0], Catch::Matchers::WithinAbs(2.0, 1e-6));
    }

    SECTION("divergence is non-increasing across iterations") {
        Matrix w = random_positive(9, 3, 13);
        Vector v = random_positive_vec(9, 14);
        Vector h = random_positive_vec(3, 15);
        double prev = is_divergence(v, w * h, eps);
        for (int it = 0; it < 60; ++it) {
            h = solve_h(v, w, h, 1, eps);
            const double cur = is_divergence(v, w * h, eps);
            CHECK(cur <= prev + 1e-10);
            prev = cur;
        }
    }

    SECTION("matches a brute-force grid oracle") {
        for (int trial = 0; trial < 5; ++trial) {
            Matrix w = random_positive(5, 2, 500 + trial, 0.1, 1.0);
            Vector v = random_positive_vec(5, 600 + trial, 0.2, 2.0);
            Vector h = solve_h(v, w, Vector::Constant(2, 0.5), 100, eps);
            const double got = is_divergence(v, w * h, eps);
            const double oracle = oracles::grid_search_divergence(v, w, eps);
            CHECK(got <= oracle + 1e-4);
            CHECK(got >= -1e-12);
        }
    }

    SECTION("rejects non-positive inits") {
        Matrix w = random_positive(3, 2, 16);
        Vector v = random_positive_vec(3, 17);
        Vector h0 = Vector::Zero(2);
        CHECK_THROWS_AS(solve_h(v, w, h0, 5, eps), NonPositiveInit);
    }
}

TEST_CASE("sample statistics", "[kernels]") {
    SECTION("hand-evaluated 1x1 case without floor") {
        Matrix w(1, 1);
        w << 2.0;
        Vector v(1), h(1);
        v << 8.0;
        h << 1.0;
        SampleStats s = sample_stats(v, w, h, 1e-300);
        CHECK_THAT(s.a(0, 0), Catch::Matchers::WithinRel(8.0, 1e-12));
        CHECK_THAT(s.b(0, 0), Catch::Matchers::WithinRel(0.5, 1e-12));
        CHECK_THAT(std::sqrt(s.a(0, 0) / s.b(0, 0)), Catch::Matchers::WithinRel(4.0, 1e-12));
    }

    SECTION("hand-evaluated case with epsilon = 1") {
        Matrix w(1, 1);
        w << 1.0;
        Vector v(1), h(1);
        v << 0.0;
        h << 1.0;
        SampleStats s = sample_stats(v, w, h, 1.0);
        CHECK_THAT(s.a(0, 0), Catch::Matchers::WithinRel(0.25, 1e-12));
        CHECK_THAT(s.b(0, 0), Catch::Matchers::WithinRel(0.5, 1e-12));
    }

    SECTION("fixed-point identity sqrt(a/b) = W at exact reconstruction") {
        Matrix w = random_positive(7, 3, 21);
        Vector h = random_positive_vec(3, 22);
        Vector v = w * h;
        SampleStats s = sample_stats(v, w, h, 1e-300);
        Matrix ratio = (s.a.array() / s.b.array()).sqrt();
        CHECK((ratio - w).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("batch statistics agree with per-sample sums", "[kernels]") {
    const double eps = 1e-12;
    Matrix v = random_positive(6, 9, 31);
    Matrix w = random_positive(6, 3, 32);
    Matrix h = random_positive(3, 9, 33);

    SECTION("single column equals sample_stats") {
        SampleStats one = batch_stats(v.col(0), w, h.col(0), eps);
        SampleStats ref = sample_stats(v.col(0), w, h.col(0), eps);
        CHECK((one.a - ref.a).cwiseAbs().maxCoeff() < 1e-14);
        CHECK((one.b - ref.b).cwiseAbs().maxCoeff() < 1e-14);
    }

    SECTION("equals the sum over columns") {
        SampleStats full = batch_stats(v, w, h, eps);
        Matrix sa = Matrix::Zero(6, 3), sb = Matrix::Zero(6, 3);
        for (Index n = 0; n < v.cols(); ++n) {
            SampleStats s = sample_stats(v.col(n), w, h.col(n), eps);
            sa += s.a;
            sb += s.b;
        }
        CHECK(((full.a - sa).cwiseAbs().array() / sa.array()).maxCoeff() < 1e-10);
        CHECK(((full.b - sb).cwiseAbs().array() / sb.array()).maxCoeff() < 1e-10);
    }

    SECTION("sqrt(A/B) recovers W on an exact factorization") {
        Matrix v_exact = w * h;
        SampleStats s = batch_stats(v_exact, w, h, 1e-300);
        Matrix ratio = (s.a.array() / s.b.array()).sqrt();
        CHECK((ratio - w).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("update_w is the auxiliary argmin", "[kernels]") {
    SECTION("frozen values") {
        Matrix a = Matrix::Constant(3, 2, 0.7);
        Matrix prev = Matrix::Constant(3, 2, 0.123);
        CHECK((update_w(a, a, prev) - Matrix::Ones(3, 2)).cwiseAbs().maxCoeff() < 1e-15);

        Matrix a1(1, 1), b1(1, 1);
        a1 << 4.0;
        b1 << 1.0;
        CHECK_THAT(update_w(a1, b1, Matrix::Ones(1, 1))(0, 0),
                   Catch::Matchers::WithinRel(2.0, 1e-15));
    }

    SECTION("dead entries keep the previous value") {
        Matrix a = Matrix::Zero(2, 1), b = Matrix::Zero(2, 1);
        Matrix prev(2, 1);
        prev << 0.3, 0.7;
        a(0, 0) = 1.0;
        b(0, 0) = 4.0;
        Matrix w = update_w(a, b, prev);
        CHECK_THAT(w(0, 0), Catch::Matchers::WithinRel(0.5, 1e-15));
        CHECK(w(1, 0) == 0.7);
    }

    SECTION("a > 0 with b = 0 is inconsistent") {
        Matrix a = Matrix::Ones(1, 1), b = Matrix::Zero(1, 1);
        CHECK_THROWS_AS(update_w(a, b, a), InconsistentStats);
    }

    SECTION("any +/-1 percent perturbation increases the auxiliary value") {
        auto rng = make_engine(55);
        for (int trial = 0; trial < 20; ++trial) {
            Matrix a = random_positive(4, 3, 700 + trial);
            Matrix b = random_positive(4, 3, 800 + trial);
            Matrix w = update_w(a, b, Matrix::Ones(4, 3));
            const double base = aux_value(a, b, w);
            for (int probe = 0; probe < 10; ++probe) {
                const Index i = static_cast<Index>(uniform_below(rng, 4));
                const Index j = static_cast<Index>(uniform_below(rng, 3));
                Matrix wp = w;
                wp(i, j) *= uniform01(rng) < 0.5 ? 1.01 : 0.99;
                CHECK(aux_value(a, b, wp) > base);
            }
        }
    }

    SECTION("finite-difference gradient vanishes at the returned W") {
        for (int trial = 0; trial < 20; ++trial) {
            Matrix a = random_positive(5, 2, 900 + trial);
            Matrix b = random_positive(5, 2, 950 + trial);
            Matrix w = update_w(a, b, Matrix::Ones(5, 2));
            double worst = 0.0;
            for (Index j = 0; j < 2; ++j)
                for (Index i = 0; i < 5; ++i)
                    worst = std::max(worst, std::abs(oracles::aux_partial_fd(
                                                a(i, j), b(i, j), w(i, j))));
            CHECK(worst < 1e-6);
        }
    }
}

TEST_CASE("auxiliary function majorizes the objective", "[kernels]") {
    SECTION("frozen 1x1 value") {
        Matrix one = Matrix::Ones(1, 1);
        CHECK_THAT(aux_value(one, one, one), Catch::Matchers::WithinRel(2.0, 1e-15));
    }

    SECTION("objective vanishes on an exact factorization") {
        Matrix w = random_positive(5, 2, 61);
        Matrix h = random_positive(2, 7, 62);
        CHECK(objective(w * h, w, h, 1e-300) < 1e-12);
        CHECK_THAT(objective(w * h, w, h, 1e-300) + 1.0,
                   Catch::Matchers::WithinRel(1.0, 1e-9));
    }

    SECTION("objective matches the naive oracle") {
        Matrix v = random_positive(6, 5, 63);
        Matrix w = random_positive(6, 2, 64);
        Matrix h = random_positive(2, 5, 65);
        CHECK_THAT(objective(v, w, h, 1e-12),
                   Catch::Matchers::WithinRel(oracles::objective_naive(v, w, h, 1e-12), 1e-10));
    }

    SECTION("bound holds with equality at the anchor") {
        const double eps = 1e-12;
        auto rng = make_engine(66);
        for (int trial = 0; trial < 10; ++trial) {
            const Index f = 8, k = 3, n = 6;
            Matrix v = random_positive(f, n, 1000 + trial);
            Matrix wu = random_positive(f, k, 1100 + trial);
            Matrix h = random_positive(k, n, 1200 + trial);
            SampleStats s = batch_stats(v, wu, h, eps);
            const double c = aux_constant(v, wu, h, eps);
            const double n_obj = static_cast<double>(n) * objective(v, wu, h, eps);
            CHECK_THAT(aux_value(s.a, s.b, wu) + c, Catch::Matchers::WithinRel(n_obj, 1e-8));
            for (int probe = 0; probe < 30; ++probe) {
                Matrix wp = random_positive(f, k, 2000 + 100 * trial + probe, 0.02, 3.0);
                const double lhs = aux_value(s.a, s.b, wp) + c;
                const double rhs = static_cast<double>(n) * objective(v, wp, h, eps);
                CHECK(lhs >= rhs - 1e-9 * std::abs(rhs));
            }
        }
    }
}
