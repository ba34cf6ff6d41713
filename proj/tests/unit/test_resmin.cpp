#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <limits>

#include "oracles.hpp"
#include "orthomg/errors.hpp"
#include "orthomg/resmin.hpp"

using namespace orthomg;

namespace {

/// x0 + Z beta with beta = argmin || r0 - A Z beta ||.
oracle::Vec least_squares_iterate(const oracle::Dense& a, const oracle::Vec& x0,
                                  const oracle::Vec& r0, const std::vector<oracle::Vec>& zs)
{
    const std::size_t n = x0.size();
    oracle::Dense m = oracle::zeros(n, zs.size());
    for (std::size_t j = 0; j < zs.size(); ++j) {
        const auto az = oracle::matvec(a, zs[j]);
        for (std::size_t i = 0; i < n; ++i) {
            m[i][j] = az[i];
        }
    }
    const auto beta = oracle::least_squares(m, r0);
    oracle::Vec x = x0;
    for (std::size_t j = 0; j < zs.size(); ++j) {
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += beta[j] * zs[j][i];
        }
    }
    return x;
}

double max_diff(const Vector& a, const Vector& b)
{
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        d = std::max(d, std::abs(a[i] - b[i]));
    }
    return d;
}

}  // namespace

TEST_CASE("empty space keeps the anchor")
{
    SearchSpace s(Vector{1, 2}, Vector{3, 4});
    CHECK(s.size() == 0);
    CHECK(s.solution() == Vector{1, 2});
    CHECK(s.residual() == Vector{3, 4});
    CHECK(s.residual_norm() == doctest::Approx(5.0));
    CHECK_THROWS_AS(SearchSpace(Vector{1}, Vector{1, 2}), InvalidInput);
}

TEST_CASE("identity system solved by one direction")
{
    const Vector b{1, -2, 3};
    SearchSpace s(Vector(3, 0.0), b);
    CHECK(s.update(CsrMatrix::identity(3), b));
    CHECK(max_diff(s.solution(), b) <= 1e-15);
    CHECK(s.residual_norm() <= 1e-15);
}

TEST_CASE("redundant direction breaks down")
{
    std::mt19937_64 rng(4);
    const auto a = oracle::random_spd(8, rng);
    const auto sa = oracle::sparse(a);
    SearchSpace s(Vector(8, 0.0), oracle::random_vector(8, rng));
    const auto z1 = oracle::random_vector(8, rng);
    const auto z2 = oracle::random_vector(8, rng);
    REQUIRE(s.update(sa, z1));
    REQUIRE(s.update(sa, z2));
    const Vector x = s.solution(), r = s.residual();
    Vector combo(8);
    for (std::size_t i = 0; i < 8; ++i) {
        combo[i] = 2.0 * z1[i] - 0.5 * z2[i];
    }
    CHECK_FALSE(s.update(sa, combo));
    CHECK(s.breakdown_count() == 1);
    CHECK(s.size() == 2);
    CHECK(s.solution() == x);
    CHECK(s.residual() == r);
    CHECK_FALSE(s.update(sa, Vector(8, 0.0)));
    CHECK(s.breakdown_count() == 2);
}

TEST_CASE("zero anchor residual always breaks down")
{
    SearchSpace s(Vector{1, 1}, Vector{0, 0});
    for (int i = 0; i < 3; ++i) {
        CHECK_FALSE(s.update(CsrMatrix::identity(2), Vector{1, 0}));
    }
    CHECK(s.breakdown_count() == 3);
    CHECK(s.solution() == Vector{1, 1});
}

TEST_CASE("non-finite directions are rejected")
{
    SearchSpace s(Vector{0, 0}, Vector{1, 1});
    CHECK_THROWS_AS(s.update(CsrMatrix::identity(2), Vector{std::nan(""), 0}), InvalidInput);
    CHECK_THROWS_AS(
        s.update(CsrMatrix::identity(2), Vector{std::numeric_limits<double>::infinity(), 0}),
        InvalidInput);
    CHECK_THROWS_AS(s.update(CsrMatrix::identity(2), Vector{1}), InvalidInput);
}

TEST_CASE("iterate is the least-squares minimizer")
{
    std::mt19937_64 rng(31);
    const auto a = oracle::random_spd(10, rng);
    const auto sa = oracle::sparse(a);
    const auto x0 = oracle::random_vector(10, rng);
    const auto b = oracle::random_vector(10, rng);
    auto r0 = oracle::matvec(a, x0);
    for (std::size_t i = 0; i < 10; ++i) {
        r0[i] = b[i] - r0[i];
    }
    SearchSpace s(x0, r0);
    std::vector<oracle::Vec> zs;
    for (int k = 0; k < 3; ++k) {
        zs.push_back(oracle::random_vector(10, rng));
        REQUIRE(s.update(sa, zs.back()));
        CHECK(max_diff(s.solution(), least_squares_iterate(a, x0, r0, zs)) <= 1e-10);
    }
}

TEST_CASE("residual norm is monotone over random sequences")
{
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<std::size_t> size(2, 50);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = size(rng);
        const auto sa = oracle::sparse(oracle::random_spd(n, rng));
        SearchSpace s(Vector(n, 0.0), oracle::random_vector(n, rng));
        double prev = s.residual_norm();
        for (std::size_t k = 0; k < n + 3; ++k) {
            s.update(sa, oracle::random_vector(n, rng));
            CHECK(s.residual_norm() <= prev);
            prev = s.residual_norm();
        }
    }
}

TEST_CASE("basis invariants after many updates")
{
    std::mt19937_64 rng(9);
    const std::size_t n = 60;
    const auto sa = oracle::sparse(oracle::random_spd(n, rng));
    const auto r0 = oracle::random_vector(n, rng);
    SearchSpace s(Vector(n, 0.0), r0);
    for (int k = 0; k < 50; ++k) {
        s.update(sa, oracle::random_vector(n, rng));
        for (const auto& w : s.basis()) {
            CHECK(std::abs(oracle::kahan_dot(w, s.residual())) <= 1e-9 * oracle::norm(r0));
        }
    }
    REQUIRE(s.size() == 50);
    double drift = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        for (std::size_t j = 0; j < s.size(); ++j) {
            const double g = oracle::kahan_dot(s.basis()[i], s.basis()[j]);
            drift = std::max(drift, std::abs(g - (i == j ? 1.0 : 0.0)));
        }
    }
    CHECK(drift <= 1e-9);
    for (std::size_t i = 0; i < s.size(); ++i) {
        auto az = spmv(sa, s.directions()[i]);
        for (std::size_t k = 0; k < n; ++k) {
            az[k] -= s.basis()[i][k];
        }
        CHECK(oracle::norm(az) <= 1e-8 * oracle::norm(s.basis()[i]));
        CHECK(s.coefficients()[i] == doctest::Approx(oracle::kahan_dot(s.basis()[i], r0)).epsilon(1e-10));
    }
}

TEST_CASE("reset clears the basis")
{
    std::mt19937_64 rng(12);
    const auto sa = oracle::sparse(oracle::random_spd(6, rng));
    SearchSpace s(Vector(6, 0.0), oracle::random_vector(6, rng));
    s.update(sa, oracle::random_vector(6, rng));
    s.update(sa, oracle::random_vector(6, rng));
    const Vector x{1, 2, 3, 4, 5, 6}, r{0, 0, 0, 0, 0, 0};
    s.reset(x, r);
    CHECK(s.size() == 0);
    CHECK(s.coefficients().empty());
    CHECK(s.anchor_solution() == x);
    CHECK(s.anchor_residual() == r);
    CHECK(s.residual_norm() == 0.0);
}

TEST_CASE("restart at the column cap")
{
    std::mt19937_64 rng(19);
    const std::size_t n = 30;
    const auto sa = oracle::sparse(oracle::random_spd(n, rng));
    SearchSpace s(Vector(n, 0.0), oracle::random_vector(n, rng), 4);
    double prev = s.residual_norm();
    for (int k = 0; k < 10; ++k) {
        s.update(sa, oracle::random_vector(n, rng));
        CHECK(s.size() <= 4);
        CHECK(s.residual_norm() <= prev);
        prev = s.residual_norm();
    }
    CHECK(s.restart_count() == 2);
}

TEST_CASE("solve, reset, resolve reaches the same tolerance")
{
    // Richardson-like directions z = r on a well-conditioned system.
    std::mt19937_64 rng(41);
    const std::size_t n = 20;
    const auto a = oracle::random_spd(n, rng);
    const auto sa = oracle::sparse(a);
    const auto b = oracle::random_vector(n, rng);
    const double tol = 1e-10 * oracle::norm(b);

    SearchSpace plain(Vector(n, 0.0), b);
    for (int k = 0; k < 200 && plain.residual_norm() > tol; ++k) {
        plain.update(sa, plain.residual());
    }
    CHECK(plain.residual_norm() <= tol);

    SearchSpace restarted(Vector(n, 0.0), b);
    for (int k = 0; k < 200 && restarted.residual_norm() > tol; ++k) {
        restarted.update(sa, restarted.residual());
        if (k % 5 == 4) {
            auto r = oracle::matvec(a, restarted.solution());
            for (std::size_t i = 0; i < n; ++i) {
                r[i] = b[i] - r[i];
            }
            restarted.reset(restarted.solution(), r);
        }
    }
    CHECK(restarted.residual_norm() <= tol);
}
