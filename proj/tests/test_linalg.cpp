#include <cmath>
#include <random>

#include <doctest.h>

#include "bcl/errors.hpp"
#include "bcl/linalg.hpp"

using namespace bcl;

namespace {

Mat random_symmetric(std::mt19937& rng, std::size_t n, double range = 5.0)
{
    std::uniform_real_distribution<double> u(-range, range);
    Mat m(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            const double v = u(rng);
            m(i, j) = v;
            m(j, i) = v;
        }
    }
    return m;
}

// Product of random plane rotations; exactly orthogonal up to rounding.
Mat random_orthogonal(std::mt19937& rng, std::size_t n)
{
    std::uniform_real_distribution<double> u(0.0, 2.0 * M_PI);
    Mat q = Mat::identity(n);
    for (std::size_t p = 0; p < n; ++p) {
        for (std::size_t r = p + 1; r < n; ++r) {
            const double a = u(rng);
            Mat rot = Mat::identity(n);
            rot(p, p) = std::cos(a);
            rot(r, r) = std::cos(a);
            rot(p, r) = -std::sin(a);
            rot(r, p) = std::sin(a);
            q = q * rot;
        }
    }
    return q;
}

} // namespace

TEST_CASE("eigenvalues of simple matrices")
{
    const Vec d = symmetric_eigenvalues(Mat::diagonal({-2.0, -3.0, -4.0}));
    CHECK(d[0] == doctest::Approx(-4.0).epsilon(1e-12));
    CHECK(d[1] == doctest::Approx(-3.0).epsilon(1e-12));
    CHECK(d[2] == doctest::Approx(-2.0).epsilon(1e-12));

    const Vec flip = symmetric_eigenvalues(Mat(2, {0.0, 1.0, 1.0, 0.0}));
    CHECK(flip[0] == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(flip[1] == doctest::Approx(1.0).epsilon(1e-12));

    // Characteristic polynomial by hand: (2-l)^2 - 1 = 0 -> l in {1, 3}.
    const Vec two = symmetric_eigenvalues(Mat(2, {2.0, 1.0, 1.0, 2.0}));
    CHECK(two[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(two[1] == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("eigen solver rejects bad input")
{
    CHECK_THROWS_AS(symmetric_eigenvalues(Mat(2, {0.0, 1.0, 2.0, 0.0})),
                    NonSymmetricError);
    Mat nan(2);
    nan(0, 0) = std::nan("");
    nan(1, 1) = 1.0;
    CHECK_THROWS_AS(symmetric_eigenvalues(nan), NonFiniteError);
}

TEST_CASE("eigen reconstruction and trace over random matrices")
{
    std::mt19937 rng(42);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 1 + static_cast<std::size_t>(rng() % 6);
        const Mat m = random_symmetric(rng, n);
        const SymmetricEigen eig = symmetric_eigen(m);

        double sum = 0.0;
        for (double v : eig.values) {
            sum += v;
        }
        CHECK(sum == doctest::Approx(m.trace()).epsilon(0).scale(1).epsilon(1e-12));
        CHECK(std::fabs(sum - m.trace()) <= 1e-8);

        Mat rec(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                double acc = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    acc += eig.vectors(i, k) * eig.values[k] * eig.vectors(j, k);
                }
                rec(i, j) = acc;
            }
        }
        CHECK((rec - m).max_abs() <= 1e-8);
    }
}

TEST_CASE("negative semidefiniteness")
{
    CHECK(is_negative_semidefinite(Mat::diagonal({0.0, -1.0}), 1e-9));
    CHECK_FALSE(is_negative_semidefinite(Mat::diagonal({1e-3, -1.0}), 1e-9));
    CHECK(is_negative_semidefinite(Mat(2)));
}

TEST_CASE("negative semidefiniteness is rotation invariant")
{
    std::mt19937 rng(7);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t n = 2 + static_cast<std::size_t>(rng() % 4);
        const Mat m = random_symmetric(rng, n);
        const Mat q = random_orthogonal(rng, n);
        const Mat rotated = q * m * q.transpose();
        CHECK(is_negative_semidefinite(m, 1e-7)
              == is_negative_semidefinite(rotated, 1e-7));
    }
}

TEST_CASE("quadratic forms")
{
    CHECK(quadratic_form(Mat::identity(3), {1.0, 2.0, 2.0}) == doctest::Approx(9.0));
    CHECK(quadratic_form(Mat::diagonal({2.0, 3.0}), {1.0, 1.0}) == doctest::Approx(5.0));
    CHECK_THROWS_AS(quadratic_form(Mat::identity(3), {1.0, 2.0}), DimensionError);
}

TEST_CASE("skew quadratic forms vanish")
{
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 1 + static_cast<std::size_t>(rng() % 6);
        Vec g(n - 1 + (n == 1 ? 1 : 0));
        g.resize(n == 1 ? 0 : n - 1);
        for (double& v : g) {
            v = u(rng);
        }
        const Mat ag = build_ag(g);
        CHECK((ag + ag.transpose()).max_abs() == 0.0);
        Vec v(n);
        for (double& x : v) {
            x = u(rng);
        }
        CHECK(std::fabs(quadratic_form(ag, v)) <= 1e-12);
    }
}

TEST_CASE("structured matrix builders")
{
    const Mat a0 = build_a0({2.0, 3.0, 4.0});
    CHECK(a0(0, 0) == -2.0);
    CHECK(a0(1, 1) == -3.0);
    CHECK(a0(2, 2) == -4.0);
    CHECK(a0(0, 1) == 0.0);

    const Mat unit = build_a0({1.0, 1.0, 1.0});
    CHECK((unit + Mat::identity(3)).max_abs() == 0.0);

    const Mat scalar = build_a0({1.0});
    CHECK(scalar(0, 0) == -1.0);

    CHECK_THROWS_AS(build_a0({2.0, -1.0}), DomainError);
    CHECK_THROWS_AS(build_a0({0.0}), DomainError);

    const Mat ag = build_ag({1.0, 1.0});
    CHECK(ag(0, 1) == 1.0);
    CHECK(ag(1, 0) == -1.0);
    CHECK(ag(1, 2) == 1.0);
    CHECK(ag(2, 1) == -1.0);
    CHECK(ag(0, 2) == 0.0);
    CHECK(build_ag({}).dim() == 1);
    CHECK(build_ag({}).max_abs() == 0.0);

    const Mat d = build_dmu(3, 2.0, 1.0);
    CHECK(d(0, 0) == 2.0);
    CHECK(d(1, 1) == 1.0);
    CHECK(d(2, 2) == 1.0);
    CHECK((build_dmu(4, 3.7, 0.0) - Mat::identity(4)).max_abs() == 0.0);
    CHECK(build_dmu(2, 4.0, 0.5)(0, 0) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK_THROWS_AS(build_dmu(2, 0.0, 1.0), DomainError);
    CHECK_THROWS_AS(build_dmu(2, -1.0, 1.0), DomainError);
}

TEST_CASE("spd inverse")
{
    std::mt19937 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 1 + static_cast<std::size_t>(rng() % 5);
        const Mat m = random_symmetric(rng, n);
        const Mat spd = m * m.transpose() + Mat::identity(n).scaled(0.5);
        const Mat inv = invert_spd(spd);
        CHECK((spd * inv - Mat::identity(n)).max_abs() <= 1e-8);
    }
    CHECK_THROWS_AS(invert_spd(Mat::diagonal({1.0, -1.0})), NotPositiveDefiniteError);
}
