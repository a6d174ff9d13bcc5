#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>

#include "support/oracles.hpp"
#include "urs/gaussian.hpp"
#include "urs/rng.hpp"

using namespace urs;
using urs::testing::Welford;

namespace {

Mat random_psd(Rng& rng, Eigen::Index n, double scale = 1.0) {
    const Mat a = rng.normal_matrix(n, n);
    return scale * (a * a.transpose()) / static_cast<double>(n) +
           0.1 * scale * Mat::Identity(n, n);
}

}  // namespace

TEST_CASE("affine_transform identity and degenerate cases") {
    Rng rng(11);
    const Vec m = rng.normal_vector(3);
    const Mat C = random_psd(rng, 3);
    const Gaussian g(m, C);

    const Gaussian same = affine_transform(g, Mat::Identity(3, 3), Vec::Zero(3));
    CHECK((same.mean() - m).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
    CHECK((same.cov() - C).cwiseAbs().maxCoeff() < 1e-14);

    const Vec k = Vec::Constant(2, 4.5);
    const Gaussian constant = affine_transform(g, Mat::Zero(2, 3), k);
    CHECK((constant.mean() - k).cwiseAbs().maxCoeff() == 0.0);
    CHECK(constant.cov().cwiseAbs().maxCoeff() == 0.0);

    CHECK_THROWS_AS(affine_transform(g, Mat::Identity(2, 2), Vec::Zero(2)),
                    ShapeError);
}

TEST_CASE("affine_transform matches Monte Carlo moments") {
    Rng rng(12);
    const Vec m = rng.normal_vector(4);
    const Mat C = random_psd(rng, 4);
    const Gaussian g(m, C);
    const Mat A = rng.normal_matrix(4, 4);
    const Vec c = rng.normal_vector(4);
    const Gaussian exact = affine_transform(g, A, c);

    const int n = 1'000'000;
    std::vector<Welford> mean_acc(4);
    std::vector<Welford> cov_acc(16);
    for (int s = 0; s < n; ++s) {
        const Vec x = urs::testing::sample_gaussian(g, rng);
        const Vec y = A * x + c;
        for (int i = 0; i < 4; ++i) mean_acc[i].add(y(i));
        const Vec d = y - exact.mean();
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) cov_acc[4 * i + j].add(d(i) * d(j));
    }
    for (int i = 0; i < 4; ++i) {
        CHECK(std::abs(mean_acc[i].mean() - exact.mean()(i)) <=
              3.0 * mean_acc[i].standard_error() + 1e-12);
        for (int j = 0; j < 4; ++j) {
            const auto& acc = cov_acc[4 * i + j];
            CHECK(std::abs(acc.mean() - exact.cov()(i, j)) <=
                  3.0 * acc.standard_error() + 1e-12);
        }
    }
}

TEST_CASE("condition with zero cross returns the first marginal") {
    Rng rng(13);
    const Gaussian g1(rng.normal_vector(3), random_psd(rng, 3));
    const Gaussian g2(rng.normal_vector(2), random_psd(rng, 2));
    const JointGaussian j{g1, g2, Mat::Zero(3, 2)};
    const Gaussian cond = condition(j, rng.normal_vector(2));
    CHECK((cond.mean() - g1.mean()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((cond.cov() - g1.cov()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("condition with perfect correlation collapses to a point") {
    Vec m1(1), m2(1);
    m1 << 0.0;
    m2 << 0.0;
    Mat one = Mat::Identity(1, 1);
    const JointGaussian j{Gaussian(m1, one), Gaussian(m2, one), one};
    Vec obs(1);
    obs << 0.7;
    const Gaussian cond = condition(j, obs);
    CHECK(cond.mean()(0) == doctest::Approx(0.7).epsilon(1e-10));
    CHECK(std::abs(cond.cov()(0, 0)) < 1e-10);
}

TEST_CASE("condition matches rejection-sampling oracle") {
    Rng rng(14);
    const Vec mean = rng.normal_vector(4);
    const Mat cov = random_psd(rng, 4);
    const Gaussian full(mean, cov);

    JointGaussian j;
    j.first = Gaussian(mean.head(2), Mat(cov.topLeftCorner(2, 2)));
    j.second = Gaussian(mean.tail(2), Mat(cov.bottomRightCorner(2, 2)));
    j.cross = cov.topRightCorner(2, 2);
    const Vec obs = j.second.mean() + 0.3 * Vec::Ones(2);
    const Gaussian cond = condition(j, obs);

    const double band = 0.01;
    Welford acc0, acc1;
    const long long proposals = 10'000'000;
    for (long long s = 0; s < proposals; ++s) {
        const Vec x = urs::testing::sample_gaussian(full, rng);
        if (std::abs(x(2) - obs(0)) < band && std::abs(x(3) - obs(1)) < band) {
            acc0.add(x(0));
            acc1.add(x(1));
        }
    }
    REQUIRE(acc0.count() > 200);
    CHECK(std::abs(acc0.mean() - cond.mean()(0)) <=
          3.0 * acc0.standard_error() + 2e-3);
    CHECK(std::abs(acc1.mean() - cond.mean()(1)) <=
          3.0 * acc1.standard_error() + 2e-3);
}

TEST_CASE("expect_quadratic_form identities") {
    Rng rng(15);
    SUBCASE("N(0, W) with W^{-1} gives the dimension") {
        const Mat W = random_psd(rng, 5);
        const Gaussian g(Vec::Zero(5), W);
        CHECK(expect_quadratic_form(g, W.inverse()) == doctest::Approx(5.0).epsilon(1e-10));
    }
    SUBCASE("zero covariance gives the pure quadratic") {
        const Vec m = rng.normal_vector(3);
        const Mat Minv = random_psd(rng, 3);
        const Gaussian g(m, Mat::Zero(3, 3));
        CHECK(expect_quadratic_form(g, Minv) ==
              doctest::Approx(m.dot(Minv * m)).epsilon(1e-12));
    }
    SUBCASE("PSD M keeps the expectation non-negative") {
        for (int trial = 0; trial < 20; ++trial) {
            const Gaussian g(rng.normal_vector(4), random_psd(rng, 4));
            CHECK(expect_quadratic_form(g, random_psd(rng, 4)) >= 0.0);
        }
    }
}

TEST_CASE("expect_quadratic_form matches Monte Carlo") {
    Rng rng(16);
    const Gaussian g(rng.normal_vector(6), random_psd(rng, 6));
    const Mat Minv = random_psd(rng, 6);
    const double exact = expect_quadratic_form(g, Minv);

    Welford acc;
    for (int s = 0; s < 1'000'000; ++s) {
        const Vec x = urs::testing::sample_gaussian(g, rng);
        acc.add(x.dot(Minv * x));
    }
    CHECK(std::abs(acc.mean() - exact) <= 3.0 * acc.standard_error());
}

TEST_CASE("covariance repair and PSD square roots") {
    Rng rng(17);
    SUBCASE("repair clips a slightly indefinite matrix") {
        Mat C = random_psd(rng, 4);
        Eigen::SelfAdjointEigenSolver<Mat> eig(C);
        Vec vals = eig.eigenvalues();
        vals(0) = -1e-9 * vals(3);
        const Mat broken =
            eig.eigenvectors() * vals.asDiagonal() * eig.eigenvectors().transpose();
        const Mat repaired = repair_covariance(broken);
        Eigen::SelfAdjointEigenSolver<Mat> check(repaired);
        CHECK(check.eigenvalues().minCoeff() >= 0.0);
        CHECK((repaired - repaired.transpose()).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("psd_sqrt reproduces semidefinite matrices exactly") {
        const Mat C = random_psd(rng, 3);
        Mat dup(6, 6);
        dup << C, C, C, C;  // rank-3 duplicated block
        const Mat F = psd_sqrt(dup);
        CHECK((F * F.transpose() - dup).cwiseAbs().maxCoeff() < 1e-10);
    }
    SUBCASE("psd_sqrt of zero is zero") {
        CHECK(psd_sqrt(Mat::Zero(3, 3)).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("conditioning then re-joining keeps the joint PSD") {
    Rng rng(18);
    for (int trial = 0; trial < 10; ++trial) {
        const Vec mean = rng.normal_vector(5);
        const Mat cov = random_psd(rng, 5);
        JointGaussian j;
        j.first = Gaussian(mean.head(3), Mat(cov.topLeftCorner(3, 3)));
        j.second = Gaussian(mean.tail(2), Mat(cov.bottomRightCorner(2, 2)));
        j.cross = cov.topRightCorner(3, 2);
        const Gaussian cond = condition(j, rng.normal_vector(2));

        JointGaussian rejoined{cond, j.second, Mat::Zero(3, 2)};
        const Gaussian stacked = rejoined.assembled();
        Eigen::SelfAdjointEigenSolver<Mat> eig(stacked.cov());
        CHECK(eig.eigenvalues().minCoeff() >=
              -1e-8 * std::max(eig.eigenvalues().maxCoeff(), 0.0));
    }
}

TEST_CASE("solve_spd reports singularity beyond the jitter floor") {
    Mat singular = Mat::Zero(2, 2);
    singular(0, 0) = 1.0;
    singular(1, 1) = -1.0;  // indefinite, unfixable by jitter
    CHECK_THROWS_AS(solve_spd(singular, Mat::Identity(2, 2)), NumericalError);
}
