#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>

#include "support/oracles.hpp"
#include "urs/reservoir.hpp"
#include "urs/rng.hpp"
#include "urs/serialize.hpp"

using namespace urs;

namespace {

double dense_spectral_radius(const Mat& m) {
    return Eigen::EigenSolver<Mat>(m).eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("spectral radius on simple matrices") {
    CHECK(spectral_radius(Mat::Identity(5, 5)) == doctest::Approx(1.0).epsilon(1e-10));
    Mat d = Mat::Zero(2, 2);
    d(0, 0) = 0.5;
    d(1, 1) = -0.2;
    CHECK(spectral_radius(d) == doctest::Approx(0.5).epsilon(1e-10));
}

TEST_CASE("spectral radius handles dominant complex pairs") {
    // rotation scaled by 1.3: eigenvalues 1.3 e^{+-i}
    Mat r(2, 2);
    r << std::cos(1.0), -std::sin(1.0), std::sin(1.0), std::cos(1.0);
    r *= 1.3;
    CHECK(spectral_radius(r) == doctest::Approx(1.3).epsilon(1e-9));
}

TEST_CASE("spectral radius matches a dense eigensolver on random matrices") {
    Rng rng(41);
    for (int trial = 0; trial < 8; ++trial) {
        const Mat m = rng.normal_matrix(8, 8);
        const double want = dense_spectral_radius(m);
        CHECK(spectral_radius(m) == doctest::Approx(want).epsilon(1e-8));
    }
}

TEST_CASE("init_reservoir pins the spectral radius to eta1") {
    InitConfig cfg;
    cfg.p = 8;
    cfg.m = 10;
    cfg.seed = 7;
    const auto params = init_reservoir(cfg);
    CHECK(std::abs(dense_spectral_radius(params.G) - 0.97) < 1e-8);
    CHECK(params.v == doctest::Approx(1e-2));
    CHECK((params.W - 1e-4 * Mat::Identity(8, 8)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("init_reservoir scales the raw input draw by eta2") {
    InitConfig cfg;
    cfg.p = 4;
    cfg.m = 3;
    cfg.seed = 99;
    const auto params = init_reservoir(cfg);

    // replay the draw order: G first (p x p), then G_in (p x m)
    Rng rng(cfg.seed);
    (void)rng.normal_matrix(cfg.p, cfg.p);
    const Mat raw_in = rng.normal_matrix(cfg.p, cfg.m);
    CHECK((params.G_in - 0.85 * raw_in).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("init_reservoir is deterministic given the seed") {
    InitConfig cfg;
    cfg.seed = 1234;
    const auto a = init_reservoir(cfg);
    const auto b = init_reservoir(cfg);
    CHECK((a.G - b.G).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.G_in - b.G_in).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.b - b.b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("constant bias fill") {
    InitConfig cfg;
    cfg.bias_init = BiasInit::constant;
    cfg.bias_mean = -2.3;
    cfg.seed = 5;
    const auto params = init_reservoir(cfg);
    CHECK((params.b - Vec::Constant(cfg.p, -2.3)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("evolve fixed values") {
    ReservoirParams params;
    params.G = Mat::Zero(1, 1);
    params.G_in = Mat::Zero(1, 1);
    params.W = Mat::Zero(1, 1);
    params.v = 1.0;

    Vec theta(1), u(1);
    theta << 0.3;
    u << 0.1;

    params.b = Vec::Zero(1);
    CHECK(evolve(params, theta, u)(0) == doctest::Approx(0.5));

    params.b = Vec::Constant(1, -2.0);
    CHECK(evolve(params, theta, u)(0) == doctest::Approx(0.1192029220221176).epsilon(1e-9));

    params.b = Vec::Constant(1, -30.0);
    CHECK(evolve(params, theta, u)(0) < 1e-12);
    CHECK(evolve(params, theta, u)(0) > 0.0);
}

TEST_CASE("evolve output stays strictly inside (0,1)") {
    Rng rng(42);
    InitConfig cfg;
    cfg.p = 6;
    cfg.m = 4;
    cfg.seed = 17;
    const auto params = init_reservoir(cfg);
    for (int trial = 0; trial < 50; ++trial) {
        Vec theta(6), u(4);
        for (int i = 0; i < 6; ++i) theta(i) = rng.uniform();
        for (int i = 0; i < 4; ++i) u(i) = 0.05 * rng.normal();
        const Vec next = evolve(params, theta, u);
        CHECK((next.array() > 0.0).all());
        CHECK((next.array() < 1.0).all());
    }
}

TEST_CASE("echo state property: single-step contraction and washout") {
    Rng rng(43);
    InitConfig cfg;
    cfg.p = 8;
    cfg.m = 3;
    cfg.seed = 31;
    const auto params = init_reservoir(cfg);

    Vec a(8), b(8), u(3);
    for (int i = 0; i < 8; ++i) {
        a(i) = rng.uniform();
        b(i) = rng.uniform();
    }
    for (int i = 0; i < 3; ++i) u(i) = 0.05 * rng.normal();

    CHECK((evolve(params, a, u) - evolve(params, b, u)).lpNorm<1>() <
          (a - b).lpNorm<1>());

    for (int step = 0; step < 200; ++step) {
        for (int i = 0; i < 3; ++i) u(i) = 0.05 * rng.normal();
        a = evolve(params, a, u);
        b = evolve(params, b, u);
    }
    CHECK((a - b).lpNorm<1>() < 1e-6);
}

TEST_CASE("readout basics") {
    Vec theta(3);
    theta << 0.1, 0.2, 0.3;
    CHECK(readout(theta) == doctest::Approx(0.2));
    CHECK(readout(Vec::Constant(5, 0.42)) == doctest::Approx(0.42));
    Vec single(1);
    single << 0.77;
    CHECK(readout(single) == doctest::Approx(0.77));
    CHECK_THROWS_AS(readout(Vec{}), ShapeError);
}

TEST_CASE("readout_gaussian is the exact linear readout") {
    Rng rng(44);
    SUBCASE("constant belief") {
        const Gaussian g(Vec::Constant(4, 0.3), Mat::Zero(4, 4));
        const Gaussian r = readout_gaussian(g);
        CHECK(r.mean()(0) == doctest::Approx(0.3));
        CHECK(r.cov()(0, 0) == 0.0);
    }
    SUBCASE("iid average variance is 1/p") {
        const Gaussian g(Vec::Zero(5), Mat::Identity(5, 5));
        CHECK(readout_gaussian(g).cov()(0, 0) == doctest::Approx(0.2));
    }
    SUBCASE("matches affine_transform with the averaging row") {
        const Mat a = rng.normal_matrix(4, 4);
        const Gaussian g(rng.normal_vector(4),
                         Mat(a * a.transpose() + 0.1 * Mat::Identity(4, 4)));
        const Mat row = Mat::Constant(1, 4, 0.25);
        const Gaussian want = affine_transform(g, row, Vec::Zero(1));
        const Gaussian got = readout_gaussian(g);
        CHECK(std::abs(got.mean()(0) - want.mean()(0)) < 1e-12);
        CHECK(std::abs(got.cov()(0, 0) - want.cov()(0, 0)) < 1e-12);
    }
}

TEST_CASE("reservoir parameters round-trip through JSON") {
    InitConfig cfg;
    cfg.p = 3;
    cfg.m = 2;
    cfg.seed = 88;
    const auto params = init_reservoir(cfg);
    const Json j = reservoir_to_json(params);
    const auto back = reservoir_from_json(Json::parse(j.dump()));
    CHECK((back.G - params.G).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.G_in - params.G_in).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.b - params.b).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.W - params.W).cwiseAbs().maxCoeff() == 0.0);
    CHECK(back.v == params.v);
    CHECK(back.init_seed == params.init_seed);
}
