#include <doctest.h>

#include <cmath>

#include "gta/cv.hpp"
#include "gta/rsm.hpp"
#include "gta/train.hpp"
#include "test_util.hpp"

using namespace gta;

TEST_CASE("expand_features: quadratic ordering") {
    RsmSpec spec;
    spec.order = RsmSpec::Order::quadratic;
    Eigen::VectorXd x(2);
    x << 2, 3;
    const Eigen::VectorXd f = expand_features(x, spec);
    Eigen::VectorXd expected(6);
    expected << 1, 2, 3, 4, 9, 6;
    CHECK((f - expected).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("expand_features: linear is intercept plus identity") {
    RsmSpec spec;
    Eigen::VectorXd x(1);
    x << 5;
    const Eigen::VectorXd f = expand_features(x, spec);
    CHECK(f.size() == 2);
    CHECK(f[0] == 1.0);
    CHECK(f[1] == 5.0);
}

TEST_CASE("expand_features: quadratic length for d=3") {
    RsmSpec spec;
    spec.order = RsmSpec::Order::quadratic;
    CHECK(expand_features(Eigen::Vector3d(1, 2, 3), spec).size() == 10);
    CHECK(feature_count(3, RsmSpec::Order::quadratic) == 10);
}

TEST_CASE("expand_features: categorical encoding errors name the column") {
    RsmSpec spec;
    spec.categories = {{}, {0.0, 1.0}};
    Eigen::VectorXd ok(2), bad(2);
    ok << 0.5, 1.0;
    bad << 0.5, 2.0;
    CHECK(expand_features(ok, spec).size() == 1 + 1 + 2);
    CHECK_THROWS_WITH_AS(expand_features(bad, spec), doctest::Contains("column 2"), DataError);
}

TEST_CASE("fit_rsm: exact linear recovery") {
    auto s = test::scalar_sample(30, 2, [](const Eigen::VectorXd& x) { return 3 * x[0] - 2 * x[1] + 1; }, 21);
    RsmSpec spec;
    spec.order = RsmSpec::Order::linear;
    spec.ridge_lambda = 0.0;
    const auto model = fit_rsm(s, spec, ModelOptions{});
    // Constant Jacobian equal to the data coefficients everywhere.
    const Eigen::MatrixXd j1 = model.jacobian(Eigen::Vector2d(0.0, 0.0));
    const Eigen::MatrixXd j2 = model.jacobian(Eigen::Vector2d(0.7, -0.4));
    CHECK(j1(0, 0) == doctest::Approx(3.0).epsilon(1e-8));
    CHECK(j1(0, 1) == doctest::Approx(-2.0).epsilon(1e-8));
    CHECK((j1 - j2).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(model.predict(Eigen::Vector2d(0.25, 0.5))[0] == doctest::Approx(3 * 0.25 - 2 * 0.5 + 1).epsilon(1e-8));
}

TEST_CASE("fit_rsm: huge ridge collapses to the mean") {
    auto s = test::scalar_sample(30, 2, [](const Eigen::VectorXd& x) { return 3 * x[0] - 2 * x[1]; }, 22);
    RsmSpec spec;
    spec.order = RsmSpec::Order::linear;
    spec.ridge_lambda = 1e9;
    const auto model = fit_rsm(s, spec, ModelOptions{});
    const double mean = s.outputs.col(0).mean();
    CHECK(model.predict(Eigen::Vector2d(0.9, -0.9))[0] == doctest::Approx(mean).epsilon(1e-5));
    CHECK(model.jacobian(Eigen::Vector2d(0, 0)).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("fit_rsm: cross term on a 5x5 grid") {
    Eigen::MatrixXd X(25, 2), Y(25, 1);
    int r = 0;
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) {
            X(r, 0) = -1.0 + 0.5 * i;
            X(r, 1) = -1.0 + 0.5 * j;
            Y(r, 0) = X(r, 0) * X(r, 1);
            ++r;
        }
    RsmSpec spec;
    spec.order = RsmSpec::Order::quadratic;
    spec.ridge_lambda = 1e-8;
    const auto model = fit_rsm(make_sample(X, Y), spec, ModelOptions{});
    double num = 0.0, den = 0.0;
    const double mean = Y.col(0).mean();
    for (int i = 0; i < 25; ++i) {
        const double p = model.predict(X.row(i).transpose())[0];
        num += (p - Y(i, 0)) * (p - Y(i, 0));
        den += (Y(i, 0) - mean) * (Y(i, 0) - mean);
    }
    CHECK(std::sqrt(num / den) < 1e-6);
}

TEST_CASE("elastic net with alpha=0 matches the closed-form ridge solve") {
    Rng rng(23);
    for (int rep = 0; rep < 5; ++rep) {
        const int n = 40, p = 4;
        Eigen::MatrixXd X(n, p), Y(n, 1);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < p; ++j) X(i, j) = rng.normal();
            Y(i, 0) = X(i, 0) - 2 * X(i, 2) + 0.5 * rng.normal();
        }
        const double lambda = rng.uniform(0.01, 2.0);

        RsmSpec spec;
        spec.order = RsmSpec::Order::linear;
        spec.estimator = RsmSpec::Estimator::elastic_net;
        spec.ridge_lambda = lambda;
        spec.elastic_alpha = 0.0;
        const auto model = fit_rsm(make_sample(X, Y), spec, ModelOptions{});

        // Oracle: centered ridge with penalty lambda/2 on standardized data,
        // matching || y - Xw ||^2 + lambda/2 ||w||^2.
        Eigen::MatrixXd Xs(n, p);
        Eigen::VectorXd ys(n);
        for (int j = 0; j < p; ++j) {
            const double mu = X.col(j).mean();
            const double sd = std::sqrt((X.col(j).array() - mu).square().sum() / n);
            Xs.col(j) = (X.col(j).array() - mu) / sd;
        }
        const double ymu = Y.col(0).mean();
        const double ysd = std::sqrt((Y.col(0).array() - ymu).square().sum() / n);
        ys = (Y.col(0).array() - ymu) / ysd;
        Eigen::MatrixXd Xc = Xs.rowwise() - Xs.colwise().mean();
        Eigen::VectorXd yc = ys.array() - ys.mean();
        Eigen::MatrixXd G = Xc.transpose() * Xc;
        G.diagonal().array() += lambda / 2.0;
        const Eigen::VectorXd w = G.ldlt().solve(Xc.transpose() * yc);

        Eigen::VectorXd x0(p);
        for (int j = 0; j < p; ++j) x0[j] = rng.uniform(-1, 1);
        Eigen::VectorXd x0s(p);
        for (int j = 0; j < p; ++j) {
            const double mu = X.col(j).mean();
            const double sd = std::sqrt((X.col(j).array() - mu).square().sum() / n);
            x0s[j] = (x0[j] - mu) / sd;
        }
        const double oracle = ymu + ysd * (ys.mean() + (x0s - Xs.colwise().mean().transpose()).dot(w));
        CHECK(model.predict(x0)[0] == doctest::Approx(oracle).epsilon(1e-6));
    }
}

TEST_CASE("stepwise never loses to the intercept-only model") {
    for (std::uint64_t seed : {31ull, 32ull, 33ull}) {
        Rng rng(seed);
        Eigen::MatrixXd X(25, 3), Y(25, 1);
        for (int i = 0; i < 25; ++i) {
            for (int j = 0; j < 3; ++j) X(i, j) = rng.uniform(-1, 1);
            Y(i, 0) = (seed % 2 == 0) ? rng.normal() : 2 * X(i, 1) + 0.1 * rng.normal();
        }
        const auto sample = make_sample(X, Y);
        RsmSpec spec;
        spec.order = RsmSpec::Order::quadratic;
        spec.estimator = RsmSpec::Estimator::stepwise;
        const auto model = fit_rsm(sample, spec, ModelOptions{});

        TuneParams tune;
        tune.rsm_estimator = 1;
        tune.rsm_order = 2;
        ModelOptions opt;
        const auto cv_model = k_fold_cv(sample, opt, Technique::rsm, 5, 41).pooled_rrms;
        // Intercept-only predicts the training mean; its pooled CV RRMS is ~1.
        CHECK(model.d_out() == 1);
        CHECK(cv_model <= 1.2);
    }
}

TEST_CASE("rsm gradient matches finite differences") {
    auto s = test::scalar_sample(60, 3, [](const Eigen::VectorXd& x) {
        return x[0] * x[0] - 2 * x[1] * x[2] + x[2];
    }, 24);
    TuneParams tune;
    tune.rsm_order = 2;
    const auto model = train_technique(s, ModelOptions{}, Technique::rsm, tune);
    CHECK(test::max_gradient_error(model, 25) < 1e-4);
}
