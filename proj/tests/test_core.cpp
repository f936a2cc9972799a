#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "gta/cv.hpp"
#include "gta/metrics.hpp"
#include "gta/model.hpp"
#include "gta/rsm.hpp"
#include "gta/train.hpp"
#include "test_util.hpp"

using namespace gta;

TEST_CASE("rrms: perfect prediction is zero") {
    Eigen::VectorXd t(3), p(3);
    t << 0, 1, 2;
    p = t;
    CHECK(rrms(t, p) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("rrms: constant-mean predictor scores one") {
    Eigen::VectorXd t(4), p(4);
    t << 1, 2, 3, 10;
    p.setConstant(t.mean());
    CHECK(rrms(t, p) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("rrms: hand-evaluated example") {
    Eigen::VectorXd t(3), p(3);
    t << 0, 1, 2;
    p << 0, 1, 1;
    CHECK(std::abs(rrms(t, p) - std::sqrt(0.5)) < 1e-12);
}

TEST_CASE("rrms: degenerate denominator throws") {
    Eigen::VectorXd t = Eigen::VectorXd::Constant(5, 3.0);
    Eigen::VectorXd p = Eigen::VectorXd::Zero(5);
    CHECK_THROWS_AS(rrms(t, p), DegenerateMetricError);
}

TEST_CASE("rrms: invariant under affine rescaling of both arguments") {
    Rng rng(7);
    for (int rep = 0; rep < 20; ++rep) {
        Eigen::VectorXd t(13), p(13);
        for (int i = 0; i < 13; ++i) {
            t[i] = rng.normal();
            p[i] = rng.normal();
        }
        const double a = rng.uniform(0.1, 5.0) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
        const double b = rng.uniform(-3.0, 3.0);
        const double base = rrms(t, p);
        const double scaled = rrms(a * t.array() + b, a * p.array() + b);
        CHECK(std::abs(base - scaled) < 1e-10 * std::max(1.0, base));
    }
}

TEST_CASE("validate_sample: well-formed input gives an empty report") {
    auto s = test::scalar_sample(10, 2, [](const Eigen::VectorXd& x) { return x.sum(); }, 1);
    CHECK(validate_sample(s, ModelOptions{}).ok());
}

TEST_CASE("validate_sample: exact-fit contradiction is reported") {
    Eigen::MatrixXd X(2, 1), Y(2, 1);
    X << 1.0, 1.0;
    Y << 0.0, 2.0;
    auto s = make_sample(X, Y);
    ModelOptions opt;
    opt.exact_fit = true;
    const auto report = validate_sample(s, opt);
    CHECK(report.has_conflict());
    CHECK(report.issues.front().code == "exact-fit-contradiction");
}

TEST_CASE("validate_sample: linearity with a nonlinear technique conflicts") {
    auto s = test::scalar_sample(10, 2, [](const Eigen::VectorXd& x) { return x.sum(); }, 2);
    ModelOptions opt;
    opt.require_linearity = true;
    opt.technique = TechniqueChoice::gp;
    CHECK(validate_sample(s, opt).has_conflict());
}

TEST_CASE("k_fold_cv: exactly linear data under rsm is near zero") {
    auto s = test::scalar_sample(40, 3, [](const Eigen::VectorXd& x) { return 3 * x[0] - 2 * x[1] + 0.5 * x[2] + 1; }, 3);
    ModelOptions opt;
    TuneParams tune;
    const auto est = k_fold_cv(s, opt, Technique::rsm, 5, 11);
    CHECK(est.pooled_rrms < 1e-8);
    CHECK(est.folds == 5);
}

TEST_CASE("k_fold_cv: pure noise stays near one") {
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        Rng rng(seed);
        Eigen::MatrixXd X(60, 2), Y(60, 1);
        for (int i = 0; i < 60; ++i) {
            X(i, 0) = rng.uniform(-1, 1);
            X(i, 1) = rng.uniform(-1, 1);
            Y(i, 0) = rng.normal();
        }
        const auto est = k_fold_cv(make_sample(X, Y), ModelOptions{}, Technique::rsm, 5, seed);
        CHECK(est.pooled_rrms == doctest::Approx(1.0).epsilon(0.3));
    }
}

TEST_CASE("k_fold_cv: deterministic given seed") {
    auto s = test::scalar_sample(30, 2, [](const Eigen::VectorXd& x) { return std::sin(3 * x[0]) + x[1]; }, 4);
    const auto a = k_fold_cv(s, ModelOptions{}, Technique::rsm, 4, 99);
    const auto b = k_fold_cv(s, ModelOptions{}, Technique::rsm, 4, 99);
    CHECK(a.pooled_rrms == b.pooled_rrms);
    CHECK((a.rrms_per_output - b.rrms_per_output).norm() == 0.0);
}

TEST_CASE("k_fold_cv: leave-one-out equals the naive oracle") {
    auto s = test::scalar_sample(14, 2, [](const Eigen::VectorXd& x) { return std::sin(2 * x[0]) * x[1]; }, 5);
    const int n = s.n();
    // Naive oracle: train on all-but-one, predict the held-out point.
    Eigen::VectorXd pred(n);
    for (int i = 0; i < n; ++i) {
        TrainingSample part;
        part.inputs.resize(n - 1, s.d_in());
        part.outputs.resize(n - 1, 1);
        int r = 0;
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            part.inputs.row(r) = s.inputs.row(j);
            part.outputs.row(r) = s.outputs.row(j);
            ++r;
        }
        const auto model = train_technique(part, ModelOptions{}, Technique::rsm);
        pred[i] = model.predict(s.inputs.row(i).transpose())[0];
    }
    const double oracle = rrms(s.outputs.col(0), pred);
    const auto est = k_fold_cv(s, ModelOptions{}, Technique::rsm, n, 7);
    CHECK(est.pooled_rrms == doctest::Approx(oracle).epsilon(1e-10));
}

TEST_CASE("train: N=1 falls back to the constant model") {
    Eigen::MatrixXd X(1, 3), Y(1, 2);
    X << 1, 2, 3;
    Y << 5, -1;
    for (auto tech : {Technique::rsm, Technique::gp, Technique::gbrt}) {
        const auto model = train_technique(make_sample(X, Y), ModelOptions{}, tech);
        const Eigen::VectorXd at = model.predict(Eigen::Vector3d(9, 9, 9));
        CHECK(at[0] == doctest::Approx(5.0));
        CHECK(at[1] == doctest::Approx(-1.0));
    }
}

TEST_CASE("persistence: rsm round trip is prediction-identical") {
    auto s = test::scalar_sample(50, 3, [](const Eigen::VectorXd& x) { return x[0] * x[1] + std::cos(x[2]); }, 6);
    const auto model = train_technique(s, ModelOptions{}, Technique::rsm);
    const auto path = std::filesystem::temp_directory_path() / "gta_rsm_roundtrip.gtam";
    save_model(model, path.string());
    const auto loaded = load_model(path.string());
    Rng rng(8);
    for (int i = 0; i < 100; ++i) {
        Eigen::VectorXd x(3);
        for (int j = 0; j < 3; ++j) x[j] = rng.uniform(-1.5, 1.5);
        CHECK((model.predict(x) - loaded.predict(x)).cwiseAbs().maxCoeff() <= 1e-12);
    }
    std::filesystem::remove(path);
}

TEST_CASE("persistence: bad format version is rejected") {
    auto s = test::scalar_sample(10, 1, [](const Eigen::VectorXd& x) { return x[0]; }, 9);
    const auto model = train_technique(s, ModelOptions{}, Technique::rsm);
    auto j = model.to_json();
    j["format_version"] = 99;
    CHECK_THROWS_WITH_AS(SurrogateModel::from_json(j),
                         doctest::Contains("format_version"), IoError);
}

TEST_CASE("persistence: unknown technique id is rejected") {
    auto s = test::scalar_sample(10, 1, [](const Eigen::VectorXd& x) { return x[0]; }, 9);
    auto j = train_technique(s, ModelOptions{}, Technique::rsm).to_json();
    j["technique"] = "wavelet";
    CHECK_THROWS_WITH_AS(SurrogateModel::from_json(j), doctest::Contains("wavelet"), IoError);
}

TEST_CASE("persistence: missing field is named") {
    auto s = test::scalar_sample(10, 1, [](const Eigen::VectorXd& x) { return x[0]; }, 9);
    auto j = train_technique(s, ModelOptions{}, Technique::rsm).to_json();
    j.erase("standardization");
    CHECK_THROWS_WITH_AS(SurrogateModel::from_json(j), doctest::Contains("standardization"),
                         IoError);
}

TEST_CASE("smoothing: s=0 returns identical predictions, monotone roughness") {
    Rng rng(10);
    Eigen::MatrixXd X(60, 1), Y(60, 1);
    for (int i = 0; i < 60; ++i) {
        X(i, 0) = rng.uniform(-2, 2);
        Y(i, 0) = std::sin(4 * X(i, 0)) + 0.3 * rng.normal();
    }
    const auto model = train_technique(make_sample(X, Y), ModelOptions{}, Technique::rsm);
    const auto same = smooth_model(model, 0.0);
    Eigen::VectorXd x0(1);
    x0 << 0.37;
    CHECK((model.predict(x0) - same.predict(x0)).cwiseAbs().maxCoeff() <= 1e-12);

    double prev = std::numeric_limits<double>::infinity();
    for (double s : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        const double r = roughness_probe(smooth_model(model, s));
        CHECK(r <= prev * (1.0 + 1e-9));
        prev = r;
    }
}

TEST_CASE("categorical inputs: one-hot encoding with zero gradient") {
    Rng rng(11);
    Eigen::MatrixXd X(40, 2), Y(40, 1);
    for (int i = 0; i < 40; ++i) {
        X(i, 0) = rng.uniform(-1, 1);
        X(i, 1) = static_cast<double>(rng.uniform_int(0, 2));  // labels 0,1,2
        Y(i, 0) = 2 * X(i, 0) + 3 * X(i, 1);
    }
    TrainingSample s = make_sample(X, Y);
    s.categorical_mask = {false, true};
    const auto model = train_technique(s, ModelOptions{}, Technique::rsm);
    Eigen::VectorXd x(2);
    x << 0.3, 1.0;
    CHECK(model.predict(x)[0] == doctest::Approx(2 * 0.3 + 3.0).epsilon(1e-6));
    CHECK(model.jacobian(x)(0, 1) == 0.0);  // categorical derivative defined as zero
    Eigen::VectorXd bad(2);
    bad << 0.3, 7.0;
    CHECK_THROWS_AS(model.predict(bad), DataError);
}
