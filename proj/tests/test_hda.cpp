#include <doctest.h>

#include <cmath>

#include "gta/cv.hpp"
#include "gta/hda.hpp"
#include "gta/train.hpp"
#include "test_util.hpp"

using namespace gta;

TEST_CASE("hda: exactly linear data selects the pure linear model") {
    auto s = test::scalar_sample(60, 3, [](const Eigen::VectorXd& x) {
        return 2 * x[0] - x[1] + 0.5 * x[2] + 3;
    }, 201);
    ModelOptions opt;
    opt.accelerator = 3;
    const auto model = train_technique(s, opt, Technique::hda);
    // Matches the linear truth to tight tolerance everywhere in the box.
    Rng rng(202);
    double worst = 0.0;
    for (int rep = 0; rep < 50; ++rep) {
        Eigen::VectorXd x(3);
        for (int j = 0; j < 3; ++j) x[j] = rng.uniform(-1, 1);
        const double truth = 2 * x[0] - x[1] + 0.5 * x[2] + 3;
        worst = std::max(worst, std::abs(model.predict(x)[0] - truth));
    }
    const double range = s.outputs.col(0).maxCoeff() - s.outputs.col(0).minCoeff();
    CHECK(worst < 1e-6 * range * 10);
}

TEST_CASE("hda: single gaussian bump is captured with a small basis") {
    auto s = test::scalar_sample(200, 2, [](const Eigen::VectorXd& x) {
        return std::exp(-x.squaredNorm());
    }, 203);
    ModelOptions opt;
    opt.accelerator = 2;
    const auto model = train_technique(s, opt, Technique::hda);
    double num = 0, den = 0;
    const double mean = s.outputs.col(0).mean();
    for (int i = 0; i < s.n(); ++i) {
        const double p = model.predict(s.inputs.row(i).transpose())[0];
        num += (p - s.outputs(i, 0)) * (p - s.outputs(i, 0));
        den += (s.outputs(i, 0) - mean) * (s.outputs(i, 0) - mean);
    }
    CHECK(std::sqrt(num / den) < 0.05);
}

TEST_CASE("hda: deterministic given the seed") {
    auto s = test::scalar_sample(40, 2, [](const Eigen::VectorXd& x) {
        return std::sin(2 * x[0]) + x[1] * x[1];
    }, 204);
    ModelOptions opt;
    opt.accelerator = 4;
    opt.seed = 77;
    const auto a = train_technique(s, opt, Technique::hda);
    const auto b = train_technique(s, opt, Technique::hda);
    Rng rng(205);
    for (int rep = 0; rep < 20; ++rep) {
        Eigen::VectorXd x(2);
        x << rng.uniform(-1, 1), rng.uniform(-1, 1);
        CHECK(a.predict(x)[0] == b.predict(x)[0]);
    }
}

TEST_CASE("hda: gradient matches finite differences") {
    auto s = test::scalar_sample(80, 2, [](const Eigen::VectorXd& x) {
        return std::sin(2 * x[0]) * std::cos(x[1]) + x[0];
    }, 206);
    ModelOptions opt;
    opt.accelerator = 3;
    const auto model = train_technique(s, opt, Technique::hda);
    CHECK(test::max_gradient_error(model, 207) < 1e-4);
}

TEST_CASE("hda: huge widths degenerate gaussian units to constants") {
    // Hand-assembled stage: gaussian units at width 1e6 contribute an almost
    // constant shift, so prediction minus the linear part is constant.
    const int d = 2;
    std::vector<HdaUnit> units;
    Rng rng(208);
    for (int j = 0; j < 4; ++j) {
        HdaUnit u;
        u.type = HdaUnit::Type::gaussian;
        u.direction = Eigen::VectorXd::NullaryExpr(d, [&](Eigen::Index) { return rng.uniform(-1, 1); });
        u.width = 1e6;
        units.push_back(u);
    }
    Eigen::MatrixXd W(4, 1);
    W << 0.5, -1.0, 2.0, 0.25;
    Eigen::MatrixXd L(d, 1);
    L << 1.5, -0.5;
    Eigen::VectorXd c(1);
    c << 0.3;
    const auto core = make_hda_stage_for_test(d, units, W, L, c);

    const double base = core->predict(Eigen::VectorXd::Zero(d))[0] - 0.3;
    double range = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
        Eigen::VectorXd x(d);
        x << rng.uniform(-3, 3), rng.uniform(-3, 3);
        const double nonlinear = core->predict(x)[0] - (0.3 + (L.transpose() * x)(0, 0));
        range = std::max(range, std::abs(nonlinear - base));
    }
    CHECK(range <= 1e-6 * (std::abs(base) + 1.0));
}

TEST_CASE("hda boosting: single stage equals fit_hda") {
    auto s = test::scalar_sample(50, 2, [](const Eigen::VectorXd& x) {
        return x[0] * x[0] + std::sin(3 * x[1]);
    }, 209);
    ModelOptions opt;
    opt.accelerator = 4;
    TuneParams one;
    one.hda_max_stages = 1;
    const auto boosted = train_technique(s, opt, Technique::hda, one);

    // fit_hda_core path through the same seed: identical predictions.
    TrainingSample sample = s;
    sample.normalize_metadata();
    Preprocessor pp(sample);
    const Eigen::MatrixXd U = pp.encode_rows(sample.inputs);
    const Eigen::MatrixXd Y = pp.standardize_outputs(sample.outputs);
    std::vector<std::string> warnings;
    ModelOptions inner = opt;
    inner.technique = TechniqueChoice::hda;
    TrainContext ctx{inner, TuneParams{}, Rng(opt.seed), &warnings};
    const auto single = fit_hda_core(U, Y, ctx);

    Rng rng(210);
    for (int rep = 0; rep < 20; ++rep) {
        Eigen::VectorXd x(2);
        x << rng.uniform(-1, 1), rng.uniform(-1, 1);
        const double a = boosted.predict(x)[0];
        const double b = pp.unstandardize_output(single->predict(pp.encode(x)))[0];
        CHECK(a == doctest::Approx(b).epsilon(1e-12));
    }
}

TEST_CASE("hda boosting: training residual norm non-increasing across stages") {
    Rng rng(211);
    const int n = 120;
    Eigen::MatrixXd X(n, 2), Y(n, 1);
    for (int i = 0; i < n; ++i) {
        X(i, 0) = rng.uniform(-1, 1);
        X(i, 1) = rng.uniform(-1, 1);
        Y(i, 0) = std::sin(3 * X(i, 0)) * std::cos(2 * X(i, 1)) + 0.1 * rng.normal();
    }
    auto s = make_sample(X, Y);
    ModelOptions opt;
    opt.accelerator = 4;
    TuneParams tune;
    tune.hda_p = 6;
    const auto model = train_technique(s, opt, Technique::hda, tune);

    // Reconstruct per-stage partial sums from the stored parameters.
    const auto j = model.to_json();
    const auto& block = j.at("parameters").at("core").at("blocks").at(0);
    const auto shrink = block.at("shrinkage").get<std::vector<double>>();
    const std::size_t n_stages = shrink.size();
    Eigen::MatrixXd partial = Eigen::MatrixXd::Zero(n, 1);
    double prev_norm = std::numeric_limits<double>::infinity();
    // Stage predictions via truncated copies of the model record.
    for (std::size_t upto = 1; upto <= n_stages; ++upto) {
        auto jt = j;
        auto& bt = jt.at("parameters").at("core").at("blocks").at(0);
        nlohmann::json st = nlohmann::json::array();
        nlohmann::json sh = nlohmann::json::array();
        for (std::size_t q = 0; q < upto; ++q) {
            st.push_back(bt.at("stages").at(q));
            sh.push_back(shrink[q]);
        }
        bt["stages"] = st;
        bt["shrinkage"] = sh;
        const auto truncated = SurrogateModel::from_json(jt);
        double norm = 0.0;
        for (int i = 0; i < n; ++i) {
            const double r = Y(i, 0) - truncated.predict(X.row(i).transpose())[0];
            norm += r * r;
        }
        CHECK(norm <= prev_norm * (1.0 + 1e-9));
        prev_norm = norm;
    }
    CHECK(partial.rows() == n);
}

TEST_CASE("hda: smoothing scales output ridge monotonically") {
    Rng rng(212);
    Eigen::MatrixXd X(80, 1), Y(80, 1);
    for (int i = 0; i < 80; ++i) {
        X(i, 0) = rng.uniform(-2, 2);
        Y(i, 0) = std::sin(4 * X(i, 0)) + 0.2 * rng.normal();
    }
    ModelOptions opt;
    opt.accelerator = 4;
    TuneParams tune;
    tune.hda_p = 6;
    const auto model = train_technique(make_sample(X, Y), opt, Technique::hda, tune);
    const auto same = smooth_model(model, 0.0);
    Eigen::VectorXd x(1);
    x << 0.4;
    CHECK((model.predict(x) - same.predict(x)).cwiseAbs().maxCoeff() <= 1e-12);
    double prev = std::numeric_limits<double>::infinity();
    for (double sm : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        const double r = roughness_probe(smooth_model(model, sm));
        CHECK(r <= prev * (1 + 1e-9));
        prev = r;
    }
}

TEST_CASE("hda: persistence round trip") {
    auto s = test::scalar_sample(40, 2, [](const Eigen::VectorXd& x) {
        return std::exp(-2 * x.squaredNorm()) - x[0];
    }, 213);
    ModelOptions opt;
    opt.accelerator = 4;
    const auto model = train_technique(s, opt, Technique::hda);
    const auto loaded = SurrogateModel::from_json(model.to_json());
    Rng rng(214);
    for (int rep = 0; rep < 100; ++rep) {
        Eigen::VectorXd x(2);
        x << rng.uniform(-1, 1), rng.uniform(-1, 1);
        CHECK((model.predict(x) - loaded.predict(x)).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("hda: refuses fewer than 8 points") {
    auto s = test::scalar_sample(6, 1, [](const Eigen::VectorXd& x) { return x[0]; }, 215);
    CHECK_THROWS_AS(train_technique(s, ModelOptions{}, Technique::hda), ConfigError);
}
