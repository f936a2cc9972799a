#include "gta/rsm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gta {

namespace {

int encoded_dim(const RsmSpec& spec, int d_raw) {
    if (spec.categories.empty()) return d_raw;
    int d = 0;
    for (const auto& labels : spec.categories) d += labels.empty() ? 1 : static_cast<int>(labels.size());
    return d;
}

Eigen::VectorXd one_hot(const Eigen::Ref<const Eigen::VectorXd>& x, const RsmSpec& spec) {
    if (spec.categories.empty()) return x;
    Eigen::VectorXd u = Eigen::VectorXd::Zero(encoded_dim(spec, static_cast<int>(x.size())));
    int at = 0;
    for (int j = 0; j < x.size(); ++j) {
        const auto& labels = spec.categories[static_cast<std::size_t>(j)];
        if (labels.empty()) {
            u[at++] = x[j];
            continue;
        }
        auto it = std::lower_bound(labels.begin(), labels.end(), x[j]);
        if (it == labels.end() || *it != x[j])
            throw DataError("unseen categorical label in column " + std::to_string(j + 1));
        u[at + static_cast<int>(it - labels.begin())] = 1.0;
        at += static_cast<int>(labels.size());
    }
    return u;
}

/// Non-intercept feature values for an encoded point, in the canonical order.
template <typename Row>
void fill_features(const Eigen::Ref<const Eigen::VectorXd>& u, RsmSpec::Order order, Row&& row) {
    const int d = static_cast<int>(u.size());
    for (int j = 0; j < d; ++j) row[j] = u[j];
    if (order == RsmSpec::Order::quadratic) {
        for (int j = 0; j < d; ++j) row[d + j] = u[j] * u[j];
        int at = 2 * d;
        for (int i = 0; i < d; ++i)
            for (int j = i + 1; j < d; ++j) row[at++] = u[i] * u[j];
    }
}

}  // namespace

int feature_count(int d, RsmSpec::Order order) {
    return order == RsmSpec::Order::linear ? 1 + d : 1 + d + d * (d + 1) / 2;
}

Eigen::VectorXd expand_features(const Eigen::Ref<const Eigen::VectorXd>& x, const RsmSpec& spec) {
    const Eigen::VectorXd u = one_hot(x, spec);
    Eigen::VectorXd f(feature_count(static_cast<int>(u.size()), spec.order));
    f[0] = 1.0;
    fill_features(u, spec.order, f.tail(f.size() - 1).transpose());
    return f;
}

namespace {

Eigen::MatrixXd feature_matrix(const Eigen::Ref<const Eigen::MatrixXd>& U,
                               RsmSpec::Order order) {
    const int p = feature_count(static_cast<int>(U.cols()), order) - 1;
    Eigen::MatrixXd X(U.rows(), p);
    for (Eigen::Index i = 0; i < U.rows(); ++i)
        fill_features(U.row(i).transpose(), order, X.row(i));
    return X;
}

class RsmModel final : public TechniqueModel {
public:
    RsmSpec::Order order = RsmSpec::Order::linear;
    RsmSpec::Estimator estimator = RsmSpec::Estimator::ridge;
    double lambda = 0.0;
    double alpha = 0.0;
    int d = 0;
    int m = 0;
    std::vector<int> selected;    // non-intercept feature indices (0-based in feature list)
    Eigen::VectorXd feat_mean;    // per selected feature
    Eigen::VectorXd intercept;    // m
    Eigen::MatrixXd weights;      // selected x m
    Eigen::MatrixXd gram;         // centered Gram over selected features
    Eigen::MatrixXd cross;        // centered X^T y over selected features, x m

    Technique technique() const override { return Technique::rsm; }
    int input_dim() const override { return d; }
    int output_dim() const override { return m; }
    Capabilities capabilities() const override { return {true, false, true}; }

    Eigen::VectorXd predict(const Eigen::Ref<const Eigen::VectorXd>& u) const override {
        return intercept + weights.transpose() * (selected_features(u) - feat_mean);
    }

    Eigen::MatrixXd jacobian(const Eigen::Ref<const Eigen::VectorXd>& u) const override {
        // d(feature)/du for each selected feature, chained with the weights.
        Eigen::MatrixXd dphi = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(selected.size()), d);
        for (std::size_t s = 0; s < selected.size(); ++s) {
            const int f = selected[s];
            if (f < d) {
                dphi(static_cast<Eigen::Index>(s), f) = 1.0;
            } else if (f < 2 * d) {
                dphi(static_cast<Eigen::Index>(s), f - d) = 2.0 * u[f - d];
            } else {
                const auto [i, j] = cross_pair(f - 2 * d);
                dphi(static_cast<Eigen::Index>(s), i) = u[j];
                dphi(static_cast<Eigen::Index>(s), j) = u[i];
            }
        }
        return weights.transpose() * dphi;
    }

    std::unique_ptr<TechniqueModel> resmoothed(double s) const override;

    nlohmann::json params_json() const override {
        auto mat = [](const Eigen::MatrixXd& M) {
            return std::vector<double>(M.data(), M.data() + M.size());
        };
        return {{"order", order == RsmSpec::Order::linear ? "linear" : "quadratic"},
                {"estimator", estimator == RsmSpec::Estimator::ridge        ? "ridge"
                              : estimator == RsmSpec::Estimator::stepwise   ? "stepwise"
                                                                            : "elastic_net"},
                {"lambda", lambda},
                {"alpha", alpha},
                {"d", d},
                {"m", m},
                {"selected", selected},
                {"feat_mean", std::vector<double>(feat_mean.begin(), feat_mean.end())},
                {"intercept", std::vector<double>(intercept.begin(), intercept.end())},
                {"weights", mat(weights)},
                {"gram", mat(gram)},
                {"cross", mat(cross)}};
    }

    static std::unique_ptr<RsmModel> from_json(const nlohmann::json& j) {
        auto model = std::make_unique<RsmModel>();
        model->order = j.at("order") == "linear" ? RsmSpec::Order::linear : RsmSpec::Order::quadratic;
        const std::string est = j.at("estimator");
        model->estimator = est == "ridge"      ? RsmSpec::Estimator::ridge
                           : est == "stepwise" ? RsmSpec::Estimator::stepwise
                                               : RsmSpec::Estimator::elastic_net;
        model->lambda = j.at("lambda").get<double>();
        model->alpha = j.at("alpha").get<double>();
        model->d = j.at("d").get<int>();
        model->m = j.at("m").get<int>();
        model->selected = j.at("selected").get<std::vector<int>>();
        const auto p = static_cast<Eigen::Index>(model->selected.size());
        auto vec = [](const nlohmann::json& a) {
            const auto v = a.get<std::vector<double>>();
            return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
        };
        auto mat = [](const nlohmann::json& a, Eigen::Index rows, Eigen::Index cols) {
            const auto v = a.get<std::vector<double>>();
            if (static_cast<Eigen::Index>(v.size()) != rows * cols)
                throw IoError("model file: bad rsm matrix size");
            return Eigen::MatrixXd(Eigen::Map<const Eigen::MatrixXd>(v.data(), rows, cols));
        };
        model->feat_mean = vec(j.at("feat_mean"));
        model->intercept = vec(j.at("intercept"));
        model->weights = mat(j.at("weights"), p, model->m);
        model->gram = mat(j.at("gram"), p, p);
        model->cross = mat(j.at("cross"), p, model->m);
        return model;
    }

private:
    Eigen::VectorXd selected_features(const Eigen::Ref<const Eigen::VectorXd>& u) const {
        Eigen::RowVectorXd all(feature_count(d, order) - 1);
        fill_features(u, order, all);
        Eigen::VectorXd out(static_cast<Eigen::Index>(selected.size()));
        for (std::size_t s = 0; s < selected.size(); ++s)
            out[static_cast<Eigen::Index>(s)] = all[selected[s]];
        return out;
    }

    std::pair<int, int> cross_pair(int k) const {
        for (int i = 0; i < d; ++i) {
            const int row = d - 1 - i;
            if (k < row) return {i, i + 1 + k};
            k -= row;
        }
        throw Error("rsm: cross-term index out of range");
    }
};

double lambda_floor(const Eigen::MatrixXd& gram) {
    const auto p = std::max<Eigen::Index>(1, gram.rows());
    return 1e-8 * gram.trace() / static_cast<double>(p);
}

/// Ridge weights from the centered Gram form; lambda >= 0.
Eigen::MatrixXd ridge_solve(const Eigen::MatrixXd& gram, const Eigen::MatrixXd& cross,
                            double lambda) {
    Eigen::MatrixXd reg = gram;
    reg.diagonal().array() += lambda;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(reg);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
        reg.diagonal().array() += lambda_floor(gram) + 1e-12;
        ldlt.compute(reg);
    }
    return ldlt.solve(cross);
}

/// Coordinate descent for || y - X w ||^2 + lambda (alpha |w|_1 + (1-alpha)/2 |w|^2),
/// covariance form: needs only Gram = X^T X and cross = X^T y.
Eigen::MatrixXd elastic_net_cd(const Eigen::MatrixXd& gram, const Eigen::MatrixXd& cross,
                               double lambda, double alpha) {
    const Eigen::Index p = gram.rows();
    const Eigen::Index m = cross.cols();
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(p, m);
    const double tol = 1e-10;
    const int max_sweeps = 10000;
    for (Eigen::Index k = 0; k < m; ++k) {
        Eigen::VectorXd w = Eigen::VectorXd::Zero(p);
        Eigen::VectorXd gw = Eigen::VectorXd::Zero(p);  // gram * w
        for (int sweep = 0; sweep < max_sweeps; ++sweep) {
            double max_delta = 0.0;
            for (Eigen::Index j = 0; j < p; ++j) {
                const double rho = cross(j, k) - gw[j] + gram(j, j) * w[j];
                const double z = 2.0 * rho;
                const double t = lambda * alpha;
                const double denom = 2.0 * gram(j, j) + lambda * (1.0 - alpha);
                double wj = 0.0;
                if (denom > 0.0 && std::abs(z) > t)
                    wj = (z > 0 ? z - t : z + t) / denom;
                const double delta = wj - w[j];
                if (delta != 0.0) {
                    gw += gram.col(j) * delta;
                    w[j] = wj;
                    max_delta = std::max(max_delta, std::abs(delta));
                }
            }
            if (max_delta < tol) break;
        }
        W.col(k) = w;
    }
    return W;
}

/// GCV score of ridge over an SVD of the centered design; summed over outputs.
double gcv_score(const Eigen::BDCSVD<Eigen::MatrixXd>& svd, const Eigen::MatrixXd& Y,
                 double lambda, double n) {
    const Eigen::VectorXd& sv = svd.singularValues();
    const Eigen::MatrixXd Z = svd.matrixU().transpose() * Y;  // rank x m
    double edf = 0.0;
    Eigen::ArrayXd shrink(sv.size());
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        const double s2 = sv[i] * sv[i];
        shrink[i] = lambda / (s2 + lambda);
        edf += s2 / (s2 + lambda);
    }
    double rss = 0.0;
    for (Eigen::Index k = 0; k < Y.cols(); ++k) {
        const double total = Y.col(k).squaredNorm();
        const double inside = Z.col(k).squaredNorm();
        rss += total - inside + (shrink.square() * Z.col(k).array().square()).sum();
    }
    const double dof = std::max(1.0, n - 1.0 - edf);  // intercept counts one
    return n * rss / (dof * dof);
}

/// Pooled CV RRMS of a plain least-squares fit on the given feature subset.
double subset_cv_rrms(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                      const std::vector<int>& subset, const std::vector<int>& fold_of,
                      int folds) {
    const Eigen::Index n = X.rows();
    const Eigen::Index m = Y.cols();
    const auto p = static_cast<Eigen::Index>(subset.size());
    Eigen::MatrixXd pred(n, m);
    for (int f = 0; f < folds; ++f) {
        std::vector<Eigen::Index> train_rows, test_rows;
        for (Eigen::Index i = 0; i < n; ++i)
            (fold_of[static_cast<std::size_t>(i)] == f ? test_rows : train_rows).push_back(i);
        if (test_rows.empty()) continue;
        Eigen::MatrixXd Xt(static_cast<Eigen::Index>(train_rows.size()), p);
        Eigen::MatrixXd Yt(static_cast<Eigen::Index>(train_rows.size()), m);
        for (std::size_t r = 0; r < train_rows.size(); ++r) {
            for (Eigen::Index c = 0; c < p; ++c) Xt(static_cast<Eigen::Index>(r), c) = X(train_rows[r], subset[static_cast<std::size_t>(c)]);
            Yt.row(static_cast<Eigen::Index>(r)) = Y.row(train_rows[r]);
        }
        const Eigen::RowVectorXd xm = Xt.colwise().mean();
        const Eigen::RowVectorXd ym = Yt.colwise().mean();
        Xt.rowwise() -= xm;
        Yt.rowwise() -= ym;
        Eigen::MatrixXd g = Xt.transpose() * Xt;
        const Eigen::MatrixXd w = ridge_solve(g, Eigen::MatrixXd(Xt.transpose() * Yt),
                                              std::max(lambda_floor(g), 1e-12));
        for (Eigen::Index i : test_rows) {
            Eigen::RowVectorXd xr(p);
            for (Eigen::Index c = 0; c < p; ++c) xr[c] = X(i, subset[static_cast<std::size_t>(c)]);
            pred.row(i) = ym + (xr - xm) * w;
        }
    }
    double total = 0.0;
    for (Eigen::Index k = 0; k < m; ++k) {
        const double denom = (Y.col(k).array() - Y.col(k).mean()).square().sum();
        const double num = (Y.col(k) - pred.col(k)).squaredNorm();
        total += denom > 0.0 ? std::sqrt(num / denom) : 0.0;
    }
    return total / static_cast<double>(m);
}

}  // namespace

std::unique_ptr<TechniqueModel> fit_constant_core(int d_enc, const Eigen::VectorXd& mean_std) {
    auto model = std::make_unique<RsmModel>();
    model->d = d_enc;
    model->m = static_cast<int>(mean_std.size());
    model->intercept = mean_std;
    model->weights = Eigen::MatrixXd::Zero(0, model->m);
    model->gram = Eigen::MatrixXd::Zero(0, 0);
    model->cross = Eigen::MatrixXd::Zero(0, model->m);
    model->feat_mean = Eigen::VectorXd::Zero(0);
    return model;
}

std::unique_ptr<TechniqueModel> RsmModel::resmoothed(double s) const {
    auto copy = std::make_unique<RsmModel>(*this);
    if (copy->selected.empty() || s <= 0.0) return copy;
    const double base = lambda > 0.0 ? lambda : lambda_floor(gram);
    copy->lambda = base * std::pow(10.0, 4.0 * s);
    if (estimator == RsmSpec::Estimator::elastic_net)
        copy->weights = elastic_net_cd(gram, cross, copy->lambda, alpha);
    else
        copy->weights = ridge_solve(gram, cross, copy->lambda);
    return copy;
}

std::unique_ptr<TechniqueModel> fit_rsm_core(const Eigen::Ref<const Eigen::MatrixXd>& U,
                                             const Eigen::Ref<const Eigen::MatrixXd>& Y,
                                             TrainContext& ctx) {
    const int n = static_cast<int>(U.rows());
    const int d = static_cast<int>(U.cols());
    const int m = static_cast<int>(Y.cols());

    RsmSpec::Order order;
    if (ctx.tune.rsm_order)
        order = *ctx.tune.rsm_order <= 1 ? RsmSpec::Order::linear : RsmSpec::Order::quadratic;
    else if (ctx.options.require_linearity)
        order = RsmSpec::Order::linear;
    else
        order = n >= 2 * feature_count(d, RsmSpec::Order::quadratic) ? RsmSpec::Order::quadratic
                                                                     : RsmSpec::Order::linear;

    RsmSpec::Estimator estimator = RsmSpec::Estimator::ridge;
    if (ctx.tune.rsm_estimator)
        estimator = *ctx.tune.rsm_estimator == 0   ? RsmSpec::Estimator::ridge
                    : *ctx.tune.rsm_estimator == 1 ? RsmSpec::Estimator::stepwise
                                                   : RsmSpec::Estimator::elastic_net;
    if (estimator == RsmSpec::Estimator::stepwise && n <= 2) {
        ctx.warn("rsm: stepwise needs N > 2, falling back to ridge");
        estimator = RsmSpec::Estimator::ridge;
    }

    const Eigen::MatrixXd X = feature_matrix(U, order);
    const Eigen::Index p_all = X.cols();

    auto model = std::make_unique<RsmModel>();
    model->order = order;
    model->estimator = estimator;
    model->d = d;
    model->m = m;
    model->alpha = 0.0;

    std::vector<int> selected(static_cast<std::size_t>(p_all));
    std::iota(selected.begin(), selected.end(), 0);

    if (estimator == RsmSpec::Estimator::stepwise) {
        // Forward selection by pooled CV RRMS with backward pruning; the
        // intercept-only model is the baseline, so the result never does worse.
        const int folds = std::min(5, n);
        std::vector<int> fold_of(static_cast<std::size_t>(n));
        {
            auto perm = ctx.rng.fork(17).permutation(n);
            for (int i = 0; i < n; ++i) fold_of[static_cast<std::size_t>(perm[i])] = i % folds;
        }
        const double improve_tol = 1e-4;
        std::vector<int> chosen;
        double best = subset_cv_rrms(X, Y, chosen, fold_of, folds);
        for (;;) {
            int best_add = -1;
            double best_score = best;
            for (int c = 0; c < p_all; ++c) {
                if (std::find(chosen.begin(), chosen.end(), c) != chosen.end()) continue;
                auto trial = chosen;
                trial.push_back(c);
                const double score = subset_cv_rrms(X, Y, trial, fold_of, folds);
                if (score < best_score - improve_tol) {
                    best_score = score;
                    best_add = c;
                }
            }
            if (best_add < 0) break;
            chosen.push_back(best_add);
            best = best_score;
            // Backward pass: drop any feature whose removal helps.
            for (std::size_t r = 0; r + 1 < chosen.size();) {
                auto trial = chosen;
                trial.erase(trial.begin() + static_cast<std::ptrdiff_t>(r));
                const double score = subset_cv_rrms(X, Y, trial, fold_of, folds);
                if (score < best - improve_tol) {
                    chosen = trial;
                    best = score;
                } else {
                    ++r;
                }
            }
        }
        std::sort(chosen.begin(), chosen.end());
        selected = chosen;
    }

    const auto p = static_cast<Eigen::Index>(selected.size());
    Eigen::MatrixXd Xs(n, p);
    for (Eigen::Index c = 0; c < p; ++c) Xs.col(c) = X.col(selected[static_cast<std::size_t>(c)]);
    const Eigen::RowVectorXd xm = p > 0 ? Eigen::RowVectorXd(Xs.colwise().mean())
                                        : Eigen::RowVectorXd(0);
    Eigen::MatrixXd Xc = Xs;
    if (p > 0) Xc.rowwise() -= xm;

    model->selected = selected;
    model->feat_mean = xm.transpose();
    model->intercept = Y.colwise().mean().transpose();
    model->gram = Xc.transpose() * Xc;
    model->cross = Xc.transpose() * Y;

    double lambda = ctx.tune.rsm_lambda.value_or(-1.0);
    if (estimator == RsmSpec::Estimator::elastic_net) {
        // 10 x 5 (lambda, alpha) grid scored by 5-fold CV when not pinned.
        const double lam_ref = std::max(model->cross.cwiseAbs().maxCoeff(), 1e-8);
        std::vector<double> lam_grid, alpha_grid{0.0, 0.25, 0.5, 0.75, 1.0};
        for (int i = 0; i < 10; ++i)
            lam_grid.push_back(lam_ref * std::pow(10.0, -5.0 + 6.0 * i / 9.0));
        if (lambda >= 0.0) lam_grid = {lambda};
        if (ctx.tune.rsm_alpha) alpha_grid = {*ctx.tune.rsm_alpha};
        const int folds = std::min(5, n);
        std::vector<int> fold_of(static_cast<std::size_t>(n));
        auto perm = ctx.rng.fork(19).permutation(n);
        for (int i = 0; i < n; ++i) fold_of[static_cast<std::size_t>(perm[i])] = i % folds;

        double best_score = std::numeric_limits<double>::infinity();
        double best_lam = lam_grid.front(), best_alpha = alpha_grid.front();
        for (double lam : lam_grid) {
            for (double al : alpha_grid) {
                Eigen::MatrixXd pred(n, m);
                for (int f = 0; f < folds; ++f) {
                    std::vector<Eigen::Index> tr, te;
                    for (int i = 0; i < n; ++i)
                        (fold_of[static_cast<std::size_t>(i)] == f ? te : tr).push_back(i);
                    Eigen::MatrixXd Xt(static_cast<Eigen::Index>(tr.size()), p);
                    Eigen::MatrixXd Yt(static_cast<Eigen::Index>(tr.size()), m);
                    for (std::size_t r = 0; r < tr.size(); ++r) {
                        Xt.row(static_cast<Eigen::Index>(r)) = Xs.row(tr[r]);
                        Yt.row(static_cast<Eigen::Index>(r)) = Y.row(tr[r]);
                    }
                    const Eigen::RowVectorXd fxm = Xt.colwise().mean();
                    const Eigen::RowVectorXd fym = Yt.colwise().mean();
                    Xt.rowwise() -= fxm;
                    Yt.rowwise() -= fym;
                    const Eigen::MatrixXd w = elastic_net_cd(Eigen::MatrixXd(Xt.transpose() * Xt),
                                                             Eigen::MatrixXd(Xt.transpose() * Yt),
                                                             lam, al);
                    for (Eigen::Index i : te) pred.row(i) = fym + (Xs.row(i) - fxm) * w;
                }
                double score = 0.0;
                for (int k = 0; k < m; ++k) {
                    const double denom = (Y.col(k).array() - Y.col(k).mean()).square().sum();
                    score += denom > 0 ? std::sqrt((Y.col(k) - pred.col(k)).squaredNorm() / denom) : 0.0;
                }
                if (score < best_score) {
                    best_score = score;
                    best_lam = lam;
                    best_alpha = al;
                }
            }
        }
        model->lambda = best_lam;
        model->alpha = best_alpha;
        model->weights = elastic_net_cd(model->gram, model->cross, best_lam, best_alpha);
        return model;
    }

    // Ridge path (also the final solve for stepwise selections).
    if (lambda < 0.0 && estimator == RsmSpec::Estimator::ridge && p > 0) {
        Eigen::BDCSVD<Eigen::MatrixXd> svd(Xc, Eigen::ComputeThinU);
        double best_score = std::numeric_limits<double>::infinity();
        for (int i = 0; i < 20; ++i) {
            const double lam = std::pow(10.0, -8.0 + 10.0 * i / 19.0);
            const double score = gcv_score(svd, Y, lam, n);
            if (score < best_score) {
                best_score = score;
                lambda = lam;
            }
        }
    }
    if (lambda < 0.0) lambda = 0.0;
    if (p > 0) {
        Eigen::LDLT<Eigen::MatrixXd> probe(model->gram);
        const double tiny = 1e-12 * std::max(1.0, model->gram.trace());
        const bool singular = probe.info() != Eigen::Success ||
                              probe.vectorD().minCoeff() < tiny;
        if (lambda == 0.0 && singular) {
            lambda = lambda_floor(model->gram);
            ctx.warn("rsm: singular design, forcing ridge lambda " + std::to_string(lambda));
        }
    }
    model->lambda = lambda;
    model->weights = p > 0 ? ridge_solve(model->gram, model->cross, lambda)
                           : Eigen::MatrixXd::Zero(0, m);
    return model;
}

SurrogateModel fit_rsm(const TrainingSample& sample, const RsmSpec& spec,
                       const ModelOptions& options) {
    ModelOptions opt = options;
    opt.technique = TechniqueChoice::rsm;
    TuneParams tune;
    tune.rsm_order = spec.order == RsmSpec::Order::linear ? 1 : 2;
    tune.rsm_estimator = spec.estimator == RsmSpec::Estimator::ridge      ? 0
                         : spec.estimator == RsmSpec::Estimator::stepwise ? 1
                                                                          : 2;
    if (spec.ridge_lambda >= 0.0) tune.rsm_lambda = spec.ridge_lambda;
    if (spec.elastic_alpha >= 0.0) tune.rsm_alpha = spec.elastic_alpha;
    return train_technique(sample, opt, Technique::rsm, tune);
}

namespace detail_rsm {

std::unique_ptr<TechniqueModel> load(const nlohmann::json& params) {
    return RsmModel::from_json(params);
}

}  // namespace detail_rsm

}  // namespace gta
