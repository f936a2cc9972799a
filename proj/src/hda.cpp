#include "gta/hda.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gta {

double HdaUnit::eval(const Eigen::Ref<const Eigen::VectorXd>& u) const {
    if (type == Type::sigmoid) return std::tanh(direction.dot(u) + offset);
    return std::exp(-(u - direction).squaredNorm() / (2.0 * width * width));
}

Eigen::VectorXd HdaUnit::grad(const Eigen::Ref<const Eigen::VectorXd>& u) const {
    if (type == Type::sigmoid) {
        const double t = std::tanh(direction.dot(u) + offset);
        return (1.0 - t * t) * direction;
    }
    const double g = eval(u);
    return (g / (width * width)) * (direction - u);
}

namespace {

struct HdaStage {
    Eigen::VectorXd intercept;   // per output of the block
    Eigen::MatrixXd linear;      // d x m
    std::vector<HdaUnit> units;
    Eigen::MatrixXd unit_weights;  // units x m
    double ridge = 1e-8;

    Eigen::VectorXd predict(const Eigen::Ref<const Eigen::VectorXd>& u) const {
        Eigen::VectorXd out = intercept + linear.transpose() * u;
        for (std::size_t j = 0; j < units.size(); ++j)
            out += unit_weights.row(static_cast<Eigen::Index>(j)).transpose() * units[j].eval(u);
        return out;
    }

    Eigen::MatrixXd jacobian(const Eigen::Ref<const Eigen::VectorXd>& u) const {
        Eigen::MatrixXd jac = linear.transpose();
        for (std::size_t j = 0; j < units.size(); ++j)
            jac += unit_weights.row(static_cast<Eigen::Index>(j)).transpose() *
                   units[j].grad(u).transpose();
        return jac;
    }
};

nlohmann::json stage_to_json(const HdaStage& s) {
    nlohmann::json units = nlohmann::json::array();
    for (const auto& unit : s.units)
        units.push_back({{"type", unit.type == HdaUnit::Type::sigmoid ? "sigmoid" : "gaussian"},
                         {"direction", std::vector<double>(unit.direction.begin(), unit.direction.end())},
                         {"offset", unit.offset},
                         {"width", unit.width}});
    return {{"intercept", std::vector<double>(s.intercept.begin(), s.intercept.end())},
            {"linear", std::vector<double>(s.linear.data(), s.linear.data() + s.linear.size())},
            {"units", units},
            {"unit_weights",
             std::vector<double>(s.unit_weights.data(), s.unit_weights.data() + s.unit_weights.size())},
            {"ridge", s.ridge}};
}

HdaStage stage_from_json(const nlohmann::json& j, int d, int m) {
    HdaStage s;
    const auto ic = j.at("intercept").get<std::vector<double>>();
    s.intercept = Eigen::Map<const Eigen::VectorXd>(ic.data(), static_cast<Eigen::Index>(ic.size()));
    const auto lin = j.at("linear").get<std::vector<double>>();
    s.linear = Eigen::Map<const Eigen::MatrixXd>(lin.data(), d, m);
    for (const auto& uj : j.at("units")) {
        HdaUnit unit;
        unit.type = uj.at("type") == "sigmoid" ? HdaUnit::Type::sigmoid : HdaUnit::Type::gaussian;
        const auto dir = uj.at("direction").get<std::vector<double>>();
        unit.direction = Eigen::Map<const Eigen::VectorXd>(dir.data(), static_cast<Eigen::Index>(dir.size()));
        unit.offset = uj.at("offset").get<double>();
        unit.width = uj.at("width").get<double>();
        s.units.push_back(std::move(unit));
    }
    const auto w = j.at("unit_weights").get<std::vector<double>>();
    s.unit_weights = Eigen::Map<const Eigen::MatrixXd>(w.data(), static_cast<Eigen::Index>(s.units.size()), m);
    s.ridge = j.at("ridge").get<double>();
    return s;
}

struct HdaBlock {
    std::vector<int> outputs;
    std::vector<HdaStage> stages;
    std::vector<double> shrinkage;  // per stage; stage 1 carries 1.0

    Eigen::VectorXd predict(const Eigen::Ref<const Eigen::VectorXd>& u) const {
        Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(outputs.size()));
        for (std::size_t s = 0; s < stages.size(); ++s) out += shrinkage[s] * stages[s].predict(u);
        return out;
    }
};

class HdaCore final : public TechniqueModel {
public:
    std::vector<HdaBlock> blocks;
    int d = 0;
    int m = 0;

    Technique technique() const override { return Technique::hda; }
    int input_dim() const override { return d; }
    int output_dim() const override { return m; }
    Capabilities capabilities() const override { return {true, false, true}; }

    Eigen::VectorXd predict(const Eigen::Ref<const Eigen::VectorXd>& u) const override {
        Eigen::VectorXd out(m);
        for (const auto& block : blocks) {
            const Eigen::VectorXd v = block.predict(u);
            for (std::size_t i = 0; i < block.outputs.size(); ++i)
                out[block.outputs[i]] = v[static_cast<Eigen::Index>(i)];
        }
        return out;
    }

    Eigen::MatrixXd jacobian(const Eigen::Ref<const Eigen::VectorXd>& u) const override {
        Eigen::MatrixXd jac(m, d);
        for (const auto& block : blocks) {
            Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(block.outputs.size()), d);
            for (std::size_t s = 0; s < block.stages.size(); ++s)
                acc += block.shrinkage[s] * block.stages[s].jacobian(u);
            for (std::size_t i = 0; i < block.outputs.size(); ++i)
                jac.row(block.outputs[i]) = acc.row(static_cast<Eigen::Index>(i));
        }
        return jac;
    }

    std::unique_ptr<TechniqueModel> resmoothed(double sm) const override;

    nlohmann::json params_json() const override {
        nlohmann::json bs = nlohmann::json::array();
        for (const auto& block : blocks) {
            nlohmann::json stages = nlohmann::json::array();
            for (const auto& s : block.stages) stages.push_back(stage_to_json(s));
            bs.push_back({{"outputs", block.outputs},
                          {"stages", stages},
                          {"shrinkage", block.shrinkage}});
        }
        return {{"d", d}, {"m", m}, {"blocks", bs}, {"targets", std::vector<double>(targets_.data(), targets_.data() + targets_.size())}, {"inputs", std::vector<double>(inputs_.data(), inputs_.data() + inputs_.size())}, {"n", inputs_.rows()}};
    }

    void set_training(const Eigen::MatrixXd& U, const Eigen::MatrixXd& Y) {
        inputs_ = U;
        targets_ = Y;
    }
    const Eigen::MatrixXd& inputs() const { return inputs_; }
    const Eigen::MatrixXd& targets() const { return targets_; }

private:
    // Kept for the smoothing refit (output-weight ridge rescale).
    Eigen::MatrixXd inputs_;
    Eigen::MatrixXd targets_;
};

/// Feature matrix [u, unit values] for the current nonlinear parameters.
Eigen::MatrixXd build_features(const HdaStage& stage, const Eigen::MatrixXd& U) {
    const Eigen::Index n = U.rows();
    const Eigen::Index d = U.cols();
    const auto p = static_cast<Eigen::Index>(stage.units.size());
    Eigen::MatrixXd F(n, d + p);
    F.leftCols(d) = U;
    for (Eigen::Index j = 0; j < p; ++j) {
        const auto& unit = stage.units[static_cast<std::size_t>(j)];
        if (unit.type == HdaUnit::Type::sigmoid) {
            F.col(d + j) = ((U * unit.direction).array() + unit.offset).tanh();
        } else {
            Eigen::VectorXd sq = (U.rowwise() - unit.direction.transpose()).rowwise().squaredNorm();
            F.col(d + j) = (-sq.array() / (2.0 * unit.width * unit.width)).exp();
        }
    }
    return F;
}

/// Ridge solve of [1, u, units] features against targets with unpenalized
/// intercept; fills the stage weights.
void solve_output_weights(HdaStage& stage, const Eigen::MatrixXd& F, const Eigen::MatrixXd& R,
                          double ridge) {
    const Eigen::Index d = F.cols() - static_cast<Eigen::Index>(stage.units.size());
    const auto p = static_cast<Eigen::Index>(stage.units.size());
    const Eigen::RowVectorXd fm = F.colwise().mean();
    const Eigen::MatrixXd Fc = F.rowwise() - fm;
    const Eigen::RowVectorXd rm = R.colwise().mean();
    const Eigen::MatrixXd Rc = R.rowwise() - rm;
    Eigen::MatrixXd G = Fc.transpose() * Fc;
    G.diagonal().array() += ridge;
    const Eigen::MatrixXd W = G.ldlt().solve(Fc.transpose() * Rc);
    stage.linear = W.topRows(d);
    stage.unit_weights = W.bottomRows(p);
    stage.intercept = rm.transpose() - W.transpose() * fm.transpose();
    stage.ridge = ridge;
}

Eigen::MatrixXd stage_residual(const HdaStage& stage, const Eigen::MatrixXd& F,
                               const Eigen::MatrixXd& R) {
    const Eigen::Index d = F.cols() - static_cast<Eigen::Index>(stage.units.size());
    Eigen::MatrixXd W(F.cols(), stage.unit_weights.cols());
    W.topRows(d) = stage.linear;
    W.bottomRows(F.cols() - d) = stage.unit_weights;
    Eigen::MatrixXd resid = R;
    resid.noalias() -= F * W;
    resid.rowwise() -= stage.intercept.transpose();
    return resid;
}

double stage_loss(const HdaStage& stage, const Eigen::MatrixXd& F, const Eigen::MatrixXd& R) {
    return stage_residual(stage, F, R).squaredNorm() +
           stage.ridge * (stage.linear.squaredNorm() + stage.unit_weights.squaredNorm());
}

/// Pack/unpack nonlinear parameters for gradient descent.
Eigen::VectorXd pack_units(const std::vector<HdaUnit>& units) {
    if (units.empty()) return {};
    const auto d = units.front().direction.size();
    Eigen::VectorXd theta(static_cast<Eigen::Index>(units.size()) * (d + 2));
    Eigen::Index at = 0;
    for (const auto& u : units) {
        theta.segment(at, d) = u.direction;
        theta[at + d] = u.offset;
        theta[at + d + 1] = std::log(u.width);
        at += d + 2;
    }
    return theta;
}

void unpack_units(const Eigen::VectorXd& theta, std::vector<HdaUnit>& units) {
    if (units.empty()) return;
    const auto d = units.front().direction.size();
    Eigen::Index at = 0;
    for (auto& u : units) {
        u.direction = theta.segment(at, d);
        u.offset = theta[at + d];
        u.width = std::exp(std::clamp(theta[at + d + 1], -10.0, 20.0));
        at += d + 2;
    }
}

/// Loss gradient w.r.t. the packed nonlinear parameters (weights held fixed).
/// only_unit >= 0 restricts the gradient to that unit's block.
Eigen::VectorXd units_gradient(const HdaStage& stage, const Eigen::MatrixXd& F,
                               const Eigen::MatrixXd& U, const Eigen::MatrixXd& R,
                               int only_unit) {
    const Eigen::Index d = U.cols();
    const auto p = static_cast<Eigen::Index>(stage.units.size());
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(p * (d + 2));
    const Eigen::MatrixXd resid = stage_residual(stage, F, R);
    const Eigen::Index j_lo = only_unit >= 0 ? only_unit : 0;
    const Eigen::Index j_hi = only_unit >= 0 ? only_unit + 1 : p;
    for (Eigen::Index j = j_lo; j < j_hi; ++j) {
        const auto& unit = stage.units[static_cast<std::size_t>(j)];
        // s_i = -2 resid_i . w_j, shared by all of the unit's parameters.
        const Eigen::VectorXd s = -2.0 * (resid * stage.unit_weights.row(j).transpose());
        const Eigen::Index at = j * (d + 2);
        if (unit.type == HdaUnit::Type::sigmoid) {
            const Eigen::ArrayXd t = F.col(d + j).array();
            const Eigen::VectorXd sd = (s.array() * (1.0 - t * t)).matrix();
            grad.segment(at, d) = U.transpose() * sd;
            grad[at + d] = sd.sum();
        } else {
            const double w2 = unit.width * unit.width;
            const Eigen::VectorXd sg = (s.array() * F.col(d + j).array()).matrix() / w2;
            grad.segment(at, d) = (sg.transpose() * U).transpose() - sg.sum() * unit.direction;
            const Eigen::VectorXd sq =
                (U.rowwise() - unit.direction.transpose()).rowwise().squaredNorm();
            grad[at + d + 1] = sg.dot(sq);
        }
    }
    return grad;
}

/// Gradient descent on the nonlinear parameters with ridge-solved weights
/// (variable projection). Divergence triggers restarts with halved step.
void refine_stage(HdaStage& stage, const Eigen::MatrixXd& U, const Eigen::MatrixXd& R,
                  int max_iter, int only_unit = -1) {
    if (stage.units.empty()) return;
    const Eigen::VectorXd theta_init = pack_units(stage.units);
    HdaStage best = stage;
    double best_loss = stage_loss(stage, build_features(stage, U), R);

    double base_step = 0.05;
    for (int attempt = 0; attempt < 4; ++attempt) {
        unpack_units(theta_init, stage.units);
        Eigen::MatrixXd F = build_features(stage, U);
        solve_output_weights(stage, F, R, stage.ridge);
        Eigen::VectorXd theta = theta_init;
        double loss = stage_loss(stage, F, R);
        double step = base_step;
        int rejected_in_row = 0;
        bool diverged = false;
        for (int iter = 0; iter < max_iter; ++iter) {
            const Eigen::VectorXd grad = units_gradient(stage, F, U, R, only_unit);
            const double gnorm = grad.norm();
            if (gnorm < 1e-14) break;
            const Eigen::VectorXd trial = theta - (step / gnorm) * grad;
            HdaStage probe = stage;
            unpack_units(trial, probe.units);
            const Eigen::MatrixXd Ft = build_features(probe, U);
            solve_output_weights(probe, Ft, R, probe.ridge);
            const double trial_loss = stage_loss(probe, Ft, R);
            if (trial_loss < loss) {
                const double gain = loss - trial_loss;
                theta = trial;
                stage = probe;
                F = Ft;
                loss = trial_loss;
                step = std::min(step * 1.25, 1.0);
                rejected_in_row = 0;
                if (loss < best_loss) {
                    best_loss = loss;
                    best = stage;
                }
                if (gain < 1e-8 * std::max(1.0, loss)) break;
            } else {
                step *= 0.5;
                if (++rejected_in_row >= 20) {
                    diverged = true;
                    break;
                }
            }
        }
        if (!diverged) break;
        base_step *= 0.5;
    }
    stage = best;
}

/// Ridge strength by generalized cross-validation over the feature set.
double pick_ridge(const Eigen::MatrixXd& F_centered, const Eigen::MatrixXd& Rc) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(F_centered, Eigen::ComputeThinU);
    const Eigen::VectorXd& sv = svd.singularValues();
    const Eigen::MatrixXd Z = svd.matrixU().transpose() * Rc;
    const double n = static_cast<double>(F_centered.rows());
    double best_score = std::numeric_limits<double>::infinity();
    double best_lambda = 1e-8;
    for (int i = 0; i < 12; ++i) {
        const double lam = std::pow(10.0, -8.0 + 8.0 * i / 11.0);
        double edf = 0.0, rss = 0.0;
        for (Eigen::Index t = 0; t < sv.size(); ++t) edf += sv[t] * sv[t] / (sv[t] * sv[t] + lam);
        for (Eigen::Index k = 0; k < Rc.cols(); ++k) {
            double inside = 0.0;
            for (Eigen::Index t = 0; t < sv.size(); ++t) {
                const double shrink = lam / (sv[t] * sv[t] + lam);
                inside += shrink * shrink * Z(t, k) * Z(t, k);
            }
            rss += Rc.col(k).squaredNorm() - Z.col(k).squaredNorm() + inside;
        }
        const double dof = std::max(1.0, n - 1.0 - edf);
        const double score = n * rss / (dof * dof);
        if (score < best_score) {
            best_score = score;
            best_lambda = lam;
        }
    }
    return best_lambda;
}

struct StageBudget {
    int greedy_iters = 60;
    int refine_iters = 500;
};

/// One HDA stage of given basis size on targets R.
HdaStage train_stage(const Eigen::MatrixXd& U, const Eigen::MatrixXd& R, int p, Rng rng,
                     const StageBudget& budget) {
    const Eigen::Index n = U.rows();
    const Eigen::Index d = U.cols();

    // Median pairwise distance on a subsample: the gaussian width scale.
    double median_dist = 1.0;
    {
        std::vector<double> dists;
        const int cap = std::min<int>(64, static_cast<int>(n));
        for (int a = 0; a < cap; ++a)
            for (int b = a + 1; b < cap; ++b)
                dists.push_back((U.row(a) - U.row(b)).norm());
        if (!dists.empty()) {
            std::nth_element(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(dists.size() / 2),
                             dists.end());
            median_dist = std::max(1e-6, dists[dists.size() / 2]);
        }
    }

    HdaStage stage;
    stage.intercept = R.colwise().mean().transpose();
    stage.linear = Eigen::MatrixXd::Zero(d, R.cols());
    stage.unit_weights = Eigen::MatrixXd::Zero(0, R.cols());
    {
        Eigen::MatrixXd Uc = U.rowwise() - U.colwise().mean();
        Eigen::MatrixXd Rc = R.rowwise() - R.colwise().mean();
        stage.ridge = pick_ridge(Uc, Rc);
    }
    solve_output_weights(stage, build_features(stage, U), R, stage.ridge);

    // Seeded holdout split scoring the greedy type choice per unit.
    std::vector<int> holdout_mask(static_cast<std::size_t>(n), 0);
    {
        auto perm = rng.fork(1).permutation(static_cast<int>(n));
        const int h = std::max(1, static_cast<int>(n) / 5);
        for (int i = 0; i < h; ++i) holdout_mask[static_cast<std::size_t>(perm[i])] = 1;
    }
    auto holdout_sse = [&](const HdaStage& s) {
        double sse = 0.0;
        for (Eigen::Index i = 0; i < n; ++i)
            if (holdout_mask[static_cast<std::size_t>(i)])
                sse += (R.row(i).transpose() - s.predict(U.row(i).transpose())).squaredNorm();
        return sse;
    };

    const double quantiles[5] = {0.2, 0.35, 0.5, 0.65, 0.8};
    for (int j = 0; j < p; ++j) {
        HdaStage best_choice;
        double best_score = std::numeric_limits<double>::infinity();
        for (int type = 0; type < 2; ++type) {
            HdaStage candidate = stage;
            HdaUnit unit;
            Rng unit_rng = rng.fork(100 + 2 * j + type);
            if (type == 0) {
                unit.type = HdaUnit::Type::sigmoid;
                Eigen::VectorXd v(d);
                for (Eigen::Index t = 0; t < d; ++t) v[t] = unit_rng.normal();
                v.normalize();
                Eigen::VectorXd proj = U * v;
                std::sort(proj.begin(), proj.end());
                const double q = quantiles[j % 5];
                const double pivot = proj[static_cast<Eigen::Index>(q * static_cast<double>(n - 1))];
                const double spread = std::max(1e-6, proj[n - 1] - proj[0]);
                const double sharp = 4.0 / spread;
                unit.direction = sharp * v;
                unit.offset = -sharp * pivot;
                unit.width = 1.0;
            } else {
                unit.type = HdaUnit::Type::gaussian;
                unit.direction = U.row(unit_rng.uniform_int(0, static_cast<int>(n) - 1)).transpose();
                unit.offset = 0.0;
                unit.width = median_dist;
            }
            candidate.units.push_back(unit);
            solve_output_weights(candidate, build_features(candidate, U), R, candidate.ridge);
            refine_stage(candidate, U, R, budget.greedy_iters,
                         static_cast<int>(candidate.units.size()) - 1);
            const double score = holdout_sse(candidate);
            if (score < best_score) {
                best_score = score;
                best_choice = candidate;
            }
        }
        stage = best_choice;
    }

    refine_stage(stage, U, R, budget.refine_iters);

    // Drop units whose output weight is negligible.
    if (!stage.units.empty()) {
        const double max_w = std::max(1e-300, stage.unit_weights.cwiseAbs().maxCoeff());
        std::vector<HdaUnit> kept;
        std::vector<Eigen::Index> kept_rows;
        for (Eigen::Index j = 0; j < stage.unit_weights.rows(); ++j) {
            if (stage.unit_weights.row(j).cwiseAbs().maxCoeff() >= 1e-12 * max_w) {
                kept.push_back(stage.units[static_cast<std::size_t>(j)]);
                kept_rows.push_back(j);
            }
        }
        if (kept.size() != stage.units.size()) {
            Eigen::MatrixXd W(static_cast<Eigen::Index>(kept_rows.size()), stage.unit_weights.cols());
            for (std::size_t r = 0; r < kept_rows.size(); ++r) W.row(static_cast<Eigen::Index>(r)) = stage.unit_weights.row(kept_rows[r]);
            stage.units = std::move(kept);
            stage.unit_weights = std::move(W);
        }
    }
    return stage;
}

std::vector<int> hda_size_grid(int n, int accelerator) {
    static const int full[7] = {0, 3, 6, 12, 25, 50, 100};
    const int len = std::clamp(static_cast<int>(std::lround(7.0 * accelerator_factor(accelerator))), 2, 7);
    std::vector<int> grid;
    for (int i = 0; i < len; ++i)
        if (full[i] <= std::max(3, n / 2)) grid.push_back(full[i]);
    if (grid.empty()) grid.push_back(0);
    return grid;
}

/// Pooled CV RRMS of single-stage fits at basis size p.
double stage_cv_rrms(const Eigen::MatrixXd& U, const Eigen::MatrixXd& Y, int p, Rng rng,
                     const StageBudget& cv_budget) {
    const Eigen::Index n = U.rows();
    const int folds = std::min<int>(5, static_cast<int>(n));
    std::vector<int> fold_of(static_cast<std::size_t>(n));
    auto perm = rng.fork(2).permutation(static_cast<int>(n));
    for (Eigen::Index i = 0; i < n; ++i) fold_of[static_cast<std::size_t>(perm[i])] = static_cast<int>(i) % folds;

    Eigen::MatrixXd pred(n, Y.cols());
    for (int f = 0; f < folds; ++f) {
        std::vector<Eigen::Index> tr, te;
        for (Eigen::Index i = 0; i < n; ++i)
            (fold_of[static_cast<std::size_t>(i)] == f ? te : tr).push_back(i);
        Eigen::MatrixXd Ut(static_cast<Eigen::Index>(tr.size()), U.cols());
        Eigen::MatrixXd Yt(static_cast<Eigen::Index>(tr.size()), Y.cols());
        for (std::size_t r = 0; r < tr.size(); ++r) {
            Ut.row(static_cast<Eigen::Index>(r)) = U.row(tr[r]);
            Yt.row(static_cast<Eigen::Index>(r)) = Y.row(tr[r]);
        }
        const HdaStage stage = train_stage(Ut, Yt, p, rng.fork(10 + f), cv_budget);
        for (Eigen::Index i : te) pred.row(i) = stage.predict(U.row(i).transpose()).transpose();
    }
    double total = 0.0;
    for (Eigen::Index k = 0; k < Y.cols(); ++k) {
        const double mean = Y.col(k).mean();
        const double denom = (Y.col(k).array() - mean).square().sum();
        const double num = (Y.col(k) - pred.col(k)).squaredNorm();
        total += denom > 0 ? std::sqrt(num / denom) : 0.0;
    }
    return total / static_cast<double>(Y.cols());
}

/// Basis size selection + single final stage on targets Y.
HdaStage train_sized_stage(const Eigen::MatrixXd& U, const Eigen::MatrixXd& Y, TrainContext& ctx,
                           Rng rng, int* chosen_p = nullptr) {
    int p;
    if (ctx.tune.hda_p) {
        p = *ctx.tune.hda_p;
    } else {
        const auto grid = hda_size_grid(static_cast<int>(U.rows()), ctx.options.accelerator);
        StageBudget cv_budget{40, 120};
        double best = std::numeric_limits<double>::infinity();
        p = grid.front();
        for (int candidate : grid) {
            const double cv = stage_cv_rrms(U, Y, candidate, rng.fork(3 + candidate), cv_budget);
            if (cv < best - 1e-12) {
                best = cv;
                p = candidate;
            }
        }
    }
    if (chosen_p) *chosen_p = p;
    return train_stage(U, Y, p, rng.fork(4), StageBudget{});
}

std::unique_ptr<TechniqueModel> fit_hda_impl(const Eigen::Ref<const Eigen::MatrixXd>& U,
                                             const Eigen::Ref<const Eigen::MatrixXd>& Y,
                                             TrainContext& ctx, int max_stages) {
    const int n = static_cast<int>(U.rows());
    const int m = static_cast<int>(Y.cols());
    if (n < 8) throw ConfigError("hda: needs at least 8 training points");

    auto core = std::make_unique<HdaCore>();
    core->d = static_cast<int>(U.cols());
    core->m = m;
    core->set_training(U, Y);

    std::vector<std::vector<int>> groups;
    if (ctx.options.joint_outputs) {
        std::vector<int> all(static_cast<std::size_t>(m));
        for (int k = 0; k < m; ++k) all[static_cast<std::size_t>(k)] = k;
        groups.push_back(std::move(all));
    } else {
        for (int k = 0; k < m; ++k) groups.push_back({k});
    }

    const double nu = ctx.tune.hda_shrinkage.value_or(0.5);
    for (std::size_t g = 0; g < groups.size(); ++g) {
        Eigen::MatrixXd Ysub(n, static_cast<Eigen::Index>(groups[g].size()));
        for (std::size_t i = 0; i < groups[g].size(); ++i)
            Ysub.col(static_cast<Eigen::Index>(i)) = Y.col(groups[g][i]);

        Rng rng = ctx.rng.fork(0x484441 + g);
        HdaBlock block;
        block.outputs = groups[g];

        int p = 0;
        block.stages.push_back(train_sized_stage(U, Ysub, ctx, rng, &p));
        block.shrinkage.push_back(1.0);

        if (max_stages > 1) {
            // Residual boosting with CV-gated stage acceptance.
            auto ensemble_cv = [&](int stages) {
                const int folds = std::min(5, n);
                std::vector<int> fold_of(static_cast<std::size_t>(n));
                auto perm = rng.fork(5).permutation(n);
                for (int i = 0; i < n; ++i) fold_of[static_cast<std::size_t>(perm[i])] = i % folds;
                Eigen::MatrixXd pred(n, Ysub.cols());
                StageBudget cv_budget{40, 120};
                for (int f = 0; f < folds; ++f) {
                    std::vector<Eigen::Index> tr, te;
                    for (int i = 0; i < n; ++i)
                        (fold_of[static_cast<std::size_t>(i)] == f ? te : tr).push_back(i);
                    Eigen::MatrixXd Ut(static_cast<Eigen::Index>(tr.size()), U.cols());
                    Eigen::MatrixXd Rt(static_cast<Eigen::Index>(tr.size()), Ysub.cols());
                    for (std::size_t r = 0; r < tr.size(); ++r) {
                        Ut.row(static_cast<Eigen::Index>(r)) = U.row(tr[r]);
                        Rt.row(static_cast<Eigen::Index>(r)) = Ysub.row(tr[r]);
                    }
                    std::vector<HdaStage> fold_stages;
                    std::vector<double> fold_nu;
                    for (int s = 0; s < stages; ++s) {
                        const HdaStage st = train_stage(Ut, Rt, p, rng.fork(20 + 7 * f + s), cv_budget);
                        const double weight = s == 0 ? 1.0 : nu;
                        fold_stages.push_back(st);
                        fold_nu.push_back(weight);
                        for (Eigen::Index i = 0; i < Ut.rows(); ++i)
                            Rt.row(i) -= weight * st.predict(Ut.row(i).transpose()).transpose();
                    }
                    for (Eigen::Index i : te) {
                        Eigen::VectorXd v = Eigen::VectorXd::Zero(Ysub.cols());
                        for (std::size_t s = 0; s < fold_stages.size(); ++s)
                            v += fold_nu[s] * fold_stages[s].predict(U.row(i).transpose());
                        pred.row(i) = v.transpose();
                    }
                }
                double total = 0.0;
                for (Eigen::Index k = 0; k < Ysub.cols(); ++k) {
                    const double mean = Ysub.col(k).mean();
                    const double denom = (Ysub.col(k).array() - mean).square().sum();
                    total += denom > 0 ? std::sqrt((Ysub.col(k) - pred.col(k)).squaredNorm() / denom) : 0.0;
                }
                return total / static_cast<double>(Ysub.cols());
            };

            Eigen::MatrixXd resid = Ysub;
            for (Eigen::Index i = 0; i < n; ++i)
                resid.row(i) -= block.stages[0].predict(U.row(i).transpose()).transpose();
            double cv_prev = ensemble_cv(1);
            for (int s = 2; s <= max_stages; ++s) {
                const double cv_next = ensemble_cv(s);
                if (cv_next > cv_prev - 1e-3) break;
                const HdaStage st = train_stage(U, resid, p, rng.fork(40 + s), StageBudget{});
                block.stages.push_back(st);
                block.shrinkage.push_back(nu);
                for (Eigen::Index i = 0; i < n; ++i)
                    resid.row(i) -= nu * st.predict(U.row(i).transpose()).transpose();
                cv_prev = cv_next;
            }
        }
        core->blocks.push_back(std::move(block));
    }
    return core;
}

std::unique_ptr<TechniqueModel> HdaCore::resmoothed(double sm) const {
    // Output-weight ridge scaled by 10^(4 s); nonlinear parameters kept.
    auto copy = std::make_unique<HdaCore>(*this);
    const double factor = std::pow(10.0, 4.0 * sm);
    for (auto& block : copy->blocks) {
        Eigen::MatrixXd Ysub(inputs_.rows(), static_cast<Eigen::Index>(block.outputs.size()));
        for (std::size_t i = 0; i < block.outputs.size(); ++i)
            Ysub.col(static_cast<Eigen::Index>(i)) = targets_.col(block.outputs[i]);
        Eigen::MatrixXd resid = Ysub;
        for (std::size_t s = 0; s < block.stages.size(); ++s) {
            HdaStage& stage = block.stages[s];
            solve_output_weights(stage, build_features(stage, inputs_), resid, stage.ridge * factor);
            for (Eigen::Index i = 0; i < inputs_.rows(); ++i)
                resid.row(i) -= block.shrinkage[s] * stage.predict(inputs_.row(i).transpose()).transpose();
        }
    }
    return copy;
}

}  // namespace

std::unique_ptr<TechniqueModel> fit_hda_core(const Eigen::Ref<const Eigen::MatrixXd>& U,
                                             const Eigen::Ref<const Eigen::MatrixXd>& Y,
                                             TrainContext& ctx) {
    return fit_hda_impl(U, Y, ctx, 1);
}

std::unique_ptr<TechniqueModel> boost_hda_core(const Eigen::Ref<const Eigen::MatrixXd>& U,
                                               const Eigen::Ref<const Eigen::MatrixXd>& Y,
                                               TrainContext& ctx) {
    return fit_hda_impl(U, Y, ctx, ctx.tune.hda_max_stages.value_or(10));
}

std::unique_ptr<TechniqueModel> make_hda_stage_for_test(int d, std::vector<HdaUnit> units,
                                                        const Eigen::MatrixXd& unit_weights,
                                                        const Eigen::MatrixXd& linear,
                                                        const Eigen::VectorXd& intercept) {
    auto core = std::make_unique<HdaCore>();
    core->d = d;
    core->m = static_cast<int>(intercept.size());
    HdaBlock block;
    for (int k = 0; k < core->m; ++k) block.outputs.push_back(k);
    HdaStage stage;
    stage.units = std::move(units);
    stage.unit_weights = unit_weights;
    stage.linear = linear;
    stage.intercept = intercept;
    block.stages.push_back(std::move(stage));
    block.shrinkage.push_back(1.0);
    core->blocks.push_back(std::move(block));
    core->set_training(Eigen::MatrixXd::Zero(1, d), Eigen::MatrixXd::Zero(1, core->m));
    return core;
}

std::vector<HdaUnit> fit_hda_units(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, int p,
                                   Rng rng) {
    const HdaStage stage = train_stage(X, Y, p, rng, StageBudget{40, 150});
    return stage.units;
}

namespace detail_hda {

std::unique_ptr<TechniqueModel> load(const nlohmann::json& params) {
    auto core = std::make_unique<HdaCore>();
    core->d = params.at("d").get<int>();
    core->m = params.at("m").get<int>();
    for (const auto& bj : params.at("blocks")) {
        HdaBlock block;
        block.outputs = bj.at("outputs").get<std::vector<int>>();
        block.shrinkage = bj.at("shrinkage").get<std::vector<double>>();
        for (const auto& sj : bj.at("stages"))
            block.stages.push_back(stage_from_json(sj, core->d, static_cast<int>(block.outputs.size())));
        core->blocks.push_back(std::move(block));
    }
    const auto n = params.at("n").get<Eigen::Index>();
    const auto tv = params.at("targets").get<std::vector<double>>();
    const auto iv = params.at("inputs").get<std::vector<double>>();
    Eigen::MatrixXd T = Eigen::Map<const Eigen::MatrixXd>(tv.data(), n, core->m);
    Eigen::MatrixXd I = Eigen::Map<const Eigen::MatrixXd>(iv.data(), n, core->d);
    core->set_training(I, T);
    return core;
}

}  // namespace detail_hda

}  // namespace gta
