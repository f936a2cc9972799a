#include "gta/gp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace gta {

namespace {

constexpr double kLogLenLo = -4.605170185988091;  // ln 1e-2
constexpr double kLogLenHi = 4.605170185988091;   // ln 1e2
constexpr double kExactNugget = 1e-10;

struct GpHyper {
    GpKernel kernel = GpKernel::squared_exponential;
    Eigen::VectorXd log_length;  // per encoded input
    double log_var = 0.0;
    double log_nugget = std::log(1e-6);

    int dim() const { return static_cast<int>(log_length.size()); }
    double var() const { return std::exp(log_var); }
    double nugget() const { return std::exp(log_nugget); }

    Eigen::VectorXd pack() const {
        Eigen::VectorXd v(dim() + 2);
        v.head(dim()) = log_length;
        v[dim()] = log_var;
        v[dim() + 1] = log_nugget;
        return v;
    }
    static GpHyper unpack(GpKernel kernel, const Eigen::VectorXd& v) {
        GpHyper h;
        h.kernel = kernel;
        h.log_length = v.head(v.size() - 2);
        h.log_var = v[v.size() - 2];
        h.log_nugget = v[v.size() - 1];
        return h;
    }
};

/// Kernel matrix between row sets A (n x d) and B (m x d), no nugget.
Eigen::MatrixXd kernel_matrix(const GpHyper& h, const Eigen::Ref<const Eigen::MatrixXd>& A,
                              const Eigen::Ref<const Eigen::MatrixXd>& B) {
    const Eigen::VectorXd inv_len = (-h.log_length).array().exp();
    const Eigen::MatrixXd As = A * inv_len.asDiagonal();
    const Eigen::MatrixXd Bs = B * inv_len.asDiagonal();
    const Eigen::VectorXd a2 = As.rowwise().squaredNorm();
    const Eigen::VectorXd b2 = Bs.rowwise().squaredNorm();
    Eigen::MatrixXd R2 = -2.0 * As * Bs.transpose();
    R2.colwise() += a2;
    R2.rowwise() += b2.transpose();
    R2 = R2.cwiseMax(0.0);
    const double var = h.var();
    if (h.kernel == GpKernel::squared_exponential)
        return (R2.array() * -0.5).exp() * var;
    const Eigen::ArrayXXd r = R2.array().sqrt();
    const double c = std::sqrt(5.0);
    return var * (1.0 + c * r + (5.0 / 3.0) * R2.array()) * (-c * r).exp();
}

/// Kernel value and gradient with respect to the first argument.
void kernel_value_grad(const GpHyper& h, const Eigen::Ref<const Eigen::VectorXd>& u,
                       const Eigen::Ref<const Eigen::VectorXd>& x, double& value,
                       Eigen::Ref<Eigen::VectorXd> grad) {
    const Eigen::ArrayXd inv2 = (-2.0 * h.log_length.array()).exp();
    const Eigen::ArrayXd diff = (u - x).array();
    const double r2 = (diff.square() * inv2).sum();
    const double var = h.var();
    if (h.kernel == GpKernel::squared_exponential) {
        value = var * std::exp(-0.5 * r2);
        grad = (-value) * (diff * inv2).matrix();
        return;
    }
    const double r = std::sqrt(r2);
    const double c = std::sqrt(5.0);
    const double e = std::exp(-c * r);
    value = var * (1.0 + c * r + (5.0 / 3.0) * r2) * e;
    const double dk_over_r = -(5.0 / 3.0) * (1.0 + c * r) * var * e;  // (dk/dr)/r
    grad = dk_over_r * (diff * inv2).matrix();
}

struct LmlWorkspace {
    Eigen::MatrixXd K;       // kernel + nugget
    Eigen::LLT<Eigen::MatrixXd> chol;
    Eigen::MatrixXd alpha;   // K^-1 Y
    bool ok = false;
};

/// Negative log marginal likelihood (summed over outputs) and gradient.
/// Returns +inf (ok=false) when the factorization fails.
double negative_lml(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, const GpHyper& h,
                    Eigen::VectorXd* grad, LmlWorkspace* ws_out = nullptr) {
    const Eigen::Index n = X.rows();
    const Eigen::Index m = Y.cols();
    LmlWorkspace ws;
    ws.K = kernel_matrix(h, X, X);
    ws.K.diagonal().array() += h.nugget();
    ws.chol.compute(ws.K);
    if (ws.chol.info() != Eigen::Success) {
        if (ws_out) *ws_out = std::move(ws);
        return std::numeric_limits<double>::infinity();
    }
    ws.alpha = ws.chol.solve(Y);
    double log_det = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) log_det += std::log(ws.chol.matrixL()(i, i));
    double nll = 0.0;
    for (Eigen::Index k = 0; k < m; ++k) nll += 0.5 * Y.col(k).dot(ws.alpha.col(k));
    nll += static_cast<double>(m) * log_det +
           0.5 * static_cast<double>(m * n) * std::log(2.0 * std::numbers::pi_v<double>);

    if (grad) {
        // d(-lml)/dtheta = -1/2 sum_k alpha_k' dK alpha_k + m/2 tr(K^-1 dK).
        const Eigen::MatrixXd Kinv = ws.chol.solve(Eigen::MatrixXd::Identity(n, n));
        const int d = h.dim();
        grad->resize(d + 2);
        const Eigen::MatrixXd Kse = [&] {
            Eigen::MatrixXd base = ws.K;
            base.diagonal().array() -= h.nugget();
            return base;
        }();
        const double c = std::sqrt(5.0);
        Eigen::MatrixXd R2, R;  // only needed for the Matern kernel
        if (h.kernel == GpKernel::matern52) {
            const Eigen::VectorXd inv_len = (-h.log_length).array().exp();
            const Eigen::MatrixXd Xs = X * inv_len.asDiagonal();
            const Eigen::VectorXd x2 = Xs.rowwise().squaredNorm();
            R2 = -2.0 * Xs * Xs.transpose();
            R2.colwise() += x2;
            R2.rowwise() += x2.transpose();
            R2 = R2.cwiseMax(0.0);
            R = R2.cwiseSqrt();
        }
        for (int j = 0; j < d; ++j) {
            // dK for one log-lengthscale, built on the fly to keep memory O(n^2).
            const double inv2 = std::exp(-2.0 * h.log_length[j]);
            Eigen::MatrixXd dK(n, n);
            if (h.kernel == GpKernel::squared_exponential) {
                for (Eigen::Index a = 0; a < n; ++a)
                    for (Eigen::Index b = 0; b <= a; ++b) {
                        const double diff = X(a, j) - X(b, j);
                        const double w = diff * diff * inv2;
                        const double v = Kse(a, b) * w;
                        dK(a, b) = v;
                        dK(b, a) = v;
                    }
            } else {
                const double var = h.var();
                for (Eigen::Index a = 0; a < n; ++a)
                    for (Eigen::Index b = 0; b <= a; ++b) {
                        const double diff = X(a, j) - X(b, j);
                        const double w = diff * diff * inv2;
                        const double r = R(a, b);
                        const double v = (5.0 / 3.0) * (1.0 + c * r) * var * std::exp(-c * r) * w;
                        dK(a, b) = v;
                        dK(b, a) = v;
                    }
            }
            double term = 0.0;
            for (Eigen::Index k = 0; k < m; ++k)
                term += ws.alpha.col(k).dot(dK * ws.alpha.col(k));
            (*grad)[j] = -0.5 * term + 0.5 * static_cast<double>(m) * (Kinv.array() * dK.array()).sum();
        }
        {
            double term = 0.0;
            for (Eigen::Index k = 0; k < m; ++k)
                term += ws.alpha.col(k).dot(Kse * ws.alpha.col(k));
            (*grad)[d] = -0.5 * term + 0.5 * static_cast<double>(m) * (Kinv.array() * Kse.array()).sum();
        }
        {
            const double nug = h.nugget();
            double term = 0.0;
            for (Eigen::Index k = 0; k < m; ++k) term += ws.alpha.col(k).squaredNorm();
            (*grad)[d + 1] = -0.5 * nug * term + 0.5 * static_cast<double>(m) * nug * Kinv.trace();
        }
    }
    ws.ok = true;
    if (ws_out) *ws_out = std::move(ws);
    return nll;
}

/// Box-projected L-BFGS with Armijo backtracking. Minimizes f over the box;
/// `fixed` marks coordinates excluded from optimization.
struct BoxLbfgs {
    Eigen::VectorXd lo, hi;
    std::vector<bool> fixed;
    int max_iter = 60;
    double grad_tol = 1e-6;

    template <typename F>
    Eigen::VectorXd minimize(F&& f, Eigen::VectorXd x) const {
        const Eigen::Index n = x.size();
        auto project = [&](Eigen::VectorXd v) {
            for (Eigen::Index i = 0; i < n; ++i) v[i] = std::clamp(v[i], lo[i], hi[i]);
            return v;
        };
        x = project(std::move(x));
        Eigen::VectorXd g(n);
        double fx = f(x, &g);
        if (!std::isfinite(fx)) return x;
        for (Eigen::Index i = 0; i < n; ++i)
            if (fixed[static_cast<std::size_t>(i)]) g[i] = 0.0;

        const int mem = 8;
        std::vector<Eigen::VectorXd> s_hist, y_hist;
        std::vector<double> rho;

        for (int iter = 0; iter < max_iter; ++iter) {
            // Projected gradient convergence check.
            double pg = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                double gi = g[i];
                if ((x[i] <= lo[i] && gi > 0) || (x[i] >= hi[i] && gi < 0)) gi = 0.0;
                pg = std::max(pg, std::abs(gi));
            }
            if (pg < grad_tol) break;

            // Two-loop recursion.
            Eigen::VectorXd q = g;
            std::vector<double> a(s_hist.size());
            for (int i = static_cast<int>(s_hist.size()) - 1; i >= 0; --i) {
                a[static_cast<std::size_t>(i)] = rho[static_cast<std::size_t>(i)] * s_hist[static_cast<std::size_t>(i)].dot(q);
                q -= a[static_cast<std::size_t>(i)] * y_hist[static_cast<std::size_t>(i)];
            }
            if (!s_hist.empty()) {
                const double gamma = s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
                q *= gamma;
            }
            for (std::size_t i = 0; i < s_hist.size(); ++i) {
                const double b = rho[i] * y_hist[i].dot(q);
                q += (a[i] - b) * s_hist[i];
            }
            Eigen::VectorXd dir = -q;
            if (dir.dot(g) > -1e-14 * dir.norm() * g.norm()) dir = -g;  // enforce descent
            for (Eigen::Index i = 0; i < n; ++i)
                if (fixed[static_cast<std::size_t>(i)]) dir[i] = 0.0;
            if (dir.norm() == 0.0) break;

            double step = 1.0;
            const double slope = g.dot(dir);
            Eigen::VectorXd x_new;
            Eigen::VectorXd g_new(n);
            double f_new = std::numeric_limits<double>::infinity();
            bool accepted = false;
            for (int ls = 0; ls < 25; ++ls) {
                x_new = project(x + step * dir);
                f_new = f(x_new, &g_new);
                if (std::isfinite(f_new) && f_new <= fx + 1e-4 * step * slope) {
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if (!accepted) break;
            for (Eigen::Index i = 0; i < n; ++i)
                if (fixed[static_cast<std::size_t>(i)]) g_new[i] = 0.0;

            const Eigen::VectorXd s = x_new - x;
            const Eigen::VectorXd yv = g_new - g;
            const double sy = s.dot(yv);
            if (sy > 1e-12) {
                s_hist.push_back(s);
                y_hist.push_back(yv);
                rho.push_back(1.0 / sy);
                if (static_cast<int>(s_hist.size()) > mem) {
                    s_hist.erase(s_hist.begin());
                    y_hist.erase(y_hist.begin());
                    rho.erase(rho.begin());
                }
            }
            x = std::move(x_new);
            g = g_new;
            fx = f_new;
        }
        return x;
    }
};

/// Multistart MLE of hyperparameters; Y may hold several outputs (their log
/// marginal likelihoods are summed, the joint-mode objective).
GpHyper optimize_hyper(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, GpKernel kernel,
                       bool exact_fit, std::optional<double> nugget_override, TrainContext& ctx) {
    const int d = static_cast<int>(X.cols());
    const bool fix_nugget = exact_fit || nugget_override.has_value();

    GpHyper init;
    init.kernel = kernel;
    init.log_length = Eigen::VectorXd::Zero(d);
    init.log_var = 0.0;  // standardized outputs: Var(y) = 1
    init.log_nugget = std::log(exact_fit ? kExactNugget : nugget_override.value_or(1e-6));

    BoxLbfgs opt;
    opt.lo.resize(d + 2);
    opt.hi.resize(d + 2);
    // Outputs are standardized, so the signal variance lives near 1; tight
    // bounds keep the kernel well conditioned along the flat MLE ridge.
    opt.lo.head(d).setConstant(kLogLenLo);
    opt.hi.head(d).setConstant(kLogLenHi);
    opt.lo[d] = std::log(1e-3);
    opt.hi[d] = std::log(10.0);
    opt.lo[d + 1] = std::log(fix_nugget ? 1e-12 : 1e-6);
    opt.hi[d + 1] = std::log(1.0);
    opt.fixed.assign(static_cast<std::size_t>(d + 2), false);
    opt.fixed[static_cast<std::size_t>(d + 1)] = fix_nugget;

    const int restarts =
        std::max(1, static_cast<int>(std::lround(5.0 * accelerator_factor(ctx.options.accelerator))));

    auto objective = [&](const Eigen::VectorXd& theta, Eigen::VectorXd* grad) {
        const GpHyper h = GpHyper::unpack(kernel, theta);
        return negative_lml(X, Y, h, grad);
    };

    Rng rng = ctx.rng.fork(0x6770);
    Eigen::VectorXd best = init.pack();
    double best_f = std::numeric_limits<double>::infinity();
    for (int r = 0; r < restarts; ++r) {
        Eigen::VectorXd start = init.pack();
        if (r > 0) {
            for (int j = 0; j < d; ++j) start[j] = rng.uniform(std::log(0.1), std::log(10.0));
            start[d] = rng.uniform(std::log(0.3), std::log(3.0));
            if (!fix_nugget) start[d + 1] = rng.uniform(std::log(1e-8), std::log(1e-2));
        }
        const Eigen::VectorXd found = opt.minimize(objective, start);
        const double f = objective(found, nullptr);
        if (f < best_f) {
            best_f = f;
            best = found;
        }
    }
    return GpHyper::unpack(kernel, best);
}

/// Cholesky with nugget escalation (x10 steps up to 1e-4 * signal variance).
Eigen::LLT<Eigen::MatrixXd> robust_chol(const Eigen::MatrixXd& Kbase, GpHyper& h,
                                        TrainContext& ctx) {
    Eigen::MatrixXd K = Kbase;
    K.diagonal().array() += h.nugget();
    Eigen::LLT<Eigen::MatrixXd> chol(K);
    double nugget = h.nugget();
    const double cap = 1e-4 * h.var();
    while (chol.info() != Eigen::Success && nugget < cap) {
        nugget = std::min(nugget * 10.0, cap);
        K = Kbase;
        K.diagonal().array() += nugget;
        chol.compute(K);
        ctx.warn("gp: ill-conditioned kernel, nugget escalated to " + std::to_string(nugget));
    }
    if (chol.info() != Eigen::Success) throw Error("gp: kernel factorization failed");
    h.log_nugget = std::log(nugget);
    return chol;
}

struct GpHead {
    GpHyper hyper;
    std::vector<int> outputs;
    Eigen::MatrixXd weights;  // n x |outputs|
    // Runtime cache, rebuilt on load.
    Eigen::LLT<Eigen::MatrixXd> chol;
};

class GpCore final : public TechniqueModel {
public:
    Eigen::MatrixXd X;
    std::vector<GpHead> heads;
    int m = 0;
    bool exact = false;

    Technique technique() const override { return Technique::gp; }
    int input_dim() const override { return static_cast<int>(X.cols()); }
    int output_dim() const override { return m; }
    Capabilities capabilities() const override { return {true, true, true}; }

    Eigen::VectorXd predict(const Eigen::Ref<const Eigen::VectorXd>& u) const override {
        Eigen::VectorXd out(m);
        for (const auto& head : heads) {
            const Eigen::MatrixXd ks = kernel_matrix(head.hyper, u.transpose(), X);  // 1 x n
            const Eigen::VectorXd vals = (ks * head.weights).transpose();
            for (std::size_t i = 0; i < head.outputs.size(); ++i)
                out[head.outputs[i]] = vals[static_cast<Eigen::Index>(i)];
        }
        return out;
    }

    Eigen::MatrixXd jacobian(const Eigen::Ref<const Eigen::VectorXd>& u) const override {
        Eigen::MatrixXd jac(m, input_dim());
        Eigen::VectorXd kg(input_dim());
        for (const auto& head : heads) {
            Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(head.outputs.size()),
                                                        input_dim());
            for (Eigen::Index i = 0; i < X.rows(); ++i) {
                double kv;
                kernel_value_grad(head.hyper, u, X.row(i).transpose(), kv, kg);
                acc += head.weights.row(i).transpose() * kg.transpose();
            }
            for (std::size_t r = 0; r < head.outputs.size(); ++r)
                jac.row(head.outputs[r]) = acc.row(static_cast<Eigen::Index>(r));
        }
        return jac;
    }

    Eigen::VectorXd accuracy(const Eigen::Ref<const Eigen::VectorXd>& u) const override {
        Eigen::VectorXd out(m);
        for (const auto& head : heads) {
            const Eigen::MatrixXd ks = kernel_matrix(head.hyper, u.transpose(), X);
            const Eigen::VectorXd v = head.chol.solve(ks.transpose());
            const double prior = head.hyper.var() + head.hyper.nugget();
            const double var = std::max(0.0, prior - (ks * v)(0, 0));
            const double sd = std::sqrt(var);
            for (int k : head.outputs) out[k] = sd;
        }
        return out;
    }

    std::unique_ptr<TechniqueModel> resmoothed(double s) const override {
        // Additional noise: nugget grows by s * 0.1 * Var(y) (standardized: 0.1 s).
        auto copy = std::make_unique<GpCore>(*this);
        for (auto& head : copy->heads) {
            const double nugget = head.hyper.nugget() + s * 0.1;
            head.hyper.log_nugget = std::log(nugget);
            Eigen::MatrixXd K = kernel_matrix(head.hyper, X, X);
            K.diagonal().array() += nugget;
            head.chol.compute(K);
            if (head.chol.info() != Eigen::Success) throw Error("gp: smoothing refit failed");
            head.weights = head.chol.solve(pick_outputs(y_cache_, head.outputs));
        }
        return copy;
    }

    nlohmann::json params_json() const override {
        nlohmann::json hs = nlohmann::json::array();
        for (const auto& head : heads) {
            hs.push_back(
                {{"kernel", head.hyper.kernel == GpKernel::squared_exponential ? "se" : "matern52"},
                 {"log_length", std::vector<double>(head.hyper.log_length.begin(), head.hyper.log_length.end())},
                 {"log_var", head.hyper.log_var},
                 {"log_nugget", head.hyper.log_nugget},
                 {"outputs", head.outputs},
                 {"weights", std::vector<double>(head.weights.data(), head.weights.data() + head.weights.size())}});
        }
        return {{"x", std::vector<double>(X.data(), X.data() + X.size())},
                {"n", X.rows()},
                {"d", X.cols()},
                {"m", m},
                {"exact", exact},
                {"y", std::vector<double>(y_cache_.data(), y_cache_.data() + y_cache_.size())},
                {"heads", hs}};
    }

    void set_targets(const Eigen::MatrixXd& Y) { y_cache_ = Y; }
    const Eigen::MatrixXd& targets() const { return y_cache_; }

    void rebuild_cache() {
        for (auto& head : heads) {
            Eigen::MatrixXd K = kernel_matrix(head.hyper, X, X);
            K.diagonal().array() += head.hyper.nugget();
            head.chol.compute(K);
            if (head.chol.info() != Eigen::Success)
                throw IoError("gp: stored kernel not positive definite");
        }
    }

private:
    static Eigen::MatrixXd pick_outputs(const Eigen::MatrixXd& Y, const std::vector<int>& cols) {
        Eigen::MatrixXd out(Y.rows(), static_cast<Eigen::Index>(cols.size()));
        for (std::size_t i = 0; i < cols.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = Y.col(cols[i]);
        return out;
    }

    Eigen::MatrixXd y_cache_;  // standardized targets, needed for re-smoothing
};

}  // namespace

double gp_log_marginal(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, GpKernel kernel,
                       const Eigen::VectorXd& log_hyper, Eigen::VectorXd* gradient) {
    const GpHyper h = GpHyper::unpack(kernel, log_hyper);
    const double nll = negative_lml(X, Y, h, gradient);
    if (gradient) *gradient = -*gradient;
    return -nll;
}

std::unique_ptr<TechniqueModel> fit_gp_core(const Eigen::Ref<const Eigen::MatrixXd>& U,
                                            const Eigen::Ref<const Eigen::MatrixXd>& Y,
                                            TrainContext& ctx) {
    const int n = static_cast<int>(U.rows());
    const int m = static_cast<int>(Y.cols());
    if (n > kGpMaxN)
        throw ConfigError("gp: training set of " + std::to_string(n) + " exceeds the " +
                          std::to_string(kGpMaxN) + "-point capacity; use sgp");

    const GpKernel kernel = ctx.tune.gp_kernel.value_or(0) == 1 ? GpKernel::matern52
                                                                : GpKernel::squared_exponential;
    auto core = std::make_unique<GpCore>();
    core->X = U;
    core->m = m;
    core->exact = ctx.options.exact_fit;
    core->set_targets(Y);

    const bool joint = ctx.options.joint_outputs;
    std::vector<std::vector<int>> groups;
    if (joint) {
        std::vector<int> all(static_cast<std::size_t>(m));
        for (int k = 0; k < m; ++k) all[static_cast<std::size_t>(k)] = k;
        groups.push_back(std::move(all));
    } else {
        for (int k = 0; k < m; ++k) groups.push_back({k});
    }

    for (const auto& outputs : groups) {
        Eigen::MatrixXd Ysub(n, static_cast<Eigen::Index>(outputs.size()));
        for (std::size_t i = 0; i < outputs.size(); ++i) Ysub.col(static_cast<Eigen::Index>(i)) = Y.col(outputs[i]);

        GpHead head;
        head.outputs = outputs;
        head.hyper = optimize_hyper(core->X, Ysub, kernel, ctx.options.exact_fit,
                                    ctx.tune.gp_nugget, ctx);
        if (ctx.tune.gp_nugget) head.hyper.log_nugget = std::log(*ctx.tune.gp_nugget);
        const Eigen::MatrixXd Kbase = kernel_matrix(head.hyper, core->X, core->X);
        head.chol = robust_chol(Kbase, head.hyper, ctx);
        head.weights = head.chol.solve(Ysub);
        core->heads.push_back(std::move(head));
    }
    return core;
}

namespace {

/// Seeded k-means (k-means++ init, fixed Lloyd iteration count).
Eigen::MatrixXd kmeans_centers(const Eigen::MatrixXd& X, int k, Rng rng, int iters = 20) {
    const Eigen::Index n = X.rows();
    const Eigen::Index d = X.cols();
    Eigen::MatrixXd centers(k, d);
    // k-means++ seeding.
    Eigen::VectorXd dist2 = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
    centers.row(0) = X.row(rng.uniform_int(0, static_cast<int>(n) - 1));
    for (int c = 1; c < k; ++c) {
        for (Eigen::Index i = 0; i < n; ++i)
            dist2[i] = std::min(dist2[i], (X.row(i) - centers.row(c - 1)).squaredNorm());
        const double total = dist2.sum();
        double pick = rng.uniform() * total;
        Eigen::Index chosen = n - 1;
        for (Eigen::Index i = 0; i < n; ++i) {
            pick -= dist2[i];
            if (pick <= 0) {
                chosen = i;
                break;
            }
        }
        centers.row(c) = X.row(chosen);
    }
    std::vector<int> assign(static_cast<std::size_t>(n), 0);
    for (int it = 0; it < iters; ++it) {
        for (Eigen::Index i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (int c = 0; c < k; ++c) {
                const double v = (X.row(i) - centers.row(c)).squaredNorm();
                if (v < best) {
                    best = v;
                    assign[static_cast<std::size_t>(i)] = c;
                }
            }
        }
        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, d);
        Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
        for (Eigen::Index i = 0; i < n; ++i) {
            sums.row(assign[static_cast<std::size_t>(i)]) += X.row(i);
            counts[assign[static_cast<std::size_t>(i)]] += 1.0;
        }
        for (int c = 0; c < k; ++c)
            if (counts[c] > 0) centers.row(c) = sums.row(c) / counts[c];
    }
    return centers;
}

class SgpCore final : public TechniqueModel {
public:
    Eigen::MatrixXd Z;  // inducing inputs
    struct Head {
        GpHyper hyper;
        std::vector<int> outputs;
        Eigen::MatrixXd w;        // M x |outputs|, mean = k_z' w
        Eigen::MatrixXd chol_a;   // lower factor of A = nugget*Kzz + Kzn*Knz
        Eigen::MatrixXd chol_kzz; // lower factor of Kzz (+ jitter)
    };
    std::vector<Head> heads;
    int m = 0;
    // Inducing set == training set: the posterior is the exact GP one, solved
    // through the plain (K + nugget I) system for numerical stability.
    // chol_kzz then factors K + nugget I and chol_a is unused.
    bool exact_mode = false;

    Technique technique() const override { return Technique::sgp; }
    int input_dim() const override { return static_cast<int>(Z.cols()); }
    int output_dim() const override { return m; }
    Capabilities capabilities() const override { return {true, true, false}; }

    Eigen::VectorXd predict(const Eigen::Ref<const Eigen::VectorXd>& u) const override {
        Eigen::VectorXd out(m);
        for (const auto& head : heads) {
            const Eigen::MatrixXd kz = kernel_matrix(head.hyper, u.transpose(), Z);
            const Eigen::VectorXd vals = (kz * head.w).transpose();
            for (std::size_t i = 0; i < head.outputs.size(); ++i)
                out[head.outputs[i]] = vals[static_cast<Eigen::Index>(i)];
        }
        return out;
    }

    Eigen::MatrixXd jacobian(const Eigen::Ref<const Eigen::VectorXd>& u) const override {
        Eigen::MatrixXd jac(m, input_dim());
        Eigen::VectorXd kg(input_dim());
        for (const auto& head : heads) {
            Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(head.outputs.size()),
                                                        input_dim());
            for (Eigen::Index i = 0; i < Z.rows(); ++i) {
                double kv;
                kernel_value_grad(head.hyper, u, Z.row(i).transpose(), kv, kg);
                acc += head.w.row(i).transpose() * kg.transpose();
            }
            for (std::size_t r = 0; r < head.outputs.size(); ++r)
                jac.row(head.outputs[r]) = acc.row(static_cast<Eigen::Index>(r));
        }
        return jac;
    }

    Eigen::VectorXd accuracy(const Eigen::Ref<const Eigen::VectorXd>& u) const override {
        Eigen::VectorXd out(m);
        for (const auto& head : heads) {
            const Eigen::VectorXd kz = kernel_matrix(head.hyper, u.transpose(), Z).transpose();
            const auto solve_tri = [](const Eigen::MatrixXd& L, const Eigen::VectorXd& b) {
                return L.triangularView<Eigen::Lower>().solve(b);
            };
            const double nug = head.hyper.nugget();
            double var;
            if (exact_mode) {
                var = head.hyper.var() + nug - solve_tri(head.chol_kzz, kz).squaredNorm();
            } else {
                const double q_kzz = solve_tri(head.chol_kzz, kz).squaredNorm();
                const double q_a = solve_tri(head.chol_a, kz).squaredNorm();
                var = head.hyper.var() - q_kzz + nug * q_a + nug;
            }
            var = std::max(0.0, var);
            for (int k : head.outputs) out[k] = std::sqrt(var);
        }
        return out;
    }

    nlohmann::json params_json() const override {
        nlohmann::json hs = nlohmann::json::array();
        for (const auto& head : heads) {
            hs.push_back(
                {{"kernel", head.hyper.kernel == GpKernel::squared_exponential ? "se" : "matern52"},
                 {"log_length", std::vector<double>(head.hyper.log_length.begin(), head.hyper.log_length.end())},
                 {"log_var", head.hyper.log_var},
                 {"log_nugget", head.hyper.log_nugget},
                 {"outputs", head.outputs},
                 {"w", std::vector<double>(head.w.data(), head.w.data() + head.w.size())},
                 {"chol_a", std::vector<double>(head.chol_a.data(), head.chol_a.data() + head.chol_a.size())},
                 {"chol_kzz", std::vector<double>(head.chol_kzz.data(), head.chol_kzz.data() + head.chol_kzz.size())}});
        }
        return {{"z", std::vector<double>(Z.data(), Z.data() + Z.size())},
                {"n_inducing", Z.rows()},
                {"d", Z.cols()},
                {"m", m},
                {"exact_mode", exact_mode},
                {"heads", hs}};
    }
};

}  // namespace

std::unique_ptr<TechniqueModel> fit_sgp_core(const Eigen::Ref<const Eigen::MatrixXd>& U,
                                             const Eigen::Ref<const Eigen::MatrixXd>& Y,
                                             TrainContext& ctx) {
    const int n = static_cast<int>(U.rows());
    const int m = static_cast<int>(Y.cols());
    const int M = std::min(1000, n);

    auto core = std::make_unique<SgpCore>();
    core->m = m;
    if (M >= n) {
        core->Z = U;
        core->exact_mode = true;
    } else {
        core->Z = kmeans_centers(U, M, ctx.rng.fork(0x7367));
    }

    // Hyperparameters from a full-GP MLE on (at most) 1000 training points.
    Eigen::MatrixXd Xfit = U;
    Eigen::MatrixXd Yfit = Y;
    if (n > 1000) {
        auto perm = ctx.rng.fork(0x7368).permutation(n);
        Xfit.resize(1000, U.cols());
        Yfit.resize(1000, m);
        for (int i = 0; i < 1000; ++i) {
            Xfit.row(i) = U.row(perm[static_cast<std::size_t>(i)]);
            Yfit.row(i) = Y.row(perm[static_cast<std::size_t>(i)]);
        }
    }

    const GpKernel kernel = ctx.tune.gp_kernel.value_or(0) == 1 ? GpKernel::matern52
                                                                : GpKernel::squared_exponential;
    std::vector<std::vector<int>> groups;
    if (ctx.options.joint_outputs) {
        std::vector<int> all(static_cast<std::size_t>(m));
        for (int k = 0; k < m; ++k) all[static_cast<std::size_t>(k)] = k;
        groups.push_back(std::move(all));
    } else {
        for (int k = 0; k < m; ++k) groups.push_back({k});
    }

    for (const auto& outputs : groups) {
        Eigen::MatrixXd Ysub(Yfit.rows(), static_cast<Eigen::Index>(outputs.size()));
        for (std::size_t i = 0; i < outputs.size(); ++i)
            Ysub.col(static_cast<Eigen::Index>(i)) = Yfit.col(outputs[i]);

        SgpCore::Head head;
        head.outputs = outputs;
        head.hyper = optimize_hyper(Xfit, Ysub, kernel, ctx.options.exact_fit, ctx.tune.gp_nugget, ctx);
        if (ctx.tune.gp_nugget) head.hyper.log_nugget = std::log(*ctx.tune.gp_nugget);
        const double nug = head.hyper.nugget();

        Eigen::MatrixXd Yall(n, static_cast<Eigen::Index>(outputs.size()));
        for (std::size_t i = 0; i < outputs.size(); ++i) Yall.col(static_cast<Eigen::Index>(i)) = Y.col(outputs[i]);

        if (core->exact_mode) {
            Eigen::MatrixXd Ky = kernel_matrix(head.hyper, core->Z, core->Z);
            auto chol = robust_chol(Ky, head.hyper, ctx);
            head.w = chol.solve(Yall);
            head.chol_kzz = Eigen::MatrixXd(chol.matrixL());
            head.chol_a = Eigen::MatrixXd::Zero(0, 0);
            core->heads.push_back(std::move(head));
            continue;
        }

        // DTC posterior; memory O(N M), the N x N kernel is never formed.
        Eigen::MatrixXd Kzz = kernel_matrix(head.hyper, core->Z, core->Z);
        Kzz.diagonal().array() += 1e-10 * head.hyper.var();
        const Eigen::MatrixXd Kzn = kernel_matrix(head.hyper, core->Z, U);
        Eigen::MatrixXd A = nug * Kzz + Kzn * Kzn.transpose();
        Eigen::LLT<Eigen::MatrixXd> chol_a(A);
        for (double jitter = 1e-10; chol_a.info() != Eigen::Success && jitter < 1e-2; jitter *= 10) {
            A.diagonal().array() += jitter * A.trace() / A.rows();
            chol_a.compute(A);
        }
        if (chol_a.info() != Eigen::Success) throw Error("sgp: inducing system not positive definite");
        head.w = chol_a.solve(Kzn * Yall);

        Eigen::LLT<Eigen::MatrixXd> chol_kzz(Kzz);
        if (chol_kzz.info() != Eigen::Success) throw Error("sgp: Kzz not positive definite");
        head.chol_a = chol_a.matrixL();
        head.chol_kzz = chol_kzz.matrixL();
        core->heads.push_back(std::move(head));
    }
    return core;
}

namespace detail_gp {

std::unique_ptr<TechniqueModel> load(const nlohmann::json& params, bool sparse) {
    auto mat = [](const nlohmann::json& a, Eigen::Index rows, Eigen::Index cols) {
        const auto v = a.get<std::vector<double>>();
        if (static_cast<Eigen::Index>(v.size()) != rows * cols)
            throw IoError("model file: bad gp matrix size");
        return Eigen::MatrixXd(Eigen::Map<const Eigen::MatrixXd>(v.data(), rows, cols));
    };
    auto hyper = [](const nlohmann::json& h) {
        GpHyper out;
        out.kernel = h.at("kernel") == "se" ? GpKernel::squared_exponential : GpKernel::matern52;
        const auto ll = h.at("log_length").get<std::vector<double>>();
        out.log_length = Eigen::Map<const Eigen::VectorXd>(ll.data(), static_cast<Eigen::Index>(ll.size()));
        out.log_var = h.at("log_var").get<double>();
        out.log_nugget = h.at("log_nugget").get<double>();
        return out;
    };

    if (!sparse) {
        auto core = std::make_unique<GpCore>();
        const auto n = params.at("n").get<Eigen::Index>();
        const auto d = params.at("d").get<Eigen::Index>();
        core->X = mat(params.at("x"), n, d);
        core->m = params.at("m").get<int>();
        core->exact = params.at("exact").get<bool>();
        core->set_targets(mat(params.at("y"), n, core->m));
        for (const auto& h : params.at("heads")) {
            GpHead head;
            head.hyper = hyper(h);
            head.outputs = h.at("outputs").get<std::vector<int>>();
            head.weights = mat(h.at("weights"), n, static_cast<Eigen::Index>(head.outputs.size()));
            core->heads.push_back(std::move(head));
        }
        core->rebuild_cache();
        return core;
    }

    auto core = std::make_unique<SgpCore>();
    const auto M = params.at("n_inducing").get<Eigen::Index>();
    const auto d = params.at("d").get<Eigen::Index>();
    core->Z = mat(params.at("z"), M, d);
    core->m = params.at("m").get<int>();
    core->exact_mode = params.value("exact_mode", false);
    for (const auto& h : params.at("heads")) {
        SgpCore::Head head;
        head.hyper = hyper(h);
        head.outputs = h.at("outputs").get<std::vector<int>>();
        head.w = mat(h.at("w"), M, static_cast<Eigen::Index>(head.outputs.size()));
        head.chol_a = core->exact_mode ? Eigen::MatrixXd::Zero(0, 0) : Eigen::MatrixXd(mat(h.at("chol_a"), M, M));
        head.chol_kzz = mat(h.at("chol_kzz"), M, M);
        core->heads.push_back(std::move(head));
    }
    return core;
}

}  // namespace detail_gp

}  // namespace gta
