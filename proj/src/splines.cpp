#include "gta/splines.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace gta {

// --- B-spline basis ---------------------------------------------------------

BsplBasis::BsplBasis(std::vector<double> nodes) {
    if (nodes.size() < 1) throw ConfigError("bspl: needs at least one node");
    for (std::size_t i = 1; i < nodes.size(); ++i)
        if (!(nodes[i] > nodes[i - 1])) throw ConfigError("bspl: nodes must be strictly increasing");
    const int n = static_cast<int>(nodes.size());
    degree_ = std::min(3, n - 1);
    knots_.clear();
    for (int i = 0; i <= degree_; ++i) knots_.push_back(nodes.front());
    for (int i = 1; i + 1 < n; ++i) knots_.push_back(nodes[static_cast<std::size_t>(i)]);
    for (int i = 0; i <= degree_; ++i) knots_.push_back(nodes.back());
    size_ = static_cast<int>(knots_.size()) - degree_ - 1;
}

void BsplBasis::eval_clamped(double t, Eigen::VectorXd& values, Eigen::VectorXd* derivs) const {
    values = Eigen::VectorXd::Zero(size_);
    if (derivs) *derivs = Eigen::VectorXd::Zero(size_);
    if (size_ == 1) {  // single node: constant basis
        values[0] = 1.0;
        return;
    }
    const int p = degree_;
    // Find the knot span: knots[span] <= t < knots[span+1], last span at the end.
    int span = p;
    const int hi_span = size_ - 1;
    while (span < hi_span && t >= knots_[static_cast<std::size_t>(span + 1)]) ++span;

    // Cox-de Boor triangle for the p+1 nonzero functions N_{span-p..span}.
    std::vector<double> left(static_cast<std::size_t>(p) + 1), right(static_cast<std::size_t>(p) + 1);
    std::vector<double> ndu((static_cast<std::size_t>(p) + 1));
    ndu[0] = 1.0;
    std::vector<double> lower;  // degree p-1 values, for derivatives
    for (int j = 1; j <= p; ++j) {
        left[static_cast<std::size_t>(j)] = t - knots_[static_cast<std::size_t>(span + 1 - j)];
        right[static_cast<std::size_t>(j)] = knots_[static_cast<std::size_t>(span + j)] - t;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            const double den = right[static_cast<std::size_t>(r + 1)] + left[static_cast<std::size_t>(j - r)];
            const double temp = den != 0.0 ? ndu[static_cast<std::size_t>(r)] / den : 0.0;
            ndu[static_cast<std::size_t>(r)] = saved + right[static_cast<std::size_t>(r + 1)] * temp;
            saved = left[static_cast<std::size_t>(j - r)] * temp;
        }
        ndu[static_cast<std::size_t>(j)] = saved;
        if (j == p - 1) lower = ndu;  // keep the degree p-1 row
    }
    for (int r = 0; r <= p; ++r) values[span - p + r] = ndu[static_cast<std::size_t>(r)];

    if (derivs && p >= 1) {
        // N'_{i,p} = p [ N_{i,p-1}/(u_{i+p}-u_i) - N_{i+1,p-1}/(u_{i+p+1}-u_{i+1}) ].
        if (p == 1) {
            lower.assign(1, 1.0);
        }
        auto lower_val = [&](int i) -> double {  // N_{i,p-1}(t), nonzero for span-p+1..span
            const int r = i - (span - p + 1);
            if (r < 0 || r >= static_cast<int>(lower.size())) return 0.0;
            return lower[static_cast<std::size_t>(r)];
        };
        for (int i = span - p; i <= span; ++i) {
            const double d1 = knots_[static_cast<std::size_t>(i + p)] - knots_[static_cast<std::size_t>(i)];
            const double d2 = knots_[static_cast<std::size_t>(i + p + 1)] - knots_[static_cast<std::size_t>(i + 1)];
            double v = 0.0;
            if (d1 != 0.0) v += lower_val(i) / d1;
            if (d2 != 0.0) v -= lower_val(i + 1) / d2;
            (*derivs)[i] = p * v;
        }
    }
}

Eigen::VectorXd BsplBasis::eval(double t, bool* extrapolated) const {
    const double lo = range_lo(), hi = range_hi();
    const double tc = std::clamp(t, lo, hi);
    if (extrapolated) *extrapolated = (t < lo || t > hi);
    Eigen::VectorXd values;
    eval_clamped(tc, values, nullptr);
    return values;
}

Eigen::VectorXd BsplBasis::eval_derivative(double t) const {
    const double tc = std::clamp(t, range_lo(), range_hi());
    Eigen::VectorXd values, derivs;
    eval_clamped(tc, values, &derivs);
    return derivs;
}

nlohmann::json BsplBasis::to_json() const {
    return {{"knots", knots_}, {"degree", degree_}, {"size", size_}};
}

BsplBasis BsplBasis::from_json(const nlohmann::json& j) {
    BsplBasis b;
    b.knots_ = j.at("knots").get<std::vector<double>>();
    b.degree_ = j.at("degree").get<int>();
    b.size_ = j.at("size").get<int>();
    return b;
}

// --- tension spline ---------------------------------------------------------

namespace {

// Tridiagonal coefficients of one interval. theta = tension * width.
//   off  couples the far-end curvature, diag adds to both ends.
// tension 0 reproduces the natural cubic spline (off=h/6, diag=h/3).
void interval_coeffs(double h, double tension, double& off, double& diag) {
    const double theta = tension * h;
    if (theta < 1e-4) {
        off = h / 6.0 * (1.0 - 7.0 * theta * theta / 60.0);
        diag = h / 3.0 * (1.0 - theta * theta / 15.0);
    } else if (theta > 30.0) {
        off = 1.0 / (tension * tension * h);
        diag = 1.0 / tension - 1.0 / (tension * tension * h);
    } else {
        off = 1.0 / (tension * tension * h) - 1.0 / (tension * std::sinh(theta));
        diag = std::cosh(theta) / (tension * std::sinh(theta)) - 1.0 / (tension * tension * h);
    }
}

// sinh(tension*d)/sinh(tension*h) and cosh(tension*d)/sinh(tension*h),
// overflow-safe for large arguments.
double sinh_ratio(double d, double h, double tension) {
    const double theta = tension * h;
    if (theta > 30.0) {
        const double num = 1.0 - std::exp(-2.0 * tension * d);
        const double den = 1.0 - std::exp(-2.0 * theta);
        return std::exp(tension * (d - h)) * num / den;
    }
    return std::sinh(tension * d) / std::sinh(theta);
}

double cosh_ratio(double d, double h, double tension) {
    const double theta = tension * h;
    if (theta > 30.0) {
        const double num = 1.0 + std::exp(-2.0 * tension * d);
        const double den = 1.0 - std::exp(-2.0 * theta);
        return std::exp(tension * (d - h)) * num / den;
    }
    return std::cosh(tension * d) / std::sinh(theta);
}

int find_interval(const std::vector<double>& knots, double t) {
    const int n = static_cast<int>(knots.size());
    if (t <= knots.front()) return 0;
    if (t >= knots[static_cast<std::size_t>(n - 2)]) return n - 2;
    const int i = static_cast<int>(std::upper_bound(knots.begin(), knots.end(), t) - knots.begin()) - 1;
    return std::clamp(i, 0, n - 2);
}

}  // namespace

void solve_tension_spline(TensionSpline& spline) {
    const int n = static_cast<int>(spline.knots.size());
    spline.second_derivs.assign(static_cast<std::size_t>(n), 0.0);
    if (n <= 2) return;  // natural ends only, straight line

    std::vector<double> off(static_cast<std::size_t>(n - 1)), dia(static_cast<std::size_t>(n - 1));
    for (int i = 0; i < n - 1; ++i)
        interval_coeffs(spline.knots[static_cast<std::size_t>(i + 1)] - spline.knots[static_cast<std::size_t>(i)],
                        spline.tensions[static_cast<std::size_t>(i)], off[static_cast<std::size_t>(i)],
                        dia[static_cast<std::size_t>(i)]);

    // Thomas algorithm on the interior unknowns m_1..m_{n-2}.
    const int k = n - 2;
    std::vector<double> a(static_cast<std::size_t>(k)), b(static_cast<std::size_t>(k)),
        c(static_cast<std::size_t>(k)), r(static_cast<std::size_t>(k));
    auto slope = [&](int i) {
        return (spline.values[static_cast<std::size_t>(i + 1)] - spline.values[static_cast<std::size_t>(i)]) /
               (spline.knots[static_cast<std::size_t>(i + 1)] - spline.knots[static_cast<std::size_t>(i)]);
    };
    for (int i = 1; i <= n - 2; ++i) {
        const int row = i - 1;
        a[static_cast<std::size_t>(row)] = off[static_cast<std::size_t>(i - 1)];
        b[static_cast<std::size_t>(row)] = dia[static_cast<std::size_t>(i - 1)] + dia[static_cast<std::size_t>(i)];
        c[static_cast<std::size_t>(row)] = off[static_cast<std::size_t>(i)];
        r[static_cast<std::size_t>(row)] = slope(i) - slope(i - 1);
    }
    for (int i = 1; i < k; ++i) {
        const double w = a[static_cast<std::size_t>(i)] / b[static_cast<std::size_t>(i - 1)];
        b[static_cast<std::size_t>(i)] -= w * c[static_cast<std::size_t>(i - 1)];
        r[static_cast<std::size_t>(i)] -= w * r[static_cast<std::size_t>(i - 1)];
    }
    std::vector<double> m(static_cast<std::size_t>(k));
    m[static_cast<std::size_t>(k - 1)] = r[static_cast<std::size_t>(k - 1)] / b[static_cast<std::size_t>(k - 1)];
    for (int i = k - 2; i >= 0; --i)
        m[static_cast<std::size_t>(i)] = (r[static_cast<std::size_t>(i)] -
                                          c[static_cast<std::size_t>(i)] * m[static_cast<std::size_t>(i + 1)]) /
                                         b[static_cast<std::size_t>(i)];
    for (int i = 1; i <= n - 2; ++i) spline.second_derivs[static_cast<std::size_t>(i)] = m[static_cast<std::size_t>(i - 1)];
}

double TensionSpline::eval(double t) const {
    const int n = static_cast<int>(knots.size());
    if (n == 1) return values[0];
    if (t < knots.front()) return values.front() + derivative(knots.front()) * (t - knots.front());
    if (t > knots.back()) return values.back() + derivative(knots.back()) * (t - knots.back());

    const int i = find_interval(knots, t);
    const double h = knots[static_cast<std::size_t>(i + 1)] - knots[static_cast<std::size_t>(i)];
    const double dl = t - knots[static_cast<std::size_t>(i)];
    const double dr = knots[static_cast<std::size_t>(i + 1)] - t;
    const double mi = second_derivs[static_cast<std::size_t>(i)];
    const double mj = second_derivs[static_cast<std::size_t>(i + 1)];
    const double yi = values[static_cast<std::size_t>(i)];
    const double yj = values[static_cast<std::size_t>(i + 1)];
    const double tau = tensions[static_cast<std::size_t>(i)];
    if (tau * h < 1e-4) {
        return mi * dr * dr * dr / (6.0 * h) + mj * dl * dl * dl / (6.0 * h) +
               (yi - mi * h * h / 6.0) * dr / h + (yj - mj * h * h / 6.0) * dl / h;
    }
    const double t2 = tau * tau;
    return (mi * sinh_ratio(dr, h, tau) + mj * sinh_ratio(dl, h, tau)) / t2 +
           (yi - mi / t2) * dr / h + (yj - mj / t2) * dl / h;
}

double TensionSpline::derivative(double t) const {
    const int n = static_cast<int>(knots.size());
    if (n == 1) return 0.0;
    const double tc = std::clamp(t, knots.front(), knots.back());
    const int i = find_interval(knots, tc);
    const double h = knots[static_cast<std::size_t>(i + 1)] - knots[static_cast<std::size_t>(i)];
    const double dl = tc - knots[static_cast<std::size_t>(i)];
    const double dr = knots[static_cast<std::size_t>(i + 1)] - tc;
    const double mi = second_derivs[static_cast<std::size_t>(i)];
    const double mj = second_derivs[static_cast<std::size_t>(i + 1)];
    const double yi = values[static_cast<std::size_t>(i)];
    const double yj = values[static_cast<std::size_t>(i + 1)];
    const double tau = tensions[static_cast<std::size_t>(i)];
    if (tau * h < 1e-4) {
        return -mi * dr * dr / (2.0 * h) + mj * dl * dl / (2.0 * h) + (yj - yi) / h -
               (mj - mi) * h / 6.0;
    }
    const double t2 = tau * tau;
    return (-mi * cosh_ratio(dr, h, tau) + mj * cosh_ratio(dl, h, tau)) * tau / t2 +
           (yj - yi) / h + (mi - mj) / (t2 * h);
}

TensionSpline fit_tension_spline(const std::vector<double>& knots,
                                 const std::vector<double>& values, double tension_cap) {
    TensionSpline s;
    s.knots = knots;
    s.values = values;
    const int n = static_cast<int>(knots.size());
    s.tensions.assign(static_cast<std::size_t>(std::max(0, n - 1)), 0.0);
    solve_tension_spline(s);
    if (n <= 2) return s;

    // Local shape of the data per interval.
    std::vector<double> slope(static_cast<std::size_t>(n - 1));
    for (int i = 0; i < n - 1; ++i)
        slope[static_cast<std::size_t>(i)] =
            (values[static_cast<std::size_t>(i + 1)] - values[static_cast<std::size_t>(i)]) /
            (knots[static_cast<std::size_t>(i + 1)] - knots[static_cast<std::size_t>(i)]);
    double slope_scale = 0.0;
    for (double v : slope) slope_scale = std::max(slope_scale, std::abs(v));
    const double tol = 1e-9 * std::max(slope_scale, 1.0);

    auto data_monotone_up = [&](int i) {
        for (int j = std::max(0, i - 1); j <= std::min(n - 2, i + 1); ++j)
            if (slope[static_cast<std::size_t>(j)] < 0) return false;
        return true;
    };
    auto data_monotone_down = [&](int i) {
        for (int j = std::max(0, i - 1); j <= std::min(n - 2, i + 1); ++j)
            if (slope[static_cast<std::size_t>(j)] > 0) return false;
        return true;
    };
    auto data_convex = [&](int i, int sign) {  // +1 convex, -1 concave
        bool any = false;
        for (int j = std::max(1, i); j <= std::min(n - 2, i + 1); ++j) {
            any = true;
            const double sd = slope[static_cast<std::size_t>(j)] - slope[static_cast<std::size_t>(j - 1)];
            if (sign * sd < 0) return false;
        }
        return any;
    };

    auto interval_ok = [&](int i) {
        const bool want_up = data_monotone_up(i);
        const bool want_down = data_monotone_down(i);
        const bool want_cvx = data_convex(i, +1);
        const bool want_ccv = data_convex(i, -1);
        if (!want_up && !want_down && !want_cvx && !want_ccv) return true;
        const double a = knots[static_cast<std::size_t>(i)];
        const double b = knots[static_cast<std::size_t>(i + 1)];
        const int probes = 65;
        double prev_d = 0.0;
        for (int q = 0; q < probes; ++q) {
            const double t = a + (b - a) * q / (probes - 1);
            const double d = s.derivative(t);
            if (want_up && d < -tol) return false;
            if (want_down && d > tol) return false;
            if (q > 0) {
                const double curv = d - prev_d;  // sign of f'' between probes
                if (want_cvx && !want_ccv && curv < -tol * (b - a)) return false;
                if (want_ccv && !want_cvx && curv > tol * (b - a)) return false;
            }
            prev_d = d;
        }
        return true;
    };

    for (int round = 0; round < 40; ++round) {
        bool changed = false;
        for (int i = 0; i < n - 1; ++i) {
            if (interval_ok(i)) continue;
            double& tau = s.tensions[static_cast<std::size_t>(i)];
            if (tau >= tension_cap) continue;
            tau = tau == 0.0 ? 0.1 : std::min(tau * 2.0, tension_cap);
            changed = true;
        }
        if (!changed) break;
        solve_tension_spline(s);
    }

    // Intervals that still violate their shape at the cap go to the linear
    // limit: the hyperbolic terms vanish and the segment becomes the chord.
    bool pinned = false;
    for (int i = 0; i < n - 1; ++i) {
        if (s.tensions[static_cast<std::size_t>(i)] >= tension_cap && !interval_ok(i)) {
            s.tensions[static_cast<std::size_t>(i)] = 1e12;
            pinned = true;
        }
    }
    if (pinned) solve_tension_spline(s);
    return s;
}

// --- SPLT technique model ---------------------------------------------------

namespace {

class SpltModel final : public TechniqueModel {
public:
    std::vector<TensionSpline> splines;  // one per output
    Eigen::VectorXd line_intercept;      // least-squares line per output
    Eigen::VectorXd line_slope;
    double blend = 0.0;                  // weight of the line (smoothing)
    int d = 1;

    Technique technique() const override { return Technique::splt; }
    int input_dim() const override { return d; }
    int output_dim() const override { return static_cast<int>(splines.size()); }
    Capabilities capabilities() const override { return {true, false, true}; }

    Eigen::VectorXd predict(const Eigen::Ref<const Eigen::VectorXd>& u) const override {
        Eigen::VectorXd out(output_dim());
        for (int k = 0; k < output_dim(); ++k) {
            const double f = splines[static_cast<std::size_t>(k)].eval(u[0]);
            const double line = line_intercept[k] + line_slope[k] * u[0];
            out[k] = (1.0 - blend) * f + blend * line;
        }
        return out;
    }

    Eigen::MatrixXd jacobian(const Eigen::Ref<const Eigen::VectorXd>& u) const override {
        Eigen::MatrixXd jac(output_dim(), 1);
        for (int k = 0; k < output_dim(); ++k) {
            const double df = splines[static_cast<std::size_t>(k)].derivative(u[0]);
            jac(k, 0) = (1.0 - blend) * df + blend * line_slope[k];
        }
        return jac;
    }

    std::unique_ptr<TechniqueModel> resmoothed(double sm) const override {
        auto copy = std::make_unique<SpltModel>(*this);
        // Additional blending toward the line, relative to the current model.
        copy->blend = blend + (1.0 - blend) * sm;
        return copy;
    }

    nlohmann::json params_json() const override {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& sp : splines)
            arr.push_back({{"knots", sp.knots},
                           {"values", sp.values},
                           {"tensions", sp.tensions},
                           {"second_derivs", sp.second_derivs}});
        return {{"splines", arr},
                {"line_intercept", std::vector<double>(line_intercept.begin(), line_intercept.end())},
                {"line_slope", std::vector<double>(line_slope.begin(), line_slope.end())},
                {"blend", blend},
                {"d", d}};
    }
};

}  // namespace

std::unique_ptr<TechniqueModel> fit_splt_core(const Eigen::Ref<const Eigen::MatrixXd>& U,
                                              const Eigen::Ref<const Eigen::MatrixXd>& Y,
                                              TrainContext& ctx) {
    if (U.cols() != 1)
        throw ConfigError("splt: requires exactly one (continuous) input, got " +
                          std::to_string(U.cols()));
    const int m = static_cast<int>(Y.cols());

    // Average duplicate abscissae before knot construction.
    std::map<double, std::pair<Eigen::VectorXd, int>> grouped;
    for (Eigen::Index i = 0; i < U.rows(); ++i) {
        auto [it, inserted] = grouped.try_emplace(U(i, 0), Y.row(i).transpose(), 1);
        if (!inserted) {
            it->second.first += Y.row(i).transpose();
            it->second.second += 1;
        }
    }

    auto model = std::make_unique<SpltModel>();
    model->d = 1;

    if (grouped.size() < 2) {
        ctx.warn("splt: fewer than 2 distinct knots, falling back to the constant model");
        const Eigen::VectorXd mean = Y.colwise().mean().transpose();
        TensionSpline flat;
        flat.knots = {grouped.begin()->first};
        for (int k = 0; k < m; ++k) {
            flat.values = {mean[k]};
            flat.second_derivs = {0.0};
            model->splines.push_back(flat);
        }
        model->line_intercept = mean;
        model->line_slope = Eigen::VectorXd::Zero(m);
        return model;
    }

    std::vector<double> knots;
    Eigen::MatrixXd vals(static_cast<Eigen::Index>(grouped.size()), m);
    {
        Eigen::Index r = 0;
        for (const auto& [x, acc] : grouped) {
            knots.push_back(x);
            vals.row(r++) = (acc.first / acc.second).transpose();
        }
    }

    const double cap = ctx.tune.splt_tension_cap.value_or(1000.0);
    for (int k = 0; k < m; ++k) {
        std::vector<double> v(vals.col(k).begin(), vals.col(k).end());
        model->splines.push_back(fit_tension_spline(knots, v, cap));
    }

    // Least-squares line over the knot set, the smoothing target.
    {
        const auto nk = static_cast<Eigen::Index>(knots.size());
        Eigen::MatrixXd A(nk, 2);
        for (Eigen::Index i = 0; i < nk; ++i) {
            A(i, 0) = 1.0;
            A(i, 1) = knots[static_cast<std::size_t>(i)];
        }
        const Eigen::MatrixXd coef = (A.transpose() * A).ldlt().solve(A.transpose() * vals);
        model->line_intercept = coef.row(0).transpose();
        model->line_slope = coef.row(1).transpose();
    }
    return model;
}

namespace detail_splt {

std::unique_ptr<TechniqueModel> load(const nlohmann::json& params) {
    auto model = std::make_unique<SpltModel>();
    for (const auto& sp : params.at("splines")) {
        TensionSpline s;
        s.knots = sp.at("knots").get<std::vector<double>>();
        s.values = sp.at("values").get<std::vector<double>>();
        s.tensions = sp.at("tensions").get<std::vector<double>>();
        s.second_derivs = sp.at("second_derivs").get<std::vector<double>>();
        model->splines.push_back(std::move(s));
    }
    const auto li = params.at("line_intercept").get<std::vector<double>>();
    const auto ls = params.at("line_slope").get<std::vector<double>>();
    model->line_intercept = Eigen::Map<const Eigen::VectorXd>(li.data(), static_cast<Eigen::Index>(li.size()));
    model->line_slope = Eigen::Map<const Eigen::VectorXd>(ls.data(), static_cast<Eigen::Index>(ls.size()));
    model->blend = params.at("blend").get<double>();
    model->d = params.at("d").get<int>();
    return model;
}

}  // namespace detail_splt

}  // namespace gta
