#pragma once

#include <Eigen/Dense>
#include <memory>

#include "gta/model.hpp"
#include "gta/train.hpp"

namespace gta {

/// Clamped B-spline basis on a sorted node set; degree min(3, nodes-1).
/// Interior knots sit at the interior nodes, end knots have full multiplicity,
/// giving n + degree - 1 basis functions.
class BsplBasis {
public:
    BsplBasis() = default;
    explicit BsplBasis(std::vector<double> nodes);

    int size() const { return size_; }
    int degree() const { return degree_; }
    double range_lo() const { return knots_.front(); }
    double range_hi() const { return knots_.back(); }

    /// Basis values at t: non-negative, sum to 1 inside the range; at most
    /// degree+1 nonzero. Outside the range the basis is evaluated at the
    /// clamped endpoint and *extrapolated is set when provided.
    Eigen::VectorXd eval(double t, bool* extrapolated = nullptr) const;
    Eigen::VectorXd eval_derivative(double t) const;

    const std::vector<double>& knots() const { return knots_; }

    nlohmann::json to_json() const;
    static BsplBasis from_json(const nlohmann::json& j);

private:
    void eval_clamped(double t, Eigen::VectorXd& values, Eigen::VectorXd* derivs) const;
    std::vector<double> knots_;
    int degree_ = 3;
    int size_ = 0;
};

/// One-dimensional interpolating spline with per-interval tension, adapted so
/// the curve is monotone/convex wherever the data are locally so. Evaluation
/// outside the knot range extrapolates linearly from the boundary slope.
struct TensionSpline {
    std::vector<double> knots;
    std::vector<double> values;
    std::vector<double> tensions;  // per interval
    std::vector<double> second_derivs;

    double eval(double t) const;
    double derivative(double t) const;
};

/// Solve for second derivatives given knots/values/tensions (natural ends).
void solve_tension_spline(TensionSpline& spline);

/// Fit with adaptive per-interval tension (doubling from 0.1, capped).
TensionSpline fit_tension_spline(const std::vector<double>& knots,
                                 const std::vector<double>& values, double tension_cap = 1000.0);

std::unique_ptr<TechniqueModel> fit_splt_core(const Eigen::Ref<const Eigen::MatrixXd>& U,
                                              const Eigen::Ref<const Eigen::MatrixXd>& Y,
                                              TrainContext& ctx);

}  // namespace gta
