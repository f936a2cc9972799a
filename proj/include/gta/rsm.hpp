#pragma once

#include <Eigen/Dense>
#include <vector>

#include "gta/model.hpp"
#include "gta/train.hpp"

namespace gta {

/// Response surface model configuration: polynomial order of the feature
/// expansion and the coefficient estimator.
struct RsmSpec {
    enum class Order { linear, quadratic };
    enum class Estimator { ridge, stepwise, elastic_net };

    Order order = Order::linear;
    Estimator estimator = Estimator::ridge;
    double ridge_lambda = -1.0;   // < 0: pick by generalized cross-validation
    double elastic_alpha = -1.0;  // < 0: pick by 5-fold CV over the grid
    // Per input column: sorted label set for categorical columns, empty for
    // continuous ones. Empty vector = all columns continuous.
    std::vector<std::vector<double>> categories;
};

/// Polynomial feature vector for one input point. Categorical columns are
/// one-hot expanded against spec.categories first. Ordering: intercept,
/// linear terms by column, squared terms by column, cross terms
/// lexicographic. Throws DataError for labels absent from the encoding map.
Eigen::VectorXd expand_features(const Eigen::Ref<const Eigen::VectorXd>& x, const RsmSpec& spec);

/// Feature count for d continuous (encoded) inputs.
int feature_count(int d, RsmSpec::Order order);

SurrogateModel fit_rsm(const TrainingSample& sample, const RsmSpec& spec,
                       const ModelOptions& options);

/// Internal trainer on encoded/standardized data.
std::unique_ptr<TechniqueModel> fit_rsm_core(const Eigen::Ref<const Eigen::MatrixXd>& U,
                                             const Eigen::Ref<const Eigen::MatrixXd>& Y,
                                             TrainContext& ctx);

/// Intercept-only model (the N=1 and otherwise-degenerate fallback).
std::unique_ptr<TechniqueModel> fit_constant_core(int d_enc, const Eigen::VectorXd& mean_std);

}  // namespace gta
