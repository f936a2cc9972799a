#pragma once

#include <Eigen/Dense>
#include <memory>

#include "gta/model.hpp"
#include "gta/train.hpp"

namespace gta {

/// Hard cap on full-GP training size (the N x N kernel stays ~128 MB below it).
inline constexpr int kGpMaxN = 4000;

enum class GpKernel { squared_exponential, matern52 };

std::unique_ptr<TechniqueModel> fit_gp_core(const Eigen::Ref<const Eigen::MatrixXd>& U,
                                            const Eigen::Ref<const Eigen::MatrixXd>& Y,
                                            TrainContext& ctx);

std::unique_ptr<TechniqueModel> fit_sgp_core(const Eigen::Ref<const Eigen::MatrixXd>& U,
                                             const Eigen::Ref<const Eigen::MatrixXd>& Y,
                                             TrainContext& ctx);

/// Log marginal likelihood and its gradient w.r.t. log-hyperparameters
/// (log lengthscales..., log signal variance, log nugget), summed over output
/// columns. Exposed for the finite-difference conformance tests.
double gp_log_marginal(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, GpKernel kernel,
                       const Eigen::VectorXd& log_hyper, Eigen::VectorXd* gradient = nullptr);

}  // namespace gta
