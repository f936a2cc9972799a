#pragma once

#include <Eigen/Dense>
#include <memory>

#include "gta/model.hpp"
#include "gta/train.hpp"

namespace gta {

/// Mixture of approximations: a Gaussian mixture over the joint standardized
/// (x, y) space partitions the sample, each part trains a local model, and
/// prediction blends local models with the smooth x-marginal gating weights.
/// Needs the raw sample because local models run the full training pipeline.
std::unique_ptr<TechniqueModel> fit_moa_core(const TrainingSample& sample,
                                             const Preprocessor& pp,
                                             const Eigen::Ref<const Eigen::MatrixXd>& U,
                                             const Eigen::Ref<const Eigen::MatrixXd>& Y,
                                             TrainContext& ctx);

/// Gating weights at an encoded point (non-negative, sum to 1). Test hook.
Eigen::VectorXd moa_gating_weights(const TechniqueModel& moa_core,
                                   const Eigen::Ref<const Eigen::VectorXd>& u);

/// Scanned (K, BIC) pairs recorded during the last fit of this core. Test hook.
std::vector<std::pair<int, double>> moa_bic_scan(const TechniqueModel& moa_core);

}  // namespace gta
