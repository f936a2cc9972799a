#pragma once

#include <Eigen/Dense>

namespace gta {

/// Relative root-mean-squared error: RMS prediction error normalized by the
/// RMS deviation of the true values from their own mean. 1 means no better
/// than predicting the test-set mean. Throws DegenerateMetricError when all
/// true values are equal.
double rrms(const Eigen::Ref<const Eigen::VectorXd>& truth,
            const Eigen::Ref<const Eigen::VectorXd>& predicted);

}  // namespace gta
