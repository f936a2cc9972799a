#include "gta/metrics.hpp"

#include <cmath>

#include "gta/common.hpp"

namespace gta {

double rrms(const Eigen::Ref<const Eigen::VectorXd>& truth,
            const Eigen::Ref<const Eigen::VectorXd>& predicted) {
    if (truth.size() != predicted.size()) throw DataError("rrms: size mismatch");
    if (truth.size() < 2) throw DataError("rrms: needs at least 2 test points");

    const double mean = truth.mean();
    const double denom = (truth.array() - mean).square().sum();
    if (denom <= 0.0)
        throw DegenerateMetricError("rrms: all true values are equal, metric undefined");
    const double num = (truth - predicted).squaredNorm();
    return std::sqrt(num / denom);
}

}  // namespace gta
