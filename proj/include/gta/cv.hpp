#pragma once

#include "gta/types.hpp"

namespace gta {

/// K-fold cross-validation error of one technique on one sample.
/// Deterministic given seed. The pooled RRMS is computed once over the union
/// of all fold-out predictions (single numerator/denominator per output, then
/// averaged over outputs) rather than as a mean of per-fold RRMS values.
/// A trainer failure inside a fold is flagged and that fold's points receive
/// the training-fold mean prediction, keeping the estimate finite.
CvEstimate k_fold_cv(const TrainingSample& sample, const ModelOptions& options, Technique trainer,
                     int folds, std::uint64_t seed);

}  // namespace gta
