#include "gta/cv.hpp"

#include <cmath>
#include <limits>

#include "gta/train.hpp"

namespace gta {

CvEstimate k_fold_cv(const TrainingSample& sample0, const ModelOptions& options,
                     Technique trainer, int folds, std::uint64_t seed) {
    TrainingSample sample = sample0;
    sample.normalize_metadata();
    const int n = sample.n();
    const int m = sample.d_out();
    if (folds < 2) throw ConfigError("k_fold_cv: folds must be >= 2");
    if (folds > n) throw ConfigError("k_fold_cv: folds exceed sample size");

    std::vector<int> fold_of(static_cast<std::size_t>(n));
    {
        auto perm = Rng(seed).permutation(n);
        for (int i = 0; i < n; ++i) fold_of[static_cast<std::size_t>(perm[i])] = i % folds;
    }

    Eigen::MatrixXd pred(n, m);
    bool any_failure = false;
    for (int f = 0; f < folds; ++f) {
        std::vector<int> train_rows, test_rows;
        for (int i = 0; i < n; ++i)
            (fold_of[static_cast<std::size_t>(i)] == f ? test_rows : train_rows).push_back(i);
        if (test_rows.empty()) continue;

        TrainingSample part;
        part.input_names = sample.input_names;
        part.output_names = sample.output_names;
        part.categorical_mask = sample.categorical_mask;
        part.inputs.resize(static_cast<Eigen::Index>(train_rows.size()), sample.d_in());
        part.outputs.resize(static_cast<Eigen::Index>(train_rows.size()), m);
        for (std::size_t r = 0; r < train_rows.size(); ++r) {
            part.inputs.row(static_cast<Eigen::Index>(r)) = sample.inputs.row(train_rows[r]);
            part.outputs.row(static_cast<Eigen::Index>(r)) = sample.outputs.row(train_rows[r]);
        }

        bool failed = false;
        SurrogateModel model;
        try {
            model = train_technique(part, options, trainer);
        } catch (const Error&) {
            failed = true;
        }
        if (failed) {
            // Keep the estimate finite: fold points get the training-fold mean.
            any_failure = true;
            const Eigen::RowVectorXd mean = part.outputs.colwise().mean();
            for (int i : test_rows) pred.row(i) = mean;
        } else {
            for (int i : test_rows) pred.row(i) = model.predict(sample.inputs.row(i).transpose()).transpose();
        }
    }

    CvEstimate est;
    est.folds = folds;
    est.any_failure = any_failure;
    est.rrms_per_output.resize(m);
    for (int k = 0; k < m; ++k) {
        const double mean = sample.outputs.col(k).mean();
        const double denom = (sample.outputs.col(k).array() - mean).square().sum();
        const double num = (sample.outputs.col(k) - pred.col(k)).squaredNorm();
        double value;
        if (denom > 0.0)
            value = std::sqrt(num / denom);
        else
            value = num <= 1e-20 ? 0.0 : 1e6;  // constant output column
        est.rrms_per_output[k] = value;
    }
    est.pooled_rrms = est.rrms_per_output.mean();
    return est;
}

}  // namespace gta
