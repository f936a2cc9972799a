#pragma once

#include <optional>

#include "gta/model.hpp"
#include "gta/types.hpp"

namespace gta {

/// Per-technique tunable parameters. Defaults mean "derive from options /
/// internal selection"; smart selection overrides individual fields.
struct TuneParams {
    // rsm
    std::optional<int> rsm_order;           // 1 linear, 2 quadratic
    std::optional<int> rsm_estimator;       // 0 ridge, 1 stepwise, 2 elastic_net
    std::optional<double> rsm_lambda;
    std::optional<double> rsm_alpha;        // elastic net mixing

    // gp / sgp
    std::optional<int> gp_kernel;           // 0 squared-exponential, 1 Matern-5/2
    std::optional<double> gp_nugget;

    // hda
    std::optional<int> hda_p;               // basis size; bypasses the CV grid
    std::optional<double> hda_shrinkage;    // boosting shrinkage for stages >= 2
    std::optional<int> hda_max_stages;      // ensemble cap (1 = no boosting)

    // gbrt
    std::optional<int> gbrt_depth;
    std::optional<double> gbrt_learning_rate;
    std::optional<int> gbrt_trees;

    // splt
    std::optional<double> splt_tension_cap;

    // ita
    std::optional<double> ita_lambda_scale;  // multiplier on the base regularizer

    // moa
    std::optional<int> moa_max_parts;
    std::optional<double> moa_tau;
};

/// State threaded through a single technique fit.
struct TrainContext {
    const ModelOptions& options;
    TuneParams tune;
    Rng rng;
    std::vector<std::string>* warnings = nullptr;

    void warn(std::string msg) {
        if (warnings) warnings->push_back(std::move(msg));
    }
};

/// Train with full routing: explicit technique, decision tree ("auto"), or
/// smart selection. Throws ConfigError / DataError on conflicts.
SurrogateModel train(const TrainingSample& sample, const ModelOptions& options);

/// Train a specific technique (no meta-selection), optionally with tuned
/// parameters. The N=1 degenerate sample falls back to the constant model
/// for every technique.
SurrogateModel train_technique(const TrainingSample& sample, const ModelOptions& options,
                               Technique technique, const TuneParams& tune = {});

}  // namespace gta
