#pragma once

#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gta/model.hpp"
#include "gta/train.hpp"
#include "gta/types.hpp"

namespace gta {

/// One tunable parameter of a technique.
struct ParamSpec {
    enum class Kind { continuous_log, continuous_linear, integer, categorical };
    std::string name;
    Kind kind = Kind::continuous_linear;
    double lo = 0.0, hi = 1.0;           // bounds for continuous/integer kinds
    std::vector<double> levels;          // categorical levels
    double default_value = 0.0;
};

struct TechniqueParamSpace {
    Technique technique;
    std::vector<ParamSpec> parameters;
};

/// Search space per technique; parameters omitted by design stay at defaults.
TechniqueParamSpace parameter_space(Technique t);

/// A candidate parameter assignment (by parameter name).
using ParamVector = std::map<std::string, double>;

/// History of one surrogate-based optimization run.
struct SelectorState {
    Technique technique;
    std::vector<ParamVector> evaluated;
    std::vector<double> errors;           // CV error per evaluation
    std::vector<double> seconds;          // training wall time per evaluation
    double best_error = std::numeric_limits<double>::infinity();
    ParamVector best_params;
    std::optional<double> acceptable_quality;

    void record(const ParamVector& p, double error, double secs) {
        evaluated.push_back(p);
        errors.push_back(error);
        seconds.push_back(secs);
        if (error < best_error) {
            best_error = error;
            best_params = p;
        }
    }
};

/// One line of the selection trace: a single CV evaluation.
struct TraceRecord {
    Technique technique;
    ParamVector params;
    double cv_error;
    double seconds;
};

using TraceSink = std::function<void(const TraceRecord&)>;

/// Rule-based technique choice from data size/structure and option flags.
/// Pure in the input values: depends only on N, dimensions, DoE structure and
/// options. Throws ConfigError for conflicting requirement combinations.
Technique decision_tree_select(const TrainingSample& sample, const ModelOptions& options);

/// Expected improvement of a candidate under a normal belief (mean, deviation)
/// against the incumbent best; the sigma=0 limit is max(0, best - mean).
double acquisition_ei(double mean, double sigma, double best);

/// Expected improvement for an encoded parameter vector using the state's
/// auxiliary model. Requires at least 2 history points.
double acquisition_ei(const SelectorState& state, const SurrogateModel& auxiliary,
                      const Eigen::VectorXd& encoded);

/// Surrogate-based optimization of one technique's parameters by expected
/// improvement over the CV error. Returns the state holding the best
/// parameters and full history.
SelectorState sbo_optimize(const TrainingSample& sample, const ModelOptions& options,
                           const TechniqueParamSpace& space, int budget,
                           const TraceSink& trace = nullptr);

/// Feasible techniques for smart selection on this sample (capacity,
/// capability and hint filters applied). Throws ConfigError when empty.
std::vector<Technique> smart_candidates(const TrainingSample& sample, const ModelOptions& options);

struct SmartResult {
    SurrogateModel model;
    std::vector<SelectorState> states;  // one per candidate technique
    Technique winner;
};

/// Runs SBO per candidate technique, picks the minimal CV error, retrains the
/// winner on the full sample. `candidate_override` restricts the set (tests).
SmartResult smart_select_full(const TrainingSample& sample, const ModelOptions& options,
                              const std::vector<Technique>* candidate_override = nullptr,
                              const TraceSink& trace = nullptr);

SurrogateModel smart_select(const TrainingSample& sample, const ModelOptions& options);

/// TuneParams corresponding to a parameter assignment for a technique.
TuneParams tune_from_params(Technique t, const ParamVector& params);

}  // namespace gta
