#pragma once

#include <Eigen/Dense>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "gta/common.hpp"

namespace gta {

enum class Technique { rsm, splt, gp, sgp, hda, ta, ita, gbrt, pla, moa };

/// What the user asked for: a concrete technique, or one of the two
/// meta-algorithms.
enum class TechniqueChoice {
    automatic,
    smart,
    rsm,
    splt,
    gp,
    sgp,
    hda,
    ta,
    ita,
    gbrt,
    pla,
    moa
};

std::string technique_name(Technique t);
Technique technique_from_name(const std::string& name);
std::string choice_name(TechniqueChoice c);
TechniqueChoice choice_from_name(const std::string& name);

/// True when the choice names a concrete technique rather than auto/smart.
std::optional<Technique> concrete_technique(TechniqueChoice c);

struct ModelOptions {
    TechniqueChoice technique = TechniqueChoice::automatic;
    bool exact_fit = false;
    bool require_ae = false;
    bool require_linearity = false;
    bool enable_tensor = true;
    double smoothing = 0.0;
    bool joint_outputs = false;
    int accelerator = 1;  // 1 = thorough .. 5 = fastest
    std::set<std::string> hints;
    std::uint64_t seed = 0;

    // Mixture-of-approximations knobs (scanned K range cap and the
    // responsibility cutoff for local training sets).
    int moa_max_parts = 5;
    double moa_tau = 0.01;

    // Early-stopping target for smart selection (CV error level).
    std::optional<double> acceptable_quality;
};

/// Training-time budget scale per accelerator level 1..5.
double accelerator_factor(int level);

struct TrainingSample {
    Eigen::MatrixXd inputs;   // N x d_in
    Eigen::MatrixXd outputs;  // N x d_out
    std::vector<std::string> input_names;
    std::vector<std::string> output_names;
    std::vector<bool> categorical_mask;  // per input column; empty = all continuous

    int n() const { return static_cast<int>(inputs.rows()); }
    int d_in() const { return static_cast<int>(inputs.cols()); }
    int d_out() const { return static_cast<int>(outputs.cols()); }
    bool is_categorical(int col) const {
        return !categorical_mask.empty() && categorical_mask[static_cast<std::size_t>(col)];
    }

    /// Fills missing names with x1.., y1.. and sizes the categorical mask.
    void normalize_metadata();
};

/// Construct a sample from matrices, with generated column names.
TrainingSample make_sample(Eigen::MatrixXd inputs, Eigen::MatrixXd outputs);

struct ValidationIssue {
    enum class Severity { warning, conflict };
    Severity severity;
    std::string code;
    std::string message;
};

struct ValidationReport {
    std::vector<ValidationIssue> issues;

    bool ok() const { return issues.empty(); }
    bool has_conflict() const {
        for (const auto& i : issues)
            if (i.severity == ValidationIssue::Severity::conflict) return true;
        return false;
    }
    std::string summary() const;
};

/// Report-only check of sample invariants and option conflicts; never throws.
ValidationReport validate_sample(const TrainingSample& sample, const ModelOptions& options);

struct CvEstimate {
    Eigen::VectorXd rrms_per_output;
    double pooled_rrms = 0.0;
    int folds = 0;
    bool any_failure = false;
};

}  // namespace gta
