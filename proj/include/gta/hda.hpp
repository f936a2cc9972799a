#pragma once

#include <Eigen/Dense>
#include <memory>

#include "gta/model.hpp"
#include "gta/train.hpp"

namespace gta {

/// One nonlinear unit of an HDA stage.
struct HdaUnit {
    enum class Type { sigmoid, gaussian };
    Type type = Type::sigmoid;
    Eigen::VectorXd direction;  // sigmoid: weight vector; gaussian: center
    double offset = 0.0;        // sigmoid bias
    double width = 1.0;         // gaussian width

    double eval(const Eigen::Ref<const Eigen::VectorXd>& u) const;
    Eigen::VectorXd grad(const Eigen::Ref<const Eigen::VectorXd>& u) const;
};

/// Single-stage trainer: adaptive basis size over the CV grid, greedy
/// per-unit type choice, gradient refinement of nonlinear parameters,
/// ridge output weights.
std::unique_ptr<TechniqueModel> fit_hda_core(const Eigen::Ref<const Eigen::MatrixXd>& U,
                                             const Eigen::Ref<const Eigen::MatrixXd>& Y,
                                             TrainContext& ctx);

/// Residual-boosted ensemble of stages (stage 1 full, later stages shrunk);
/// returns the single stage when boosting does not improve CV error.
std::unique_ptr<TechniqueModel> boost_hda_core(const Eigen::Ref<const Eigen::MatrixXd>& U,
                                               const Eigen::Ref<const Eigen::MatrixXd>& Y,
                                               TrainContext& ctx);

/// Test hook: assemble a single-stage model from explicit units and weights.
std::unique_ptr<TechniqueModel> make_hda_stage_for_test(int d, std::vector<HdaUnit> units,
                                                        const Eigen::MatrixXd& unit_weights,
                                                        const Eigen::MatrixXd& linear,
                                                        const Eigen::VectorXd& intercept);

/// Fit `p` nonlinear units to (X, Y) and return them (weights discarded);
/// used by tensored approximations to build factor dictionaries.
std::vector<HdaUnit> fit_hda_units(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, int p,
                                   Rng rng);

}  // namespace gta
