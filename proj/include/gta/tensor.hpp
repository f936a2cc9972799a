#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <vector>

#include "gta/model.hpp"
#include "gta/train.hpp"

namespace gta {

/// Cartesian factorization of a DoE: disjoint variable groups covering all
/// inputs, per-group node sets, and the per-row node indices.
struct DoeFactorization {
    std::vector<std::vector<int>> groups;       // variable indices per group
    std::vector<Eigen::MatrixXd> factor_nodes;  // per group: n_k x |group| distinct tuples
    std::vector<std::vector<int>> grid_index;   // per row: node index within each group

    int group_count() const { return static_cast<int>(groups.size()); }
    long long cell_count() const {
        long long c = 1;
        for (const auto& f : factor_nodes) c *= f.rows();
        return c;
    }
};

/// Finest partition of the variables such that the row set equals the
/// Cartesian product of per-group node sets. Always succeeds (single all-
/// variable group in the worst case). Throws DataError on duplicate rows.
DoeFactorization factorize_doe(const Eigen::Ref<const Eigen::MatrixXd>& inputs);

/// A subset of a full-factorial grid with one-dimensional axes.
struct IncompleteGrid {
    std::vector<std::vector<double>> axis_nodes;  // sorted per axis
    std::vector<std::vector<int>> cell_index;     // per row: node index per axis
    double fill_ratio = 0.0;
};

/// Present iff every row lies on the per-axis node grid and the fill ratio
/// N / prod(axis sizes) is at least 0.05.
std::optional<IncompleteGrid> detect_incomplete_grid(const Eigen::Ref<const Eigen::MatrixXd>& inputs);

enum class FactorTech { bspl, lr, gp, hda };

/// Tensor product of per-factor approximations on a completely factorized DoE.
/// Empty `techniques` = automatic assignment (bspl for 1D groups, gp for
/// multi-dimensional groups up to 1000 nodes, hda above).
std::unique_ptr<TechniqueModel> fit_ta_core(const Eigen::Ref<const Eigen::MatrixXd>& U,
                                            const Eigen::Ref<const Eigen::MatrixXd>& Y,
                                            const DoeFactorization& factorization,
                                            const std::vector<FactorTech>& techniques,
                                            TrainContext& ctx);

/// Tensor-product B-spline fit on an incomplete grid: penalized least squares
/// with per-axis second-difference regularization, solved by conjugate
/// gradients on the Kronecker-structured normal equations.
std::unique_ptr<TechniqueModel> fit_ita_core(const Eigen::Ref<const Eigen::MatrixXd>& U,
                                             const Eigen::Ref<const Eigen::MatrixXd>& Y,
                                             const IncompleteGrid& grid, TrainContext& ctx);

/// Public wrappers resolving structure from the sample.
SurrogateModel fit_ta(const TrainingSample& sample, const ModelOptions& options,
                      const std::vector<FactorTech>& techniques = {});
SurrogateModel fit_ita(const TrainingSample& sample, const ModelOptions& options);

/// Objective values across the CG iterations of the last iTA solve. Test hook.
std::vector<double> ita_cg_objective_trace(const TechniqueModel& core);

}  // namespace gta
