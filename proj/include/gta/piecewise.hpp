#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "gta/model.hpp"
#include "gta/train.hpp"

namespace gta {

/// Delaunay triangulation for d in {1,2,3}: incremental insertion with
/// exactly-signed predicates (rational fallback when the double filter is
/// inconclusive). Cospherical ties resolve deterministically as "empty".
struct Triangulation {
    int dim = 0;
    Eigen::MatrixXd vertices;            // n x d
    std::vector<std::vector<int>> simplices;  // each d+1 vertex indices
};

Triangulation delaunay_triangulate(const Eigen::Ref<const Eigen::MatrixXd>& points);

std::unique_ptr<TechniqueModel> fit_gbrt_core(const Eigen::Ref<const Eigen::MatrixXd>& U,
                                              const Eigen::Ref<const Eigen::MatrixXd>& Y,
                                              TrainContext& ctx);

std::unique_ptr<TechniqueModel> fit_pla_core(const Eigen::Ref<const Eigen::MatrixXd>& U,
                                             const Eigen::Ref<const Eigen::MatrixXd>& Y,
                                             TrainContext& ctx);

}  // namespace gta
