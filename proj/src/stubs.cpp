// Temporary placeholders while modules are brought up; removed as each lands.
#include "gta/moa.hpp"
#include "gta/piecewise.hpp"
#include "gta/selector.hpp"
#include "gta/splines.hpp"

namespace gta {

#define GTA_STUB(NAME) throw Error(#NAME ": not implemented yet")

std::unique_ptr<TechniqueModel> fit_gbrt_core(const Eigen::Ref<const Eigen::MatrixXd>&,
                                              const Eigen::Ref<const Eigen::MatrixXd>&,
                                              TrainContext&) {
    GTA_STUB(fit_gbrt_core);
}
std::unique_ptr<TechniqueModel> fit_pla_core(const Eigen::Ref<const Eigen::MatrixXd>&,
                                             const Eigen::Ref<const Eigen::MatrixXd>&,
                                             TrainContext&) {
    GTA_STUB(fit_pla_core);
}
std::unique_ptr<TechniqueModel> fit_moa_core(const TrainingSample&, const Preprocessor&,
                                             const Eigen::Ref<const Eigen::MatrixXd>&,
                                             const Eigen::Ref<const Eigen::MatrixXd>&,
                                             TrainContext&) {
    GTA_STUB(fit_moa_core);
}
Technique decision_tree_select(const TrainingSample&, const ModelOptions&) {
    GTA_STUB(decision_tree_select);
}
SurrogateModel smart_select(const TrainingSample&, const ModelOptions&) {
    GTA_STUB(smart_select);
}

namespace detail_piecewise {
std::unique_ptr<TechniqueModel> load_gbrt(const nlohmann::json&) { GTA_STUB(load_gbrt); }
std::unique_ptr<TechniqueModel> load_pla(const nlohmann::json&) { GTA_STUB(load_pla); }
}
namespace detail_moa {
std::unique_ptr<TechniqueModel> load(const nlohmann::json&) { GTA_STUB(load_moa); }
}

#undef GTA_STUB

}  // namespace gta
