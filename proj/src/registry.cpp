#include "gta/detail/registry.hpp"

namespace gta {

namespace detail_rsm {
std::unique_ptr<TechniqueModel> load(const nlohmann::json& params);
}
namespace detail_splt {
std::unique_ptr<TechniqueModel> load(const nlohmann::json& params);
}
namespace detail_gp {
std::unique_ptr<TechniqueModel> load(const nlohmann::json& params, bool sparse);
}
namespace detail_hda {
std::unique_ptr<TechniqueModel> load(const nlohmann::json& params);
}
namespace detail_tensor {
std::unique_ptr<TechniqueModel> load_ta(const nlohmann::json& params);
std::unique_ptr<TechniqueModel> load_ita(const nlohmann::json& params);
}
namespace detail_piecewise {
std::unique_ptr<TechniqueModel> load_gbrt(const nlohmann::json& params);
std::unique_ptr<TechniqueModel> load_pla(const nlohmann::json& params);
}
namespace detail_moa {
std::unique_ptr<TechniqueModel> load(const nlohmann::json& params);
}

namespace detail {

std::unique_ptr<TechniqueModel> load_core(const std::string& technique,
                                          const nlohmann::json& params) {
    if (technique == "rsm") return detail_rsm::load(params);
    if (technique == "splt") return detail_splt::load(params);
    if (technique == "gp") return detail_gp::load(params, false);
    if (technique == "sgp") return detail_gp::load(params, true);
    if (technique == "hda") return detail_hda::load(params);
    if (technique == "ta") return detail_tensor::load_ta(params);
    if (technique == "ita") return detail_tensor::load_ita(params);
    if (technique == "gbrt") return detail_piecewise::load_gbrt(params);
    if (technique == "pla") return detail_piecewise::load_pla(params);
    if (technique == "moa") return detail_moa::load(params);
    throw IoError("model file: unknown technique '" + technique + "'");
}

}  // namespace detail
}  // namespace gta
