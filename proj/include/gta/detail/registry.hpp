#pragma once

#include <json.hpp>
#include <memory>
#include <string>

#include "gta/model.hpp"

namespace gta::detail {

/// Reconstruct a technique core from its persisted parameter block.
/// Throws IoError for unknown technique ids.
std::unique_ptr<TechniqueModel> load_core(const std::string& technique,
                                          const nlohmann::json& params);

}  // namespace gta::detail
