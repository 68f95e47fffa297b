#pragma once

#include <string>

#include "foundry/params.hpp"

namespace foundry {

/// Parameter checkpoint: per entry, a length-prefixed name followed by the
/// tensor in FTEN form. Loading matches by name and requires every registered
/// parameter to be present with the right shape.
void save_params(const std::string& path, const ParamSet& params);
void load_params(const std::string& path, ParamSet& params);

}  // namespace foundry
