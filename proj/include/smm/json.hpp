#pragma once

#include <json.hpp>

namespace smm {

// Insertion-ordered so written files keep schema field order.
using Json = nlohmann::ordered_json;

}  // namespace smm
