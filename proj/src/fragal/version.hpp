#pragma once

namespace fragal {
inline constexpr const char* kVersion = "0.1.0";
}
