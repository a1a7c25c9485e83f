#pragma once

namespace lpe {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace lpe
