#pragma once

namespace pstlab {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace pstlab
