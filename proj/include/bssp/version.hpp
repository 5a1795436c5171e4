#pragma once

namespace bssp {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace bssp
