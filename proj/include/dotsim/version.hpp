#pragma once

namespace dotsim {

inline constexpr const char* kVersion = "0.1.0";

}
