#pragma once

namespace pmtrap {
inline constexpr const char* version = "1.0.0";
}
