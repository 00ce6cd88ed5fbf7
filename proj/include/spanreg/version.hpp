#pragma once

#define SPANREG_VERSION_MAJOR 0
#define SPANREG_VERSION_MINOR 1
#define SPANREG_VERSION_PATCH 0
#define SPANREG_VERSION "0.1.0"

namespace spanreg {

inline const char* version() { return SPANREG_VERSION; }

}  // namespace spanreg
