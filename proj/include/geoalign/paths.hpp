#pragma once

#include <cstdlib>
#include <filesystem>

namespace geoalign {

// Root of the shipped data files (tagger rules, default culture profiles).
// $GEOALIGN_DATA_DIR overrides the location baked in at build time.
inline std::filesystem::path data_directory() {
  if (const char* env = std::getenv("GEOALIGN_DATA_DIR"); env != nullptr && *env != '\0') {
    return env;
  }
  return GEOALIGN_DATA_DIR;
}

}  // namespace geoalign
