#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace geoalign {

// Parses and runs one command line (args excludes the program name).
// Returns 0 on success, 1 when some pages failed, 2 on usage or configuration errors.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace geoalign
