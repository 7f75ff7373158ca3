#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace wkcal::cli {

/// Exit codes: 0 success, 1 run failure, 2 usage or configuration error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace wkcal::cli
