#pragma once

#include <string>
#include <vector>

namespace cartal::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitPartial = 2;

/// Applies CARTAL_LOG={error,warn,info,debug} to the default logger.
void configure_logging();

/// Entry point shared by the executable and the tests. `args[0]` is the
/// program name.
int run(const std::vector<std::string>& args);

}  // namespace cartal::cli
