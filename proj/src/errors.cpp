#include "emctl/errors.hpp"

#include <iostream>
#include <mutex>

namespace emctl {

void log_warning(const std::string& message) {
  static std::mutex mutex;
  std::lock_guard<std::mutex> lock(mutex);
  std::cerr << "warning: " << message << '\n';
}

}  // namespace emctl
