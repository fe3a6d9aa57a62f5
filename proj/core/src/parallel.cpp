#include "nfsense/parallel.hpp"

#include <fstream>
#include <string>

#include <Eigen/Core>
#include <omp.h>

namespace nfsense {

void set_thread_count(int n) {
  if (n <= 0) return;
  omp_set_num_threads(n);
  Eigen::setNbThreads(n);
}

int thread_count() { return omp_get_max_threads(); }

std::size_t available_memory_bytes() {
  std::ifstream in("/proc/meminfo");
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("MemAvailable:", 0) == 0) return std::stoull(line.substr(13)) * 1024;
  }
  return 0;
}

} // namespace nfsense
