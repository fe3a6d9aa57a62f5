#pragma once

#include <cstddef>

namespace nfsense {

/// Caps internal parallelism (OpenMP loops and Eigen products). n <= 0 keeps
/// the runtime default.
void set_thread_count(int n);
int thread_count();

/// MemAvailable from /proc/meminfo, or 0 when it cannot be determined.
std::size_t available_memory_bytes();

} // namespace nfsense
