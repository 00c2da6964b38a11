#include "fddlab/parallel.hpp"

#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>

#include <omp.h>

namespace fddlab {

int worker_count() {
  if (const char* env = std::getenv("FDDLAB_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return n;
    } catch (const std::exception&) {
      // fall through to the default
    }
  }
  return omp_get_num_procs();
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  const int threads = worker_count();
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::exception_ptr first_error;
  std::mutex error_mutex;
  const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (long long i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard lock(error_mutex);
      if (!first_error) first_error = std::current_exception();
    }
  }
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace fddlab
