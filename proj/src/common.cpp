#include "semwm/common.hpp"
#include "semwm/parallel.hpp"

#include <cstdio>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace semwm {

std::string to_hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void set_jobs(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

int jobs() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace semwm
