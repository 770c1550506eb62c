#pragma once

// Execution policy for the data-parallel kernels. Every kernel has a serial
// reference path; the parallel path must produce bit-identical results, so
// reductions always run in a fixed order that does not depend on the number
// of threads.

namespace semwm {

enum class Exec { serial, parallel };

/// Sets the OpenMP worker count; n <= 0 selects the runtime default.
void set_jobs(int n);
int jobs();

}  // namespace semwm
