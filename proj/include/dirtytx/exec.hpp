#pragma once

#include <cstddef>

namespace dirtytx {

// Execution policy for the data-parallel kernels. `serial` runs the
// reference implementation; both produce identical results.
enum class Exec { serial, parallel };

void set_thread_count(int n);
int thread_count();

}  // namespace dirtytx
