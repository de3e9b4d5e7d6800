#pragma once

#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>

namespace rgbdtrack {

// Runs fn(row) for every row in [0, rows). Rows must not share mutable state;
// callers rely on this to get output identical to a sequential loop. The
// degree of parallelism follows the enclosing tbb::task_arena.
template <typename Fn>
void parallel_rows(int rows, Fn&& fn) {
  tbb::parallel_for(tbb::blocked_range<int>(0, rows, 8), [&](const tbb::blocked_range<int>& range) {
    for (int v = range.begin(); v != range.end(); ++v) fn(v);
  });
}

template <typename Fn>
void sequential_rows(int rows, Fn&& fn) {
  for (int v = 0; v < rows; ++v) fn(v);
}

}  // namespace rgbdtrack
