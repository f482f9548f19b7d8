#pragma once

#include <cstddef>
#include <functional>

namespace hfss {

// Worker count: HFSS_THREADS when set and positive, else the hardware
// concurrency; never more than `tasks`.
unsigned worker_count(std::size_t tasks);

// Runs body(0..tasks-1) across worker_count(tasks) threads. Each index runs
// exactly once; the first exception thrown is rethrown after all workers join.
void parallel_for(std::size_t tasks, const std::function<void(std::size_t)>& body);

}  // namespace hfss
