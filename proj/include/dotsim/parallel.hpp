#pragma once

#include <cstddef>
#include <functional>

namespace dotsim {

/// Worker cap: explicit argument > DOTSIM_THREADS env > hardware concurrency.
int resolve_thread_count(int requested);

/// Static-chunk parallel loop. Each index is visited exactly once and the
/// body must write only to its own slot, so results do not depend on the
/// schedule or the worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body,
                  int threads = 0);

}
