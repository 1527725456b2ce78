// Copyright 2026 The ela-kernels Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>

namespace ela {

// Worker cap from ELA_THREADS (default: hardware concurrency, at least 1).
std::size_t worker_threads();
void set_worker_threads(std::size_t n);

// Runs fn(i) for i in [0, count), split into contiguous chunks across up to
// worker_threads() threads. Callers must write disjoint outputs per index so
// results do not depend on the split.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

}  // namespace ela
