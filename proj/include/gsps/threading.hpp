// Copyright (c) 2026 the gsps authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <vector>

namespace gsps {

// 0 restores the default (hardware concurrency).
void set_thread_count(int n);
int thread_count();

// Runs fn(i) for every i in [0, n). Items may execute on any thread in
// any order, so callers must keep item outputs disjoint; any reduction
// happens after the loop, in index order. Nested calls run inline.
void parallel_for(int n, const std::function<void(int)>& fn);

// Order-independent sum: item sums are computed in parallel but always
// combined serially in index order, so the result does not depend on
// the thread count.
double ordered_sum(int n, const std::function<double(int)>& item_sum);

}  // namespace gsps
