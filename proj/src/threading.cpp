// Copyright (c) 2026 the gsps authors.
// SPDX-License-Identifier: Apache-2.0

#include "gsps/threading.hpp"

#include <atomic>
#include <condition_variable>
#include <mutex>
#include <thread>

namespace gsps {
namespace {

int g_thread_count = 0;  // 0 = hardware
thread_local bool tl_in_parallel = false;

int effective_threads() {
    if (g_thread_count > 0) return g_thread_count;
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : int(hw);
}

// Lazily started worker pool. One parallel_for runs at a time; nested
// calls execute inline on the calling thread.
class Pool {
public:
    static Pool& instance() {
        // Intentionally leaked: workers block in wait() at process exit
        // and must not be destroyed.
        static Pool* p = new Pool();
        return *p;
    }

    void run(int n, const std::function<void(int)>& fn, int workers) {
        ensure_workers(workers - 1);
        {
            std::lock_guard<std::mutex> lk(mutex_);
            fn_ = &fn;
            next_.store(0, std::memory_order_relaxed);
            limit_ = n;
            active_ = int(threads_.size());
            ++generation_;
        }
        cv_.notify_all();
        drain();  // caller participates
        std::unique_lock<std::mutex> lk(mutex_);
        done_cv_.wait(lk, [&] { return active_ == 0; });
        fn_ = nullptr;
    }

private:
    Pool() = default;

    void ensure_workers(int want) {
        std::lock_guard<std::mutex> lk(mutex_);
        while (int(threads_.size()) < want)
            threads_.emplace_back([this, gen = generation_] { worker(gen); });
    }

    void drain() {
        const std::function<void(int)>& fn = *fn_;
        for (;;) {
            int i = next_.fetch_add(1, std::memory_order_relaxed);
            if (i >= limit_) break;
            fn(i);
        }
    }

    void worker(uint64_t seen) {
        tl_in_parallel = true;
        for (;;) {
            std::unique_lock<std::mutex> lk(mutex_);
            cv_.wait(lk, [&] { return generation_ != seen; });
            seen = generation_;
            lk.unlock();
            drain();
            lk.lock();
            if (--active_ == 0) done_cv_.notify_all();
        }
    }

    std::mutex mutex_;
    std::condition_variable cv_;
    std::condition_variable done_cv_;
    std::vector<std::thread> threads_;
    const std::function<void(int)>* fn_ = nullptr;
    std::atomic<int> next_{0};
    int limit_ = 0;
    int active_ = 0;
    uint64_t generation_ = 0;
};

}  // namespace

void set_thread_count(int n) { g_thread_count = n < 0 ? 0 : n; }

int thread_count() { return effective_threads(); }

void parallel_for(int n, const std::function<void(int)>& fn) {
    if (n <= 0) return;
    int workers = effective_threads();
    if (workers <= 1 || n == 1 || tl_in_parallel) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    bool was = tl_in_parallel;
    tl_in_parallel = true;
    Pool::instance().run(n, fn, workers < n ? workers : n);
    tl_in_parallel = was;
}

double ordered_sum(int n, const std::function<double(int)>& item_sum) {
    std::vector<double> partial(size_t(n > 0 ? n : 0), 0.0);
    parallel_for(n, [&](int i) { partial[size_t(i)] = item_sum(i); });
    double total = 0.0;
    for (double v : partial) total += v;
    return total;
}

}  // namespace gsps
