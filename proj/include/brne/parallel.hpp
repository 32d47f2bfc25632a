#pragma once

// Minimal persistent fork-join pool. Work items must write to disjoint
// outputs; results are then independent of thread count and scheduling, which
// keeps every solver output bit-reproducible. Workers are spawned once per
// process; nested parallel_for calls from inside a worker run inline.

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace brne {

inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

namespace detail {

inline thread_local bool tl_pool_worker = false;

class ThreadPool {
public:
    static ThreadPool& instance() {
        static ThreadPool pool;
        return pool;
    }

    void run(std::int64_t n, int threads, const std::function<void(std::int64_t, std::int64_t)>& body) {
        if (n <= 0) return;
        threads = static_cast<int>(std::min<std::int64_t>(threads, n));
        if (threads <= 1 || tl_pool_worker) {
            body(0, n);
            return;
        }
        ensure_workers(threads - 1);

        Job job;
        job.body = &body;
        job.n = n;
        job.chunk = std::max<std::int64_t>(1, n / (static_cast<std::int64_t>(threads) * 8));
        int expected = 0;
        {
            std::lock_guard<std::mutex> lock(mutex_);
            expected = std::min<int>(threads - 1, static_cast<int>(workers_.size()));
            job.unclaimed = expected;
            current_ = &job;
        }
        cv_.notify_all();
        work(job);
        {
            std::unique_lock<std::mutex> lock(mutex_);
            done_cv_.wait(lock, [&] { return job.finished == expected; });
            current_ = nullptr;
        }
        if (job.error) std::rethrow_exception(job.error);
    }

    ~ThreadPool() {
        {
            std::lock_guard<std::mutex> lock(mutex_);
            stop_ = true;
        }
        cv_.notify_all();
        for (auto& worker : workers_) worker.join();
    }

private:
    struct Job {
        const std::function<void(std::int64_t, std::int64_t)>* body = nullptr;
        std::int64_t n = 0;
        std::int64_t chunk = 1;
        std::atomic<std::int64_t> next{0};
        int unclaimed = 0;   // guarded by pool mutex
        int finished = 0;    // guarded by pool mutex
        std::exception_ptr error;
        std::mutex error_mutex;
    };

    void ensure_workers(int wanted) {
        std::lock_guard<std::mutex> lock(mutex_);
        const unsigned hw = std::thread::hardware_concurrency();
        const int cap = hw == 0 ? 1 : static_cast<int>(hw);
        wanted = std::min(wanted, cap);
        while (static_cast<int>(workers_.size()) < wanted)
            workers_.emplace_back([this] { worker_loop(); });
    }

    void worker_loop() {
        tl_pool_worker = true;
        while (true) {
            Job* job = nullptr;
            {
                std::unique_lock<std::mutex> lock(mutex_);
                cv_.wait(lock, [&] { return stop_ || (current_ && current_->unclaimed > 0); });
                if (stop_) return;
                job = current_;
                --job->unclaimed;
            }
            work(*job);
            {
                std::lock_guard<std::mutex> lock(mutex_);
                ++job->finished;
            }
            done_cv_.notify_all();
        }
    }

    static void work(Job& job) {
        while (true) {
            const std::int64_t begin = job.next.fetch_add(job.chunk, std::memory_order_relaxed);
            if (begin >= job.n) break;
            const std::int64_t end = std::min(begin + job.chunk, job.n);
            try {
                (*job.body)(begin, end);
            } catch (...) {
                std::lock_guard<std::mutex> lock(job.error_mutex);
                if (!job.error) job.error = std::current_exception();
            }
        }
    }

    std::mutex mutex_;
    std::condition_variable cv_;
    std::condition_variable done_cv_;
    std::vector<std::thread> workers_;
    Job* current_ = nullptr;
    bool stop_ = false;
};

}  // namespace detail

/// Run body(begin, end) over [0, n) split across up to `threads` workers
/// (calling thread included). threads <= 1, or calls nested inside a pool
/// worker, run inline. The first exception thrown by any chunk is rethrown.
template <typename Body>
void parallel_for(std::int64_t n, int threads, Body&& body) {
    threads = resolve_threads(threads);
    if (threads <= 1 || n <= 1) {
        if (n > 0) body(std::int64_t{0}, n);
        return;
    }
    const std::function<void(std::int64_t, std::int64_t)> erased = std::forward<Body>(body);
    detail::ThreadPool::instance().run(n, threads, erased);
}

}  // namespace brne
