// ipt: inverse path tracing toolkit
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <condition_variable>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

#include "ipt/common.hpp"

namespace ipt {

// Persistent worker pool. parallel_for hands out contiguous index chunks from
// an atomic cursor; every index is processed exactly once and results must be
// written to per-index storage, so output is independent of scheduling.
// Not reentrant: do not call parallel_for from inside a worker.
class ThreadPool {
  public:
    explicit ThreadPool(int thread_count) { start(thread_count); }

    ~ThreadPool() { stop(); }

    ThreadPool(const ThreadPool&) = delete;
    ThreadPool& operator=(const ThreadPool&) = delete;

    int thread_count() const { return static_cast<int>(workers_.size()) + 1; }

    void resize(int thread_count) {
        stop();
        start(thread_count);
    }

    void parallel_for(int64_t count, const std::function<void(int64_t)>& fn) {
        if (count <= 0)
            return;
        if (workers_.empty() || count == 1) {
            for (int64_t i = 0; i < count; ++i)
                fn(i);
            return;
        }
        {
            std::lock_guard<std::mutex> lock(mutex_);
            job_fn_ = &fn;
            job_count_ = count;
            next_index_.store(0, std::memory_order_relaxed);
            pending_workers_ = static_cast<int>(workers_.size());
            ++job_id_;
        }
        cv_.notify_all();
        run_chunks(*job_fn_, job_count_);  // caller participates
        std::unique_lock<std::mutex> lock(mutex_);
        done_cv_.wait(lock, [this] { return pending_workers_ == 0; });
        job_fn_ = nullptr;
    }

    // Process-wide pool used by the renderer; resize to honor --threads.
    static ThreadPool& global() {
        static ThreadPool pool(default_thread_count());
        return pool;
    }

    static int default_thread_count() {
        unsigned hw = std::thread::hardware_concurrency();
        return hw == 0 ? 1 : static_cast<int>(hw);
    }

  private:
    static constexpr int64_t kChunk = 4;

    void start(int thread_count) {
        if (thread_count < 1)
            thread_count = 1;
        stopping_ = false;
        for (int i = 0; i < thread_count - 1; ++i) {
            workers_.emplace_back([this] { worker_loop(); });
        }
    }

    void stop() {
        {
            std::lock_guard<std::mutex> lock(mutex_);
            stopping_ = true;
            ++job_id_;
        }
        cv_.notify_all();
        for (auto& t : workers_)
            t.join();
        workers_.clear();
    }

    void run_chunks(const std::function<void(int64_t)>& fn, int64_t count) {
        for (;;) {
            int64_t begin = next_index_.fetch_add(kChunk, std::memory_order_relaxed);
            if (begin >= count)
                break;
            int64_t end = std::min(begin + kChunk, count);
            for (int64_t i = begin; i < end; ++i)
                fn(i);
        }
    }

    void worker_loop() {
        std::uint64_t seen_job = 0;
        for (;;) {
            const std::function<void(int64_t)>* fn = nullptr;
            int64_t count = 0;
            {
                std::unique_lock<std::mutex> lock(mutex_);
                cv_.wait(lock, [&] { return stopping_ || job_id_ != seen_job; });
                if (stopping_)
                    return;
                seen_job = job_id_;
                fn = job_fn_;
                count = job_count_;
            }
            if (fn)
                run_chunks(*fn, count);
            {
                std::lock_guard<std::mutex> lock(mutex_);
                if (--pending_workers_ == 0)
                    done_cv_.notify_all();
            }
        }
    }

    std::vector<std::thread> workers_;
    std::mutex mutex_;
    std::condition_variable cv_;
    std::condition_variable done_cv_;
    const std::function<void(int64_t)>* job_fn_ = nullptr;
    int64_t job_count_ = 0;
    std::atomic<int64_t> next_index_{0};
    int pending_workers_ = 0;
    std::uint64_t job_id_ = 0;
    bool stopping_ = false;
};

}  // namespace ipt
