// Copyright (c) 2026, FedCluster simulator contributors
// SPDX-License-Identifier: Apache-2.0
#include "fedcluster/parallel.hpp"

#include <cstdlib>
#include <string>

namespace fedcluster {

ThreadPool::ThreadPool(std::size_t threads) {
  const std::size_t extra = threads > 1 ? threads - 1 : 0;
  workers_.reserve(extra);
  for (std::size_t i = 0; i < extra; ++i) workers_.emplace_back([this] { worker_loop(); });
}

ThreadPool::~ThreadPool() {
  {
    std::lock_guard lock(mutex_);
    stopping_ = true;
  }
  wake_.notify_all();
  for (auto& w : workers_) w.join();
}

void ThreadPool::drain() {
  for (;;) {
    std::size_t index;
    const std::function<void(std::size_t)>* job;
    {
      std::lock_guard lock(mutex_);
      if (job_ == nullptr || next_ >= job_size_) return;
      index = next_++;
      job = job_;
    }
    try {
      (*job)(index);
    } catch (...) {
      std::lock_guard lock(mutex_);
      errors_[index] = std::current_exception();
    }
    {
      std::lock_guard lock(mutex_);
      if (++finished_ == job_size_) done_.notify_all();
    }
  }
}

void ThreadPool::worker_loop() {
  std::size_t seen = 0;
  for (;;) {
    {
      std::unique_lock lock(mutex_);
      wake_.wait(lock, [&] { return stopping_ || generation_ != seen; });
      if (stopping_) return;
      seen = generation_;
    }
    drain();
  }
}

void ThreadPool::parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  if (workers_.empty()) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  {
    std::lock_guard lock(mutex_);
    job_ = &fn;
    job_size_ = n;
    next_ = 0;
    finished_ = 0;
    errors_.assign(n, nullptr);
    ++generation_;
  }
  wake_.notify_all();
  drain();
  std::vector<std::exception_ptr> errors;
  {
    std::unique_lock lock(mutex_);
    done_.wait(lock, [&] { return finished_ == job_size_; });
    job_ = nullptr;
    errors.swap(errors_);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::size_t default_thread_count() {
  if (const char* env = std::getenv("FEDCLUSTER_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) return static_cast<std::size_t>(v);
    } catch (...) {
    }
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

}  // namespace fedcluster
