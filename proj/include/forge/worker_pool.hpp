// Copyright 2026 The Interleave Forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

namespace forge {

// Runs work(i) for i in [0, n) on up to `workers` threads and hands each
// result to sink(i, result) on the calling thread in index order, so output
// is independent of completion order. Once `stop` is set no new items are
// started; items already running finish and are delivered. Returns the
// number of items delivered. An exception from `work` is rethrown from here
// when its item comes up for delivery.
template <typename R>
std::size_t OrderedParallelMap(std::size_t n, int workers,
                               const std::function<R(std::size_t)>& work,
                               const std::function<void(std::size_t, R&&)>& sink,
                               const std::atomic<bool>* stop = nullptr) {
  struct Slot {
    std::optional<R> value;
    std::exception_ptr error;
    bool ready = false;
  };
  std::vector<Slot> slots(n);
  std::mutex mu;
  std::condition_variable cv;
  std::atomic<std::size_t> next{0};
  std::size_t started_limit = n;  // guarded by mu
  auto stopped = [&] { return stop != nullptr && stop->load(); };

  auto worker = [&] {
    while (true) {
      std::size_t i;
      {
        std::lock_guard<std::mutex> lock(mu);
        if (stopped()) started_limit = std::min(started_limit, next.load());
        i = next.load();
        if (i >= started_limit) break;
        next.store(i + 1);
      }
      Slot result;
      try {
        result.value.emplace(work(i));
      } catch (...) {
        result.error = std::current_exception();
      }
      {
        std::lock_guard<std::mutex> lock(mu);
        slots[i].value = std::move(result.value);
        slots[i].error = result.error;
        slots[i].ready = true;
      }
      cv.notify_all();
    }
    cv.notify_all();
  };

  const int count = std::max(1, workers);
  std::vector<std::thread> threads;
  for (int t = 0; t < count; ++t) threads.emplace_back(worker);

  std::size_t delivered = 0;
  std::exception_ptr failure;
  for (std::size_t i = 0; i < n; ++i) {
    std::unique_lock<std::mutex> lock(mu);
    cv.wait(lock, [&] {
      if (stopped()) started_limit = std::min(started_limit, next.load());
      return slots[i].ready || i >= started_limit;
    });
    if (!slots[i].ready) break;
    Slot slot = std::move(slots[i]);
    lock.unlock();
    if (failure) continue;
    if (!slot.error) {
      try {
        sink(i, std::move(*slot.value));
        ++delivered;
        continue;
      } catch (...) {
        slot.error = std::current_exception();
      }
    }
    failure = slot.error;
    std::lock_guard<std::mutex> stop_lock(mu);
    started_limit = std::min(started_limit, next.load());
  }
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
  return delivered;
}

}  // namespace forge
