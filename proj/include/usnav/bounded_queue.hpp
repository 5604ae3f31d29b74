#pragma once

#include <algorithm>
#include <condition_variable>
#include <cstddef>
#include <deque>
#include <mutex>
#include <optional>

namespace usnav {

// Multi-producer queue with a fixed capacity. A push into a full queue evicts
// the oldest element and counts it as a drop.
template <typename T>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(capacity ? capacity : 1) {}

  void push(T value) {
    {
      std::lock_guard lock(mu_);
      if (closed_) return;
      if (items_.size() == capacity_) {
        items_.pop_front();
        ++drops_;
      }
      items_.push_back(std::move(value));
      high_water_ = std::max(high_water_, items_.size());
    }
    cv_.notify_one();
  }

  // Blocks until an item is available; nullopt once closed and drained.
  std::optional<T> pop() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return closed_ || !items_.empty(); });
    if (items_.empty()) return std::nullopt;
    T v = std::move(items_.front());
    items_.pop_front();
    return v;
  }

  void close() {
    {
      std::lock_guard lock(mu_);
      closed_ = true;
    }
    cv_.notify_all();
  }

  std::size_t drops() const {
    std::lock_guard lock(mu_);
    return drops_;
  }
  std::size_t high_water() const {
    std::lock_guard lock(mu_);
    return high_water_;
  }
  std::size_t capacity() const { return capacity_; }

 private:
  const std::size_t capacity_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<T> items_;
  std::size_t drops_ = 0;
  std::size_t high_water_ = 0;
  bool closed_ = false;
};

}  // namespace usnav
