#pragma once

#include <coroutine>
#include <deque>
#include <memory>
#include <optional>
#include <vector>

#include "vrsm/runtime/env.hpp"

namespace vrsm {

// Wakes every coroutine waiting on it. Single-threaded condition variable.
class Notifier {
 public:
  explicit Notifier(Env& env) : env_(&env) {}
  Notifier(const Notifier&) = delete;
  Notifier& operator=(const Notifier&) = delete;

  struct Waiter {
    std::coroutine_handle<> h;
    bool done = false;
    bool notified = false;
  };

  class WaitAwaiter {
   public:
    WaitAwaiter(Notifier* n, std::optional<Nanos> timeout) : n_(n), timeout_(timeout) {}
    bool await_ready() const noexcept { return false; }
    void await_suspend(std::coroutine_handle<> h);
    // True if woken by notify_all, false on timeout.
    bool await_resume() const noexcept { return w_->notified; }

   private:
    Notifier* n_;
    std::optional<Nanos> timeout_;
    std::shared_ptr<Waiter> w_;
  };

  WaitAwaiter wait(std::optional<Nanos> timeout = std::nullopt) { return WaitAwaiter(this, timeout); }
  void notify_all();
  size_t waiters() const { return waiters_.size(); }

 private:
  Env* env_;
  std::vector<std::shared_ptr<Waiter>> waiters_;
};

// FIFO mutex for critical sections that span suspension points.
class AsyncMutex {
 public:
  explicit AsyncMutex(Env& env) : env_(&env) {}
  AsyncMutex(const AsyncMutex&) = delete;
  AsyncMutex& operator=(const AsyncMutex&) = delete;

  class Guard {
   public:
    Guard() = default;
    explicit Guard(AsyncMutex* m) : m_(m) {}
    Guard(Guard&& o) noexcept : m_(std::exchange(o.m_, nullptr)) {}
    Guard& operator=(Guard&& o) noexcept {
      if (this != &o) {
        unlock();
        m_ = std::exchange(o.m_, nullptr);
      }
      return *this;
    }
    ~Guard() { unlock(); }
    void unlock() {
      if (m_) std::exchange(m_, nullptr)->release();
    }
    bool owns() const { return m_ != nullptr; }

   private:
    AsyncMutex* m_ = nullptr;
  };

  struct LockAwaiter {
    AsyncMutex* m;
    bool await_ready() const noexcept {
      if (!m->locked_) {
        m->locked_ = true;
        return true;
      }
      return false;
    }
    void await_suspend(std::coroutine_handle<> h) { m->waiters_.push_back(h); }
    Guard await_resume() const noexcept { return Guard(m); }
  };

  LockAwaiter lock() { return LockAwaiter{this}; }
  bool locked() const { return locked_; }

 private:
  void release();

  Env* env_;
  bool locked_ = false;
  std::deque<std::coroutine_handle<>> waiters_;
};

// Single-consumer queue whose pop suspends until an item arrives or the queue
// is closed.
template <typename T>
class AsyncQueue {
 public:
  explicit AsyncQueue(Env& env) : cv_(env) {}

  void push(T v) {
    if (closed_) return;
    items_.push_back(std::move(v));
    cv_.notify_all();
  }
  void close() {
    closed_ = true;
    cv_.notify_all();
  }
  bool closed() const { return closed_; }
  size_t size() const { return items_.size(); }

  Task<std::optional<T>> pop() {
    while (items_.empty() && !closed_) co_await cv_.wait();
    if (items_.empty()) co_return std::nullopt;
    T v = std::move(items_.front());
    items_.pop_front();
    co_return std::optional<T>(std::move(v));
  }

 private:
  std::deque<T> items_;
  bool closed_ = false;
  Notifier cv_;
};

// Counts outstanding sub-tasks spawned for a fan-out; wait() returns when the
// count reaches zero or a caller-chosen condition becomes true.
class WaitGroup {
 public:
  explicit WaitGroup(Env& env) : cv_(env) {}
  void add(int n = 1) { pending_ += n; }
  void done() {
    pending_--;
    cv_.notify_all();
  }
  int pending() const { return pending_; }
  Notifier& notifier() { return cv_; }

 private:
  int pending_ = 0;
  Notifier cv_;
};

}  // namespace vrsm
