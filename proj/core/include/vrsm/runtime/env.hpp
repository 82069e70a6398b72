#pragma once

#include <coroutine>
#include <functional>
#include <memory>
#include <random>
#include <string_view>

#include "vrsm/clock/clock.hpp"
#include "vrsm/common/types.hpp"
#include "vrsm/runtime/observer.hpp"
#include "vrsm/runtime/task.hpp"
#include "vrsm/storage/durable_store.hpp"
#include "vrsm/transport/connection.hpp"

namespace vrsm {

// Execution environment of one node: scheduling, timers, clock, network and
// durable storage. All coroutines of a node run on one logical thread.
class Env : public TaskHost {
 public:
  // Bounded-uncertainty wall clock.
  virtual TimeRange time_range() = 0;
  // Monotonic local time for timeouts only; never used for safety.
  virtual TimeNs monotonic_now() = 0;

  // Resumes `h` on this node's thread soon.
  virtual void post(std::coroutine_handle<> h) = 0;
  // Runs `fn` on this node's thread after `delay`, unless the node stops first.
  virtual void call_after(Nanos delay, std::function<void()> fn) = 0;

  virtual std::shared_ptr<Connection> connect(const Address& addr) = 0;
  virtual std::shared_ptr<Listener> listen(const Address& addr) = 0;

  virtual DurableStore& store() = 0;
  virtual std::mt19937_64& rng() = 0;
  virtual Observer& observer() = 0;
  virtual std::string_view name() const = 0;

  struct SleepAwaiter {
    Env* env;
    Nanos delay;
    bool await_ready() const noexcept { return false; }
    void await_suspend(std::coroutine_handle<> h) {
      env->call_after(delay, [h] { h.resume(); });
    }
    void await_resume() const noexcept {}
  };
  SleepAwaiter sleep(Nanos delay) { return SleepAwaiter{this, delay}; }

  // Reschedules the caller behind other runnable work.
  struct YieldAwaiter {
    Env* env;
    bool await_ready() const noexcept { return false; }
    void await_suspend(std::coroutine_handle<> h) { env->post(h); }
    void await_resume() const noexcept {}
  };
  YieldAwaiter yield() { return YieldAwaiter{this}; }

  // Suspends forever; the frame is reclaimed when the node stops.
  struct ParkAwaiter {
    bool await_ready() const noexcept { return false; }
    void await_suspend(std::coroutine_handle<>) const noexcept {}
    void await_resume() const noexcept {}
  };
  static ParkAwaiter park() { return {}; }

  uint64_t random_u64() { return rng()(); }
  // Uniform in [lo, hi].
  uint64_t random_between(uint64_t lo, uint64_t hi) {
    return std::uniform_int_distribution<uint64_t>(lo, hi)(rng());
  }
  Nanos random_duration(Nanos lo, Nanos hi) {
    return Nanos(static_cast<int64_t>(random_between(to_ns(lo), to_ns(hi))));
  }
};

}  // namespace vrsm
