#include "vrsm/runtime/task.hpp"

#include <vector>

namespace vrsm {

namespace detail {

void RootTask::promise_type::FinalAwaiter::await_suspend(std::coroutine_handle<promise_type> h) noexcept {
  h.promise().finish();
  h.destroy();
}

void RootTask::promise_type::finish() noexcept { host->roots_.erase(id); }

void RootTask::promise_type::unhandled_exception() noexcept { host->report_failure(std::current_exception()); }

static RootTask run_root(Task<void> task) { co_await task; }

}  // namespace detail

void TaskHost::spawn(Task<void> task) {
  if (tearing_down_) return;
  auto root = detail::run_root(std::move(task));
  root.handle.promise().host = this;
  root.handle.promise().id = next_id_++;
  roots_.emplace(root.handle.promise().id, root.handle);
  schedule_start(root.handle);
}

void TaskHost::destroy_all_tasks() {
  tearing_down_ = true;
  while (!roots_.empty()) {
    auto it = std::prev(roots_.end());
    auto h = it->second;
    roots_.erase(it);
    h.destroy();
  }
  tearing_down_ = false;
}

}  // namespace vrsm
