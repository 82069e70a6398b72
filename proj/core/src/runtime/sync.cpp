#include "vrsm/runtime/sync.hpp"

#include <algorithm>

namespace vrsm {

void Notifier::WaitAwaiter::await_suspend(std::coroutine_handle<> h) {
  w_ = std::make_shared<Waiter>();
  w_->h = h;
  auto& ws = n_->waiters_;
  ws.erase(std::remove_if(ws.begin(), ws.end(), [](const auto& w) { return w->done; }), ws.end());
  ws.push_back(w_);
  if (timeout_) {
    n_->env_->call_after(*timeout_, [w = w_] {
      if (w->done) return;
      w->done = true;
      w->h.resume();
    });
  }
}

void Notifier::notify_all() {
  auto ws = std::move(waiters_);
  waiters_.clear();
  for (auto& w : ws) {
    if (w->done) continue;
    w->done = true;
    w->notified = true;
    env_->post(w->h);
  }
}

void AsyncMutex::release() {
  if (waiters_.empty()) {
    locked_ = false;
    return;
  }
  // Ownership passes directly to the next waiter.
  auto h = waiters_.front();
  waiters_.pop_front();
  env_->post(h);
}

}  // namespace vrsm
