#pragma once

#include <functional>
#include <memory>
#include <optional>

#include "vrsm/sim/simulator.hpp"

namespace vrsm::testing {

// Points at a server object living in a simulated node's coroutine frame, and
// goes null when the node crashes and the frame is destroyed.
template <class T>
struct Slot {
  T* p = nullptr;
};

template <class T>
struct Holder {
  std::unique_ptr<T> obj;
  std::shared_ptr<Slot<T>> slot;
  Holder(std::unique_ptr<T> o, std::shared_ptr<Slot<T>> s) : obj(std::move(o)), slot(std::move(s)) { slot->p = obj.get(); }
  Holder(const Holder&) = delete;
  ~Holder() { slot->p = nullptr; }
};

template <class R>
Task<void> capture_result(std::function<Task<R>(Env&)> f, Env* env, std::shared_ptr<std::optional<R>> out) {
  R r = co_await f(*env);
  out->emplace(std::move(r));
}

// Runs f on node `id` and steps the simulation until it returns or `limit`
// of simulated time passes.
template <class R>
std::optional<R> run_on(sim::Simulator& s, sim::NodeId id, std::function<Task<R>(Env&)> f,
                        Nanos limit = std::chrono::seconds(30)) {
  auto out = std::make_shared<std::optional<R>>();
  s.node(id).spawn(capture_result<R>(std::move(f), &s.node(id), out));
  s.run(s.now() + static_cast<TimeNs>(to_ns(limit)), [&] { return out->has_value(); });
  return *out;
}

inline void run_for(sim::Simulator& s, Nanos d) { s.run(s.now() + static_cast<TimeNs>(to_ns(d))); }

}  // namespace vrsm::testing
