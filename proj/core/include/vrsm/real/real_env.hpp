#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <boost/asio/io_context.hpp>

#include "vrsm/runtime/env.hpp"

namespace vrsm::real {

// Files under one directory. append and write_atomic fsync before returning;
// write_atomic goes through a temporary file and rename.
class FileStore final : public DurableStore {
 public:
  explicit FileStore(std::filesystem::path dir);

  Task<std::optional<Bytes>> read(std::string name) override;
  Task<void> append(std::string name, Bytes data) override;
  Task<void> write_atomic(std::string name, Bytes data) override;

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path path_of(const std::string& name) const;
  std::filesystem::path dir_;
};

struct RealEnvOptions {
  std::string name = "node";
  std::filesystem::path data_dir = ".";
  Nanos epsilon = std::chrono::milliseconds(50);
  // 0 seeds from std::random_device.
  uint64_t seed = 0;
};

// A node on an Asio event loop. Several RealEnvs may share one io_context as
// long as it is run by a single thread. Addresses are "host:port"; messages
// travel as u32 little-endian length-prefixed frames over TCP.
class RealEnv final : public Env {
 public:
  RealEnv(boost::asio::io_context& io, RealEnvOptions opts);
  ~RealEnv() override;

  TimeRange time_range() override { return clock_.now(); }
  TimeNs monotonic_now() override;
  void post(std::coroutine_handle<> h) override;
  void call_after(Nanos delay, std::function<void()> fn) override;
  std::shared_ptr<Connection> connect(const Address& addr) override;
  std::shared_ptr<Listener> listen(const Address& addr) override;
  DurableStore& store() override { return store_; }
  std::mt19937_64& rng() override { return rng_; }
  Observer& observer() override { return observer_; }
  std::string_view name() const override { return opts_.name; }

  boost::asio::io_context& io() { return io_; }

  // Closes every socket and destroys all tasks. Pending callbacks become no-ops.
  void shutdown();
  // Messages of exceptions that escaped spawned tasks.
  const std::vector<std::string>& failures() const { return failures_; }

 protected:
  void schedule_start(std::coroutine_handle<> h) override { post(h); }
  void report_failure(std::exception_ptr e) override;

 private:
  boost::asio::io_context& io_;
  RealEnvOptions opts_;
  RealClock clock_;
  FileStore store_;
  std::mt19937_64 rng_;
  Observer observer_;
  std::shared_ptr<bool> alive_ = std::make_shared<bool>(true);
  std::vector<std::weak_ptr<Connection>> connections_;
  std::vector<std::weak_ptr<Listener>> listeners_;
  std::vector<std::string> failures_;
};

// Splits "host:port". Throws std::invalid_argument.
std::pair<std::string, uint16_t> split_host_port(const std::string& addr);

}  // namespace vrsm::real
