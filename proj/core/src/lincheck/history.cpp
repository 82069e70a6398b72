#include "vrsm/lincheck/history.hpp"

#include <nlohmann/json.hpp>

#include <sstream>
#include <stdexcept>

namespace vrsm {

std::string history_to_jsonl(const History& h) {
  std::string out;
  for (const auto& o : h) {
    nlohmann::json j;
    j["client"] = o.client;
    j["op"] = o.op;
    j["args"] = o.args;
    j["result"] = o.result;
    j["invoke"] = o.invoke;
    j["return"] = o.ret;
    j["completed"] = o.completed;
    out += j.dump();
    out += '\n';
  }
  return out;
}

History history_from_jsonl(std::string_view text) {
  History h;
  std::istringstream in{std::string(text)};
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    lineno++;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      Operation o;
      o.client = j.at("client").get<uint64_t>();
      o.op = j.at("op").get<std::string>();
      o.args = j.at("args").get<std::vector<std::string>>();
      o.result = j.value("result", std::string());
      o.invoke = j.at("invoke").get<uint64_t>();
      o.completed = j.value("completed", true);
      o.ret = o.completed ? j.at("return").get<uint64_t>() : j.value("return", uint64_t{0});
      if (o.completed && o.ret < o.invoke) throw std::runtime_error("return precedes invoke");
      h.push_back(std::move(o));
    } catch (const std::exception& e) {
      throw std::runtime_error("history line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return h;
}

size_t HistoryRecorder::invoke(uint64_t client, std::string op, std::vector<std::string> args) {
  std::lock_guard<std::mutex> lk(mu_);
  Operation o;
  o.client = client;
  o.op = std::move(op);
  o.args = std::move(args);
  o.invoke = clock_();
  ops_.push_back(std::move(o));
  return ops_.size() - 1;
}

void HistoryRecorder::complete(size_t id, std::string result) {
  std::lock_guard<std::mutex> lk(mu_);
  auto& o = ops_.at(id);
  o.result = std::move(result);
  o.ret = clock_();
  if (!o.completed) completed_++;
  o.completed = true;
}

History HistoryRecorder::snapshot() const {
  std::lock_guard<std::mutex> lk(mu_);
  return ops_;
}

size_t HistoryRecorder::size() const {
  std::lock_guard<std::mutex> lk(mu_);
  return ops_.size();
}

size_t HistoryRecorder::completed() const {
  std::lock_guard<std::mutex> lk(mu_);
  return completed_;
}

}  // namespace vrsm
