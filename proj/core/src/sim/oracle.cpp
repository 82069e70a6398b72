#include "vrsm/sim/oracle.hpp"

#include <fmt/format.h>

#include "vrsm/apps/cachekv.hpp"
#include "vrsm/exactlyonce/exactlyonce.hpp"
#include "vrsm/kv/kv_machine.hpp"

namespace vrsm::sim {

class GlobalOracle::NodeObserver final : public Observer {
 public:
  NodeObserver(GlobalOracle& o, NodeId n) : o_(o), n_(n) {}

  void primary_applied(uint32_t s, uint64_t e, uint64_t i, BytesView op) override {
    o_.on_primary_applied(n_, s, e, i, op);
  }
  void backup_accepted(uint32_t s, uint64_t e, uint64_t i, BytesView op) override {
    o_.on_backup_accepted(n_, s, e, i, op);
  }
  void backup_acked(uint32_t s, uint64_t e, uint64_t i) override { o_.on_backup_acked(n_, s, e, i); }
  void committed(uint32_t s, uint64_t e, uint64_t c) override { o_.on_committed(n_, s, e, c); }
  void sealed(uint32_t s, uint64_t e, uint64_t ne, uint64_t next) override { o_.on_sealed(n_, s, e, ne, next); }
  void entered_epoch(uint32_t s, uint64_t e, uint64_t next) override { o_.on_entered_epoch(n_, s, e, next); }
  void replica_recovered(uint32_t s, uint64_t e, uint64_t next, bool sealed) override {
    o_.on_replica_recovered(n_, s, e, next, sealed);
  }
  void lease_read(uint32_t s, uint64_t e) override { o_.on_lease_read(n_, s, e); }
  void lease_read_done(uint32_t s, uint64_t e) override { o_.on_lease_read_done(n_, s, e); }
  void paxos_accepted(uint32_t g, uint64_t e, uint64_t i, BytesView blob) override {
    o_.on_paxos_accepted(n_, g, e, i, blob);
  }
  void paxos_acked(uint32_t g, bool promise, uint64_t e, uint64_t i) override {
    o_.on_paxos_acked(n_, g, promise, e, i);
  }
  void paxos_recovered(uint32_t g, uint64_t p, uint64_t ae, uint64_t ai) override {
    o_.on_paxos_recovered(n_, g, p, ae, ai);
  }
  void log_appended(std::string_view f, uint64_t e, uint64_t i, BytesView r) override {
    o_.on_log_appended(n_, f, e, i, r);
  }
  void log_acked(std::string_view f, uint64_t e, uint64_t c) override { o_.on_log_acked(n_, f, e, c); }
  void log_installed(std::string_view f, uint64_t e) override { o_.on_log_installed(n_, f, e); }
  void log_recovered(std::string_view f, uint64_t e, const std::vector<Bytes>& r) override {
    o_.on_log_recovered(n_, f, e, r);
  }

 private:
  GlobalOracle& o_;
  NodeId n_;
};

GlobalOracle::GlobalOracle(Simulator& sim) : sim_(sim) {}

GlobalOracle::~GlobalOracle() = default;

void GlobalOracle::attach() {
  sim_.set_observer_factory([this](NodeId n) { return std::make_unique<NodeObserver>(*this, n); });
}

void GlobalOracle::add_service(uint32_t id, size_t paxos_servers, const std::vector<Address>& initial_config) {
  Service& s = services_[id];
  s.majority = paxos_servers / 2 + 1;
  s.live = 1;
  s.live_configs[1] = initial_config;
  s.live_epochs.insert(1);
  s.epoch_start[1] = 0;
}

void GlobalOracle::add_paxos_group(uint32_t group, size_t servers) {
  Service& s = services_[group];
  s.majority = servers / 2 + 1;
  s.config_values = false;
}

void GlobalOracle::set_shadow(uint32_t id, VsmFactory factory) {
  Service& s = services_[id];
  s.shadow_factory = std::move(factory);
  s.shadow = s.shadow_factory();
  for (size_t i = 0; i < s.committed.size(); i++) replay(s, id, i);
}

void GlobalOracle::watch_cache(uint32_t id) { services_[id].cache = true; }
void GlobalOracle::watch_locks(uint32_t id) { services_[id].locks = true; }

const std::vector<Bytes>& GlobalOracle::committed_log(uint32_t id) const {
  static const std::vector<Bytes> empty;
  auto it = services_.find(id);
  return it == services_.end() ? empty : it->second.committed;
}

uint64_t GlobalOracle::live_epoch(uint32_t id) const {
  auto it = services_.find(id);
  return it == services_.end() ? 0 : it->second.live;
}

std::vector<Address> GlobalOracle::live_config(uint32_t id) const {
  auto it = services_.find(id);
  if (it == services_.end()) return {};
  auto c = it->second.live_configs.find(it->second.live);
  return c == it->second.live_configs.end() ? std::vector<Address>{} : c->second;
}

size_t GlobalOracle::chosen_count(uint32_t group) const {
  auto it = services_.find(group);
  return it == services_.end() ? 0 : it->second.chosen.size();
}

void GlobalOracle::violation(std::string msg) {
  if (violations_.empty()) first_violation_event_ = sim_.events_run();
  std::string line = fmt::format("event {} t={}: {}", sim_.events_run(), sim_.now(), msg);
  sim_.log().record(sim_.now(), "violation", -1, violations_.size());
  violations_.push_back(std::move(line));
}

GlobalOracle::Service* GlobalOracle::service(uint32_t id) {
  auto it = services_.find(id);
  return it == services_.end() ? nullptr : &it->second;
}

// Replicated state machine ------------------------------------------------

void GlobalOracle::on_primary_applied(NodeId n, uint32_t s, uint64_t epoch, uint64_t index, BytesView op) {
  Service* svc = service(s);
  if (!svc) return;
  auto it = svc->logs.find(epoch);
  if (it == svc->logs.end()) {
    violation(fmt::format("service {}: node {} applied as primary in epoch {} it never entered", s, n, epoch));
    return;
  }
  auto& log = it->second;
  if (index != log.size()) {
    violation(fmt::format("service {} epoch {}: primary applied index {} but the epoch log has {} entries", s,
                          epoch, index, log.size()));
    return;
  }
  log.push_back(LogEntry{Bytes(op), sim_.now()});
}

void GlobalOracle::on_backup_accepted(NodeId n, uint32_t s, uint64_t epoch, uint64_t index, BytesView op) {
  Service* svc = service(s);
  if (!svc) return;
  auto it = svc->logs.find(epoch);
  if (it == svc->logs.end() || index >= it->second.size() || it->second[index].op != op) {
    violation(fmt::format("service {} epoch {}: backup node {} accepted index {} that differs from the primary's",
                          s, epoch, n, index));
  }
}

void GlobalOracle::on_backup_acked(NodeId n, uint32_t s, uint64_t epoch, uint64_t index) {
  auto& a = acks_[n].backup_acked[s];
  a = std::max(a, std::make_pair(epoch, index + 1));
}

void GlobalOracle::on_committed(NodeId n, uint32_t s, uint64_t epoch, uint64_t committed_next) {
  Service* svc = service(s);
  if (!svc) return;
  extend_committed(*svc, s, epoch, committed_next);
}

void GlobalOracle::extend_committed(Service& svc, uint32_t s, uint64_t epoch, uint64_t committed_next) {
  auto it = svc.logs.find(epoch);
  if (it == svc.logs.end() || committed_next > it->second.size()) {
    violation(fmt::format("service {} epoch {}: commit index {} beyond the epoch log", s, epoch, committed_next));
    return;
  }
  const auto& log = it->second;
  for (uint64_t i = 0; i < committed_next; i++) {
    if (i < svc.committed.size()) {
      if (svc.committed[i] != log[i].op) {
        violation(fmt::format("service {}: committed index {} changed in epoch {}", s, i, epoch));
        return;
      }
      continue;
    }
    svc.committed.push_back(log[i].op);
    svc.committed_applied_at.push_back(log[i].applied_at);
    stats_.committed_ops++;
    replay(svc, s, i);
  }
  for (uint64_t e : svc.live_epochs) {
    if (e <= epoch) continue;
    uint64_t start = svc.epoch_start.count(e) ? svc.epoch_start[e] : 0;
    if (committed_next > start) {
      violation(fmt::format("service {}: epoch {} committed up to {} but live epoch {} started from {} (lost op)", s,
                            epoch, committed_next, e, start));
    }
  }
}

void GlobalOracle::replay(Service& svc, uint32_t s, size_t index) {
  if (!svc.shadow) return;
  const Bytes& op = svc.committed[index];
  std::optional<Bytes> key;
  Bytes before;
  auto* eo = dynamic_cast<ExactlyOnceMachine*>(svc.shadow.get());
  auto* kv = eo ? dynamic_cast<KvMachine*>(&eo->inner()) : nullptr;
  if (kv) {
    auto env = decode_envelope(op);
    auto kop = env ? decode_kv_op(env->payload) : std::nullopt;
    if (kop && kop->tag != KvTag::kGet) {
      key = kop->key;
      auto it = kv->values().find(*key);
      if (it != kv->values().end()) before = it->second;
    }
  }
  svc.shadow->apply(op, index);
  if (!key) return;
  Bytes after;
  auto it = kv->values().find(*key);
  if (it != kv->values().end()) after = it->second;

  if (svc.locks && before != after) {
    if (!before.empty() && !after.empty()) {
      violation(fmt::format("service {}: lock '{}' passed from owner {} to {} without release", s, *key, before,
                            after));
    }
    if (before.empty()) stats_.lock_acquisitions++;
  }
  if (svc.cache && before != after) {
    auto b = decode_lease_value(before);
    auto a = decode_lease_value(after);
    if (!a || !b) {
      violation(fmt::format("service {}: undecodable cache entry for '{}'", s, *key));
      return;
    }
    if (a->lease_expiration < b->lease_expiration) {
      violation(fmt::format("service {}: lease on '{}' shrank from {} to {}", s, *key, b->lease_expiration,
                            a->lease_expiration));
    }
    if (a->value != b->value) {
      stats_.cache_value_changes++;
      TimeNs at = svc.committed_applied_at[index];
      if (at < b->lease_expiration) {
        violation(fmt::format("service {}: value of '{}' changed at t={} inside a cache lease ending at {}", s,
                              *key, at, b->lease_expiration));
      }
    }
  }
}

void GlobalOracle::on_sealed(NodeId n, uint32_t s, uint64_t epoch, uint64_t new_epoch, uint64_t next_index) {
  auto& a = acks_[n].sealed[s];
  a = std::max(a, std::make_pair(epoch, uint64_t{1}));
  Service* svc = service(s);
  if (!svc) return;
  auto it = svc->logs.find(epoch);
  if (it == svc->logs.end() || it->second.size() < next_index) {
    violation(fmt::format("service {}: node {} sealed epoch {} at {} beyond the epoch log", s, n, epoch, next_index));
    return;
  }
  svc->seals[{new_epoch, next_index}] = epoch;
}

void GlobalOracle::on_entered_epoch(NodeId n, uint32_t s, uint64_t epoch, uint64_t next_index) {
  auto& a = acks_[n].backup_acked[s];
  a = std::max(a, std::make_pair(epoch, next_index));
  Service* svc = service(s);
  if (!svc) return;
  std::vector<LogEntry> inherited;
  if (epoch != 1 || next_index != 0) {
    auto seal = svc->seals.find({epoch, next_index});
    if (seal == svc->seals.end()) {
      violation(fmt::format("service {}: node {} entered epoch {} at {} from no sealed state", s, n, epoch,
                            next_index));
      return;
    }
    const auto& src = svc->logs[seal->second];
    inherited.assign(src.begin(), src.begin() + static_cast<ptrdiff_t>(next_index));
  }
  auto it = svc->logs.find(epoch);
  if (it == svc->logs.end()) {
    svc->logs[epoch] = std::move(inherited);
    svc->epoch_start[epoch] = next_index;
    return;
  }
  if (svc->epoch_start[epoch] != next_index) {
    violation(fmt::format("service {}: epoch {} entered with two different states", s, epoch));
  }
}

void GlobalOracle::on_replica_recovered(NodeId n, uint32_t s, uint64_t epoch, uint64_t next_index, bool sealed) {
  stats_.recoveries_checked++;
  auto& node = acks_[n];
  if (auto it = node.backup_acked.find(s); it != node.backup_acked.end()) {
    if (std::make_pair(epoch, next_index) < it->second) {
      violation(fmt::format("service {}: node {} recovered at epoch {} index {} after acknowledging epoch {} index {}",
                            s, n, epoch, next_index, it->second.first, it->second.second));
    }
  }
  if (auto it = node.sealed.find(s); it != node.sealed.end()) {
    if (epoch == it->second.first && !sealed) {
      violation(fmt::format("service {}: node {} lost its seal of epoch {}", s, n, epoch));
    }
  }
}

void GlobalOracle::on_lease_read(NodeId n, uint32_t s, uint64_t epoch) {
  stats_.lease_reads++;
  Service* svc = service(s);
  if (!svc) return;
  if (svc->live != epoch) {
    violation(fmt::format("service {}: node {} served a lease read in epoch {} while epoch {} is live", s, n, epoch,
                          svc->live));
  }
}

void GlobalOracle::on_lease_read_done(NodeId, uint32_t s, uint64_t epoch) {
  Service* svc = service(s);
  if (svc && svc->live != epoch) stats_.reads_outliving_epoch++;
}

// Paxos ---------------------------------------------------------------------

void GlobalOracle::on_paxos_accepted(NodeId n, uint32_t g, uint64_t epoch, uint64_t index, BytesView blob) {
  Service* svc = service(g);
  if (!svc) return;
  auto key = std::make_tuple(epoch, index);
  auto [pit, fresh] = svc->proposals.try_emplace(key, Bytes(blob));
  if (!fresh && pit->second != blob) {
    violation(fmt::format("group {}: two different proposals for epoch {} index {}", g, epoch, index));
    return;
  }
  auto& who = svc->accepts[key];
  who.insert(n);
  if (who.size() >= svc->majority) chosen(*svc, g, index, pit->second);
}

void GlobalOracle::chosen(Service& svc, uint32_t g, uint64_t index, const Bytes& blob) {
  auto [it, fresh] = svc.chosen.try_emplace(index, blob);
  if (!fresh) {
    if (it->second != blob) violation(fmt::format("group {}: two different values chosen at index {}", g, index));
    return;
  }
  stats_.chosen_values++;
  if (!svc.config_values) return;
  auto cs = decode_config_state(blob);
  if (!cs) {
    violation(fmt::format("group {}: undecodable chosen value at index {}", g, index));
    return;
  }
  auto [cit, new_epoch] = svc.live_configs.try_emplace(cs->live_epoch, cs->config);
  if (!new_epoch && cit->second != cs->config) {
    violation(fmt::format("group {}: epoch {} has two configurations", g, cs->live_epoch));
  }
  TimeNs& lease = svc.lease_max[cs->live_epoch];
  lease = std::max(lease, cs->lease_expiration);
  if (index <= svc.highest_chosen) return;
  svc.highest_chosen = index;
  if (cs->live_epoch == svc.live) return;

  TimeNs now = sim_.now();
  TimeNs prior = svc.lease_max[svc.live];
  if (now < prior) {
    violation(fmt::format("group {}: live epoch {} -> {} at t={} before the lease expiring at {}", g, svc.live,
                          cs->live_epoch, now, prior));
  }
  if (cs->live_epoch < svc.live) {
    violation(fmt::format("group {}: live epoch went back from {} to {}", g, svc.live, cs->live_epoch));
  }
  stats_.live_transitions++;
  uint64_t e = cs->live_epoch;
  auto start = svc.epoch_start.find(e);
  if (start == svc.epoch_start.end()) {
    violation(fmt::format("group {}: epoch {} became live before any server entered it", g, e));
  } else {
    const auto& log = svc.logs[e];
    if (svc.committed.size() > start->second) {
      violation(fmt::format("group {}: epoch {} went live from index {} but {} ops were committed (lost op)", g, e,
                            start->second, svc.committed.size()));
    }
    for (size_t i = 0; i < svc.committed.size() && i < log.size(); i++) {
      if (svc.committed[i] != log[i].op) {
        violation(fmt::format("group {}: epoch {} went live with a different op at committed index {}", g, e, i));
        break;
      }
    }
  }
  svc.live = e;
  svc.live_epochs.insert(e);
}

void GlobalOracle::on_paxos_acked(NodeId n, uint32_t g, bool promise, uint64_t epoch, uint64_t index) {
  auto& node = acks_[n];
  auto& p = node.paxos_promised[g];
  p = std::max(p, epoch);
  if (!promise) {
    auto& a = node.paxos_accepted[g];
    a = std::max(a, std::make_pair(epoch, index));
  }
}

void GlobalOracle::on_paxos_recovered(NodeId n, uint32_t g, uint64_t promised, uint64_t acc_epoch,
                                      uint64_t acc_index) {
  stats_.recoveries_checked++;
  auto& node = acks_[n];
  if (auto it = node.paxos_promised.find(g); it != node.paxos_promised.end() && promised < it->second) {
    violation(fmt::format("group {}: acceptor {} recovered promise {} after promising {}", g, n, promised,
                          it->second));
  }
  if (auto it = node.paxos_accepted.find(g);
      it != node.paxos_accepted.end() && std::make_pair(acc_epoch, acc_index) < it->second) {
    violation(fmt::format("group {}: acceptor {} recovered acceptance ({}, {}) after acknowledging ({}, {})", g, n,
                          acc_epoch, acc_index, it->second.first, it->second.second));
  }
}

// State logger ----------------------------------------------------------------

void GlobalOracle::on_log_appended(NodeId n, std::string_view file, uint64_t epoch, uint64_t index,
                                   BytesView record) {
  auto& node = acks_[n];
  std::string f(file);
  if (node.log_epoch[f] != epoch) {
    node.log_epoch[f] = epoch;
    node.log_appended[f].clear();
  }
  auto& recs = node.log_appended[f];
  if (recs.size() <= index) recs.resize(index + 1);
  recs[index] = Bytes(record);
}

void GlobalOracle::on_log_acked(NodeId n, std::string_view file, uint64_t epoch, uint64_t count) {
  auto& a = acks_[n].log_acked[std::string(file)];
  a = std::max(a, std::make_pair(epoch, count));
}

void GlobalOracle::on_log_installed(NodeId n, std::string_view file, uint64_t epoch) {
  auto& node = acks_[n];
  std::string f(file);
  node.log_epoch[f] = epoch;
  node.log_appended[f].clear();
  auto& a = node.log_acked[f];
  a = std::max(a, std::make_pair(epoch, uint64_t{0}));
}

void GlobalOracle::on_log_recovered(NodeId n, std::string_view file, uint64_t epoch,
                                    const std::vector<Bytes>& records) {
  stats_.recoveries_checked++;
  auto& node = acks_[n];
  std::string f(file);
  if (auto it = node.log_acked.find(f); it != node.log_acked.end()) {
    auto [ae, count] = it->second;
    if (std::make_pair(epoch, static_cast<uint64_t>(records.size())) < it->second) {
      violation(fmt::format("node {} file {}: recovered epoch {} with {} records after acknowledging epoch {} with {}",
                            n, f, epoch, records.size(), ae, count));
    } else if (epoch == ae) {
      const auto& appended = node.log_appended[f];
      for (uint64_t i = 0; i < count && i < appended.size(); i++) {
        if (records[i] != appended[i]) {
          violation(fmt::format("node {} file {}: acknowledged record {} recovered with different contents", n, f, i));
          break;
        }
      }
    }
  }
  node.log_epoch[f] = epoch;
  node.log_appended[f] = records;
}

}  // namespace vrsm::sim
