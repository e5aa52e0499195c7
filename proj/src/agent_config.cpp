#include <algorithm>
#include <set>

#include "replayrec/agents.hpp"

namespace replayrec {

NetworkInput parse_network_input(std::string_view s) {
  if (s == "flat") return NetworkInput::kFlat;
  if (s == "per_slot") return NetworkInput::kPerSlot;
  throw ConfigError("unknown network input '" + std::string(s) + "'");
}

std::string_view to_string(NetworkInput n) {
  return n == NetworkInput::kFlat ? "flat" : "per_slot";
}

AgentConfig AgentConfig::defaults_for(std::string_view agent) {
  AgentConfig cfg;
  if (agent == "qtable") {
    cfg.learning_rate = 0.1;
    cfg.gamma = 0.9;
  } else if (agent == "reinforce") {
    cfg.learning_rate = 0.01;
    cfg.batch_size = 16;
  }
  return cfg;
}

void AgentConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("agent config: " + m); };
  if (!(learning_rate >= 0.0)) fail("learning_rate must be >= 0");
  if (!(gamma >= 0.0 && gamma <= 1.0)) fail("gamma must be in [0,1]");
  if (!(epsilon_start >= 0.0 && epsilon_start <= 1.0)) fail("epsilon_start");
  if (!(epsilon_end >= 0.0 && epsilon_end <= 1.0)) fail("epsilon_end");
  if (batch_size == 0) fail("batch_size must be positive");
  if (target_sync_interval == 0) fail("target_sync_interval must be positive");
  if (buffer_capacity < batch_size) fail("buffer_capacity < batch_size");
  if (train_every == 0) fail("train_every must be positive");
  if (!(grad_clip > 0.0)) fail("grad_clip must be positive");
  if (!(baseline_rate > 0.0 && baseline_rate <= 1.0)) fail("baseline_rate");
  for (auto h : hidden) {
    if (h == 0) fail("hidden layer of size 0");
  }
}

nlohmann::json AgentConfig::to_json() const {
  return {{"learning_rate", learning_rate},
          {"gamma", gamma},
          {"epsilon_start", epsilon_start},
          {"epsilon_end", epsilon_end},
          {"epsilon_decay_steps", epsilon_decay_steps},
          {"batch_size", batch_size},
          {"target_sync_interval", target_sync_interval},
          {"hidden", hidden},
          {"buffer_capacity", buffer_capacity},
          {"warmup_steps", warmup_steps},
          {"train_every", train_every},
          {"total_steps", total_steps},
          {"grad_clip", grad_clip},
          {"baseline_rate", baseline_rate},
          {"network", std::string(to_string(network))}};
}

AgentConfig AgentConfig::from_json(const nlohmann::json& j,
                                   const AgentConfig& base) {
  if (!j.is_object()) throw ConfigError("agent config must be an object");
  static const std::set<std::string> known{
      "learning_rate", "gamma",          "epsilon_start",
      "epsilon_end",   "epsilon_decay_steps", "batch_size",
      "target_sync_interval", "hidden",  "buffer_capacity",
      "warmup_steps",  "train_every",    "total_steps",
      "grad_clip",     "baseline_rate",  "network"};
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ConfigError("unknown agent config key '" + key + "'");
  }
  AgentConfig c = base;
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) j.at(key).get_to(field);
    };
    get("learning_rate", c.learning_rate);
    get("gamma", c.gamma);
    get("epsilon_start", c.epsilon_start);
    get("epsilon_end", c.epsilon_end);
    get("epsilon_decay_steps", c.epsilon_decay_steps);
    get("batch_size", c.batch_size);
    get("target_sync_interval", c.target_sync_interval);
    get("hidden", c.hidden);
    get("buffer_capacity", c.buffer_capacity);
    get("warmup_steps", c.warmup_steps);
    get("train_every", c.train_every);
    get("total_steps", c.total_steps);
    get("grad_clip", c.grad_clip);
    get("baseline_rate", c.baseline_rate);
    if (j.contains("network")) {
      c.network = parse_network_input(j.at("network").get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("agent config: ") + e.what());
  }
  c.validate();
  return c;
}

AgentConfig AgentConfig::from_json(const nlohmann::json& j) {
  return from_json(j, AgentConfig{});
}

double epsilon_at(const AgentConfig& cfg, std::size_t step) {
  const std::size_t decay =
      cfg.epsilon_decay_steps ? cfg.epsilon_decay_steps : cfg.total_steps / 2;
  if (decay == 0 || step >= decay) return cfg.epsilon_end;
  const double frac = static_cast<double>(step) / static_cast<double>(decay);
  return cfg.epsilon_start + frac * (cfg.epsilon_end - cfg.epsilon_start);
}

// ---------------------------------------------------------------------------

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("replay buffer capacity 0");
  items_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

void ReplayBuffer::push(Transition t) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
  } else {
    items_[next_] = std::move(t);
  }
  next_ = (next_ + 1) % capacity_;
}

std::vector<std::size_t> ReplayBuffer::sample(std::size_t batch,
                                              Rng& rng) const {
  if (batch > items_.size()) {
    throw std::invalid_argument("replay buffer holds fewer items than batch");
  }
  // Floyd's algorithm: distinct indices without materializing all of them.
  std::vector<std::size_t> out;
  out.reserve(batch);
  std::set<std::size_t> chosen;
  const std::size_t n = items_.size();
  for (std::size_t j = n - batch; j < n; ++j) {
    std::uniform_int_distribution<std::size_t> d(0, j);
    std::size_t t = d(rng);
    if (chosen.insert(t).second) {
      out.push_back(t);
    } else {
      chosen.insert(j);
      out.push_back(j);
    }
  }
  return out;
}

}  // namespace replayrec
