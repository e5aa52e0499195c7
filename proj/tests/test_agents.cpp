#include <cmath>
#include <set>
#include <numeric>

#include "doctest.h"
#include "fixtures.hpp"
#include "replayrec/agents.hpp"

using namespace replayrec;

namespace {

std::vector<std::vector<std::pair<int, int>>> uniform_sessions(int count, int len, Rng& rng) {
  std::vector<std::vector<std::pair<int, int>>> s;
  for (int i = 0; i < count; ++i)
    s.push_back({{static_cast<int>(rng() % static_cast<unsigned>(len)), len}});
  return s;
}

double mean(const std::vector<double>& v, std::size_t from, std::size_t to) {
  return std::accumulate(v.begin() + static_cast<long>(from), v.begin() + static_cast<long>(to), 0.0) /
         static_cast<double>(to - from);
}

double sd_of_mean(const std::vector<double>& v, std::size_t from, std::size_t to) {
  const double m = mean(v, from, to);
  double ss = 0;
  for (std::size_t i = from; i < to; ++i) ss += (v[i] - m) * (v[i] - m);
  const double n = static_cast<double>(to - from);
  return std::sqrt(ss / (n - 1) / n);
}

}  // namespace

TEST_CASE("agent config defaults and validation") {
  AgentConfig c;
  CHECK(c.hidden == std::vector<std::size_t>{256, 128});
  CHECK(c.grad_clip == 10.0);
  CHECK(c.epsilon_start == 1.0);
  CHECK(c.epsilon_end == 0.05);
  auto q = AgentConfig::defaults_for("qtable");
  CHECK(q.learning_rate == 0.1);
  CHECK(q.gamma == 0.9);
  AgentConfig bad;
  bad.gamma = 1.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = {};
  bad.epsilon_end = -0.1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK_THROWS_AS(AgentConfig::from_json({{"learning_rat", 0.1}}), ConfigError);
  auto j = AgentConfig::from_json({{"hidden", {8}}, {"network", "per_slot"}});
  CHECK(j.hidden == std::vector<std::size_t>{8});
  CHECK(j.network == NetworkInput::kPerSlot);
  CHECK(AgentConfig::from_json(j.to_json()).to_json() == j.to_json());
}

TEST_CASE("epsilon decays linearly over half the budget") {
  AgentConfig c;
  c.total_steps = 1000;
  CHECK(epsilon_at(c, 0) == 1.0);
  CHECK(epsilon_at(c, 250) == doctest::Approx(0.525));
  CHECK(epsilon_at(c, 500) == 0.05);
  CHECK(epsilon_at(c, 999) == 0.05);
}

TEST_CASE("replay buffer keeps the newest items") {
  ReplayBuffer b(3);
  for (int i = 0; i < 5; ++i) {
    Transition t;
    t.reward = i;
    b.push(t);
  }
  CHECK(b.size() == 3);
  std::vector<double> r;
  for (std::size_t i = 0; i < b.size(); ++i) r.push_back(b.at(i).reward);
  std::sort(r.begin(), r.end());
  CHECK(r == std::vector<double>{2, 3, 4});
}

TEST_CASE("replay buffer samples distinct indices uniformly") {
  ReplayBuffer b(10);
  for (int i = 0; i < 10; ++i) b.push({});
  Rng rng(1);
  std::vector<int> hits(10, 0);
  for (int t = 0; t < 5000; ++t) {
    auto idx = b.sample(4, rng);
    std::set<std::size_t> u(idx.begin(), idx.end());
    CHECK(u.size() == 4);
    for (auto i : idx) ++hits[i];
  }
  // Each index is in a batch with probability 0.4.
  for (int h : hits) CHECK(std::abs(h - 2000) < 3 * std::sqrt(5000 * 0.4 * 0.6));
  CHECK_THROWS(b.sample(11, rng));
}

TEST_CASE("slot ordering helpers") {
  Eigen::VectorXd s(5);
  s << 0.1, 0.9, 0.9, 0.5, 2.0;
  CHECK(argmax_slot(s, 4) == 1);
  CHECK(argmax_slot(s, 5) == 4);
  CHECK(sort_slots(s, 4) == std::vector<std::size_t>{1, 2, 3, 0});
}

TEST_CASE("popularity order") {
  auto cat = std::make_shared<ItemCatalog>(fixture::catalog(
      {"x"}, {{"a", {0}}, {"b", {0}}, {"c", {0}}}));
  std::vector<Session> sessions;
  auto add_clicks = [&](const std::string& id, int n) {
    for (int i = 0; i < n; ++i) {
      Session s;
      s.events.push_back(fixture::clickout(id, {"a", "b", "c"}));
      sessions.push_back(s);
    }
  };
  add_clicks("a", 5);
  add_clicks("b", 9);
  add_clicks("c", 1);
  const_cast<ItemCatalog&>(*cat).fill_from_sessions(sessions);
  PopularityAgent pop(cat, ActionForm::kRankedList);
  std::vector<std::string> cands{"a", "b", "c"};
  CHECK(pop.rank(cands) == std::vector<std::size_t>{1, 0, 2});
  CHECK_THROWS_AS(PopularityAgent(cat, ActionForm::kPreference), ConfigError);
}

TEST_CASE("user cosine neighbours") {
  UserCosineModel m;
  for (auto item : {"a", "b"}) m.add_interaction("u1", item);
  for (auto item : {"a", "b", "c"}) m.add_interaction("u2", item);
  m.add_interaction("u3", "d");
  std::vector<std::string> cands{"d", "c"};
  auto s = m.scores({"a", "b"}, cands, "u1");
  REQUIRE(s);
  // cos(u1, u2) = 2 / sqrt(2 * 3); u3 shares nothing.
  CHECK((*s)[1] == doctest::Approx(2 / std::sqrt(6.0)));
  CHECK((*s)[0] == 0.0);
  CHECK_FALSE(m.scores({"zzz"}, cands, "u1"));
}

TEST_CASE("cf agent ranks the neighbour's extra item first and falls back") {
  auto cat = std::make_shared<ItemCatalog>(fixture::catalog(
      {"x"}, {{"a", {0}}, {"b", {0}}, {"c", {0}}, {"d", {0}}}));
  UserCosineModel m;
  for (auto item : {"a", "b"}) m.add_interaction("u1", item);
  for (auto item : {"a", "b", "c"}) m.add_interaction("u2", item);
  m.add_interaction("u3", "d");
  CfAgent cf(m, cat);
  EnvState st;
  st.user_id = "u1";
  st.impressions = {"d", "c", "a"};
  st.memory.set(0, 2);  // the session just looked at "a"
  Rng rng(1);
  auto a = std::get<RankedList>(cf.act(st, rng));
  CHECK(a.order.front() == 1);
  CHECK(cf.fallbacks() == 0);
  EnvState cold = st;
  cold.memory = {};
  cf.act(cold, rng);
  CHECK(cf.fallbacks() == 1);
}

TEST_CASE("random agent actions are well formed") {
  Rng rng(2);
  EnvState st;
  st.feature_dim = 4;
  st.impressions = fixture::slots(0, 9);
  RandomAgent r(ActionForm::kRankedList), p(ActionForm::kPreference);
  for (int t = 0; t < 50; ++t) {
    auto o = std::get<RankedList>(r.act(st, rng)).order;
    std::sort(o.begin(), o.end());
    std::vector<std::size_t> id(9);
    std::iota(id.begin(), id.end(), 0);
    CHECK(o == id);
    CHECK(std::get<Preference>(p.act(st, rng)).weights.size() == 4);
  }
}

TEST_CASE("zero epsilon acting is deterministic") {
  Rng init(3);
  SlotScorer q(NetworkInput::kFlat, 4, 0, {8}, init);
  DqnAgent agent(q, 0.0);
  EnvState st;
  st.feature_dim = 4;
  st.impressions = fixture::slots(0, 25);
  st.flat.assign(q.state_size(), 0.3);
  Rng a(1), b(99);
  for (int t = 0; t < 10; ++t)
    CHECK(std::get<SingleItem>(agent.act(st, a)).slot ==
          std::get<SingleItem>(agent.act(st, b)).slot);
}

TEST_CASE("per-slot scorer applies one net to each slot") {
  Rng rng(4);
  SlotScorer s(NetworkInput::kPerSlot, 3, 2, {5}, rng);
  std::vector<double> flat(s.state_size(), 0.0);
  // Two slots with identical features score equally.
  const std::size_t cand = 20 * 25;
  for (std::size_t k = 0; k < 3; ++k) {
    flat[cand + 0 * 3 + k] = 0.5;
    flat[cand + 7 * 3 + k] = 0.5;
  }
  auto sc = s.scores(flat);
  CHECK(sc.size() == 25);
  CHECK(sc(0) == doctest::Approx(sc(7)));
  auto back = SlotScorer::from_json(s.to_json());
  CHECK((back.scores(flat) - sc).norm() < 1e-12);
}

TEST_CASE("plackett-luce gradient matches finite differences") {
  Rng rng(5);
  std::normal_distribution<double> n(0, 1);
  for (int t = 0; t < 20; ++t) {
    Eigen::VectorXd s(6);
    for (auto& v : s) v = n(rng);
    auto order = sample_ranking(s, 6, rng);
    const std::size_t prefix = 1 + static_cast<std::size_t>(t % 6);
    auto g = plackett_luce_log_prob_grad(s, order, prefix);
    for (Eigen::Index k = 0; k < 6; ++k) {
      Eigen::VectorXd up = s, down = s;
      up(k) += 1e-6;
      down(k) -= 1e-6;
      const double num = (plackett_luce_log_prob(up, order, prefix) -
                          plackett_luce_log_prob(down, order, prefix)) / 2e-6;
      CHECK(g(k) == doctest::Approx(num).epsilon(1e-5));
    }
  }
}

TEST_CASE("sampled rankings follow the softmax at the top") {
  Eigen::VectorXd s(3);
  s << 0.0, 1.0, std::log(3.0);
  const double z = 1 + std::exp(1.0) + 3;
  Rng rng(6);
  std::vector<int> first(3, 0);
  const int trials = 30000;
  for (int t = 0; t < trials; ++t) ++first[sample_ranking(s, 3, rng)[0]];
  for (int k = 0; k < 3; ++k) {
    const double p = std::exp(s(k)) / z;
    CHECK(std::abs(first[static_cast<std::size_t>(k)] - trials * p) <
          4 * std::sqrt(trials * p * (1 - p)));
  }
}

TEST_CASE("score-function gradient has zero mean") {
  // With a constant reward, (r - b) * grad log pi averages to zero whatever b is.
  Eigen::VectorXd s(4);
  s << 0.3, -0.2, 1.0, 0.0;
  Rng rng(7);
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(4);
  const int trials = 40000;
  for (int t = 0; t < trials; ++t)
    acc += plackett_luce_log_prob_grad(s, sample_ranking(s, 4, rng), 4);
  acc /= trials;
  CHECK(acc.cwiseAbs().maxCoeff() < 0.03);
}

TEST_CASE("dqn with gamma zero learns a two-slot bandit") {
  // Slot 0 is clicked 70% of the time; no history hints at the answer.
  Rng gen(8);
  std::vector<std::vector<std::pair<int, int>>> s;
  for (int i = 0; i < 200; ++i) s.push_back({{gen() % 10 < 7 ? 0 : 1, 2}});
  auto ds = fixture::replay_dataset(s, false);
  ReplayEnvironment env(ds, 0.5, 1);
  AgentConfig cfg;
  cfg.gamma = 0;
  cfg.hidden = {8};
  cfg.learning_rate = 0.02;
  cfg.total_steps = 6000;
  cfg.warmup_steps = 100;
  Rng rng(9);
  auto tr = dqn_train(env, cfg, rng);
  auto st = env.reset();
  auto q = tr.online.scores(st.flat);
  CHECK(argmax_slot(q, 2) == 0);
  CHECK(q(0) == doctest::Approx(0.7).epsilon(0.15));
  CHECK(q(1) == doctest::Approx(0.3).epsilon(0.15));
}

TEST_CASE("dqn with epsilon one behaves like random") {
  Rng gen(10);
  auto ds = fixture::replay_dataset(uniform_sessions(300, 25, gen), false);
  ReplayEnvironment env(ds, 0.5, 2);
  AgentConfig cfg;
  cfg.epsilon_start = cfg.epsilon_end = 1.0;
  cfg.hidden = {4};
  cfg.total_steps = 20000;
  cfg.train_every = 50;
  Rng rng(11);
  auto tr = dqn_train(env, cfg, rng);
  auto r = tr.rewards.values();
  const double m = mean(r, 0, r.size());
  CHECK(std::abs(m - 0.04) < 3 * std::sqrt(0.04 * 0.96 / static_cast<double>(r.size())));
}

TEST_CASE("dqn target network changes only at syncs") {
  Rng gen(12);
  auto ds = fixture::replay_dataset(uniform_sessions(50, 5, gen));
  AgentConfig cfg;
  cfg.hidden = {4};
  cfg.total_steps = 400;
  cfg.warmup_steps = 32;
  cfg.target_sync_interval = 1000;
  {
    ReplayEnvironment env(ds, 0.5, 1);
    Rng rng(13);
    auto tr = dqn_train(env, cfg, rng);
    CHECK(tr.target_sync_steps.empty());
    Rng again(13);
    SlotScorer init(cfg.network, env.feature_dim(), ds->vocab.size(), cfg.hidden, again);
    CHECK(tr.target.net() == init.net());
    CHECK_FALSE(tr.online.net() == init.net());
  }
  {
    cfg.target_sync_interval = 1;
    ReplayEnvironment env(ds, 0.5, 1);
    Rng rng(13);
    auto tr = dqn_train(env, cfg, rng);
    CHECK(tr.target_sync_steps.size() == tr.updates);
    CHECK(tr.target.net() == tr.online.net());
  }
}

TEST_CASE("reinforce with zero learning rate stays flat") {
  Rng gen(14);
  auto ds = fixture::replay_dataset(uniform_sessions(300, 25, gen), false);
  ReplayEnvironment env(ds, 0.5, 3);
  auto cfg = AgentConfig::defaults_for("reinforce");
  cfg.learning_rate = 0;
  cfg.hidden = {8};
  cfg.total_steps = 10000;
  Rng rng(15);
  auto init_rng = rng;
  auto tr = reinforce_train(env, cfg, rng);
  SlotScorer init(cfg.network, env.feature_dim(), ds->vocab.size(), cfg.hidden, init_rng);
  CHECK(tr.policy.net() == init.net());
  auto r = tr.rewards.values();
  const std::size_t h = r.size() / 2;
  const double diff = mean(r, h, r.size()) - mean(r, 0, h);
  const double sd = std::hypot(sd_of_mean(r, 0, h), sd_of_mean(r, h, r.size()));
  CHECK(std::abs(diff) < 3 * sd);
}

TEST_CASE("tabular q-learning on the replay env") {
  // The clicked item is always the one looked at just before.
  Rng gen(16);
  auto ds = fixture::replay_dataset(uniform_sessions(200, 6, gen), true);
  ReplayEnvironment env(ds, 0.5, 4);
  auto cfg = AgentConfig::defaults_for("qtable");
  cfg.total_steps = 8000;
  Rng rng(17);
  auto tr = qtable_train(env, cfg, rng);
  QTableAgent agent(tr.table);
  Rng eval(18);
  auto res = evaluate(env, agent, 500, Metric::kCtr, eval);
  CHECK(res.mean > 0.95);
  CHECK(QTable::from_json(tr.table.to_json()) == tr.table);
}

TEST_CASE("q table reads missing entries as zero") {
  QTable q(4);
  CHECK(q.get(7, 2) == 0.0);
  CHECK(q.row(7).empty());
  q.set(7, 2, 1.5);
  CHECK(q.get(7, 2) == 1.5);
  CHECK(q.row(7).size() == 4);
  CHECK(q.states() == 1);
}

TEST_CASE("model files round trip") {
  Rng rng(19);
  SlotScorer s(NetworkInput::kFlat, 3, 1, {4}, rng);
  auto m = model_from_json(model_to_json("dqn", s));
  CHECK(m->name() == "dqn");
  CHECK(model_from_json(model_to_json("reinforce", s))->form() == ActionForm::kRankedList);
  QTable q(25);
  q.set(1, 3, 2.0);
  CHECK(model_from_json(model_to_json(q))->name() == "qtable");
  CHECK_THROWS(model_from_json({{"format", "other"}}));
}
