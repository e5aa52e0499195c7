#include "replayrec/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "replayrec/csv.hpp"

namespace replayrec {

namespace fs = std::filesystem;

namespace {

const std::set<std::string> kAgents{"random", "popularity", "cf",
                                    "dqn",    "reinforce",  "qtable"};

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known,
                    const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [k, _] : j.items()) {
    if (!known.count(k)) {
      throw ConfigError("unknown key '" + k + "' in " + where);
    }
  }
}

template <typename T>
void read(const nlohmann::json& j, const char* key, T& field) {
  if (j.contains(key)) j.at(key).get_to(field);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw DataError("cannot write " + p.string());
  out << s;
}

}  // namespace

void RunConfig::validate() const {
  if (pipeline != "replay" && pipeline != "bicluster") {
    throw ConfigError("pipeline must be 'replay' or 'bicluster'");
  }
  if (metric_window == 0) throw ConfigError("metric_window must be >= 1");
  if (pipeline == "replay") {
    const auto& r = replay;
    if (!kAgents.count(r.agent)) throw ConfigError("unknown agent '" + r.agent + "'");
    parse_metric(r.metric);
    if (!(r.alpha >= 0.0 && r.alpha <= 1.0)) throw ConfigError("alpha must be in [0,1]");
    if (r.dataset.empty() && !r.synthetic) {
      throw ConfigError("replay pipeline needs a dataset or a synthetic spec");
    }
    r.agent_config.validate();
  } else {
    const auto& b = bicluster;
    if (b.ratings.empty() && !b.synthetic) {
      throw ConfigError("bicluster pipeline needs ratings or a synthetic spec");
    }
    if (b.threshold < 1 || b.threshold > 5) throw ConfigError("threshold must be in 1..5");
    if (!(b.train_fraction > 0.0 && b.train_fraction < 1.0)) {
      throw ConfigError("train_fraction must be in (0,1)");
    }
    if (!(b.observable_fraction > 0.0 && b.observable_fraction <= 1.0)) {
      throw ConfigError("observable_fraction must be in (0,1]");
    }
    if (b.bimax.min_users == 0 || b.bimax.min_items == 0) {
      throw ConfigError("bimax minimum sizes must be >= 1");
    }
    if (b.n == 0 || b.k == 0 || b.starts == 0) {
      throw ConfigError("n, k and starts must be >= 1");
    }
    if (b.n_items.empty()) throw ConfigError("n_items must list at least one N");
    for (auto n : b.n_items) {
      if (n == 0) throw ConfigError("n_items entries must be >= 1");
    }
    if (b.single_board && b.k != 1) throw ConfigError("single_board requires k = 1");
    b.sa.validate();
    b.q.validate();
  }
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json r{{"dataset", replay.dataset},
                   {"agent", replay.agent},
                   {"metric", replay.metric},
                   {"agent_config", replay.agent_config.to_json()},
                   {"alpha", replay.alpha},
                   {"eval_episodes", replay.eval_episodes}};
  if (replay.synthetic) r["synthetic"] = replay.synthetic->to_json();
  const auto& b = bicluster;
  nlohmann::json bj{{"ratings", b.ratings},
                    {"threshold", b.threshold},
                    {"train_fraction", b.train_fraction},
                    {"observable_fraction", b.observable_fraction},
                    {"min_users", b.bimax.min_users},
                    {"min_items", b.bimax.min_items},
                    {"max_biclusters", b.bimax.max_biclusters},
                    {"n", b.n},
                    {"k", b.k},
                    {"sa", b.sa.to_json()},
                    {"q", b.q.to_json()},
                    {"starts", b.starts},
                    {"n_items", b.n_items},
                    {"recall_mode", b.recall_mode == grid::RecallMode::kStandard
                                        ? "standard"
                                        : "paper_literal"},
                    {"single_board", b.single_board}};
  if (b.synthetic) bj["synthetic"] = b.synthetic->to_json();
  return {{"name", name},
          {"pipeline", pipeline},
          {"seed", seed},
          {"metric_window", metric_window},
          {"replay", r},
          {"bicluster", bj}};
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  reject_unknown(j, {"name", "pipeline", "seed", "metric_window", "replay", "bicluster"},
                 "run config");
  RunConfig c;
  try {
    read(j, "name", c.name);
    read(j, "pipeline", c.pipeline);
    read(j, "seed", c.seed);
    read(j, "metric_window", c.metric_window);
    if (j.contains("replay")) {
      const auto& r = j.at("replay");
      reject_unknown(r, {"dataset", "synthetic", "agent", "metric", "agent_config",
                         "alpha", "eval_episodes"},
                     "replay");
      read(r, "dataset", c.replay.dataset);
      read(r, "agent", c.replay.agent);
      read(r, "metric", c.replay.metric);
      read(r, "alpha", c.replay.alpha);
      read(r, "eval_episodes", c.replay.eval_episodes);
      if (r.contains("synthetic")) {
        c.replay.synthetic = synthetic::SessionSpec::from_json(r.at("synthetic"));
      }
      c.replay.agent_config = AgentConfig::from_json(
          r.value("agent_config", nlohmann::json::object()),
          AgentConfig::defaults_for(c.replay.agent));
    } else {
      c.replay.agent_config = AgentConfig::defaults_for(c.replay.agent);
    }
    if (j.contains("bicluster")) {
      const auto& b = j.at("bicluster");
      reject_unknown(b, {"ratings", "synthetic", "threshold", "train_fraction",
                         "observable_fraction", "min_users", "min_items",
                         "max_biclusters", "n", "k", "sa", "q", "starts", "n_items",
                         "recall_mode", "single_board"},
                     "bicluster");
      auto& o = c.bicluster;
      read(b, "ratings", o.ratings);
      read(b, "threshold", o.threshold);
      read(b, "train_fraction", o.train_fraction);
      read(b, "observable_fraction", o.observable_fraction);
      read(b, "min_users", o.bimax.min_users);
      read(b, "min_items", o.bimax.min_items);
      read(b, "max_biclusters", o.bimax.max_biclusters);
      read(b, "n", o.n);
      read(b, "k", o.k);
      read(b, "starts", o.starts);
      read(b, "n_items", o.n_items);
      read(b, "single_board", o.single_board);
      if (b.contains("sa")) o.sa = grid::SaSchedule::from_json(b.at("sa"));
      if (b.contains("q")) o.q = grid::GridQConfig::from_json(b.at("q"));
      if (b.contains("recall_mode")) {
        o.recall_mode = grid::parse_recall_mode(b.at("recall_mode").get<std::string>());
      }
      if (b.contains("synthetic")) {
        o.synthetic = synthetic::RatingSpec::from_json(b.at("synthetic"));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("run config: ") + e.what());
  }
  c.validate();
  return c;
}

RunConfig RunConfig::load(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw ConfigError("cannot read config " + p.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(p.string() + ": " + e.what());
  }
  return from_json(j);
}

// ---------------------------------------------------------------------------

BiclusterOutcome run_bicluster_pipeline(const BiclusterRunConfig& cfg,
                                        std::uint64_t seed) {
  const SeedStreams streams(seed);
  std::vector<RatingRecord> records =
      cfg.ratings.empty() ? synthetic::generate_ratings(*cfg.synthetic)
                          : parse_ratings(fs::path(cfg.ratings));
  records = deduplicate_ratings(records);
  if (records.empty()) throw DataError("no rating records");

  BiclusterOutcome out;
  Rng split_rng = streams.stream("split");
  auto split = split_train_test(records, cfg.train_fraction, split_rng);
  out.train = binarize_ratings(split.train, cfg.threshold);

  auto all = bimax(out.train, cfg.bimax);
  out.found_biclusters = all.size();
  Rng sample_rng = streams.stream("sample");
  out.sampled.user_ids = out.train.user_ids;
  out.sampled.item_ids = out.train.item_ids;
  out.sampled.biclusters = sample_biclusters(all, cfg.n, sample_rng);

  const grid::DistanceMatrix dist(out.sampled.biclusters);
  Rng sa_rng = streams.stream("sa");
  out.boards = grid::build_boards(dist, cfg.n, cfg.k, cfg.sa, sa_rng);

  Rng q_rng = streams.stream("q");
  std::optional<grid::SingleBoardWorld> single;
  std::optional<grid::MultiBoardWorld> multi;
  if (cfg.single_board) {
    single.emplace(out.boards.front(), out.sampled.biclusters);
    out.policy = grid::q_learn(*single, cfg.q, q_rng);
  } else {
    multi.emplace(out.boards, out.sampled.biclusters);
    out.policy = grid::q_learn(*multi, cfg.q, q_rng);
  }

  Rng mask_rng = streams.stream("mask");
  auto mask = mask_history(split.test, cfg.observable_fraction, mask_rng);

  // Items absent from the training matrix get indices past its columns so
  // they still count as hidden but can never be recommended.
  std::map<std::string, std::size_t> unseen;
  auto index_of = [&](const std::string& id) {
    if (auto i = out.train.item_index(id)) return *i;
    auto [it, _] = unseen.try_emplace(id, out.train.items() + unseen.size());
    return it->second;
  };
  std::map<std::string, std::pair<std::set<std::size_t>, std::set<std::size_t>>> users;
  for (const auto& r : mask.observable) {
    auto& u = users[r.user_id];
    if (r.rating >= cfg.threshold) {
      if (auto i = out.train.item_index(r.item_id)) u.first.insert(*i);
    }
  }
  for (const auto& r : mask.hidden) {
    auto& u = users[r.user_id];
    if (r.rating >= cfg.threshold) u.second.insert(index_of(r.item_id));
  }

  const std::size_t n_max = *std::max_element(cfg.n_items.begin(), cfg.n_items.end());
  Rng rec_rng = streams.stream("recommend");
  Rng rand_rng = streams.stream("random-items");
  for (const auto& [user, sets] : users) {
    out.test_users.push_back(user);
    std::vector<std::size_t> observed(sets.first.begin(), sets.first.end());
    auto trace = single ? grid::recommend(*single, out.policy, observed, n_max,
                                          cfg.starts, rec_rng)
                        : grid::recommend(*multi, out.policy, observed, n_max,
                                          cfg.starts, rec_rng);
    if (trace.random_starts) ++out.random_start_users;
    out.traces.push_back(std::move(trace));
    out.observed.push_back(std::move(observed));
    out.hidden.emplace_back(sets.second.begin(), sets.second.end());
    out.random_lists.push_back(grid::random_items(out.train.items(), n_max, rand_rng));
  }
  return out;
}

namespace {

nlohmann::json run_replay(const RunConfig& cfg, const fs::path& dir) {
  const auto& rc = cfg.replay;
  const SeedStreams streams(cfg.seed);
  std::shared_ptr<const SessionDataset> data;
  if (rc.dataset.empty()) {
    data = std::make_shared<const SessionDataset>(
        synthetic::generate_sessions(*rc.synthetic).dataset);
  } else {
    data = std::make_shared<const SessionDataset>(SessionDataset::load(rc.dataset));
  }
  const Metric metric = parse_metric(rc.metric);
  const ActionForm form =
      metric == Metric::kCtr ? ActionForm::kSingleItem : ActionForm::kRankedList;
  auto catalog = std::shared_ptr<const ItemCatalog>(data, &data->catalog);

  nlohmann::json summary;
  std::unique_ptr<Recommender> agent;
  Rng agent_rng = streams.stream("agent");
  const auto& ac = rc.agent_config;
  if (rc.agent == "random") {
    agent = std::make_unique<RandomAgent>(form);
  } else if (rc.agent == "popularity") {
    agent = std::make_unique<PopularityAgent>(catalog, form);
  } else if (rc.agent == "cf") {
    agent = std::make_unique<CfAgent>(UserCosineModel::from_sessions(data->sessions),
                                      catalog);
  } else {
    ReplayEnvironment train_env(data, rc.alpha, streams.seed_for("sampler"));
    nlohmann::json model;
    nlohmann::json training{{"steps", ac.total_steps}};
    if (rc.agent == "dqn") {
      auto tr = dqn_train(train_env, ac, agent_rng);
      tr.rewards.write_csv(dir / "metrics" / "train_rewards.csv", cfg.metric_window);
      tr.losses.write_csv(dir / "metrics" / "train_losses.csv", cfg.metric_window);
      training["updates"] = tr.updates;
      training["target_syncs"] = tr.target_sync_steps.size();
      training["slot_histogram"] = tr.slot_histogram;
      model = model_to_json("dqn", tr.online);
      agent = std::make_unique<DqnAgent>(std::move(tr.online));
    } else if (rc.agent == "reinforce") {
      auto tr = reinforce_train(train_env, ac, agent_rng);
      tr.rewards.write_csv(dir / "metrics" / "train_rewards.csv", cfg.metric_window);
      training["updates"] = tr.updates;
      model = model_to_json("reinforce", tr.policy);
      agent = std::make_unique<ReinforceAgent>(std::move(tr.policy));
    } else {
      auto tr = qtable_train(train_env, ac, agent_rng);
      tr.rewards.write_csv(dir / "metrics" / "train_rewards.csv", cfg.metric_window);
      training["states"] = tr.table.states();
      model = model_to_json(tr.table);
      agent = std::make_unique<QTableAgent>(std::move(tr.table));
    }
    write_text(dir / "model.json", model.dump() + "\n");
    summary["training"] = training;
  }

  ReplayEnvironment eval_env(data, rc.alpha, streams.seed_for("eval-sampler"));
  Rng eval_rng = streams.stream("eval");
  auto res = evaluate(eval_env, *agent, rc.eval_episodes, metric, eval_rng);
  MetricTrace trace;
  for (std::size_t t = 0; t < res.rewards.size(); ++t) trace.append(t + 1, res.rewards[t]);
  trace.write_csv(dir / "metrics" / "eval_rewards.csv", cfg.metric_window);

  summary["agent"] = rc.agent;
  summary["metric"] = std::string(to_string(metric));
  summary["value"] = res.mean;
  summary["std_error"] = res.std_error;
  summary["steps"] = res.steps;
  summary["episodes"] = rc.eval_episodes;
  summary["slot_histogram"] = res.slot_histogram;
  summary["eligible_sessions"] = eval_env.eligible_sessions();
  summary["unanswerable_clickouts"] = eval_env.unanswerable_clickouts();
  if (auto* cf = dynamic_cast<CfAgent*>(agent.get())) summary["cf_fallbacks"] = cf->fallbacks();
  return summary;
}

nlohmann::json run_bicluster(const RunConfig& cfg, const fs::path& dir) {
  const auto& bc = cfg.bicluster;
  auto out = run_bicluster_pipeline(bc, cfg.seed);

  out.sampled.save(dir / "biclusters.json");
  grid::BoardSet set{out.sampled, out.boards};
  write_text(dir / "boards.json", set.to_json().dump() + "\n");
  nlohmann::json policy{{"format", "replayrec-grid-policy"},
                        {"single_board", bc.single_board},
                        {"qtable", out.policy.to_json()}};
  write_text(dir / "policy.json", policy.dump() + "\n");

  std::vector<std::vector<std::size_t>> lists;
  for (const auto& t : out.traces) lists.push_back(t.items);

  std::ostringstream curve;
  curve << "n,recall,random_recall\n";
  nlohmann::json recall = nlohmann::json::object();
  nlohmann::json random_recall = nlohmann::json::object();
  auto ns = bc.n_items;
  std::sort(ns.begin(), ns.end());
  ns.erase(std::unique(ns.begin(), ns.end()), ns.end());
  grid::RecallResult last;
  for (auto n : ns) {
    auto r = grid::recall_at_n(lists, out.hidden, n, bc.recall_mode);
    auto rr = grid::recall_at_n(out.random_lists, out.hidden, n, bc.recall_mode);
    curve << n << ',' << fmt(r.mean) << ',' << fmt(rr.mean) << '\n';
    recall[std::to_string(n)] = r.mean;
    random_recall[std::to_string(n)] = rr.mean;
    last = std::move(r);
  }
  write_text(dir / "metrics" / "recall_curve.csv", curve.str());

  std::ostringstream per_user;
  per_user << "user_id,hits,recall\n";
  for (const auto& u : last.per_user) {
    per_user << out.test_users[u.user] << ',' << u.hits << ',' << fmt(u.recall) << '\n';
  }
  write_text(dir / "metrics" / "recall.csv", per_user.str());

  std::map<std::string, std::size_t> ends;
  for (const auto& t : out.traces) ++ends[std::string(grid::to_string(t.end))];

  return {{"agent", bc.single_board ? "bicluster-rl-single" : "bicluster-rl"},
          {"metric", "recall"},
          {"recall_mode", bc.recall_mode == grid::RecallMode::kStandard
                              ? "standard"
                              : "paper_literal"},
          {"value", last.mean},
          {"recall", recall},
          {"random_recall", random_recall},
          {"evaluable_users", last.per_user.size()},
          {"excluded_users", last.excluded_empty},
          {"random_start_users", out.random_start_users},
          {"biclusters_found", out.found_biclusters},
          {"trace_ends", ends},
          {"train_users", out.train.users()},
          {"train_items", out.train.items()}};
}

}  // namespace

RunResult run(const RunConfig& cfg, const fs::path& out_dir) {
  cfg.validate();
  fs::create_directories(out_dir / "metrics");
  write_text(out_dir / "config.json", cfg.to_json().dump(2) + "\n");
  write_text(out_dir / "seed.txt", std::to_string(cfg.seed) + "\n");

  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };
  nlohmann::json summary;
  try {
    summary = cfg.pipeline == "replay" ? run_replay(cfg, out_dir)
                                       : run_bicluster(cfg, out_dir);
  } catch (const std::exception& e) {
    nlohmann::json failed{{"name", cfg.name},
                          {"pipeline", cfg.pipeline},
                          {"status", "failed"},
                          {"partial", true},
                          {"error", e.what()},
                          {"wall_time_seconds", elapsed()}};
    write_text(out_dir / "summary.json", failed.dump(2) + "\n");
    throw;
  }
  summary["name"] = cfg.name;
  summary["pipeline"] = cfg.pipeline;
  summary["seed"] = cfg.seed;
  summary["status"] = "ok";
  summary["wall_time_seconds"] = elapsed();
  write_text(out_dir / "summary.json", summary.dump(2) + "\n");
  return {out_dir, summary};
}

// ---------------------------------------------------------------------------

ComparisonTable compare(const std::vector<nlohmann::json>& summaries) {
  if (summaries.empty()) throw ConfigError("compare needs at least one summary");
  const auto metric = summaries.front().value("metric", "");
  for (const auto& s : summaries) {
    if (s.value("metric", "") != metric || metric.empty()) {
      throw ConfigError("summaries do not share a metric");
    }
    if (!s.contains("value")) throw DataError("summary without a value");
  }
  std::vector<std::size_t> order(summaries.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return summaries[a].at("value").get<double>() > summaries[b].at("value").get<double>();
  });

  ComparisonTable t;
  auto label = [](const nlohmann::json& s) {
    return s.value("name", "") + " (" + s.value("agent", "") + ")";
  };
  if (metric == "recall") {
    std::set<std::size_t> ns;
    for (const auto& s : summaries) {
      for (const auto& [k, _] : s.at("recall").items()) ns.insert(std::stoul(k));
    }
    t.columns.push_back("run");
    for (auto n : ns) t.columns.push_back("N=" + std::to_string(n));
    auto row_of = [&](const std::string& name, const nlohmann::json& curve) {
      std::vector<std::string> row{name};
      for (auto n : ns) {
        auto key = std::to_string(n);
        row.push_back(curve.contains(key) ? fmt(curve.at(key).get<double>()) : "");
      }
      return row;
    };
    for (auto i : order) {
      const auto& s = summaries[i];
      t.rows.push_back(row_of(label(s), s.at("recall")));
      if (s.contains("random_recall")) {
        t.rows.push_back(row_of(s.value("name", "") + " (random items)",
                                s.at("random_recall")));
      }
    }
  } else {
    t.columns = {"run", metric, "std_error", "steps"};
    for (auto i : order) {
      const auto& s = summaries[i];
      t.rows.push_back({label(s), fmt(s.at("value").get<double>()),
                        fmt(s.value("std_error", 0.0)),
                        std::to_string(s.value("steps", std::size_t{0}))});
    }
  }
  return t;
}

std::string ComparisonTable::to_csv() const {
  std::ostringstream o;
  csv::write_record(o, columns);
  for (const auto& r : rows) csv::write_record(o, r);
  return o.str();
}

std::string ComparisonTable::to_markdown() const {
  std::ostringstream o;
  auto line = [&](const std::vector<std::string>& cells) {
    o << '|';
    for (const auto& c : cells) o << ' ' << c << " |";
    o << '\n';
  };
  line(columns);
  o << '|';
  for (std::size_t i = 0; i < columns.size(); ++i) o << "---|";
  o << '\n';
  for (const auto& r : rows) line(r);
  return o.str();
}

}  // namespace replayrec
