// Command-line front end. Exit codes: 0 ok, 1 unexpected failure,
// 2 configuration error, 3 data error, 4 training divergence.

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <string>

#include "CLI11.hpp"
#include "replayrec/csv.hpp"
#include "replayrec/experiment.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace replayrec;

namespace {

json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw DataError("cannot read " + p.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(p.string() + ": " + e.what());
  }
}

void write_json(const fs::path& p, const json& j) {
  std::ofstream out(p);
  if (!out) throw DataError("cannot write " + p.string());
  out << j.dump(1) << '\n';
}

std::string normalize(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return key;
}

// A subcommand whose flags can also be set from a JSON document passed with
// --config; keys in the document win over flags.
class Command {
 public:
  Command(CLI::App& root, const std::string& name, const std::string& desc,
          bool generic_config = true)
      : app_(root.add_subcommand(name, desc)) {
    if (generic_config) {
      app_->add_option("--config", config_, "JSON file whose keys override flags");
    }
  }

  template <typename T>
  CLI::Option* opt(const std::string& key, T& field, const std::string& desc) {
    setters_[key] = [&field](const json& j) { j.get_to(field); };
    return app_->add_option("--" + key, field, desc);
  }

  CLI::Option* flag(const std::string& key, bool& field, const std::string& desc) {
    setters_[key] = [&field](const json& j) { j.get_to(field); };
    return app_->add_flag("--" + key, field, desc);
  }

  void apply_config() const {
    if (config_.empty()) return;
    json j = read_json(config_);
    if (!j.is_object()) throw ConfigError("--config must hold a JSON object");
    for (const auto& [k, v] : j.items()) {
      auto it = setters_.find(normalize(k));
      if (it == setters_.end()) throw ConfigError("unknown config key '" + k + "'");
      try {
        it->second(v);
      } catch (const json::exception& e) {
        throw ConfigError("config key '" + k + "': " + e.what());
      }
    }
  }

  CLI::App* app() const { return app_; }
  const std::string& config() const { return config_; }

 private:
  CLI::App* app_;
  std::string config_;
  std::map<std::string, std::function<void(const json&)>> setters_;
};

void need(const std::string& value, const std::string& flag) {
  if (value.empty()) throw ConfigError("--" + flag + " is required");
}

std::shared_ptr<const SessionDataset> load_dataset(const std::string& dir) {
  need(dir, "data");
  return std::make_shared<const SessionDataset>(SessionDataset::load(dir));
}

// Liked items per user, as indices into `item_ids`; unknown items dropped.
std::map<std::string, std::vector<std::size_t>> liked_items(
    const std::vector<RatingRecord>& records, const std::vector<std::string>& item_ids,
    int threshold, std::map<std::string, std::size_t>* unseen) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < item_ids.size(); ++i) index[item_ids[i]] = i;
  std::map<std::string, std::set<std::size_t>> sets;
  for (const auto& r : records) {
    auto& s = sets[r.user_id];
    if (r.rating < threshold) continue;
    if (auto it = index.find(r.item_id); it != index.end()) {
      s.insert(it->second);
    } else if (unseen) {
      auto [u, _] = unseen->try_emplace(r.item_id, item_ids.size() + unseen->size());
      s.insert(u->second);
    }
  }
  std::map<std::string, std::vector<std::size_t>> out;
  for (auto& [u, s] : sets) out[u] = {s.begin(), s.end()};
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Replay-environment and biclustering-gridworld recommenders"};
  app.require_subcommand(1);

  // ingest
  Command ingest(app, "ingest", "Parse a session log and item metadata into a dataset directory");
  std::string in_sessions, in_metadata, in_out;
  ingest.opt("sessions", in_sessions, "session log CSV");
  ingest.opt("items", in_metadata, "item metadata CSV (item_id,properties)");
  ingest.opt("out", in_out, "output dataset directory");

  // encode
  Command encode(app, "encode", "Encode clickout states as JSON lines");
  std::string enc_data, enc_out, enc_session;
  double enc_alpha = 0.5;
  std::size_t enc_limit = 0;
  encode.opt("data", enc_data, "dataset directory");
  encode.opt("alpha", enc_alpha, "preference EMA rate");
  encode.opt("limit", enc_limit, "maximum number of states (0 = all)");
  encode.opt("session", enc_session, "only this session id");
  encode.opt("out", enc_out, "output JSONL file");

  // biclust
  Command biclust(app, "biclust", "Enumerate maximal all-ones biclusters of a rating matrix");
  std::string bc_ratings, bc_out;
  int bc_threshold = kDefaultRatingThreshold;
  BimaxOptions bc_opt;
  biclust.opt("ratings", bc_ratings, "ratings file (user item rating timestamp)");
  biclust.opt("threshold", bc_threshold, "like threshold");
  biclust.opt("min-users", bc_opt.min_users, "minimum users per bicluster");
  biclust.opt("min-items", bc_opt.min_items, "minimum items per bicluster");
  biclust.opt("max-biclusters", bc_opt.max_biclusters, "abort above this count (0 = off)");
  biclust.opt("out", bc_out, "output JSON");

  // grid
  Command gridc(app, "grid", "Sample n*n biclusters and arrange them on K boards");
  std::string gr_in, gr_out, gr_schedule;
  std::size_t gr_n = 20, gr_k = 3;
  std::uint64_t gr_seed = 1;
  gridc.opt("biclusters", gr_in, "bicluster JSON");
  gridc.opt("n", gr_n, "board side length");
  gridc.opt("k", gr_k, "number of boards");
  gridc.opt("seed", gr_seed, "root seed");
  gridc.opt("schedule", gr_schedule, "annealing schedule JSON file");
  gridc.opt("out", gr_out, "output boards JSON");

  // train
  Command train(app, "train", "Train an agent", false);
  std::string tr_agent, tr_config, tr_data, tr_out, tr_boards, tr_metrics;
  std::uint64_t tr_seed = 1;
  double tr_alpha = 0.5;
  train.app()->add_option("--config", tr_config, "agent configuration JSON");
  train.opt("agent", tr_agent, "dqn | reinforce | qtable");
  train.opt("data", tr_data, "dataset directory (replay environment)");
  train.opt("boards", tr_boards, "boards JSON (gridworld policy for qtable)");
  train.opt("alpha", tr_alpha, "preference EMA rate");
  train.opt("seed", tr_seed, "root seed");
  train.opt("metrics", tr_metrics, "training reward CSV");
  train.opt("out", tr_out, "model file");

  // eval
  Command evalc(app, "eval", "Evaluate a model or baseline on the replay environment");
  std::string ev_model, ev_agent, ev_data, ev_metric, ev_out, ev_rewards;
  std::size_t ev_episodes = 10000;
  std::uint64_t ev_seed = 1;
  double ev_alpha = 0.5;
  evalc.opt("model", ev_model, "model file");
  evalc.opt("agent", ev_agent, "baseline: random | popularity | cf");
  evalc.opt("data", ev_data, "dataset directory");
  evalc.opt("metric", ev_metric, "ctr | mrr");
  evalc.opt("episodes", ev_episodes, "episodes to replay");
  evalc.opt("alpha", ev_alpha, "preference EMA rate");
  evalc.opt("seed", ev_seed, "root seed");
  evalc.opt("rewards", ev_rewards, "per-step reward CSV");
  evalc.opt("out", ev_out, "summary JSON");

  // recommend
  Command rec(app, "recommend", "Recommend items by walking the boards with a policy");
  std::string rc_boards, rc_policy, rc_history, rc_hidden, rc_out, rc_recall, rc_mode = "standard";
  std::size_t rc_n = 10, rc_m = 3;
  int rc_threshold = kDefaultRatingThreshold;
  std::uint64_t rc_seed = 1;
  rec.opt("boards", rc_boards, "boards JSON");
  rec.opt("policy", rc_policy, "policy JSON");
  rec.opt("history", rc_history, "observable ratings per user");
  rec.opt("hidden", rc_hidden, "hidden ratings per user, for recall");
  rec.opt("n-items", rc_n, "recommendation list length N");
  rec.opt("starts", rc_m, "start positions m");
  rec.opt("threshold", rc_threshold, "like threshold");
  rec.opt("recall-mode", rc_mode, "standard | paper_literal");
  rec.opt("seed", rc_seed, "root seed");
  rec.opt("out", rc_out, "recommendations CSV");
  rec.opt("recall", rc_recall, "recall CSV (user_id,hits,recall)");

  // compare
  Command cmp(app, "compare", "Tabulate run summaries");
  std::vector<std::string> cmp_in;
  std::string cmp_format = "markdown", cmp_out;
  cmp.opt("summaries", cmp_in, "summary JSON files");
  cmp.app()->add_option("files", cmp_in, "summary JSON files");
  cmp.opt("format", cmp_format, "markdown | csv");
  cmp.opt("out", cmp_out, "output file (default stdout)");

  // run
  Command runc(app, "run", "Run a full experiment from a run configuration", false);
  std::string run_config, run_out;
  runc.app()->add_option("--config", run_config, "run configuration JSON");
  runc.opt("out", run_out, "artifacts directory");

  // synth
  Command syn(app, "synth", "Write synthetic session or rating data");
  std::string sy_kind, sy_out, sy_click = "uniform";
  std::size_t sy_sessions = 2000, sy_properties = kDefaultPropertyCount;
  std::uint64_t sy_seed = 1;
  syn.opt("kind", sy_kind, "sessions | ratings");
  syn.opt("click-model", sy_click, "uniform | planted_linear");
  syn.opt("sessions", sy_sessions, "number of sessions");
  syn.opt("properties", sy_properties, "number of item properties");
  syn.opt("seed", sy_seed, "generator seed");
  syn.opt("out", sy_out, "output directory (sessions) or file (ratings)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*ingest.app()) {
      ingest.apply_config();
      need(in_sessions, "sessions");
      need(in_metadata, "items");
      need(in_out, "out");
      SessionParseReport report;
      SessionDataset ds;
      ds.sessions = parse_session_log(fs::path(in_sessions), &report);
      ds.catalog = parse_item_metadata(fs::path(in_metadata));
      ds.catalog.fill_from_sessions(ds.sessions);
      ds.vocab = ContextVocabulary::build(ds.sessions);
      fs::create_directories(in_out);
      ds.save(in_out);
      json r{{"rows_read", report.rows_read},
             {"rows_accepted", report.rows_accepted},
             {"malformed_rows", report.malformed_rows},
             {"price_mismatch_rows", report.price_mismatch_rows},
             {"impression_mismatch_rows", report.impression_mismatch_rows},
             {"duplicate_step_rows", report.duplicate_step_rows},
             {"truncated_impression_lists", report.truncated_impression_lists},
             {"sessions_without_clickout", report.sessions_without_clickout},
             {"sessions", ds.sessions.size()},
             {"items", ds.catalog.size()}};
      std::cout << r.dump(1) << '\n';
    } else if (*encode.app()) {
      encode.apply_config();
      need(enc_out, "out");
      auto ds = load_dataset(enc_data);
      std::ofstream out(enc_out);
      if (!out) throw DataError("cannot write " + enc_out);
      std::size_t written = 0;
      for (const auto& s : ds->sessions) {
        if (!enc_session.empty() && s.session_id != enc_session) continue;
        for (auto idx : s.clickout_indices) {
          if (enc_limit && written >= enc_limit) break;
          std::span<const SessionEvent> prefix(s.events.data(), idx);
          out << state_to_json(build_state(prefix, s.events[idx], ds->catalog, ds->vocab,
                                           enc_alpha),
                               -1)
              << '\n';
          ++written;
        }
      }
      if (!enc_session.empty() && written == 0)
        throw DataError("no clickout states for session " + enc_session);
      std::cout << "encoded " << written << " states\n";
    } else if (*biclust.app()) {
      biclust.apply_config();
      need(bc_ratings, "ratings");
      need(bc_out, "out");
      auto m = binarize_ratings(parse_ratings(fs::path(bc_ratings)), bc_threshold);
      BiclusterSet set{m.user_ids, m.item_ids, bimax(m, bc_opt)};
      set.save(bc_out);
      std::cout << "users " << m.users() << " items " << m.items() << " biclusters "
                << set.biclusters.size() << '\n';
    } else if (*gridc.app()) {
      gridc.apply_config();
      need(gr_in, "biclusters");
      need(gr_out, "out");
      auto all = BiclusterSet::load(gr_in);
      grid::SaSchedule sched;
      if (!gr_schedule.empty()) sched = grid::SaSchedule::from_json(read_json(gr_schedule));
      const SeedStreams streams(gr_seed);
      Rng sample_rng = streams.stream("sample");
      Rng sa_rng = streams.stream("sa");
      grid::BoardSet out;
      out.biclusters = {all.user_ids, all.item_ids,
                        sample_biclusters(all.biclusters, gr_n, sample_rng)};
      const grid::DistanceMatrix d(out.biclusters.biclusters);
      out.boards = grid::build_boards(d, gr_n, gr_k, sched, sa_rng);
      write_json(gr_out, out.to_json());
      for (std::size_t k = 0; k < out.boards.size(); ++k) {
        std::cout << "board " << k << " h " << grid::h(out.boards[k], d) << '\n';
      }
    } else if (*train.app()) {
      need(tr_agent, "agent");
      need(tr_out, "out");
      const SeedStreams streams(tr_seed);
      json cfg_json = tr_config.empty() ? json::object() : read_json(tr_config);
      if (tr_agent == "qtable" && !tr_boards.empty()) {
        auto set = grid::BoardSet::from_json(read_json(tr_boards));
        auto qcfg = grid::GridQConfig::from_json(cfg_json);
        grid::MultiBoardWorld world(set.boards, set.biclusters.biclusters);
        Rng q_rng = streams.stream("q");
        auto q = grid::q_learn(world, qcfg, q_rng);
        write_json(tr_out, {{"format", "replayrec-grid-policy"},
                            {"single_board", false},
                            {"qtable", q.to_json()}});
        std::cout << "trained gridworld policy over " << q.states() << " states\n";
      } else {
        if (tr_agent != "dqn" && tr_agent != "reinforce" && tr_agent != "qtable") {
          throw ConfigError("unknown agent '" + tr_agent + "'");
        }
        auto cfg = AgentConfig::from_json(cfg_json, AgentConfig::defaults_for(tr_agent));
        auto ds = load_dataset(tr_data);
        ReplayEnvironment env(ds, tr_alpha, streams.seed_for("sampler"));
        Rng rng = streams.stream("agent");
        json model;
        MetricTrace rewards;
        if (tr_agent == "dqn") {
          auto t = dqn_train(env, cfg, rng);
          model = model_to_json("dqn", t.online);
          rewards = std::move(t.rewards);
        } else if (tr_agent == "reinforce") {
          auto t = reinforce_train(env, cfg, rng);
          model = model_to_json("reinforce", t.policy);
          rewards = std::move(t.rewards);
        } else {
          auto t = qtable_train(env, cfg, rng);
          model = model_to_json(t.table);
          rewards = std::move(t.rewards);
        }
        write_json(tr_out, model);
        if (!tr_metrics.empty()) rewards.write_csv(tr_metrics, kDefaultMovingAverageWindow);
        const auto v = rewards.values();
        double tail = 0.0;
        const std::size_t w = std::min<std::size_t>(v.size(), kDefaultMovingAverageWindow);
        for (std::size_t i = v.size() - w; i < v.size(); ++i) tail += v[i];
        std::cout << "trained " << tr_agent << " for " << v.size()
                  << " steps; final moving-average reward "
                  << (w ? tail / static_cast<double>(w) : 0.0) << '\n';
      }
    } else if (*evalc.app()) {
      evalc.apply_config();
      auto ds = load_dataset(ev_data);
      std::unique_ptr<Recommender> agent;
      auto catalog = std::shared_ptr<const ItemCatalog>(ds, &ds->catalog);
      if (!ev_model.empty()) {
        agent = model_from_json(read_json(ev_model));
      } else if (ev_agent == "random" || ev_agent == "popularity") {
        const bool ranked = ev_metric == "mrr";
        const auto form = ranked ? ActionForm::kRankedList : ActionForm::kSingleItem;
        if (ev_agent == "random") {
          agent = std::make_unique<RandomAgent>(form);
        } else {
          agent = std::make_unique<PopularityAgent>(catalog, form);
        }
      } else if (ev_agent == "cf") {
        agent = std::make_unique<CfAgent>(UserCosineModel::from_sessions(ds->sessions),
                                          catalog);
      } else {
        throw ConfigError("eval needs --model or --agent random|popularity|cf");
      }
      if (ev_metric.empty()) {
        ev_metric = agent->form() == ActionForm::kSingleItem ? "ctr" : "mrr";
      }
      const Metric metric = parse_metric(ev_metric);
      const SeedStreams streams(ev_seed);
      ReplayEnvironment env(ds, ev_alpha, streams.seed_for("eval-sampler"));
      Rng rng = streams.stream("eval");
      auto res = evaluate(env, *agent, ev_episodes, metric, rng);
      json summary{{"name", agent->name()},
                   {"agent", agent->name()},
                   {"metric", std::string(to_string(metric))},
                   {"value", res.mean},
                   {"std_error", res.std_error},
                   {"steps", res.steps},
                   {"episodes", ev_episodes},
                   {"slot_histogram", res.slot_histogram},
                   {"status", "ok"}};
      if (!ev_rewards.empty()) {
        MetricTrace t;
        for (std::size_t i = 0; i < res.rewards.size(); ++i) t.append(i + 1, res.rewards[i]);
        t.write_csv(ev_rewards, kDefaultMovingAverageWindow);
      }
      if (!ev_out.empty()) write_json(ev_out, summary);
      std::cout << to_string(metric) << ' ' << res.mean << " +- " << res.std_error
                << " over " << res.steps << " steps\n";
    } else if (*rec.app()) {
      rec.apply_config();
      need(rc_boards, "boards");
      need(rc_policy, "policy");
      need(rc_history, "history");
      auto set = grid::BoardSet::from_json(read_json(rc_boards));
      json pj = read_json(rc_policy);
      if (pj.value("format", "") != "replayrec-grid-policy") {
        throw DataError("not a gridworld policy file");
      }
      const QTable q = QTable::from_json(pj.at("qtable"));
      grid::MultiBoardWorld world(set.boards, set.biclusters.biclusters);
      if (q.num_actions() != world.num_actions()) {
        throw DataError("policy does not match the number of boards");
      }
      const auto& item_ids = set.biclusters.item_ids;
      auto history = liked_items(parse_ratings(fs::path(rc_history)), item_ids,
                                 rc_threshold, nullptr);
      Rng rng = SeedStreams(rc_seed).stream("recommend");
      std::vector<std::string> users;
      std::vector<std::vector<std::size_t>> lists;
      std::ostream* out = &std::cout;
      std::ofstream file;
      if (!rc_out.empty()) {
        file.open(rc_out);
        if (!file) throw DataError("cannot write " + rc_out);
        out = &file;
      }
      *out << "user_id,items\n";
      for (const auto& [user, observed] : history) {
        auto tr = grid::recommend(world, q, observed, rc_n, rc_m, rng);
        std::vector<std::string> names;
        for (auto i : tr.items) names.push_back(item_ids[i]);
        *out << user << ',' << csv::join(names, '|') << '\n';
        users.push_back(user);
        lists.push_back(std::move(tr.items));
      }
      if (!rc_hidden.empty()) {
        need(rc_recall, "recall");
        std::map<std::string, std::size_t> unseen;
        auto hidden_map = liked_items(parse_ratings(fs::path(rc_hidden)), item_ids,
                                      rc_threshold, &unseen);
        std::vector<std::vector<std::size_t>> hidden;
        for (const auto& u : users) hidden.push_back(hidden_map[u]);
        auto r = grid::recall_at_n(lists, hidden, rc_n, grid::parse_recall_mode(rc_mode));
        std::ofstream rf(rc_recall);
        if (!rf) throw DataError("cannot write " + rc_recall);
        rf << "user_id,hits,recall\n";
        for (const auto& u : r.per_user) {
          rf << users[u.user] << ',' << u.hits << ',' << u.recall << '\n';
        }
        std::cerr << "recall@" << rc_n << " " << r.mean << " over " << r.per_user.size()
                  << " users (" << r.excluded_empty << " without hidden items)\n";
      }
    } else if (*cmp.app()) {
      cmp.apply_config();
      if (cmp_in.empty()) throw ConfigError("compare needs summary files");
      std::vector<json> summaries;
      for (const auto& f : cmp_in) summaries.push_back(read_json(f));
      auto table = compare(summaries);
      std::string text;
      if (cmp_format == "csv") {
        text = table.to_csv();
      } else if (cmp_format == "markdown") {
        text = table.to_markdown();
      } else {
        throw ConfigError("unknown format '" + cmp_format + "'");
      }
      if (cmp_out.empty()) {
        std::cout << text;
      } else {
        std::ofstream(cmp_out) << text;
      }
    } else if (*runc.app()) {
      need(run_config, "config");
      need(run_out, "out");
      auto res = run(RunConfig::load(run_config), run_out);
      std::cout << res.summary.dump(1) << '\n';
    } else if (*syn.app()) {
      syn.apply_config();
      need(sy_out, "out");
      if (sy_kind == "sessions") {
        synthetic::SessionSpec spec;
        spec.sessions = sy_sessions;
        spec.properties = sy_properties;
        spec.seed = sy_seed;
        spec = synthetic::SessionSpec::from_json(
            [&] { auto j = spec.to_json(); j["click_model"] = sy_click; return j; }());
        auto gen = synthetic::generate_sessions(spec);
        fs::create_directories(sy_out);
        gen.dataset.save(sy_out);
        write_session_log(fs::path(sy_out) / "log.csv", gen.dataset.sessions);
        std::ofstream meta(fs::path(sy_out) / "item_metadata.csv");
        synthetic::write_item_metadata(meta, gen.dataset.catalog);
      } else if (sy_kind == "ratings") {
        synthetic::RatingSpec spec;
        spec.seed = sy_seed;
        auto recs = synthetic::generate_ratings(spec);
        std::ofstream out(sy_out);
        if (!out) throw DataError("cannot write " + sy_out);
        write_ratings(out, recs);
      } else {
        throw ConfigError("--kind must be sessions or ratings");
      }
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const DivergenceError& e) {
    std::cerr << "training diverged: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
