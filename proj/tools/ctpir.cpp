// Command-line front end: data generation, inspection, training and
// evaluation. Errors go to stderr as one JSON object; the exit code is 1.

#include <chrono>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "ctpir/embedding.hpp"
#include "ctpir/gradsuite.hpp"
#include "ctpir/synthgen.hpp"
#include "ctpir/tkg.hpp"
#include "ctpir/train.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ctpir::ConfigError(path + ": cannot open");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ctpir::ParseError(path + ": " + e.what());
  }
}

// Writes to `path`, or stdout when empty.
void emit(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ctpir::ConfigError(path + ": cannot write");
  out << text;
}

void fail(const std::string& kind, const std::string& message) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << '\n';
}

std::string history_csv(const ctpir::Model& m) {
  std::ostringstream out;
  out << std::setprecision(17) << "epoch,male,rmsle\n";
  out << m.initial.epoch << ',' << m.initial.male << ',' << m.initial.rmsle << '\n';
  for (const auto& h : m.history) out << h.epoch << ',' << h.male << ',' << h.rmsle << '\n';
  return out.str();
}

struct Common {
  std::string data;
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* app, Common& c, bool needs_data) {
  auto* d = app->add_option("--data", c.data, "Snapshot directory");
  if (needs_data) d->required();
  app->add_option("--config", c.config, "JSON configuration file");
  app->add_option("--seed", c.seed, "Random seed");
  app->add_option("--out", c.out, "Output path (stdout when omitted)");
}

ctpir::HyperParams load_hyperparams(const Common& c) {
  ctpir::HyperParams hp;
  if (!c.config.empty()) hp = ctpir::hyperparams_from_json(read_json_file(c.config));
  if (c.seed) hp.seed = *c.seed;
  hp.validate();
  return hp;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Citation trajectory prediction over temporal knowledge graphs"};
  app.require_subcommand(1);

  Common gen_c, stats_c, val_c, train_c, pred_c, eval_c, td_c, gc_c, emb_c;

  auto* gen = app.add_subcommand("generate", "Write a synthetic temporal knowledge graph");
  add_common(gen, gen_c, false);
  std::optional<std::size_t> gen_pubs, gen_years;
  gen->add_option("--publications", gen_pubs, "Number of publications");
  gen->add_option("--years", gen_years, "Number of yearly snapshots");

  auto* st = app.add_subcommand("stats", "Entity/edge counts and average degree");
  add_common(st, stats_c, true);
  std::string st_rel;
  std::optional<int> st_year;
  st->add_option("--relation", st_rel, "Relation (all when omitted)");
  st->add_option("--year", st_year, "Year (all when omitted)");

  auto* val = app.add_subcommand("validate", "Check snapshot invariants");
  add_common(val, val_c, true);

  auto* tr = app.add_subcommand("train", "Train a model on every publication present at the cutoff year");
  add_common(tr, train_c, true);
  std::string tr_history;
  std::size_t tr_seeds = 1;
  tr->add_option("--history", tr_history, "Loss-history CSV path");
  tr->add_option("--seeds", tr_seeds, "Train this many consecutive seeds and keep the best")->check(CLI::PositiveNumber);

  std::string model_path, ids_arg, profile = "aipatent", subtask = "mix";
  std::optional<std::size_t> horizon;
  auto* pr = app.add_subcommand("predict", "Write predicted trajectories as CSV");
  add_common(pr, pred_c, true);
  pr->add_option("--model", model_path, "Model JSON")->required();
  pr->add_option("--ids", ids_arg, "Comma-separated publication ids (test split when omitted)");
  pr->add_option("--horizon", horizon, "Years to predict");

  auto* ev = app.add_subcommand("evaluate", "MALE/RMSLE on a subtask");
  add_common(ev, eval_c, true);
  ev->add_option("--model", model_path, "Model JSON")->required();
  ev->add_option("--subtask", subtask, "mix, newborn or grown")->check(CLI::IsMember({"mix", "newborn", "grown"}));
  ev->add_option("--profile", profile, "Threshold profile")->check(CLI::IsMember({"aipatent", "aps"}));
  ev->add_option("--horizon", horizon, "Years to evaluate");

  auto* td = app.add_subcommand("timedist", "Per-year MALE/RMSLE");
  add_common(td, td_c, true);
  td->add_option("--model", model_path, "Model JSON")->required();
  td->add_option("--horizon", horizon, "Largest year distance");

  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of every op and module");
  add_common(gc, gc_c, false);
  std::size_t gc_seeds = 3;
  gc->add_option("--seeds", gc_seeds, "Number of random instances per check");

  auto* emb = app.add_subcommand("embed", "Embed snapshots with an untrained or saved model");
  add_common(emb, emb_c, true);
  bool emb_dump = false;
  emb->add_option("--model", model_path, "Model JSON (seeded initialization when omitted)");
  emb->add_flag("--dump", emb_dump, "Write every entity vector");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    fail("usage", e.what());
    return 2;
  }

  auto split_ids = [](const std::string& s) {
    std::vector<std::string> ids;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (!item.empty()) ids.push_back(item);
    }
    return ids;
  };

  try {
    if (gen->parsed()) {
      ctpir::SynthConfig c;
      if (!gen_c.config.empty()) c = ctpir::synth_config_from_json(read_json_file(gen_c.config));
      if (gen_c.seed) c.seed = *gen_c.seed;
      if (gen_pubs) c.num_publications = *gen_pubs;
      if (gen_years) c.years = *gen_years;
      if (gen_c.out.empty()) throw ctpir::ConfigError("generate needs --out <dir>");
      const auto tkg = ctpir::generate(c);
      ctpir::save_snapshots(tkg, gen_c.out);
      std::cout << json{{"snapshots", tkg.snapshots.size()},
                        {"entities", tkg.snapshots.back().entities.size()},
                        {"edges", tkg.snapshots.back().edges.size()},
                        {"out", gen_c.out}}
                       .dump()
                << '\n';
    } else if (st->parsed()) {
      const auto tkg = ctpir::load_snapshots(stats_c.data);
      json rows = json::array();
      for (const auto& snap : tkg.snapshots) {
        if (st_year && snap.year != *st_year) continue;
        for (const auto& rel : tkg.relations) {
          if (!st_rel.empty() && rel != st_rel) continue;
          rows.push_back(ctpir::to_json(ctpir::stats(tkg, rel, snap.year)));
        }
      }
      if (rows.empty()) throw ctpir::LookupError("no snapshot/relation matches the filter");
      emit(stats_c.out, rows.dump(2) + "\n");
    } else if (val->parsed()) {
      ctpir::LoadOptions opts;
      // Validation is reported rather than thrown here.
      const auto report = [&] {
        try {
          ctpir::load_snapshots(val_c.data, opts);
          return json{{"ok", true}, {"violations", json::array()}};
        } catch (const ctpir::ValidationError& e) {
          return json{{"ok", false}, {"violations", e.what()}};
        }
      }();
      emit(val_c.out, report.dump(2) + "\n");
      if (!report.at("ok").get<bool>()) return 1;
    } else if (tr->parsed()) {
      const auto tkg = ctpir::load_snapshots(train_c.data);
      const auto base = load_hyperparams(train_c);
      const int T = ctpir::cutoff_year(tkg, base);
      const auto ids = ctpir::publications_at(tkg, T);
      const auto targets = ctpir::ground_truth_all(tkg, ids, T, base.horizon);
      std::optional<ctpir::Model> best;
      json runs = json::array();
      for (std::size_t k = 0; k < tr_seeds; ++k) {
        auto hp = base;
        hp.seed = base.seed + k;
        const auto t0 = std::chrono::steady_clock::now();
        auto model = ctpir::train(tkg, targets, hp);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const auto& last = model.history.empty() ? model.initial : model.history.back();
        runs.push_back({{"seed", hp.seed}, {"train_male", last.male}, {"train_rmsle", last.rmsle},
                        {"seconds", secs}});
        const auto& best_last = best ? (best->history.empty() ? best->initial : best->history.back()) : last;
        if (!best || last.male < best_last.male) best = std::move(model);
      }
      if (train_c.out.empty()) throw ctpir::ConfigError("train needs --out <model.json>");
      best->save(train_c.out);
      if (!tr_history.empty()) emit(tr_history, history_csv(*best));
      std::cout << json{{"model", train_c.out}, {"best_seed", best->hp.seed}, {"runs", runs}}.dump() << '\n';
    } else if (pr->parsed()) {
      const auto tkg = ctpir::load_snapshots(pred_c.data);
      const auto model = ctpir::Model::load(model_path);
      const int T = ctpir::cutoff_year(tkg, model.hp);
      const std::size_t N = horizon.value_or(model.hp.horizon);
      const auto ids = ids_arg.empty() ? model.test_ids : split_ids(ids_arg);
      const auto predicted = ctpir::predict(model, tkg, ids, T, N);
      std::map<std::string, ctpir::CitationSeries> observed;
      const bool have_truth = T + static_cast<int>(N) <= tkg.snapshots.back().year;
      if (have_truth) observed = ctpir::ground_truth_all(tkg, ids, T, N);
      std::ostringstream csv;
      ctpir::write_trajectory_csv(csv, predicted, observed);
      emit(pred_c.out, csv.str());
    } else if (ev->parsed()) {
      const auto tkg = ctpir::load_snapshots(eval_c.data);
      const auto model = ctpir::Model::load(model_path);
      const int T = ctpir::cutoff_year(tkg, model.hp);
      const std::size_t N = horizon.value_or(model.hp.horizon);
      const auto spec = ctpir::DatasetProfile::named(profile).spec(ctpir::subtask_from_string(subtask));
      auto r = ctpir::to_json(ctpir::evaluate(model, tkg, model.test_ids, spec, T, N));
      r["subtask"] = subtask;
      r["threshold"] = spec.threshold;
      r["year"] = T;
      r["horizon"] = N;
      emit(eval_c.out, r.dump(2) + "\n");
    } else if (td->parsed()) {
      const auto tkg = ctpir::load_snapshots(td_c.data);
      const auto model = ctpir::Model::load(model_path);
      const int T = ctpir::cutoff_year(tkg, model.hp);
      const std::size_t N = horizon.value_or(model.hp.horizon);
      const auto per_year = ctpir::time_distance_eval(model, tkg, model.test_ids, T, N);
      json rows = json::array();
      for (std::size_t k = 0; k < per_year.size(); ++k) {
        auto r = ctpir::to_json(per_year[k]);
        r["distance"] = k + 1;
        r["year"] = T + static_cast<int>(k) + 1;
        rows.push_back(r);
      }
      emit(td_c.out, rows.dump(2) + "\n");
    } else if (gc->parsed()) {
      std::vector<std::uint64_t> seeds;
      const std::uint64_t s0 = gc_c.seed.value_or(1);
      for (std::size_t k = 0; k < gc_seeds; ++k) seeds.push_back(s0 + k);
      const auto results = ctpir::run_gradient_suite(seeds);
      json rows = json::array();
      bool ok = true;
      for (const auto& r : results) {
        ok = ok && r.error < 1e-4;
        rows.push_back({{"check", r.name}, {"seed", r.seed}, {"error", r.error}});
      }
      emit(gc_c.out, json{{"ok", ok}, {"tolerance", 1e-4}, {"checks", rows}}.dump(2) + "\n");
      if (!ok) return 1;
    } else if (emb->parsed()) {
      const auto tkg = ctpir::load_snapshots(emb_c.data);
      ctpir::RgcnWeights weights;
      if (!model_path.empty()) {
        weights = ctpir::Model::load(model_path).rgcn;
      } else {
        ctpir::RgcnConfig cfg;
        cfg.layer_dims.front() = tkg.embedding_dim;
        ctpir::Rng rng(emb_c.seed.value_or(0));
        weights = ctpir::RgcnWeights::init(tkg.relations, cfg, rng);
      }
      ctpir::NoGradGuard guard;
      const auto table = ctpir::embed_sequence(tkg, weights);
      if (emb_dump) {
        emit(emb_c.out, table.to_json().dump() + "\n");
      } else {
        emit(emb_c.out, json{{"snapshots", table.num_snapshots()}, {"dim", table.dim()},
                             {"entities", table.index().num_nodes()}}
                                .dump() +
                            "\n");
      }
    }
  } catch (const ctpir::Error& e) {
    fail(e.kind(), e.what());
    return 1;
  } catch (const std::exception& e) {
    fail("internal", e.what());
    return 1;
  }
  return 0;
}
