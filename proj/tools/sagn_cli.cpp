// Command-line front end: dataset generation, preprocessing, SLE training,
// evaluation, attention export and the label-leakage probe.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "sagn/checkpoint.hpp"
#include "sagn/config.hpp"
#include "sagn/dataset.hpp"
#include "sagn/reporting.hpp"
#include "sagn/sbm.hpp"
#include "sagn/sle.hpp"

namespace fs = std::filesystem;
using Real = float;

namespace {

sagn::Config load_config(const std::string& path,
                         const std::vector<std::string>& sets) {
  sagn::Config cfg =
      path.empty() ? sagn::Config() : sagn::Config::from_file(path);
  for (const auto& kv : sets) cfg.apply_override(kv);
  return cfg;
}

sagn::SbmSpec sbm_spec_from(const sagn::Config& cfg) {
  sagn::SbmSpec spec;
  spec.num_nodes =
      static_cast<sagn::NodeId>(cfg.get_int("sbm.nodes", spec.num_nodes));
  spec.num_classes = cfg.get_int("sbm.classes", spec.num_classes);
  spec.intra_p = cfg.get_double("sbm.intra_p", spec.intra_p);
  spec.inter_p = cfg.get_double("sbm.inter_p", spec.inter_p);
  spec.feature_dim = cfg.get_int("sbm.feature_dim", spec.feature_dim);
  spec.feature_noise_sigma =
      cfg.get_double("sbm.noise_sigma", spec.feature_noise_sigma);
  spec.label_homophily = cfg.get_double("sbm.homophily", spec.label_homophily);
  spec.train_frac = cfg.get_double("sbm.train_frac", spec.train_frac);
  spec.valid_frac = cfg.get_double("sbm.valid_frac", spec.valid_frac);
  spec.seed = cfg.get_int("sbm.seed", 0);
  return spec;
}

sagn::SleConfig sle_config_from(const sagn::Config& cfg) {
  sagn::SleConfig c;
  c.variant = sagn::variant_from_string(
      cfg.get_str("model.variant", sagn::to_string(c.variant)));
  c.hidden_dim = cfg.get_int("model.hidden", c.hidden_dim);
  c.num_layers = static_cast<int>(cfg.get_int("model.layers", c.num_layers));
  c.k_f = static_cast<int>(cfg.get_int("model.k_f", c.k_f));
  c.k_l = static_cast<int>(cfg.get_int("sle.k_l", c.k_l));
  c.dropout = cfg.get_double("model.dropout", c.dropout);
  c.attention_dropout =
      cfg.get_double("model.attention_dropout", c.attention_dropout);
  c.input_dropout = cfg.get_double("model.input_dropout", c.input_dropout);
  c.exp_ratio = cfg.get_double("model.exp_ratio", c.exp_ratio);
  c.use_batchnorm = cfg.get_bool("model.batchnorm", c.use_batchnorm);
  c.stages = static_cast<int>(cfg.get_int("sle.stages", c.stages));
  c.threshold = cfg.get_double("sle.threshold", c.threshold);
  c.use_label_model = cfg.get_bool("sle.use_label_model", c.use_label_model);
  c.inductive_filter_train_labels = cfg.get_bool(
      "sle.inductive_filter_train_labels", c.inductive_filter_train_labels);
  {
    std::vector<int> dflt(c.epochs.begin(), c.epochs.end());
    c.epochs = cfg.get_int_list("sle.epochs", dflt);
  }
  c.lr = cfg.get_double("sle.lr", c.lr);
  c.weight_decay = cfg.get_double("sle.weight_decay", c.weight_decay);
  c.batch_size = cfg.get_int("sle.batch_size", c.batch_size);
  c.eval_interval =
      static_cast<int>(cfg.get_int("sle.eval_interval", c.eval_interval));
  c.transition = sagn::transition_kind_from_string(
      cfg.get_str("transition.kind", sagn::to_string(c.transition)));
  c.add_self_loops = cfg.get_bool("transition.self_loops", c.add_self_loops);
  c.seed = cfg.get_int("sle.seed", 0);
  c.threads = static_cast<int>(cfg.get_int("run.threads", 1));
  return c;
}

// Builds (or reuses) the full-graph hop stack for a dataset + config.
sagn::HopFeatures<Real> prepare_hops(const sagn::Dataset<Real>& data,
                                     const sagn::SleConfig& cfg,
                                     const std::string& cache_path,
                                     bool write_cache) {
  const sagn::Graph g = cfg.add_self_loops ? sagn::with_self_loops(data.graph)
                                           : data.graph;
  const sagn::TransitionMatrix t =
      sagn::normalize(g, cfg.transition, cfg.add_self_loops);
  const sagn::HopCacheKey key =
      sagn::make_hop_cache_key(t, data.features, cfg.k_f);
  if (!cache_path.empty() && fs::exists(cache_path)) {
    try {
      auto hf = sagn::load_hops<Real>(key, cache_path);
      std::cerr << "reusing hop cache " << cache_path << "\n";
      return hf;
    } catch (const sagn::stale_cache_error& e) {
      std::cerr << "hop cache is stale, recomputing (" << e.what() << ")\n";
    }
  }
  auto hf = sagn::propagate_features(t, data.features, cfg.k_f, cfg.threads);
  if (write_cache && !cache_path.empty()) {
    sagn::cache_hops(hf, key, cache_path);
  }
  return hf;
}

// Reconstructs a trained stage model from a run directory.
struct LoadedStage {
  sagn::SleConfig cfg;
  sagn::CombinedModel<Real> model;
  bool with_label = false;
};

LoadedStage load_stage(const std::string& run_dir,
                       const sagn::Dataset<Real>& data, int stage) {
  const auto manifest_path = fs::path(run_dir) / "manifest.json";
  sagn::check_data(fs::exists(manifest_path),
                   "no manifest.json in " + run_dir);
  nlohmann::json manifest;
  {
    std::ifstream min(manifest_path);
    min >> manifest;
  }
  sagn::Config cfg;
  for (const auto& [k, v] :
       manifest.at("config").get<std::map<std::string, std::string>>()) {
    cfg.apply_override(k + "=" + v);
  }
  LoadedStage out;
  out.cfg = sle_config_from(cfg);
  sagn::check_data(
      data.content_hash == manifest.at("dataset_hash").get<std::uint64_t>(),
      "dataset hash differs from the manifest");

  const auto ckpt_path =
      fs::path(run_dir) / ("stage" + std::to_string(stage) + ".sgnp");
  sagn::check_data(fs::exists(ckpt_path),
                   "missing checkpoint: " + ckpt_path.string());
  for (const auto& e : sagn::read_checkpoint(ckpt_path.string())) {
    if (e.name.rfind("label.", 0) == 0) out.with_label = true;
  }
  out.model.init(sagn::make_model_config(out.cfg, data), out.with_label,
                 data.num_classes, 0);
  std::vector<sagn::TensorRef<Real>> refs;
  out.model.collect_state(refs);
  sagn::load_checkpoint(refs, ckpt_path.string());
  return out;
}

// Rebuilds the propagated label embedding a stage trained with.
sagn::Matrix<Real> rebuild_label_embedding(const std::string& run_dir,
                                           const sagn::Dataset<Real>& data,
                                           const sagn::SleConfig& c,
                                           int stage) {
  const sagn::Graph g =
      c.add_self_loops ? sagn::with_self_loops(data.graph) : data.graph;
  const auto t = sagn::normalize(g, c.transition, c.add_self_loops);
  sagn::Matrix<Real> y0;
  if (stage == 0) {
    sagn::StageLabelState<Real> ls;
    ls.stage = 0;
    ls.raw_train = data.split.train;
    ls.enhanced = data.split.train;
    ls.task = data.task;
    y0 = sagn::init_label_embedding(ls, data.one_hot_labels());
  } else {
    const auto prev_soft = sagn::load_features<Real>(
        (fs::path(run_dir) /
         ("stage" + std::to_string(stage - 1) + "_soft_labels.bin"))
            .string());
    std::vector<sagn::NodeId> all(data.num_nodes());
    for (sagn::NodeId i = 0; i < data.num_nodes(); ++i) all[i] = i;
    auto confident =
        sagn::filter_confident(prev_soft, c.threshold, data.task, all);
    auto l_s = sagn::enhance_training_set(data.split.train, confident);
    sagn::Matrix<Real> pseudo;
    if (data.task == sagn::TaskKind::SingleLabel) {
      pseudo = sagn::one_hot<Real>(sagn::argmax_rows(prev_soft),
                                   data.num_classes);
    } else {
      pseudo = sagn::threshold_probs(prev_soft);
    }
    sagn::StageLabelState<Real> ls;
    ls.stage = stage;
    ls.hard_pseudo = &pseudo;
    ls.enhanced = l_s;
    ls.raw_train = data.split.train;
    ls.task = data.task;
    ls.filter_raw_train =
        data.split.setting == sagn::SplitSetting::Inductive &&
        c.inductive_filter_train_labels;
    ls.confident = &confident;
    y0 = sagn::init_label_embedding(ls, data.one_hot_labels());
  }
  return sagn::propagate_labels(t, y0, c.k_l, c.threads);
}

int cmd_gen_sbm(const std::string& out_dir, const sagn::Config& cfg) {
  sagn::SbmSpec spec = sbm_spec_from(cfg);
  const bool inductive = cfg.get_bool("sbm.inductive", false);
  cfg.get_int("run.threads", 1);  // accepted everywhere; generation is serial
  cfg.ensure_all_consumed();
  auto ds = sagn::generate_sbm<Real>(spec);
  if (inductive) sagn::make_inductive(ds);
  sagn::save_dataset(ds, out_dir);
  std::cout << "dataset " << ds.name << " nodes=" << ds.graph.num_nodes
            << " edges=" << ds.graph.num_edges << " hash=" << std::hex
            << ds.content_hash << std::dec << " -> " << out_dir << "\n";
  return 0;
}

int cmd_preprocess(const std::string& data_dir, const std::string& out_path,
                   const sagn::Config& cfg) {
  const sagn::SleConfig c = sle_config_from(cfg);
  cfg.ensure_all_consumed();
  auto data = sagn::load_dataset<Real>(data_dir);
  sagn::Stopwatch sw;
  prepare_hops(data, c, out_path, true);
  std::cout << "hop cache written to " << out_path << " (k_f=" << c.k_f
            << ", " << sw.ms() << " ms)\n";
  return 0;
}

int cmd_train(const std::string& data_dir, const std::string& run_dir,
              const std::string& hops_path, const sagn::Config& cfg,
              const std::vector<std::string>& argv) {
  const sagn::SleConfig c = sle_config_from(cfg);
  cfg.ensure_all_consumed();
  auto data = sagn::load_dataset<Real>(data_dir);
  fs::create_directories(run_dir);

  {
    std::ofstream mout(fs::path(run_dir) / "manifest.json");
    sagn::check_data(mout.good(), "cannot write manifest");
    mout << sagn::make_manifest(cfg, c.seed, data.name, data.content_hash,
                                argv)
                .dump(2)
         << "\n";
  }

  // warm the hop cache for transductive reruns; inductive runs build a
  // mixed stack inside run_sle
  if (data.split.setting == sagn::SplitSetting::Transductive &&
      !hops_path.empty()) {
    prepare_hops(data, c, hops_path, true);
  }

  auto result = sagn::run_sle(data, c);

  sagn::write_metrics_jsonl(sagn::collect_history(result),
                            (fs::path(run_dir) / "metrics.jsonl").string());
  for (const auto& st : result.stages) {
    std::vector<sagn::NamedTensor<Real>> snap = st.checkpoint;
    std::vector<sagn::TensorRef<Real>> refs;
    refs.reserve(snap.size());
    for (auto& nt : snap) refs.push_back({nt.name, &nt.value, nt.buffer});
    sagn::save_checkpoint(
        refs, (fs::path(run_dir) /
               ("stage" + std::to_string(st.stage) + ".sgnp"))
                  .string());
    sagn::save_features(st.y_soft,
                        (fs::path(run_dir) /
                         ("stage" + std::to_string(st.stage) +
                          "_soft_labels.bin"))
                            .string());
  }
  {
    nlohmann::ordered_json rep;
    rep["stages"] = sagn::stage_report(result);
    rep["wall_ms"] = result.wall_ms;
    std::ofstream rout(fs::path(run_dir) / "report.json");
    rout << rep.dump(2) << "\n";
  }
  for (const auto& st : result.stages) {
    std::cout << "stage " << st.stage << ": |L_s|=" << st.l_s.size()
              << " val=" << st.best_val_metric
              << " test=" << st.test_at_best << " (" << st.wall_ms
              << " ms)\n";
  }
  return 0;
}

int cmd_eval(const std::string& run_dir, const std::string& data_dir,
             int stage, const sagn::Config& cli_cfg) {
  cli_cfg.ensure_all_consumed();
  auto data = sagn::load_dataset<Real>(data_dir);
  if (stage < 0) {
    stage = 0;
    while (fs::exists(fs::path(run_dir) /
                      ("stage" + std::to_string(stage + 1) + ".sgnp"))) {
      ++stage;
    }
  }
  LoadedStage ls = load_stage(run_dir, data, stage);
  auto hops = prepare_hops(data, ls.cfg, "", false);
  sagn::Matrix<Real> label_embedding;
  const sagn::Matrix<Real>* label_ptr = nullptr;
  if (ls.with_label) {
    label_embedding = rebuild_label_embedding(run_dir, data, ls.cfg, stage);
    label_ptr = &label_embedding;
  }
  auto probs = sagn::predict_full(ls.model, hops, label_ptr, data.task,
                                  ls.cfg.variant, ls.cfg.threads);
  nlohmann::ordered_json out;
  out["stage"] = stage;
  out["train"] = sagn::split_metric(data, probs, data.split.train);
  out["valid"] = sagn::split_metric(data, probs, data.split.valid);
  out["test"] = sagn::split_metric(data, probs, data.split.test);
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_export_attn(const std::string& run_dir, const std::string& data_dir,
                    int stage, long long count, const std::string& out_path,
                    const sagn::Config& cli_cfg) {
  cli_cfg.ensure_all_consumed();
  auto data = sagn::load_dataset<Real>(data_dir);
  if (stage < 0) {
    stage = 0;
    while (fs::exists(fs::path(run_dir) /
                      ("stage" + std::to_string(stage + 1) + ".sgnp"))) {
      ++stage;
    }
  }
  LoadedStage ls = load_stage(run_dir, data, stage);
  auto hops = prepare_hops(data, ls.cfg, "", false);
  std::vector<sagn::NodeId> nodes;
  const long long n = static_cast<long long>(data.num_nodes());
  for (long long i = 0; i < std::min(n, count); ++i) {
    nodes.push_back(static_cast<sagn::NodeId>(i));
  }
  sagn::export_attention(ls.model.base(), hops, nodes, out_path,
                         ls.cfg.threads);
  std::cout << "attention weights for " << nodes.size() << " nodes -> "
            << out_path << "\n";
  return 0;
}

int cmd_leakage_probe(const std::string& data_dir, const std::string& kl_list,
                      const sagn::Config& cfg) {
  const sagn::SleConfig c = sle_config_from(cfg);
  cfg.ensure_all_consumed();
  auto data = sagn::load_dataset<Real>(data_dir);
  const sagn::Graph g = c.add_self_loops ? sagn::with_self_loops(data.graph)
                                         : data.graph;
  const auto t = sagn::normalize(g, c.transition, c.add_self_loops);
  const auto y_true = sagn::cast_matrix<Real, double>(data.one_hot_labels());

  std::vector<int> kls;
  {
    std::istringstream ss(kl_list);
    std::string tok;
    while (std::getline(ss, tok, ',')) kls.push_back(std::stoi(tok));
  }
  sagn::check(!kls.empty(), "leakage-probe: empty k_l list");
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (int kl : kls) {
    const auto rep =
        sagn::leakage_probe(t, y_true, data.split, kl, c.threads);
    nlohmann::ordered_json j;
    j["k_l"] = rep.k_l;
    j["train_self_mass"] = rep.train_self_mass;
    j["train_acc"] = rep.train_acc;
    j["val_acc"] = rep.val_acc;
    j["gap"] = rep.gap();
    out.push_back(j);
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SAGN + SLE toolkit: scalable graph neural network training "
               "with self-label enhancement"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> sets;
  std::string data_dir, out_path, run_dir, hops_path, kl_list = "1,9";
  int stage = -1;
  long long count = 64;
  long long seed_flag = -1;
  int threads_flag = 0;

  auto add_config_opts = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key=value config file");
    sub->add_option("--set", sets, "override a config key (key=value)");
    sub->add_option("--threads", threads_flag,
                    "worker threads (1 = strict reproducible mode)");
  };

  auto* gen = app.add_subcommand("gen-sbm", "generate a synthetic benchmark");
  gen->add_option("--out", out_path, "output dataset directory")->required();
  gen->add_option("--seed", seed_flag, "shortcut for --set sbm.seed=...");
  add_config_opts(gen);

  auto* pre = app.add_subcommand("preprocess",
                                 "build transition matrix and hop cache");
  pre->add_option("--data", data_dir, "dataset directory")->required();
  pre->add_option("--out", out_path, "hop cache output path")->required();
  add_config_opts(pre);

  auto* train = app.add_subcommand("train", "run multi-stage SLE training");
  train->add_option("--data", data_dir, "dataset directory")->required();
  train->add_option("--out", run_dir, "run output directory")->required();
  train->add_option("--hops", hops_path, "optional hop cache path to reuse");
  add_config_opts(train);

  auto* ev = app.add_subcommand("eval", "evaluate a trained checkpoint");
  ev->add_option("--run", run_dir, "run directory")->required();
  ev->add_option("--data", data_dir, "dataset directory")->required();
  ev->add_option("--stage", stage, "stage to evaluate (default: last)");
  add_config_opts(ev);

  auto* attn = app.add_subcommand("export-attn",
                                  "export per-node attention weights as CSV");
  attn->add_option("--run", run_dir, "run directory")->required();
  attn->add_option("--data", data_dir, "dataset directory")->required();
  attn->add_option("--out", out_path, "CSV output path")->required();
  attn->add_option("--stage", stage, "stage to export (default: last)");
  attn->add_option("--count", count, "number of nodes to export");
  add_config_opts(attn);

  auto* leak = app.add_subcommand("leakage-probe",
                                  "label-leakage report at given depths");
  leak->add_option("--data", data_dir, "dataset directory")->required();
  leak->add_option("--kl", kl_list, "comma-separated propagation depths");
  add_config_opts(leak);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);  // prints usage or help text
    return rc == 0 ? 0 : 1;
  }

  std::vector<std::string> argv_vec(argv, argv + argc);
  try {
    sagn::Config cfg = load_config(config_path, sets);
    if (threads_flag > 0) {
      cfg.apply_override("run.threads=" + std::to_string(threads_flag));
    }
    if (gen->parsed()) {
      if (seed_flag >= 0) {
        cfg.apply_override("sbm.seed=" + std::to_string(seed_flag));
      }
      return cmd_gen_sbm(out_path, cfg);
    }
    if (pre->parsed()) return cmd_preprocess(data_dir, out_path, cfg);
    if (train->parsed()) {
      return cmd_train(data_dir, run_dir, hops_path, cfg, argv_vec);
    }
    if (ev->parsed()) return cmd_eval(run_dir, data_dir, stage, cfg);
    if (attn->parsed()) {
      return cmd_export_attn(run_dir, data_dir, stage, count, out_path, cfg);
    }
    if (leak->parsed()) return cmd_leakage_probe(data_dir, kl_list, cfg);
    std::cerr << "no subcommand\n";
    return 1;
  } catch (const sagn::usage_error& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const sagn::numeric_error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const sagn::data_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
