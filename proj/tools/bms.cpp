// bms: one binary exposing every pipeline as a subcommand, with seeded
// reproducible runs and a manifest written beside each output.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "bms/bms.hpp"

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

int log_level() {  // 0 quiet, 1 info, 2 debug
  const char* v = std::getenv("BMS_LOG");
  if (!v) return 0;
  std::string s = v;
  if (s == "debug") return 2;
  if (s == "info") return 1;
  return 0;
}

void log_info(const std::string& msg) {
  if (log_level() >= 1) std::cerr << "[bms] " << msg << "\n";
}

std::string join_args(int argc, char** argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) {
    if (i) s += ' ';
    s += argv[i];
  }
  return s;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw bms::Error(bms::ErrorCode::IoError, "cannot write '" + path + "'");
  out << text;
}

void write_json_file(const std::string& path, const ordered_json& j) {
  write_text(path, j.dump(2) + "\n");
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw bms::Error(bms::ErrorCode::IoError, "cannot open '" + path + "'");
  json j;
  in >> j;
  return j;
}

// Global flags shared by every subcommand.
struct Common {
  bool json_out = false;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_flag("--json", c.json_out, "machine-readable JSON to stdout");
  cmd->add_option("--seed", c.seed, "master seed");
  cmd->add_option("--threads", c.threads, "worker thread cap (1 = bit-deterministic)");
}

// Manifest plumbing: digest inputs before, outputs after, write beside the
// first output as <path>.manifest.json.
struct Run {
  bms::RunManifest manifest;
  bms::WallTimer timer;

  Run(const std::string& cmdline, std::uint64_t seed, const ordered_json& cfg) {
    manifest.command = cmdline;
    manifest.seed = seed;
    manifest.config_hash = bms::sha256_hex(cfg.dump());
  }

  void finish(std::ostream& os, bool json_out, ordered_json result) {
    manifest.wall_seconds = timer.seconds();
    if (!manifest.outputs.empty())
      manifest.write(manifest.outputs.front().first + ".manifest.json");
    if (json_out) {
      result["manifest"] = manifest.to_json();
      os << result.dump(2) << "\n";
    } else {
      for (const auto& [k, v] : result.items())
        os << k << ": " << (v.is_string() ? v.get<std::string>() : v.dump())
           << "\n";
    }
  }
};

struct LoadedData {
  bms::DatasetSchema schema;
  std::vector<bms::BehaviorRecord> records;
  bms::AttributeSpace space;
  bms::MetaRule rule;
  std::vector<bms::BehaviorSubgraph> subgraphs;
};

LoadedData load_dataset(const std::string& schema_name, const std::string& input,
                        const std::string& rule_path) {
  LoadedData d;
  d.schema = bms::schema_by_name(schema_name);
  auto res = bms::read_csv(input, d.schema);
  if (res.records.empty())
    throw bms::Error(bms::ErrorCode::EmptyInput, "no usable rows in '" + input + "'");
  log_info("read " + std::to_string(res.records.size()) + " records, dropped " +
           std::to_string(res.diagnostics.size()));
  d.records = std::move(res.records);
  d.space = bms::AttributeSpace(d.schema.attribute_fields());
  d.rule = rule_path.empty()
               ? bms::MetaRule::clique_over(d.schema.attribute_fields(),
                                            schema_name + "-clique")
               : bms::MetaRule::load(rule_path);
  for (const auto& r : d.records)
    d.subgraphs.push_back(bms::build_subgraph(r, d.rule, d.space));
  return d;
}

ordered_json records_json(const std::vector<bms::BehaviorRecord>& records,
                          const std::vector<bms::IngestDiagnostic>& diags) {
  ordered_json out;
  auto arr = ordered_json::array();
  for (const auto& r : records) {
    ordered_json jr;
    jr["id"] = r.record_id;
    jr["values"] = r.values;
    if (r.label) jr["label"] = *r.label;
    arr.push_back(std::move(jr));
  }
  out["records"] = std::move(arr);
  auto darr = ordered_json::array();
  for (const auto& d : diags)
    darr.push_back({{"row", d.row}, {"message", d.message}});
  out["dropped"] = std::move(darr);
  return out;
}

std::vector<bms::BehaviorSubgraph> read_subgraphs(const std::string& path) {
  json j = read_json_file(path);
  const json* arr = nullptr;
  if (j.is_array()) arr = &j;
  else if (j.contains("subgraphs")) arr = &j.at("subgraphs");
  else if (j.contains("samples")) arr = &j.at("samples");
  else
    throw bms::Error(bms::ErrorCode::SchemaMismatch,
                     "'" + path + "' holds no subgraph array");
  std::vector<bms::BehaviorSubgraph> out;
  for (const auto& e : *arr) out.push_back(bms::BehaviorSubgraph::from_json(e));
  return out;
}

// Forward pass with trained parameters on an arbitrary row subset; mirrors
// the training-time evaluation path.
std::vector<int> detect_predict(const bms::AttributeSpace& space,
                                const std::vector<bms::BehaviorSubgraph>& subgraphs,
                                const std::vector<std::size_t>& graph_rows,
                                const std::vector<std::size_t>& eval_rows,
                                bms::ModelParams& params,
                                const bms::GnnConfig& cfg) {
  std::vector<bms::BehaviorSubgraph> graph_sgs;
  for (std::size_t i : graph_rows) graph_sgs.push_back(subgraphs[i]);
  bms::HeteroGraph graph = bms::accumulate_for_training(graph_sgs, space);
  std::size_t n_nodes = space.size();
  bms::Tensor emb = bms::hashed_embeddings(space, cfg.d0,
                                           bms::derive_seed(cfg.seed, "emb"));
  auto rel = bms::relation_matrices(graph, n_nodes, cfg.relations, cfg.mean_norm);
  std::vector<const bms::BehaviorSubgraph*> eval_sgs;
  for (std::size_t i : eval_rows) eval_sgs.push_back(&subgraphs[i]);
  bms::Tensor P = bms::pooling_matrix(eval_sgs, n_nodes);

  bms::Tape tape;
  std::vector<bms::Tape::Ref> mats;
  for (const auto& m : rel) mats.push_back(tape.constant(m));
  bool use_trained_emb =
      params.has("emb") && params.value("emb").shape == emb.shape;
  bms::Tape::Ref emb_ref = use_trained_emb ? tape.constant(params.value("emb"))
                                           : tape.constant(emb);
  bms::Tape::Ref h = bms::rgcn_forward(tape, params, cfg, emb_ref, mats);
  bms::Tape::Ref logits =
      bms::mlp_head(tape, params, tape.matmul(tape.constant(P), h));
  const bms::Tensor& Z = tape.value(logits);
  std::vector<int> pred;
  for (std::size_t i = 0; i < eval_rows.size(); ++i) {
    int best = 0;
    for (std::size_t j = 1; j < Z.cols(); ++j)
      if (Z.at(i, j) > Z.at(i, best)) best = int(j);
    pred.push_back(best);
  }
  return pred;
}

bms::GnnConfig gnn_config_from_json(const json& j) {
  bms::GnnConfig cfg;
  cfg.d0 = j.at("d0").get<std::size_t>();
  cfg.hidden = j.at("hidden").get<std::size_t>();
  cfg.layers = j.at("layers").get<std::size_t>();
  cfg.relations = j.at("relations").get<std::size_t>();
  cfg.mean_norm = j.at("mean_norm").get<bool>();
  cfg.gated = j.at("gated").get<bool>();
  cfg.head_h1 = j.at("head_h1").get<std::size_t>();
  cfg.head_h2 = j.at("head_h2").get<std::size_t>();
  cfg.classes = j.at("classes").get<std::size_t>();
  cfg.lr = j.at("lr").get<double>();
  cfg.epochs = j.at("epochs").get<std::size_t>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  return cfg;
}

ordered_json gnn_config_to_json(const bms::GnnConfig& cfg) {
  return {{"d0", cfg.d0},           {"hidden", cfg.hidden},
          {"layers", cfg.layers},   {"relations", cfg.relations},
          {"mean_norm", cfg.mean_norm}, {"gated", cfg.gated},
          {"head_h1", cfg.head_h1}, {"head_h2", cfg.head_h2},
          {"classes", cfg.classes}, {"lr", cfg.lr},
          {"epochs", cfg.epochs},   {"seed", cfg.seed}};
}

std::vector<std::size_t> parse_size_list(const std::string& s) {
  std::vector<std::size_t> out;
  std::istringstream is(s);
  std::string tok;
  while (std::getline(is, tok, ',')) out.push_back(std::stoull(tok));
  return out;
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::istringstream is(s);
  std::string tok;
  while (std::getline(is, tok, ',')) out.push_back(std::stod(tok));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"behavioral molecular structure toolkit"};
  app.require_subcommand(1);
  std::string cmdline = join_args(argc, argv);

  // ---- synth ---------------------------------------------------------------
  std::string sy_schema = "crime", sy_out = "synth.csv";
  std::size_t sy_n = 1000;
  Common sy_c;
  auto* synth = app.add_subcommand("synth", "write a planted-rule synthetic CSV");
  synth->add_option("--schema", sy_schema, "crime | fraud | interact")->required();
  synth->add_option("--n", sy_n, "row count");
  synth->add_option("--out", sy_out, "output CSV path")->required();
  add_common(synth, sy_c);

  // ---- ingest --------------------------------------------------------------
  std::string in_schema, in_input, in_out = "records.json";
  Common in_c;
  auto* ingest = app.add_subcommand("ingest", "CSV -> transformed behavior records");
  ingest->add_option("--schema", in_schema)->required();
  ingest->add_option("--input", in_input, "input CSV")->required();
  ingest->add_option("--out", in_out, "records JSON path");
  add_common(ingest, in_c);

  // ---- build-graph ---------------------------------------------------------
  std::string bg_schema, bg_input, bg_rule, bg_prefix = "graph";
  Common bg_c;
  auto* bgraph = app.add_subcommand("build-graph",
                                    "records -> subgraphs + accumulated graph");
  bgraph->add_option("--schema", bg_schema)->required();
  bgraph->add_option("--input", bg_input)->required();
  bgraph->add_option("--rule", bg_rule, "meta-rule JSON (default: clique)");
  bgraph->add_option("--out-prefix", bg_prefix,
                     "writes <prefix>.space.json/.graph.json/.subgraphs.json");
  add_common(bgraph, bg_c);

  // ---- export-dot ----------------------------------------------------------
  std::string ed_space, ed_graph, ed_out = "graph.dot";
  Common ed_c;
  auto* edot = app.add_subcommand("export-dot", "accumulated graph -> DOT");
  edot->add_option("--space", ed_space, "space JSON")->required();
  edot->add_option("--graph", ed_graph, "graph JSON")->required();
  edot->add_option("--out", ed_out, "DOT path");
  add_common(edot, ed_c);

  // ---- detect-train --------------------------------------------------------
  std::string dt_schema = "crime", dt_input, dt_rule, dt_out = "model.ckpt";
  std::size_t dt_d0 = 64, dt_hidden = 64, dt_epochs = 150, dt_layers = 2;
  double dt_lr = 1e-3;
  Common dt_c;
  auto* dtrain = app.add_subcommand("detect-train", "train the behavior classifier");
  dtrain->add_option("--schema", dt_schema);
  dtrain->add_option("--input", dt_input)->required();
  dtrain->add_option("--rule", dt_rule);
  dtrain->add_option("--d0", dt_d0, "embedding dimension");
  dtrain->add_option("--hidden", dt_hidden);
  dtrain->add_option("--epochs", dt_epochs);
  dtrain->add_option("--layers", dt_layers, "message-passing layers");
  dtrain->add_option("--lr", dt_lr, "Adam step size");
  dtrain->add_option("--out", dt_out, "checkpoint path");
  add_common(dtrain, dt_c);

  // ---- detect-eval ---------------------------------------------------------
  std::string de_input, de_ckpt = "model.ckpt", de_out, de_group;
  Common de_c;
  auto* deval = app.add_subcommand("detect-eval",
                                   "re-evaluate a checkpoint on its test split");
  deval->add_option("--input", de_input)->required();
  deval->add_option("--ckpt", de_ckpt);
  deval->add_option("--group-field", de_group,
                    "record field for Cramer's V vs predicted class");
  deval->add_option("--out", de_out, "report JSON path");
  add_common(deval, de_c);

  // ---- predict-eval --------------------------------------------------------
  std::string pe_input, pe_scorer = "pop", pe_out;
  std::size_t pe_k = 10, pe_neg = 100;
  Common pe_c;
  auto* peval = app.add_subcommand("predict-eval",
                                   "leave-last-out ranking evaluation");
  peval->add_option("--input", pe_input, "interaction CSV")->required();
  peval->add_option("--scorer", pe_scorer, "pop | itemknn");
  peval->add_option("--k", pe_k);
  peval->add_option("--negatives", pe_neg);
  peval->add_option("--out", pe_out, "metrics JSON path");
  add_common(peval, pe_c);

  // ---- entropy -------------------------------------------------------------
  std::string en_input, en_checkpoints = "5,10,20,40", en_out = "entropy.csv";
  Common en_c;
  auto* entropy = app.add_subcommand("entropy", "per-user entropy curve");
  entropy->add_option("--input", en_input, "interaction CSV")->required();
  entropy->add_option("--checkpoints", en_checkpoints, "comma-separated prefix sizes");
  entropy->add_option("--out", en_out, "curve CSV path");
  add_common(entropy, en_c);

  // ---- generate-train ------------------------------------------------------
  std::string gt_schema = "fraud", gt_input, gt_rule, gt_out = "vae.ckpt";
  std::size_t gt_latent = 16, gt_hidden = 32, gt_epochs = 150;
  Common gt_c;
  auto* gtrain = app.add_subcommand("generate-train",
                                    "train the graph VAE on fraud behaviors");
  gtrain->add_option("--schema", gt_schema);
  gtrain->add_option("--input", gt_input)->required();
  gtrain->add_option("--rule", gt_rule);
  gtrain->add_option("--latent", gt_latent);
  gtrain->add_option("--hidden", gt_hidden);
  gtrain->add_option("--epochs", gt_epochs);
  gtrain->add_option("--out", gt_out, "checkpoint path");
  add_common(gtrain, gt_c);

  // ---- generate-sample -----------------------------------------------------
  std::string gs_ckpt = "vae.ckpt", gs_out = "samples.json";
  std::size_t gs_count = 100;
  double gs_threshold = 0.5;
  Common gs_c;
  auto* gsample = app.add_subcommand("generate-sample", "sample trained VAE");
  gsample->add_option("--ckpt", gs_ckpt);
  gsample->add_option("--count", gs_count);
  gsample->add_option("--threshold", gs_threshold);
  gsample->add_option("--out", gs_out, "samples JSON path");
  add_common(gsample, gs_c);

  // ---- generate-harness ----------------------------------------------------
  std::string gh_schema = "fraud", gh_input, gh_rule, gh_mode = "S1",
              gh_grid = "", gh_out = "harness.csv";
  double gh_hide = 0.0;
  std::size_t gh_reps = 3, gh_vae_epochs = 120, gh_det_epochs = 120;
  bool gh_augment = false;
  Common gh_c;
  auto* gharness = app.add_subcommand("generate-harness",
                                      "S1/S2 fraud strategy evaluation");
  gharness->add_option("--schema", gh_schema);
  gharness->add_option("--input", gh_input)->required();
  gharness->add_option("--rule", gh_rule);
  gharness->add_option("--mode", gh_mode, "S1 | S2");
  gharness->add_option("--hide", gh_hide, "fraction of frauds hidden from the VAE");
  gharness->add_option("--grid", gh_grid, "comma-separated h values (overrides --hide)");
  gharness->add_option("--reps", gh_reps);
  gharness->add_option("--vae-epochs", gh_vae_epochs);
  gharness->add_option("--det-epochs", gh_det_epochs);
  gharness->add_flag("--augment", gh_augment, "S1: keep hidden frauds in training");
  gharness->add_option("--out", gh_out, "grid CSV path");
  add_common(gharness, gh_c);

  // ---- metrics-compare -----------------------------------------------------
  std::string mc_gen, mc_train, mc_space, mc_out;
  std::size_t mc_kernel = 3;
  Common mc_c;
  auto* mcompare = app.add_subcommand("metrics-compare",
                                      "KSI / orbit / novel / unique between sets");
  mcompare->add_option("--generated", mc_gen, "generated subgraph JSON")->required();
  mcompare->add_option("--training", mc_train, "training subgraph JSON")->required();
  mcompare->add_option("--space", mc_space, "space JSON")->required();
  mcompare->add_option("--kernel-size", mc_kernel);
  mcompare->add_option("--out", mc_out, "report JSON path");
  add_common(mcompare, mc_c);

  // ---- express-curve -------------------------------------------------------
  std::int64_t ec_nmin = 1, ec_nmax = 10, ec_krep = 100, ec_kstruct = 2;
  std::string ec_out = "express.csv";
  Common ec_c;
  auto* ecurve = app.add_subcommand("express-curve",
                                    "expressive-power curves and crossover");
  ecurve->add_option("--n-min", ec_nmin);
  ecurve->add_option("--n-max", ec_nmax);
  ecurve->add_option("--k-rep", ec_krep);
  ecurve->add_option("--k-struct", ec_kstruct);
  ecurve->add_option("--out", ec_out, "curve CSV path");
  add_common(ecurve, ec_c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*synth) {
      ordered_json cfg{{"schema", sy_schema}, {"n", sy_n}, {"seed", sy_c.seed}};
      Run run(cmdline, sy_c.seed, cfg);
      bms::synth_dataset(sy_schema, sy_out, sy_n, sy_c.seed);
      run.manifest.add_output(sy_out);
      run.finish(std::cout, sy_c.json_out,
                 {{"out", sy_out}, {"rows", sy_n}, {"schema", sy_schema}});
    } else if (*ingest) {
      ordered_json cfg{{"schema", in_schema}};
      Run run(cmdline, in_c.seed, cfg);
      run.manifest.add_input(in_input);
      auto schema = bms::schema_by_name(in_schema);
      auto res = bms::read_csv(in_input, schema);
      write_json_file(in_out, records_json(res.records, res.diagnostics));
      run.manifest.add_output(in_out);
      run.finish(std::cout, in_c.json_out,
                 {{"out", in_out},
                  {"records", res.records.size()},
                  {"dropped", res.diagnostics.size()}});
    } else if (*bgraph) {
      ordered_json cfg{{"schema", bg_schema}, {"rule", bg_rule}};
      Run run(cmdline, bg_c.seed, cfg);
      run.manifest.add_input(bg_input);
      if (!bg_rule.empty()) run.manifest.add_input(bg_rule);
      LoadedData d = load_dataset(bg_schema, bg_input, bg_rule);
      bms::HeteroGraph graph = bms::accumulate(d.subgraphs, d.space);
      write_json_file(bg_prefix + ".space.json", d.space.to_json());
      write_json_file(bg_prefix + ".graph.json", graph.to_json());
      auto arr = ordered_json::array();
      for (const auto& sg : d.subgraphs) arr.push_back(sg.to_json());
      write_json_file(bg_prefix + ".subgraphs.json", {{"subgraphs", arr}});
      run.manifest.add_output(bg_prefix + ".space.json");
      run.manifest.add_output(bg_prefix + ".graph.json");
      run.manifest.add_output(bg_prefix + ".subgraphs.json");
      run.finish(std::cout, bg_c.json_out,
                 {{"nodes", d.space.size()},
                  {"edges", graph.edges().size()},
                  {"behaviors", d.subgraphs.size()}});
    } else if (*edot) {
      ordered_json cfg{{"space", ed_space}, {"graph", ed_graph}};
      Run run(cmdline, ed_c.seed, cfg);
      run.manifest.add_input(ed_space);
      run.manifest.add_input(ed_graph);
      auto space = bms::AttributeSpace::from_json(read_json_file(ed_space));
      auto graph = bms::HeteroGraph::from_json(read_json_file(ed_graph));
      bms::export_dot(graph, space, ed_out);
      run.manifest.add_output(ed_out);
      run.finish(std::cout, ed_c.json_out, {{"out", ed_out}});
    } else if (*dtrain) {
      bms::GnnConfig gcfg;
      gcfg.d0 = dt_d0;
      gcfg.hidden = dt_hidden;
      gcfg.head_h1 = dt_hidden;
      gcfg.head_h2 = dt_hidden / 2;
      gcfg.epochs = dt_epochs;
      gcfg.layers = dt_layers;
      gcfg.lr = dt_lr;
      gcfg.seed = dt_c.seed;
      Run run(cmdline, dt_c.seed, gnn_config_to_json(gcfg));
      run.manifest.add_input(dt_input);
      if (!dt_rule.empty()) run.manifest.add_input(dt_rule);
      LoadedData d = load_dataset(dt_schema, dt_input, dt_rule);
      std::vector<bms::BehaviorSubgraph> sgs;
      std::vector<std::string> labels;
      for (std::size_t i = 0; i < d.records.size(); ++i) {
        if (!d.records[i].label) continue;
        sgs.push_back(d.subgraphs[i]);
        labels.push_back(*d.records[i].label);
      }
      if (labels.empty())
        throw bms::Error(bms::ErrorCode::NoLabels, "no labeled records");
      gcfg.relations = std::size_t(d.rule.edge_type_count());
      bms::DetectTrainResult res = bms::train_detect(d.space, sgs, labels, gcfg);
      gcfg.classes = res.label_vocab.size();
      bms::save_checkpoint(res.params, dt_out);
      ordered_json meta;
      meta["schema"] = dt_schema;
      meta["rule"] = d.rule.to_json();
      meta["config"] = gnn_config_to_json(gcfg);
      meta["label_vocab"] = res.label_vocab;
      meta["val_accuracy"] = res.val_accuracy;
      meta["test_accuracy"] = res.test_accuracy;
      meta["final_loss"] = res.loss_curve.back();
      write_json_file(dt_out + ".meta.json", meta);
      run.manifest.add_output(dt_out);
      run.manifest.add_output(dt_out + ".meta.json");
      run.finish(std::cout, dt_c.json_out,
                 {{"out", dt_out},
                  {"classes", res.label_vocab.size()},
                  {"val_accuracy", res.val_accuracy},
                  {"test_accuracy", res.test_accuracy},
                  {"final_loss", res.loss_curve.back()}});
    } else if (*deval) {
      json meta = read_json_file(de_ckpt + ".meta.json");
      bms::GnnConfig gcfg = gnn_config_from_json(meta.at("config"));
      ordered_json cfg{{"ckpt", de_ckpt}};
      Run run(cmdline, de_c.seed, cfg);
      run.manifest.add_input(de_input);
      run.manifest.add_input(de_ckpt);
      LoadedData d = load_dataset(meta.at("schema").get<std::string>(), de_input,
                                  "");
      d.rule = bms::MetaRule::from_json(meta.at("rule"));
      d.space = bms::AttributeSpace(d.schema.attribute_fields());
      d.subgraphs.clear();
      for (const auto& r : d.records)
        d.subgraphs.push_back(bms::build_subgraph(r, d.rule, d.space));
      auto vocab = meta.at("label_vocab").get<std::vector<std::string>>();
      std::vector<bms::BehaviorSubgraph> sgs;
      std::vector<std::string> labels;
      std::vector<std::string> group;
      for (std::size_t i = 0; i < d.records.size(); ++i) {
        if (!d.records[i].label) continue;
        sgs.push_back(d.subgraphs[i]);
        labels.push_back(*d.records[i].label);
        if (!de_group.empty()) {
          auto it = d.records[i].values.find(de_group);
          group.push_back(it == d.records[i].values.end() ? "" : it->second);
        }
      }
      std::vector<int> y;
      for (const auto& l : labels) {
        auto it = std::lower_bound(vocab.begin(), vocab.end(), l);
        if (it == vocab.end() || *it != l)
          throw bms::Error(bms::ErrorCode::NotFound,
                           "label '" + l + "' unseen at training time");
        y.push_back(int(it - vocab.begin()));
      }
      bms::SplitIndices split = bms::stratified_split(y, gcfg.seed);
      bms::ModelParams params = bms::load_checkpoint(de_ckpt);
      std::vector<int> pred =
          detect_predict(d.space, sgs, split.train, split.test, params, gcfg);
      std::vector<std::string> y_true, y_pred, g_test;
      for (std::size_t i = 0; i < split.test.size(); ++i) {
        y_true.push_back(labels[split.test[i]]);
        y_pred.push_back(vocab[pred[i]]);
        if (!group.empty()) g_test.push_back(group[split.test[i]]);
      }
      bms::ClassReport report = bms::classification_metrics(y_true, y_pred);
      ordered_json result;
      result["accuracy"] = report.accuracy;
      result["macro_f1"] = report.macro_f1;
      result["kappa"] = report.kappa;
      result["test_rows"] = split.test.size();
      if (!g_test.empty()) {
        bms::CramersV v = bms::cramers_v(y_pred, g_test);
        result["cramers_v"] = v.value;
        result["cramers_v_degenerate"] = v.degenerate;
      }
      if (!de_out.empty()) {
        ordered_json full = result;
        full["report"] = report.to_json();
        write_json_file(de_out, full);
        run.manifest.add_output(de_out);
      }
      run.finish(std::cout, de_c.json_out, result);
    } else if (*peval) {
      ordered_json cfg{{"scorer", pe_scorer}, {"k", pe_k}, {"negatives", pe_neg}};
      Run run(cmdline, pe_c.seed, cfg);
      run.manifest.add_input(pe_input);
      bms::InteractionLog log = bms::InteractionLog::from_csv(pe_input);
      bms::Scorer scorer;
      if (pe_scorer == "pop") scorer = bms::Scorer::Pop;
      else if (pe_scorer == "itemknn") scorer = bms::Scorer::ItemKnn;
      else
        throw bms::Error(bms::ErrorCode::NotFound,
                         "unknown scorer '" + pe_scorer + "'");
      bms::PredictEvalResult res =
          bms::evaluate_scorer(log, scorer, pe_k, pe_neg, pe_c.seed);
      ordered_json result = res.metrics.to_json();
      result["users_evaluated"] = res.users_evaluated;
      if (!pe_out.empty()) {
        write_json_file(pe_out, result);
        run.manifest.add_output(pe_out);
      }
      run.finish(std::cout, pe_c.json_out, result);
    } else if (*entropy) {
      ordered_json cfg{{"checkpoints", en_checkpoints}};
      Run run(cmdline, en_c.seed, cfg);
      run.manifest.add_input(en_input);
      bms::InteractionLog log = bms::InteractionLog::from_csv(en_input);
      std::vector<std::string> users;
      for (const auto& [u, h] : log.click_histories()) users.push_back(u);
      bms::EntropyCurve curve =
          bms::entropy_curve(log, users, parse_size_list(en_checkpoints));
      std::ostringstream csv;
      csv << "checkpoint,mean_entropy,users\n";
      for (std::size_t i = 0; i < curve.checkpoints.size(); ++i)
        csv << curve.checkpoints[i] << "," << curve.mean_entropy[i] << ","
            << curve.users_counted[i] << "\n";
      write_text(en_out, csv.str());
      run.manifest.add_output(en_out);
      ordered_json result{{"out", en_out}, {"users", users.size()}};
      result["mean_entropy"] = curve.mean_entropy;
      run.finish(std::cout, en_c.json_out, result);
    } else if (*gtrain) {
      ordered_json cfg{{"latent", gt_latent},
                       {"hidden", gt_hidden},
                       {"epochs", gt_epochs},
                       {"seed", gt_c.seed}};
      Run run(cmdline, gt_c.seed, cfg);
      run.manifest.add_input(gt_input);
      if (!gt_rule.empty()) run.manifest.add_input(gt_rule);
      LoadedData d = load_dataset(gt_schema, gt_input, gt_rule);
      bms::AttrVocab vocab;
      std::vector<bms::VaeGraph> graphs;
      for (std::size_t i = 0; i < d.records.size(); ++i) {
        if (!d.records[i].label || *d.records[i].label != "1") continue;
        graphs.push_back(
            bms::vae_graph_from_subgraph(d.subgraphs[i], d.space, d.rule, vocab));
      }
      if (graphs.empty())
        throw bms::Error(bms::ErrorCode::EmptyInput, "no fraud rows to train on");
      bms::VaeConfig vc;
      vc.k = d.rule.node_fields.size();
      vc.latent = gt_latent;
      vc.hidden = gt_hidden;
      vc.epochs = gt_epochs;
      vc.attr_classes = vocab.size();
      vc.edge_classes = std::size_t(d.rule.edge_type_count());
      vc.seed = gt_c.seed;
      bms::VaeTrainResult res = bms::train_vae(graphs, vc);
      bms::save_checkpoint(res.params, gt_out);
      ordered_json meta;
      meta["schema"] = gt_schema;
      meta["rule"] = d.rule.to_json();
      meta["space"] = d.space.to_json();
      auto vj = ordered_json::array();
      for (const auto& [field, token] : vocab.classes)
        vj.push_back({{"field", field}, {"token", token}});
      meta["vocab"] = std::move(vj);
      meta["config"] = ordered_json{{"k", vc.k},
                                    {"latent", vc.latent},
                                    {"hidden", vc.hidden},
                                    {"enc_layers", vc.enc_layers},
                                    {"attr_classes", vc.attr_classes},
                                    {"edge_classes", vc.edge_classes},
                                    {"lr", vc.lr},
                                    {"epochs", vc.epochs},
                                    {"seed", vc.seed}};
      meta["elbo_first"] = res.elbo_curve.front();
      meta["elbo_last"] = res.elbo_curve.back();
      write_json_file(gt_out + ".meta.json", meta);
      run.manifest.add_output(gt_out);
      run.manifest.add_output(gt_out + ".meta.json");
      run.finish(std::cout, gt_c.json_out,
                 {{"out", gt_out},
                  {"graphs", graphs.size()},
                  {"elbo_first", res.elbo_curve.front()},
                  {"elbo_last", res.elbo_curve.back()}});
    } else if (*gsample) {
      json meta = read_json_file(gs_ckpt + ".meta.json");
      ordered_json cfg{{"ckpt", gs_ckpt}, {"count", gs_count}, {"seed", gs_c.seed}};
      Run run(cmdline, gs_c.seed, cfg);
      run.manifest.add_input(gs_ckpt);
      bms::VaeConfig vc;
      const json& mc = meta.at("config");
      vc.k = mc.at("k").get<std::size_t>();
      vc.latent = mc.at("latent").get<std::size_t>();
      vc.hidden = mc.at("hidden").get<std::size_t>();
      vc.enc_layers = mc.at("enc_layers").get<std::size_t>();
      vc.attr_classes = mc.at("attr_classes").get<std::size_t>();
      vc.edge_classes = mc.at("edge_classes").get<std::size_t>();
      bms::AttrVocab vocab;
      for (const auto& e : meta.at("vocab"))
        vocab.intern(e.at("field").get<int>(), e.at("token").get<std::string>());
      auto space = bms::AttributeSpace::from_json(meta.at("space"));
      auto rule = bms::MetaRule::from_json(meta.at("rule"));
      bms::ModelParams params = bms::load_checkpoint(gs_ckpt);
      bms::SampleResult res =
          bms::sample_vae(params, vc, gs_count, gs_c.seed, gs_threshold,
                          bms::meta_rule_validator(rule));
      auto arr = ordered_json::array();
      for (std::size_t i = 0; i < res.graphs.size(); ++i)
        arr.push_back(bms::vae_graph_to_subgraph(res.graphs[i], vocab, space,
                                                 "gen-" + std::to_string(i))
                          .to_json());
      ordered_json out;
      out["samples"] = std::move(arr);
      out["rejection_rate"] = res.rejection_rate();
      out["attempts"] = res.attempts;
      write_json_file(gs_out, out);
      run.manifest.add_output(gs_out);
      run.finish(std::cout, gs_c.json_out,
                 {{"out", gs_out},
                  {"sampled", res.graphs.size()},
                  {"rejection_rate", res.rejection_rate()}});
    } else if (*gharness) {
      ordered_json cfg{{"mode", gh_mode}, {"hide", gh_hide},  {"grid", gh_grid},
                       {"reps", gh_reps}, {"seed", gh_c.seed}};
      Run run(cmdline, gh_c.seed, cfg);
      run.manifest.add_input(gh_input);
      if (!gh_rule.empty()) run.manifest.add_input(gh_rule);
      LoadedData d = load_dataset(gh_schema, gh_input, gh_rule);
      // raw amounts come from the CSV directly; the schema buckets them
      std::map<std::string, double> amount_by_id;
      {
        std::ifstream in(gh_input, std::ios::binary);
        auto rows = bms::parse_csv(in);
        std::size_t id_col = 0, amt_col = 0;
        bool have_id = false, have_amt = false;
        for (std::size_t c = 0; c < rows[0].size(); ++c) {
          if (rows[0][c] == d.schema.id_field) { id_col = c; have_id = true; }
          if (rows[0][c] == "amount") { amt_col = c; have_amt = true; }
        }
        if (!have_id || !have_amt)
          throw bms::Error(bms::ErrorCode::SchemaMismatch,
                           "harness input needs id and amount columns");
        for (std::size_t r = 1; r < rows.size(); ++r)
          if (amt_col < rows[r].size() && id_col < rows[r].size())
            amount_by_id[rows[r][id_col]] = std::stod(rows[r][amt_col]);
      }
      std::vector<bms::BehaviorSubgraph> sgs;
      std::vector<int> y;
      std::vector<double> amounts;
      bms::AttrVocab vocab;
      for (std::size_t i = 0; i < d.records.size(); ++i) {
        if (!d.records[i].label) continue;
        sgs.push_back(d.subgraphs[i]);
        y.push_back(*d.records[i].label == "1" ? 1 : 0);
        auto it = amount_by_id.find(d.records[i].record_id);
        amounts.push_back(it == amount_by_id.end() ? 0.0 : it->second);
        if (y.back() == 1)
          bms::vae_graph_from_subgraph(sgs.back(), d.space, d.rule, vocab);
      }
      bms::HarnessConfig hc;
      if (gh_mode == "S1") hc.mode = bms::HarnessMode::S1;
      else if (gh_mode == "S2") hc.mode = bms::HarnessMode::S2;
      else
        throw bms::Error(bms::ErrorCode::NotFound, "mode must be S1 or S2");
      hc.hide = gh_hide;
      hc.augment = gh_augment;
      hc.repetitions = gh_reps;
      hc.seed = gh_c.seed;
      hc.threads = gh_c.threads;
      hc.vae.epochs = gh_vae_epochs;
      hc.vae.latent = 16;
      hc.vae.hidden = 32;
      hc.detector.epochs = gh_det_epochs;
      hc.detector.d0 = 64;
      hc.detector.hidden = 64;
      hc.detector.head_h1 = 64;
      hc.detector.head_h2 = 32;
      std::vector<double> grid =
          gh_grid.empty() ? std::vector<double>{gh_hide} : parse_double_list(gh_grid);
      std::vector<bms::HarnessGridRow> rows = bms::harness_grid(
          d.space, sgs, y, amounts, d.rule, vocab, hc, grid);
      write_text(gh_out, bms::harness_grid_csv(rows));
      run.manifest.add_output(gh_out);
      ordered_json result{{"out", gh_out}, {"mode", gh_mode}};
      auto rj = ordered_json::array();
      for (const auto& r : rows)
        rj.push_back({{"h", r.h},
                      {"auc_mean", r.auc_mean},
                      {"auc_stdev", r.auc_stdev},
                      {"prevented_loss", r.prevented_mean}});
      result["rows"] = std::move(rj);
      run.finish(std::cout, gh_c.json_out, result);
    } else if (*mcompare) {
      ordered_json cfg{{"kernel_size", mc_kernel}};
      Run run(cmdline, mc_c.seed, cfg);
      run.manifest.add_input(mc_gen);
      run.manifest.add_input(mc_train);
      run.manifest.add_input(mc_space);
      auto space = bms::AttributeSpace::from_json(read_json_file(mc_space));
      std::vector<bms::LabeledGraph> gen, train;
      for (const auto& sg : read_subgraphs(mc_gen))
        gen.push_back(bms::LabeledGraph::from_subgraph(sg, space));
      for (const auto& sg : read_subgraphs(mc_train))
        train.push_back(bms::LabeledGraph::from_subgraph(sg, space));
      if (gen.empty() || train.empty())
        throw bms::Error(bms::ErrorCode::EmptyInput, "empty graph set");
      double ksi_sum = 0.0, orbit_sum = 0.0;
      std::size_t pairs = 0;
      for (const auto& g : gen)
        for (const auto& t : train) {
          ksi_sum += bms::ksi(g, t, mc_kernel);
          orbit_sum += bms::orbit_similarity(g, t);
          ++pairs;
        }
      bms::NovelUnique nu = bms::novel_unique(gen, train);
      ordered_json result{{"mean_ksi", ksi_sum / double(pairs)},
                          {"mean_orbit_similarity", orbit_sum / double(pairs)},
                          {"novel", nu.novel_fraction},
                          {"unique", nu.unique_fraction},
                          {"distinct_generated", nu.distinct}};
      if (!mc_out.empty()) {
        write_json_file(mc_out, result);
        run.manifest.add_output(mc_out);
      }
      run.finish(std::cout, mc_c.json_out, result);
    } else if (*ecurve) {
      ordered_json cfg{{"n_min", ec_nmin},
                       {"n_max", ec_nmax},
                       {"k_rep", ec_krep},
                       {"k_struct", ec_kstruct}};
      Run run(cmdline, ec_c.seed, cfg);
      auto rows = bms::express_curve(ec_nmin, ec_nmax, ec_krep, ec_kstruct);
      write_text(ec_out, bms::curve_csv(rows));
      run.manifest.add_output(ec_out);
      auto cross = bms::crossover(ec_krep, ec_kstruct);
      ordered_json result{{"out", ec_out}, {"rows", rows.size()}};
      if (cross) result["crossover_n"] = *cross;
      else result["crossover_n"] = nullptr;
      run.finish(std::cout, ec_c.json_out, result);
    }
  } catch (const bms::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == bms::ErrorCode::NumericFailure ? 3 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
