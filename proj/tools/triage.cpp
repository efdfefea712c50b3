// triage: corpus generation, training, evaluation, benchmarking,
// explanations, projection maps and the HTTP service in one binary.

#include <CLI11.hpp>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>
#include <sstream>
#include <thread>

#include "triage/bench.hpp"
#include "triage/errors.hpp"
#include "triage/explain.hpp"
#include "triage/hash.hpp"
#include "triage/pipeline.hpp"
#include "triage/service.hpp"

// After Eigen: <resolv.h> defines a `_res` macro that breaks Eigen headers.
#include <httplib.h>

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;
using namespace triage;

namespace {

void note(const std::string& msg) { std::cerr << "[triage] " << msg << '\n'; }

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

// Options shared by every subcommand.
struct Common {
  std::uint64_t seed = 0;
  std::string config_path;
  CLI::Option* seed_opt = nullptr;
  std::vector<std::string> argv;

  bool seed_given() const { return seed_opt && seed_opt->count() > 0; }
  ojson config() const {
    if (config_path.empty()) return ojson::object();
    ojson j;
    try {
      j = ojson::parse(read_file(config_path));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config " + config_path + ": " + e.what());
    }
    if (!j.is_object()) throw ConfigError("config " + config_path + " must be a JSON object");
    return j;
  }
  std::string config_text() const { return config_path.empty() ? "{}" : read_file(config_path); }
};

void add_common(CLI::App* cmd, Common& c) {
  c.seed_opt = cmd->add_option("--seed", c.seed, "Random seed (overrides the config file)");
  cmd->add_option("--config", c.config_path, "JSON config file; flags take precedence")->check(CLI::ExistingFile);
}

template <typename T>
void section_value(const ojson& cfg, const char* section, const char* key, T& field) {
  if (cfg.contains(section) && cfg.at(section).contains(key)) field = cfg.at(section).at(key).get<T>();
}

// MANIFEST.json next to the first output: command, arguments, resolved seed
// and SHA-256 of every input and output. No timestamps, so reruns with the
// same flags produce identical manifests.
void write_manifest(const std::string& command, const Common& common, std::uint64_t seed,
                    const std::vector<std::string>& inputs, const std::vector<std::string>& outputs,
                    const std::string& resolved_config = {}) {
  if (outputs.empty()) return;
  const fs::path dir = fs::absolute(outputs.front()).parent_path();
  const fs::path path = dir / "MANIFEST.json";
  ojson manifest = ojson::object();
  if (fs::exists(path)) {
    try {
      manifest = ojson::parse(read_file(path.string()));
    } catch (const nlohmann::json::exception&) {
      manifest = ojson::object();
    }
  }
  ojson entry;
  entry["argv"] = common.argv;
  entry["seed"] = seed;
  if (!common.config_path.empty()) {
    entry["config"] = {{"path", common.config_path}, {"sha256", sha256_file(common.config_path)}};
  }
  if (!resolved_config.empty()) entry["resolved_config"] = ojson::parse(resolved_config);
  ojson in = ojson::object();
  for (const auto& p : inputs) in[p] = sha256_file(p);
  ojson out = ojson::object();
  for (const auto& p : outputs) out[p] = sha256_file(p);
  entry["inputs"] = in;
  entry["outputs"] = out;
  manifest[command] = entry;
  write_file(path.string(), manifest.dump(2) + "\n");
}

Checkpoint load_checked(const std::string& path, const Tokenizer& tokenizer) {
  Checkpoint ck = load_checkpoint(path);
  if (ck.meta.tokenizer_hash != tokenizer.hash()) {
    throw std::runtime_error("checkpoint " + path + " was trained with a different tokenizer");
  }
  return ck;
}

ExperimentConfig experiment_of(const Checkpoint& ck) {
  const ojson extra = ojson::parse(ck.meta.extra_json);
  if (extra.contains("experiment")) return experiment_config_from_json(extra.at("experiment").dump());
  return {};
}

// Picks the checkpoint trained for `s`, else the first one given.
const Checkpoint& checkpoint_for(const std::vector<Checkpoint>& cks, Strategy s) {
  for (const auto& ck : cks) {
    if (ck.meta.strategy == to_string(s)) return ck;
  }
  return cks.front();
}

std::vector<Strategy> strategies_of(const std::string& name) {
  if (name == "all") return {std::begin(kAllStrategies), std::end(kAllStrategies)};
  return {parse_strategy(name)};
}

const std::vector<std::string> kStrategyNames = {"brute_force", "concat_512", "concat_4096", "segment_batch"};

// ---------------------------------------------------------------- gen

struct GenArgs {
  Common common;
  std::string out;
  int patients = 2000;
  CLI::Option* patients_opt = nullptr;
  std::string signal_position;
  double noise_ratio = -1;
  double signal_density = -1;
};

void run_gen(const GenArgs& a) {
  const ojson cfg = a.common.config();
  CorpusConfig c = cfg.contains("corpus") ? corpus_config_from_json(cfg.at("corpus").dump()) : CorpusConfig{};
  if (a.common.seed_given()) c.seed = a.common.seed;
  if (a.patients_opt->count()) c.n_patients = a.patients;
  if (!a.signal_position.empty()) c.signal_position = parse_signal_position(a.signal_position);
  if (a.noise_ratio >= 0) c.noise_ratio = a.noise_ratio;
  if (a.signal_density >= 0) c.signal_density = a.signal_density;
  c.validate();
  const Corpus corpus = generate_corpus(c);
  write_corpus(corpus, a.out);
  const std::string cfg_path = a.out + ".config.json";
  write_file(cfg_path, corpus_config_to_json(c) + "\n");
  const auto labelled = labelled_indices(corpus);
  note("wrote " + std::to_string(corpus.instances.size()) + " instances (" + std::to_string(labelled.size()) +
       " accepted and labelled) from " + std::to_string(c.n_patients) + " patients to " + a.out);
  write_manifest("gen", a.common, c.seed, {}, {a.out, cfg_path});
}

// ---------------------------------------------------------------- tokenizer

struct TokenizerArgs {
  Common common;
  std::string corpus;
  std::string out;
  std::size_t vocab_size = 8000;
  CLI::Option* vocab_opt = nullptr;
};

void run_tokenizer(const TokenizerArgs& a) {
  const ojson cfg = a.common.config();
  std::size_t vocab = a.vocab_size;
  if (!a.vocab_opt->count()) section_value(cfg, "tokenizer", "vocab_size", vocab);
  const Corpus corpus = read_corpus(a.corpus);
  const Tokenizer tok = train_tokenizer(corpus, vocab);
  tok.save(a.out);
  const CorpusStats stats = corpus_stats(corpus, [&](std::string_view t) { return tok.count_tokens(t); });
  std::ostringstream msg;
  msg << "vocabulary " << tok.vocab_size() << "; document tokens p25/p50/p75 = " << stats.document_tokens.p25 << "/"
      << stats.document_tokens.p50 << "/" << stats.document_tokens.p75 << "; instance tokens p25/p50/p75 = "
      << stats.instance_tokens.p25 << "/" << stats.instance_tokens.p50 << "/" << stats.instance_tokens.p75;
  note(msg.str());
  write_manifest("tokenizer", a.common, a.common.seed, {a.corpus}, {a.out});
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  Common common;
  std::string corpus, tokenizer, out, log, base;
  std::string strategy = "segment_batch";
  std::size_t chunk_size = 512;
  int lora_rank = 0;
  int epochs = 0, batch = 0, accum = 0, patience = 0, hidden = 0, layers = 0, heads = 0, ff = 0, threads = 0;
  double lr = 0, dropout = -1, eval_fraction = 0;
  std::uint64_t split_seed = 0;
  std::size_t per_class_cap = 0;
  CLI::Option *chunk_opt = nullptr, *lora_opt = nullptr, *split_seed_opt = nullptr, *cap_opt = nullptr;
};

void run_train(const TrainArgs& a) {
  ExperimentConfig e = experiment_config_from_json(a.common.config_text());
  if (a.common.seed_given()) e.train.seed = a.common.seed;
  if (a.chunk_opt->count()) e.options.segment_size = a.chunk_size;
  if (a.lora_opt->count()) e.lora_rank = a.lora_rank;
  if (a.epochs) e.train.max_epochs = a.epochs;
  if (a.batch) e.train.batch_size = a.batch;
  if (a.accum) e.train.gradient_accumulation_steps = a.accum;
  if (a.patience) e.train.patience = a.patience;
  if (a.lr > 0) e.train.learning_rate = a.lr;
  if (a.hidden) e.model.hidden = a.hidden;
  if (a.layers) e.model.layers = a.layers;
  if (a.heads) e.model.heads = a.heads;
  if (a.ff) e.model.feed_forward = a.ff;
  if (a.dropout >= 0) e.model.dropout = a.dropout;
  if (a.threads) e.threads = a.threads;
  if (a.eval_fraction > 0) e.eval_fraction = a.eval_fraction;
  if (a.split_seed_opt->count()) e.split_seed = a.split_seed;
  if (a.cap_opt->count()) e.per_class_cap = a.per_class_cap;
  e.train.validate();
  e.model.validate();

  const Strategy strategy = parse_strategy(a.strategy);
  const Corpus corpus = read_corpus(a.corpus);
  const Tokenizer tok = Tokenizer::load(a.tokenizer);
  std::optional<Checkpoint> base;
  std::vector<std::string> inputs = {a.corpus, a.tokenizer};
  if (!a.base.empty()) {
    base = load_checked(a.base, tok);
    if (base->model.adapted()) base->model.merge_lora();
    inputs.push_back(a.base);
  } else if (e.lora_rank > 0) {
    note("warning: LoRA without --base adapts a randomly initialised encoder");
  }
  const PreparedSplit split = prepare_split(corpus, tok, e.eval_fraction, e.split_seed);
  note("strategy " + a.strategy + ": " + std::to_string(split.train.size()) + " training and " +
       std::to_string(split.eval.size()) + " evaluation instances");

  std::ofstream log_file;
  if (!a.log.empty()) {
    log_file.open(a.log);
    if (!log_file) throw std::runtime_error("cannot write " + a.log);
  }
  std::ostream& log = a.log.empty() ? std::cerr : static_cast<std::ostream&>(log_file);
  TrainOutcome r = train_strategy(corpus, split, tok, strategy, e, base ? &base->model : nullptr, &log);
  const StrategyEvaluation ev = evaluate_split(corpus, split.eval, r.model, tok, strategy, e.options, e.threads);
  log << "best_epoch=" << r.fit.best_epoch << " best_f1=" << r.fit.best_f1 << " steps=" << r.fit.optimizer_steps
      << " examples=" << r.train_examples << '\n';
  log << "final " << metrics_to_json(ev.metrics, -1) << '\n';
  log << "strata " << strata_to_json(ev.strata) << '\n';
  log.flush();

  ojson extra;
  extra["experiment"] = ojson::parse(experiment_config_to_json(e));
  extra["best_epoch"] = r.fit.best_epoch;
  extra["best_f1"] = r.fit.best_f1;
  extra["eval_macro_f1"] = ev.metrics.macro_f1;
  extra["base_checkpoint"] = a.base.empty() ? ojson(nullptr) : ojson(sha256_file(a.base));
  save_checkpoint(a.out, r.model, checkpoint_meta(tok, strategy, e.options, extra.dump()));
  note("saved " + a.out + " (eval macro F1 " + std::to_string(ev.metrics.macro_f1) + ")");
  std::vector<std::string> outputs = {a.out};
  if (!a.log.empty()) {
    log_file.close();
    outputs.push_back(a.log);
  }
  write_manifest("train", a.common, e.train.seed, inputs, outputs, experiment_config_to_json(e));
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  Common common;
  std::string corpus, tokenizer, json_out, csv_out;
  std::vector<std::string> checkpoints;
  std::string strategy = "all";
  std::string subset = "eval";
  int threads = 1;
};

void run_eval(const EvalArgs& a) {
  const Corpus corpus = read_corpus(a.corpus);
  const Tokenizer tok = Tokenizer::load(a.tokenizer);
  std::vector<Checkpoint> cks;
  for (const auto& p : a.checkpoints) cks.push_back(load_checked(p, tok));
  const ExperimentConfig e = experiment_of(cks.front());
  std::vector<PreparedInstance> prepared;
  if (a.subset == "all") {
    const auto idx = labelled_indices(corpus);
    prepared = prepare_instances(corpus, idx, tok);
  } else {
    prepared = prepare_split(corpus, tok, e.eval_fraction, e.split_seed).eval;
  }
  if (prepared.empty()) throw std::runtime_error("no labelled instances to evaluate");

  std::vector<NamedMetrics> rows;
  std::vector<NamedStrata> strata;
  ojson report = ojson::object();
  for (Strategy s : strategies_of(a.strategy)) {
    const Checkpoint& ck = checkpoint_for(cks, s);
    const StrategyOptions options = experiment_of(ck).options;
    const StrategyEvaluation ev = evaluate_split(corpus, prepared, ck.model, tok, s, options, a.threads);
    const std::string name(to_string(s));
    rows.push_back({name, ev.metrics});
    strata.push_back({name, ev.strata});
    ojson block;
    block["checkpoint_strategy"] = ck.meta.strategy;
    block["metrics"] = ojson::parse(metrics_to_json(ev.metrics));
    block["confusion"] = ojson::parse(confusion_to_json(confusion_matrix(ev.output.predictions, ev.output.gold)));
    block["strata"] = ojson::parse(strata_to_json(ev.strata));
    block["routed_to_concat_512"] = ev.output.routed;
    report[name] = block;
    note(name + ": macro F1 " + std::to_string(ev.metrics.macro_f1));
  }
  std::cout << format_metrics_table(rows) << '\n' << format_strata_table(strata);
  std::vector<std::string> outputs;
  if (!a.json_out.empty()) {
    write_file(a.json_out, report.dump(2) + "\n");
    outputs.push_back(a.json_out);
  }
  if (!a.csv_out.empty()) {
    write_file(a.csv_out, strata_to_csv(strata));
    outputs.push_back(a.csv_out);
  }
  std::vector<std::string> inputs = {a.corpus, a.tokenizer};
  inputs.insert(inputs.end(), a.checkpoints.begin(), a.checkpoints.end());
  write_manifest("eval", a.common, a.common.seed, inputs, outputs);
}

// ---------------------------------------------------------------- bench

struct BenchArgs {
  Common common;
  std::string corpus, tokenizer, json_out;
  std::vector<std::string> checkpoints;
  std::string strategy = "all";
  std::size_t instances = 100;
  std::size_t min_documents = 10;
  int repetitions = 3;
};

void run_bench(const BenchArgs& a) {
  const Corpus corpus = read_corpus(a.corpus);
  const Tokenizer tok = Tokenizer::load(a.tokenizer);
  std::vector<Checkpoint> cks;
  for (const auto& p : a.checkpoints) cks.push_back(load_checked(p, tok));
  std::vector<const Instance*> pool;
  for (const auto& inst : corpus.instances) {
    if (inst.documents.size() >= a.min_documents) pool.push_back(&inst);
  }
  Rng rng(a.common.seed);
  rng.shuffle(pool);
  if (pool.size() > a.instances) pool.resize(a.instances);
  if (pool.empty()) throw std::runtime_error("no instance has at least " + std::to_string(a.min_documents) + " documents");
  note("timing " + std::to_string(pool.size()) + " instances, " + std::to_string(a.repetitions) + " repetitions");
  std::vector<BenchResult> results;
  for (Strategy s : strategies_of(a.strategy)) {
    const Checkpoint& ck = checkpoint_for(cks, s);
    StrategyOptions options = experiment_of(ck).options;
    options.fixed_shape = true;
    results.push_back(bench_inference(ck.model, tok, s, pool, options, a.repetitions));
  }
  std::cout << format_bench_table(results);
  std::vector<std::string> outputs;
  if (!a.json_out.empty()) {
    write_file(a.json_out, bench_to_json(results) + "\n");
    outputs.push_back(a.json_out);
  }
  std::vector<std::string> inputs = {a.corpus, a.tokenizer};
  inputs.insert(inputs.end(), a.checkpoints.begin(), a.checkpoints.end());
  write_manifest("bench", a.common, a.common.seed, inputs, outputs);
}

// ---------------------------------------------------------------- explain

struct ExplainArgs {
  Common common;
  std::string corpus, tokenizer, checkpoint, instance_id, label, out;
};

void run_explain(const ExplainArgs& a) {
  const Corpus corpus = read_corpus(a.corpus);
  const Tokenizer tok = Tokenizer::load(a.tokenizer);
  const Checkpoint ck = load_checked(a.checkpoint, tok);
  const Instance* inst = corpus.find(a.instance_id);
  if (!inst) throw std::runtime_error("no instance '" + a.instance_id + "' in " + a.corpus);
  std::optional<Team> label;
  if (!a.label.empty()) {
    label = parse_team(a.label);
    if (!label) throw ArgumentError("unknown team label '" + a.label + "'");
  }
  const ExplanationBundle b = explain_instance(*inst, ck.model, tok, experiment_of(ck).options, label);
  const std::string text = ojson::parse(explanation_to_json(b)).dump(2) + "\n";
  if (a.out.empty()) {
    std::cout << text;
  } else {
    write_file(a.out, text);
    write_manifest("explain", a.common, a.common.seed, {a.corpus, a.tokenizer, a.checkpoint}, {a.out});
  }
}

// ---------------------------------------------------------------- map

struct MapArgs {
  Common common;
  std::string corpus, tokenizer, checkpoint, out;
  std::string method = "pca";
  double perplexity = 30;
  int iterations = 1000;
  CLI::Option *method_opt = nullptr, *perplexity_opt = nullptr, *iterations_opt = nullptr;
};

struct MapSettings {
  ProjectionMethod method = ProjectionMethod::Pca;
  TsneOptions tsne;
};

ProjectionMap build_projection(const Corpus& corpus, const Tokenizer& tok, const Checkpoint& ck,
                               const MapSettings& s) {
  const ExperimentConfig e = experiment_of(ck);
  const PreparedSplit split = prepare_split(corpus, tok, e.eval_fraction, e.split_seed);
  std::vector<std::size_t> idx;
  std::vector<std::string> ids;
  std::vector<Team> labels;
  for (const auto& p : split.train) {
    idx.push_back(p.corpus_index);
    ids.push_back(corpus.instances[p.corpus_index].instance_id);
    labels.push_back(*corpus.instances[p.corpus_index].label);
  }
  note("embedding " + std::to_string(idx.size()) + " training instances");
  const Eigen::MatrixXd emb = embed_training_set(corpus, idx, ck.model, tok, e.options);
  return fit_projection(emb, ids, labels, s.method, s.tsne);
}

MapSettings map_settings(const ojson& cfg, const MapArgs* a, std::uint64_t seed, bool seed_given) {
  MapSettings s;
  std::string method = "pca";
  section_value(cfg, "map", "method", method);
  section_value(cfg, "map", "perplexity", s.tsne.perplexity);
  section_value(cfg, "map", "iterations", s.tsne.iterations);
  section_value(cfg, "map", "seed", s.tsne.seed);
  if (a) {
    if (a->method_opt->count()) method = a->method;
    if (a->perplexity_opt->count()) s.tsne.perplexity = a->perplexity;
    if (a->iterations_opt->count()) s.tsne.iterations = a->iterations;
  }
  if (seed_given) s.tsne.seed = seed;
  s.method = parse_projection_method(method);
  return s;
}

void run_map(const MapArgs& a) {
  const Corpus corpus = read_corpus(a.corpus);
  const Tokenizer tok = Tokenizer::load(a.tokenizer);
  const Checkpoint ck = load_checked(a.checkpoint, tok);
  const MapSettings s = map_settings(a.common.config(), &a, a.common.seed, a.common.seed_given());
  const ProjectionMap map = build_projection(corpus, tok, ck, s);
  const std::string text = projection_to_json(map) + "\n";
  if (a.out.empty()) {
    std::cout << text;
  } else {
    write_file(a.out, text);
    write_manifest("map", a.common, s.tsne.seed, {a.corpus, a.tokenizer, a.checkpoint}, {a.out});
  }
}

// ---------------------------------------------------------------- serve

struct ServeArgs {
  Common common;
  std::string corpus, tokenizer, checkpoint, static_dir;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string projection = "pca";
};

int run_serve(const ServeArgs& a) {
  httplib::Server server;
  TriageService service;
  register_routes(server, service, a.static_dir);
  std::atomic<bool> failed = false;
  std::thread loader([&] {
    try {
      const Tokenizer tok = Tokenizer::load(a.tokenizer);
      Checkpoint ck = load_checked(a.checkpoint, tok);
      Corpus corpus = read_corpus(a.corpus);
      std::optional<ProjectionMap> projection;
      if (a.projection != "none") {
        if (ck.model.config().head == HeadKind::LabelAttention) {
          MapSettings s = map_settings(a.common.config(), nullptr, a.common.seed, a.common.seed_given());
          s.method = parse_projection_method(a.projection);
          projection = build_projection(corpus, tok, ck, s);
        } else {
          note("pooled-head checkpoint: /v1/map disabled");
        }
      }
      ServiceAssets assets{std::move(ck.model), tok, sha256_file(a.checkpoint), experiment_of(ck).options,
                           std::move(corpus), std::move(projection)};
      service.load(std::move(assets));
      note("model loaded; serving");
    } catch (const std::exception& e) {
      note(std::string("load failed: ") + e.what());
      failed = true;
      server.stop();
    }
  });
  note("listening on http://" + a.host + ":" + std::to_string(a.port));
  const bool ok = server.listen(a.host, a.port);
  loader.join();
  if (!ok && !failed) throw std::runtime_error("cannot bind " + a.host + ":" + std::to_string(a.port));
  return failed ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Long-document triage classification: corpus, training, evaluation and service"};
  app.require_subcommand(1);
  std::vector<std::string> args(argv, argv + argc);

  GenArgs gen;
  auto* c_gen = app.add_subcommand("gen", "Generate a synthetic corpus");
  add_common(c_gen, gen.common);
  c_gen->add_option("--out", gen.out, "Corpus output (JSON lines)")->required();
  gen.patients_opt = c_gen->add_option("--patients", gen.patients, "Number of patients")->check(CLI::PositiveNumber);
  c_gen->add_option("--signal-position", gen.signal_position, "uniform|head|tail")
      ->check(CLI::IsMember({"uniform", "head", "tail"}));
  c_gen->add_option("--noise-ratio", gen.noise_ratio, "Fraction of filler documents")->check(CLI::Range(0.0, 1.0));
  c_gen->add_option("--signal-density", gen.signal_density, "Team-term share in signal documents")
      ->check(CLI::Range(0.0, 1.0));

  TokenizerArgs tk;
  auto* c_tok = app.add_subcommand("tokenizer", "Train a tokenizer on a corpus");
  add_common(c_tok, tk.common);
  c_tok->add_option("--corpus", tk.corpus)->required()->check(CLI::ExistingFile);
  c_tok->add_option("--out", tk.out)->required();
  tk.vocab_opt = c_tok->add_option("--vocab-size", tk.vocab_size)->check(CLI::Range(8, 1 << 22));

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train a model for one strategy");
  add_common(c_train, tr.common);
  c_train->add_option("--corpus", tr.corpus)->required()->check(CLI::ExistingFile);
  c_train->add_option("--tokenizer", tr.tokenizer)->required()->check(CLI::ExistingFile);
  c_train->add_option("--out", tr.out, "Checkpoint output")->required();
  c_train->add_option("--strategy", tr.strategy)->check(CLI::IsMember(kStrategyNames));
  tr.chunk_opt = c_train->add_option("--chunk-size", tr.chunk_size, "Segment size")->check(CLI::IsMember({128, 256, 512}));
  tr.lora_opt = c_train->add_option("--lora-rank", tr.lora_rank, "LoRA rank (0 = full fine-tuning)")->check(CLI::NonNegativeNumber);
  c_train->add_option("--base", tr.base, "Checkpoint whose encoder initialises this run")->check(CLI::ExistingFile);
  c_train->add_option("--log", tr.log, "Metrics log file (default stderr)");
  c_train->add_option("--epochs", tr.epochs)->check(CLI::PositiveNumber);
  c_train->add_option("--lr", tr.lr)->check(CLI::PositiveNumber);
  c_train->add_option("--batch-size", tr.batch)->check(CLI::PositiveNumber);
  c_train->add_option("--accum", tr.accum, "Gradient accumulation steps")->check(CLI::PositiveNumber);
  c_train->add_option("--patience", tr.patience)->check(CLI::PositiveNumber);
  c_train->add_option("--hidden", tr.hidden)->check(CLI::PositiveNumber);
  c_train->add_option("--layers", tr.layers)->check(CLI::PositiveNumber);
  c_train->add_option("--heads", tr.heads)->check(CLI::PositiveNumber);
  c_train->add_option("--ff", tr.ff, "Feed-forward width")->check(CLI::PositiveNumber);
  c_train->add_option("--dropout", tr.dropout)->check(CLI::Range(0.0, 0.99));
  c_train->add_option("--eval-fraction", tr.eval_fraction)->check(CLI::Range(0.01, 0.99));
  tr.split_seed_opt = c_train->add_option("--split-seed", tr.split_seed);
  tr.cap_opt = c_train->add_option("--per-class-cap", tr.per_class_cap, "Max training examples per class");
  c_train->add_option("--threads", tr.threads, "Threads for evaluation")->check(CLI::PositiveNumber);

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "Evaluate checkpoints on the held-out split");
  add_common(c_eval, ev.common);
  c_eval->add_option("--corpus", ev.corpus)->required()->check(CLI::ExistingFile);
  c_eval->add_option("--tokenizer", ev.tokenizer)->required()->check(CLI::ExistingFile);
  c_eval->add_option("--checkpoint", ev.checkpoints, "One or more; matched to strategies by training strategy")
      ->required()->check(CLI::ExistingFile);
  auto strategy_names = kStrategyNames;
  strategy_names.push_back("all");
  c_eval->add_option("--strategy", ev.strategy)->check(CLI::IsMember(strategy_names));
  c_eval->add_option("--subset", ev.subset, "eval|all")->check(CLI::IsMember({"eval", "all"}));
  c_eval->add_option("--json", ev.json_out, "Report JSON output");
  c_eval->add_option("--csv", ev.csv_out, "Stratified F1 CSV output");
  c_eval->add_option("--threads", ev.threads)->check(CLI::PositiveNumber);

  BenchArgs be;
  auto* c_bench = app.add_subcommand("bench", "Time inference per strategy");
  add_common(c_bench, be.common);
  c_bench->add_option("--corpus", be.corpus)->required()->check(CLI::ExistingFile);
  c_bench->add_option("--tokenizer", be.tokenizer)->required()->check(CLI::ExistingFile);
  c_bench->add_option("--checkpoint", be.checkpoints)->required()->check(CLI::ExistingFile);
  c_bench->add_option("--strategy", be.strategy)->check(CLI::IsMember(strategy_names));
  c_bench->add_option("--instances", be.instances)->check(CLI::PositiveNumber);
  c_bench->add_option("--min-documents", be.min_documents);
  c_bench->add_option("--repetitions", be.repetitions)->check(CLI::Range(2, 100));
  c_bench->add_option("--json", be.json_out);

  ExplainArgs ex;
  auto* c_explain = app.add_subcommand("explain", "Attention explanation for one instance");
  add_common(c_explain, ex.common);
  c_explain->add_option("--corpus", ex.corpus)->required()->check(CLI::ExistingFile);
  c_explain->add_option("--tokenizer", ex.tokenizer)->required()->check(CLI::ExistingFile);
  c_explain->add_option("--checkpoint", ex.checkpoint)->required()->check(CLI::ExistingFile);
  c_explain->add_option("--instance-id", ex.instance_id)->required();
  c_explain->add_option("--label", ex.label, "Team row to show (default: predicted)");
  c_explain->add_option("--out", ex.out, "Output file (default stdout)");

  MapArgs mp;
  auto* c_map = app.add_subcommand("map", "Planar projection of training-set embeddings");
  add_common(c_map, mp.common);
  c_map->add_option("--corpus", mp.corpus)->required()->check(CLI::ExistingFile);
  c_map->add_option("--tokenizer", mp.tokenizer)->required()->check(CLI::ExistingFile);
  c_map->add_option("--checkpoint", mp.checkpoint)->required()->check(CLI::ExistingFile);
  mp.method_opt = c_map->add_option("--method", mp.method)->check(CLI::IsMember({"pca", "tsne"}));
  mp.perplexity_opt = c_map->add_option("--perplexity", mp.perplexity)->check(CLI::PositiveNumber);
  mp.iterations_opt = c_map->add_option("--iterations", mp.iterations)->check(CLI::PositiveNumber);
  c_map->add_option("--out", mp.out, "Output file (default stdout)");

  ServeArgs sv;
  auto* c_serve = app.add_subcommand("serve", "Run the HTTP service");
  add_common(c_serve, sv.common);
  c_serve->add_option("--corpus", sv.corpus)->envname("TRIAGE_CORPUS")->required();
  c_serve->add_option("--tokenizer", sv.tokenizer)->envname("TRIAGE_TOKENIZER")->required();
  c_serve->add_option("--checkpoint", sv.checkpoint)->envname("TRIAGE_CHECKPOINT")->required();
  c_serve->add_option("--host", sv.host)->envname("TRIAGE_HOST");
  c_serve->add_option("--port", sv.port)->envname("TRIAGE_PORT")->check(CLI::Range(1, 65535));
  c_serve->add_option("--projection", sv.projection)->check(CLI::IsMember({"pca", "tsne", "none"}));
  c_serve->add_option("--static-dir", sv.static_dir, "Directory served at / (the review UI)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  for (Common* c : {&gen.common, &tk.common, &tr.common, &ev.common, &be.common, &ex.common, &mp.common, &sv.common}) {
    c->argv = args;
  }

  try {
    if (c_gen->parsed()) run_gen(gen);
    else if (c_tok->parsed()) run_tokenizer(tk);
    else if (c_train->parsed()) run_train(tr);
    else if (c_eval->parsed()) run_eval(ev);
    else if (c_bench->parsed()) run_bench(be);
    else if (c_explain->parsed()) run_explain(ex);
    else if (c_map->parsed()) run_map(mp);
    else if (c_serve->parsed()) return run_serve(sv);
  } catch (const ConfigError& e) {
    std::cerr << "triage: config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "triage: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
