// tagagg: command-line front end.
//
// Exit codes: 0 success, 1 usage error, 2 data or validation error,
// 3 numerical failure. Every failure prints one line on stderr.

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tagagg/tagagg.hpp"

#ifndef TAGAGG_VERSION
#define TAGAGG_VERSION "0.0.0"
#endif

namespace {

using nlohmann::json;
using namespace tagagg;
namespace fs = std::filesystem;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << content;
  if (!out) throw DataError("failed writing '" + path + "'");
}

std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw DataError("SHA-256 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

// Record of one run: command line, effective configuration, input digests
// and timings. Replaying the stored argv reproduces the outputs.
class Manifest {
 public:
  explicit Manifest(std::vector<std::string> argv)
      : argv_(std::move(argv)), start_(std::chrono::steady_clock::now()) {}

  std::string read_input(const std::string& path) {
    std::string text = read_file(path);
    inputs_.push_back({{"path", path}, {"sha256", sha256_hex(text)}, {"bytes", text.size()}});
    return text;
  }

  void output(const std::string& path, const std::string& content) {
    write_file(path, content);
    outputs_.push_back({{"path", path}, {"sha256", sha256_hex(content)}});
  }

  void phase(const std::string& name) {
    const auto now = std::chrono::steady_clock::now();
    timings_[name] = std::chrono::duration<double, std::milli>(now - last_).count();
    last_ = now;
  }

  void set_config(std::string command, json config, std::uint64_t seed) {
    command_ = std::move(command);
    config_ = std::move(config);
    seed_ = seed;
  }

  json& extra() { return extra_; }

  json finish() {
    timings_["total"] =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
    json doc = {{"schema", report::kSchemaVersion},
                {"tool", "tagagg"},
                {"version", TAGAGG_VERSION},
                {"command", command_},
                {"argv", argv_},
                {"seed", seed_},
                {"config", config_},
                {"inputs", inputs_},
                {"outputs", outputs_},
                {"timings_ms", timings_}};
    if (!extra_.is_null()) doc["result"] = extra_;
    return doc;
  }

 private:
  std::vector<std::string> argv_;
  std::chrono::steady_clock::time_point start_;
  std::chrono::steady_clock::time_point last_ = start_;
  std::string command_;
  json config_ = json::object();
  std::uint64_t seed_ = 0;
  json inputs_ = json::array();
  json outputs_ = json::array();
  json timings_ = json::object();
  json extra_;
};

// Writes to `path`, or to stdout when no path was given.
void emit(Manifest& m, const std::string& path, const std::string& content) {
  if (path.empty()) {
    std::cout << content;
    std::cout.flush();
  } else {
    m.output(path, content);
  }
}

json option_snapshot(const CLI::App& sub) {
  json config = json::object();
  for (const CLI::Option* opt : sub.get_options()) {
    const std::string name = opt->get_single_name();
    if (name == "help" || name.empty()) continue;
    if (opt->count() > 0) {
      const auto& r = opt->results();
      if (opt->get_expected_max() > 1)
        config[name] = r;
      else if (opt->get_expected_min() == 0)
        config[name] = true;
      else
        config[name] = r.empty() ? std::string() : r.back();
    } else if (opt->get_expected_min() == 0) {
      config[name] = false;
    } else {
      config[name] = opt->get_default_str();
    }
  }
  return config;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

// ---------------------------------------------------------------------------
// Loading inputs.

struct InputOptions {
  std::vector<std::string> files;
  std::string types;    // comma list; inferred from the files when empty
  std::string sources;  // comma list of source ids overriding the defaults
  bool repair = false;
};

struct LoadedInputs {
  Corpus corpus;
  std::optional<Corpus> gold;  // token + gold layer
};

LabelSet resolve_labels(const std::string& types, const std::vector<const std::string*>& texts) {
  if (!types.empty()) return LabelSet(split_list(types));
  std::set<std::string, std::less<>> tags;
  for (const auto* t : texts) {
    auto shape = scan_conll(*t);
    tags.insert(shape.tags.begin(), shape.tags.end());
  }
  return LabelSet::infer(tags);
}

// Source files hold one or more tag columns. A single-column file is named
// after its file stem; column n of a wider file is "<stem>#<n>".
LoadedInputs load_inputs(Manifest& m, const InputOptions& opt, const std::string& gold_path) {
  if (opt.files.empty()) throw UsageError("at least one source file is required");
  std::vector<std::string> texts;
  for (const auto& f : opt.files) texts.push_back(m.read_input(f));
  std::optional<std::string> gold_text;
  if (!gold_path.empty()) gold_text = m.read_input(gold_path);

  std::vector<const std::string*> all;
  for (const auto& t : texts) all.push_back(&t);
  if (gold_text) all.push_back(&*gold_text);
  const LabelSet labels = resolve_labels(opt.types, all);

  std::vector<std::vector<std::string>> ids(texts.size());
  std::size_t total = 0;
  for (std::size_t f = 0; f < texts.size(); ++f) {
    const auto shape = scan_conll(texts[f]);
    const std::string stem = fs::path(opt.files[f]).stem().string();
    const std::size_t cols = std::max<std::size_t>(shape.tag_columns, 1);
    for (std::size_t c = 0; c < cols; ++c)
      ids[f].push_back(cols == 1 ? stem : stem + "#" + std::to_string(c + 1));
    total += cols;
  }
  if (!opt.sources.empty()) {
    const auto names = split_list(opt.sources);
    if (names.size() != total)
      throw UsageError("--sources names " + std::to_string(names.size()) + " sources, inputs have " +
                       std::to_string(total) + " tag columns");
    std::size_t n = 0;
    for (auto& file_ids : ids)
      for (auto& id : file_ids) id = names[n++];
  }

  const RepairPolicy policy = opt.repair ? RepairPolicy::repair : RepairPolicy::strict;
  std::vector<Corpus> parts;
  for (std::size_t f = 0; f < texts.size(); ++f) {
    try {
      parts.push_back(parse_conll(texts[f], labels, policy, ids[f]));
    } catch (const Error& e) {
      throw DataError(opt.files[f] + ": " + e.what());
    }
  }
  LoadedInputs out;
  out.corpus = merge_corpora(parts);
  if (gold_text) {
    try {
      out.gold = parse_conll(*gold_text, labels, RepairPolicy::strict, std::string(kGoldLayer));
    } catch (const Error& e) {
      throw DataError(gold_path + ": " + e.what());
    }
  }
  return out;
}

// The gold file labels the first M sentences of the inputs. Returns those
// sentences with their source layers and gold attached.
Corpus gold_prefix(const Corpus& corpus, const Corpus& gold) {
  if (gold.sentences.size() > corpus.sentences.size())
    throw DataError("gold file has more sentences (" + std::to_string(gold.sentences.size()) +
                    ") than the inputs (" + std::to_string(corpus.sentences.size()) + ")");
  Corpus out;
  out.labels = corpus.labels;
  out.source_ids = corpus.source_ids;
  for (std::size_t s = 0; s < gold.sentences.size(); ++s) {
    if (gold.sentences[s].tokens != corpus.sentences[s].tokens)
      throw ValidationError(s, 0, "gold tokens differ from the inputs");
    Sentence sentence = corpus.sentences[s];
    sentence.gold = gold.sentences[s].gold;
    out.sentences.push_back(std::move(sentence));
  }
  return out;
}

json score_json(const metrics::Score& s) { return report::to_json(s); }

// ---------------------------------------------------------------------------
// Commands.

struct AggregateArgs {
  InputOptions in;
  std::string method = "bea";
  std::string granularity = "entity";
  double alpha = 1.0;
  double beta = 1.0;
  double tol = 1e-6;
  int max_iter = 200;
  std::size_t top_k = 10;
  std::string gold;
  std::string tie = "random";
  std::string init = "majority";
  std::size_t threads = 1;
  std::string out;
  std::string report;
};

bea::Method parse_method(const std::string& s) {
  if (s == "mv") return bea::Method::mv;
  if (s == "bea") return bea::Method::bea;
  if (s == "bea2") return bea::Method::bea2;
  return bea::Method::bea_sup;
}

void cmd_aggregate(Manifest& m, const AggregateArgs& a, std::uint64_t seed) {
  bea::AggregateOptions opt;
  opt.method = parse_method(a.method);
  opt.config.alpha = a.alpha;
  opt.config.beta = a.beta;
  opt.config.elbo_tol = a.tol;
  opt.config.max_iter = a.max_iter;
  opt.config.threads = a.threads;
  opt.config.granularity = a.granularity == "token" ? bea::Granularity::token : bea::Granularity::entity;
  opt.config.init = a.init == "vote-share" ? bea::Init::vote_share : bea::Init::majority;
  opt.top_k = a.top_k;
  opt.seed = seed;
  opt.tie = a.tie == "first" ? vote::TieBreak::first_vote : vote::TieBreak::random;
  if (opt.method == bea::Method::bea_sup && a.gold.empty())
    throw UsageError("--method bea-sup requires --gold");
  try {
    opt.config.validate();
  } catch (const DataError& e) {
    throw UsageError(e.what());
  }

  auto inputs = load_inputs(m, a.in, a.gold);
  std::optional<Corpus> labelled;
  if (inputs.gold) labelled = gold_prefix(inputs.corpus, *inputs.gold);
  m.phase("load");

  auto result = bea::aggregate(inputs.corpus, opt, labelled ? &*labelled : nullptr);
  m.phase("aggregate");

  json doc = report::aggregate_json(result, opt);
  if (labelled) {
    Corpus scored = *labelled;
    for (std::size_t s = 0; s < scored.sentences.size(); ++s)
      scored.sentences[s].aggregate = result.corpus.sentences[s].aggregate;
    std::vector<std::string> pred, gold;
    for (const auto& s : scored.sentences) {
      pred.insert(pred.end(), s.aggregate->begin(), s.aggregate->end());
      gold.insert(gold.end(), s.gold->begin(), s.gold->end());
    }
    doc["gold_sentences"] = scored.sentences.size();
    doc["entity_f1"] = score_json(metrics::entity_f1(scored, kAggregateLayer));
    doc["token_accuracy"] = metrics::token_accuracy(pred, gold);
  }
  emit(m, a.out, write_conll(result.corpus, kAggregateLayer));
  if (!a.report.empty()) m.output(a.report, doc.dump(2) + "\n");
  m.phase("write");
}

struct RankArgs {
  InputOptions in;
  std::string gold;
  std::size_t top_k = 10;
  std::string out;
};

void cmd_rank(Manifest& m, const RankArgs& a) {
  auto inputs = load_inputs(m, a.in, a.gold);
  const Corpus labelled = gold_prefix(inputs.corpus, *inputs.gold);
  const auto s = rare::rank_sources(labelled);
  const auto w = rare::truncate_normalize(s, a.top_k);
  json doc = report::weights_json(w, labelled.source_ids);
  doc["sources"] = labelled.source_ids;
  emit(m, a.out, doc.dump(2) + "\n");
}

struct DistillArgs {
  InputOptions in;
  std::string gold;
  std::string weights;
  bool uniform = false;
  std::size_t top_k = 10;
  std::size_t epochs = 5;
  std::size_t batch_size = 100;
  std::string model;
  std::string out;
  std::string silver_dir;
};

void cmd_distill(Manifest& m, const DistillArgs& a, std::uint64_t seed) {
  const int modes = !a.gold.empty() + !a.weights.empty() + a.uniform;
  if (modes != 1) throw UsageError("give exactly one of --gold, --weights, --uniform");
  if (a.epochs == 0) throw UsageError("--epochs must be >= 1");
  auto inputs = load_inputs(m, a.in, a.gold);
  const Corpus& corpus = inputs.corpus;

  rare::SourceWeights w;
  if (inputs.gold) {
    w = rare::truncate_normalize(rare::rank_sources(gold_prefix(corpus, *inputs.gold)), a.top_k);
  } else if (a.uniform) {
    w = rare::truncate_normalize(std::vector<double>(corpus.source_ids.size(), 1.0),
                                 corpus.source_ids.size());
  } else {
    json doc;
    try {
      doc = json::parse(m.read_input(a.weights));
      std::vector<double> s;
      for (const auto& id : corpus.source_ids) {
        if (!doc.at("omega").contains(id)) throw DataError("weights file has no entry for source '" + id + "'");
        s.push_back(doc.at("omega").at(id).get<double>());
      }
      w = rare::truncate_normalize(s, corpus.source_ids.size());
    } catch (const json::exception& e) {
      throw DataError(a.weights + ": " + e.what());
    }
  }
  m.phase("load");

  const std::size_t per_epoch = rare::batches_per_epoch(corpus.sentences.size(), a.batch_size);
  rare::MemoTagger tagger;
  rare::Schedule schedule;
  rare::DistillTrace trace;
  if (per_epoch > 0) {
    schedule = rare::make_schedule(w, per_epoch * a.epochs, seed, a.batch_size);
    trace = rare::distill(corpus, schedule, tagger);
  }
  m.phase("distill");

  m.extra() = report::weights_json(w, corpus.source_ids);
  if (!a.model.empty()) m.output(a.model, report::memo_to_json(tagger, corpus.labels).dump() + "\n");
  if (!a.silver_dir.empty()) {
    fs::create_directories(a.silver_dir);
    for (std::size_t e = 0; e < trace.epochs.size(); ++e)
      m.output((fs::path(a.silver_dir) / ("epoch-" + std::to_string(e + 1) + ".conll")).string(),
               rare::silver_conll(corpus, trace, e));
    m.output((fs::path(a.silver_dir) / "schedule.json").string(),
             report::schedule_json(schedule, trace, corpus.source_ids).dump(2) + "\n");
  }
  if (!a.out.empty() || a.model.empty())
    emit(m, a.out, write_conll(rare::tag_corpus(corpus, tagger), kAggregateLayer));
  m.phase("write");
}

struct FinetuneArgs {
  std::string model;
  std::string gold;
  int epochs = rare::kDefaultFinetuneEpochs;
  std::string save;
  std::string tag;
  std::string out;
};

void cmd_finetune(Manifest& m, const FinetuneArgs& a) {
  if (a.epochs < 0) throw UsageError("--epochs must be >= 0");
  json doc;
  try {
    doc = json::parse(m.read_input(a.model));
  } catch (const json::exception& e) {
    throw DataError(a.model + ": " + e.what());
  }
  auto loaded = report::memo_from_json(doc);
  const Corpus gold =
      parse_conll(m.read_input(a.gold), loaded.labels, RepairPolicy::strict, std::string(kGoldLayer));
  rare::finetune(loaded.tagger, gold, a.epochs);
  m.phase("finetune");
  if (!a.save.empty()) m.output(a.save, report::memo_to_json(loaded.tagger, loaded.labels).dump() + "\n");
  if (!a.tag.empty()) {
    // Only the token column of the file to tag is used.
    const std::string text = m.read_input(a.tag);
    const auto shape = scan_conll(text);
    std::vector<std::string> layers;
    for (std::size_t c = 0; c < std::max<std::size_t>(shape.tag_columns, 1); ++c)
      layers.push_back("c" + std::to_string(c + 1));
    const Corpus tokens = parse_conll(text, loaded.labels, RepairPolicy::repair, layers);
    emit(m, a.out, write_conll(rare::tag_corpus(tokens, loaded.tagger), kAggregateLayer));
  }
  m.phase("write");
}

struct ScoreArgs {
  std::string pred;
  std::string gold;
  std::string types;
  std::string out;
};

void cmd_score(Manifest& m, const ScoreArgs& a) {
  const std::string pred_text = m.read_input(a.pred);
  const std::string gold_text = m.read_input(a.gold);
  const LabelSet labels = resolve_labels(a.types, {&pred_text, &gold_text});
  Corpus pred = parse_conll(pred_text, labels, RepairPolicy::repair, std::string(kAggregateLayer));
  const Corpus gold = parse_conll(gold_text, labels, RepairPolicy::strict, std::string(kGoldLayer));
  if (pred.sentences.size() != gold.sentences.size())
    throw DataError("prediction has " + std::to_string(pred.sentences.size()) +
                    " sentences, gold has " + std::to_string(gold.sentences.size()));
  std::vector<std::string> p, g;
  for (std::size_t s = 0; s < pred.sentences.size(); ++s) {
    if (pred.sentences[s].tokens != gold.sentences[s].tokens)
      throw ValidationError(s, 0, "prediction tokens differ from gold");
    pred.sentences[s].gold = gold.sentences[s].gold;
    p.insert(p.end(), pred.sentences[s].aggregate->begin(), pred.sentences[s].aggregate->end());
    g.insert(g.end(), gold.sentences[s].gold->begin(), gold.sentences[s].gold->end());
  }
  const auto score = metrics::entity_f1(pred, kAggregateLayer);
  json doc = score_json(score);
  doc["schema"] = report::kSchemaVersion;
  doc["token_accuracy"] = metrics::token_accuracy(p, g);
  m.extra() = doc;
  std::ostringstream line;
  line << "f1 " << score.f1 << " precision " << score.precision << " recall " << score.recall
       << " tp " << score.tp << " fp " << score.fp << " fn " << score.fn << "\n";
  std::cout << line.str();
  if (!a.out.empty()) m.output(a.out, doc.dump(2) + "\n");
}

struct SimulateArgs {
  std::size_t n = 1000;
  std::size_t h = 5;
  std::size_t k = 4;
  std::optional<std::size_t> reliable;
  std::size_t adversaries = 0;
  double diag = 0.9;
  bool tagging = false;
  std::string types = "PER,ORG,LOC";
  std::string out;
  std::string gold;
};

void cmd_simulate(Manifest& m, const SimulateArgs& a, std::uint64_t seed) {
  const std::size_t reliable = a.reliable.value_or(a.h - std::min(a.h, a.adversaries));
  if (reliable + a.adversaries > a.h)
    throw UsageError("--reliable plus --adversaries exceeds --h");
  if (!(a.diag >= 0.0 && a.diag <= 1.0)) throw UsageError("--diag must lie in [0, 1]");
  std::vector<synth::SourceSpec> sources;
  for (std::size_t j = 0; j < reliable; ++j) sources.push_back(synth::Reliable{a.diag});
  for (std::size_t j = 0; j < a.adversaries; ++j) sources.push_back(synth::Adversary{});
  while (sources.size() < a.h) sources.push_back(synth::Spammer{});

  Corpus corpus;
  if (a.tagging) {
    synth::TaggingSimConfig cfg;
    cfg.sentences = a.n;
    cfg.types = split_list(a.types);
    cfg.sources = sources;
    cfg.seed = seed;
    corpus = synth::simulate_tagging_corpus(cfg);
  } else {
    if (a.k < 2) throw UsageError("--k must be >= 2");
    synth::SynthConfig cfg;
    cfg.N = a.n;
    cfg.K = a.k;
    cfg.pi = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(a.k), 1.0 / static_cast<double>(a.k));
    cfg.sources = sources;
    cfg.seed = seed;
    corpus = synth::to_corpus(synth::generate(cfg));
  }
  m.phase("generate");
  emit(m, a.out, write_conll(corpus, corpus.source_ids));
  if (!a.gold.empty()) m.output(a.gold, write_conll(corpus, kGoldLayer));
  m.phase("write");
}

struct RepairArgs {
  std::string input;
  std::string types;
  std::string out;
};

void cmd_repair(Manifest& m, const RepairArgs& a) {
  const std::string text = m.read_input(a.input);
  const LabelSet labels = resolve_labels(a.types, {&text});
  const auto shape = scan_conll(text);
  std::vector<std::string> layers;
  for (std::size_t c = 0; c < std::max<std::size_t>(shape.tag_columns, 1); ++c)
    layers.push_back("c" + std::to_string(c + 1));
  const Corpus strict_free = parse_conll(text, labels, RepairPolicy::repair, layers);
  std::size_t changed = 0;
  const std::string out = write_conll(strict_free, layers);
  // Count rewritten tags by re-reading the raw columns.
  {
    std::istringstream raw(text), fixed(out);
    std::string r, f;
    while (std::getline(fixed, f)) {
      do {
        if (!std::getline(raw, r)) break;
        if (!r.empty() && r.back() == '\r') r.pop_back();
      } while (r.starts_with("-DOCSTART-") || (f.empty() != detail::split_ws(r).empty()));
      auto rc = detail::split_ws(r), fc = detail::split_ws(f);
      for (std::size_t c = 1; c < std::min(rc.size(), fc.size()); ++c) changed += rc[c] != fc[c];
    }
  }
  m.extra() = {{"tags_repaired", changed}};
  emit(m, a.out, out);
}

// ---------------------------------------------------------------------------

void add_input_options(CLI::App* sub, InputOptions& in) {
  sub->add_option("inputs", in.files, "CoNLL files of source predictions")->required();
  sub->add_option("--types", in.types, "Comma-separated entity types (default: inferred)");
  sub->add_option("--sources", in.sources, "Comma-separated source ids, one per tag column");
  sub->add_flag("--repair", in.repair, "Repair invalid BIO in inputs instead of failing");
}

int run(const std::vector<std::string>& args, int depth = 0) {
  CLI::App app{"Aggregate sequence-label predictions from many unreliable sources."};
  app.set_help_flag("--help", "Print this help message and exit");
  app.set_version_flag("--version", TAGAGG_VERSION);
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::string manifest_path;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--seed", seed, "Random seed");
    sub->add_option("--manifest", manifest_path, "Write the run manifest here (default: stderr)");
  };

  AggregateArgs ag;
  auto* s_agg = app.add_subcommand("aggregate", "Combine source predictions into one labelling");
  add_input_options(s_agg, ag.in);
  s_agg->add_option("--method", ag.method)->check(CLI::IsMember({"mv", "bea", "bea2", "bea-sup"}));
  s_agg->add_option("--granularity", ag.granularity)->check(CLI::IsMember({"token", "entity"}));
  s_agg->add_option("--alpha", ag.alpha, "Dirichlet concentration of confusion rows");
  s_agg->add_option("--beta", ag.beta, "Dirichlet concentration of the class prior");
  s_agg->add_option("--tol", ag.tol, "ELBO convergence threshold");
  s_agg->add_option("--max-iter", ag.max_iter);
  s_agg->add_option("--top-k", ag.top_k, "Sources kept by bea2");
  s_agg->add_option("--gold", ag.gold, "Gold tags for the first sentences (bea-sup, scoring)");
  s_agg->add_option("--tie", ag.tie, "Majority-vote tie rule")->check(CLI::IsMember({"random", "first"}));
  s_agg->add_option("--init", ag.init)->check(CLI::IsMember({"majority", "vote-share"}));
  s_agg->add_option("--threads", threads, "Worker threads");
  s_agg->add_option("--out", ag.out, "Aggregate CoNLL (default: stdout)");
  s_agg->add_option("--report", ag.report, "JSON report");
  common(s_agg);

  RankArgs rk;
  auto* s_rank = app.add_subcommand("rank", "Score sources against gold and compute mixture weights");
  add_input_options(s_rank, rk.in);
  s_rank->add_option("--gold", rk.gold)->required();
  s_rank->add_option("--top-k", rk.top_k)->check(CLI::PositiveNumber);
  s_rank->add_option("--out", rk.out, "Weights JSON (default: stdout)");
  common(s_rank);

  DistillArgs ds;
  auto* s_dist = app.add_subcommand("distill", "Train a memo tagger from a weighted mixture of sources");
  add_input_options(s_dist, ds.in);
  s_dist->add_option("--gold", ds.gold, "Rank sources on these gold sentences");
  s_dist->add_option("--weights", ds.weights, "Weights JSON from `rank`");
  s_dist->add_flag("--uniform", ds.uniform, "Uniform weights over all sources");
  s_dist->add_option("--top-k", ds.top_k)->check(CLI::PositiveNumber);
  s_dist->add_option("--epochs", ds.epochs);
  s_dist->add_option("--batch-size", ds.batch_size)->check(CLI::PositiveNumber);
  s_dist->add_option("--model", ds.model, "Save the tagger here");
  s_dist->add_option("--out", ds.out, "Tag the inputs with the tagger");
  s_dist->add_option("--silver-dir", ds.silver_dir, "Export per-epoch silver CoNLL and schedule");
  common(s_dist);

  FinetuneArgs ft;
  auto* s_ft = app.add_subcommand("finetune", "Fine-tune a saved tagger on gold sentences");
  s_ft->add_option("--model", ft.model)->required();
  s_ft->add_option("--gold", ft.gold)->required();
  s_ft->add_option("--epochs", ft.epochs);
  s_ft->add_option("--save", ft.save, "Save the fine-tuned tagger here");
  s_ft->add_option("--tag", ft.tag, "CoNLL file whose tokens to tag");
  s_ft->add_option("--out", ft.out, "Tagged output (default: stdout)");
  common(s_ft);

  ScoreArgs sc;
  auto* s_score = app.add_subcommand("score", "Entity F1 of a prediction against gold");
  s_score->add_option("prediction", sc.pred)->required();
  s_score->add_option("--gold", sc.gold)->required();
  s_score->add_option("--types", sc.types);
  s_score->add_option("--out", sc.out, "Score JSON");
  common(s_score);

  SimulateArgs sm;
  std::size_t reliable = 0;
  auto* s_sim = app.add_subcommand("simulate", "Sample a synthetic multi-source corpus");
  s_sim->add_option("--n", sm.n, "Instances, or sentences with --tagging");
  s_sim->add_option("--h", sm.h, "Sources")->check(CLI::PositiveNumber);
  s_sim->add_option("--k", sm.k, "Classes (instance mode)");
  auto* rel = s_sim->add_option("--reliable", reliable, "Reliable sources (default: all)");
  s_sim->add_option("--adversaries", sm.adversaries, "Label-permuting sources");
  s_sim->add_option("--diag", sm.diag, "Accuracy of reliable sources");
  s_sim->add_flag("--tagging", sm.tagging, "Generate BIO-tagged sentences");
  s_sim->add_option("--types", sm.types, "Entity types for --tagging");
  s_sim->add_option("--out", sm.out, "Source predictions (default: stdout)");
  s_sim->add_option("--gold", sm.gold, "Write the true labels here");
  common(s_sim);

  RepairArgs rp;
  auto* s_rep = app.add_subcommand("repair", "Promote orphan I- tags to B-");
  s_rep->add_option("input", rp.input)->required();
  s_rep->add_option("--types", rp.types);
  s_rep->add_option("--out", rp.out, "Repaired CoNLL (default: stdout)");
  common(s_rep);

  std::string replay_path;
  auto* s_replay = app.add_subcommand("replay", "Re-run the command recorded in a manifest");
  s_replay->add_option("manifest", replay_path)->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    std::cout << TAGAGG_VERSION << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "tagagg: " << e.what() << "\n";
    return 1;
  }

  try {
    if (s_replay->parsed()) {
      if (depth > 0) throw UsageError("a replayed manifest cannot itself be a replay");
      json doc;
      try {
        doc = json::parse(read_file(replay_path));
        return run(doc.at("argv").get<std::vector<std::string>>(), depth + 1);
      } catch (const json::exception& e) {
        throw DataError(replay_path + ": " + e.what());
      }
    }

    CLI::App* sub = app.get_subcommands().front();
    Manifest m(args);
    m.set_config(sub->get_name(), option_snapshot(*sub), seed);
    if (rel->count() > 0) sm.reliable = reliable;
    ag.threads = threads;

    const std::string name = sub->get_name();
    if (name == "aggregate") cmd_aggregate(m, ag, seed);
    else if (name == "rank") cmd_rank(m, rk);
    else if (name == "distill") cmd_distill(m, ds, seed);
    else if (name == "finetune") cmd_finetune(m, ft);
    else if (name == "score") cmd_score(m, sc);
    else if (name == "simulate") cmd_simulate(m, sm, seed);
    else if (name == "repair") cmd_repair(m, rp);

    const std::string doc = m.finish().dump(2) + "\n";
    if (manifest_path.empty()) {
      std::cerr << m.finish().dump() << "\n";
    } else {
      write_file(manifest_path, doc);
    }
    return 0;
  } catch (const UsageError& e) {
    std::cerr << "tagagg: usage: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "tagagg: numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::domain_error& e) {
    std::cerr << "tagagg: numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "tagagg: error: " << e.what() << "\n";
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "tagagg: error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args);
}
