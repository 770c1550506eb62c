#include "semwm/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>

#include "semwm/llm_client.hpp"
#include "semwm/parallel.hpp"

namespace semwm::pipeline {

namespace fs = std::filesystem;

WatermarkParams watermark_params(const RunConfig& cfg) {
  WatermarkParams p;
  p.delta = cfg.num("delta");
  p.entropy_threshold = cfg.num("entropy_threshold");
  p.temperature = cfg.num("temperature");
  p.top_p = cfg.num("top_p");
  p.conditioning = parse_conditioning(cfg.str("conditioning"));
  p.scheme = parse_scheme(cfg.str("scheme"));
  p.fidelity_weight = cfg.num("fidelity_weight");
  p.perturb = parse_perturb_mode(cfg.str("perturb"));
  p.gamma = cfg.num("gamma");
  p.key = cfg.u64("key");
  p.seed = cfg.u64("seed");
  p.validate();
  return p;
}

TrainConfig train_config(const RunConfig& cfg) {
  TrainConfig t;
  t.margin = cfg.num("margin");
  t.lambda_text = cfg.num("lambda_text");
  t.lambda_token = cfg.num("lambda_token");
  t.epochs = static_cast<int>(cfg.integer("epochs"));
  t.learning_rate = cfg.num("lr");
  const long bs = cfg.integer("batch_size");
  if (bs < 1) throw UsageError("batch size must be >= 1");
  t.batch_size = static_cast<std::size_t>(bs);
  t.seed = cfg.u64("seed");
  return t;
}

DatasetConfig dataset_config(const RunConfig& cfg) {
  DatasetConfig d;
  d.n_positives = static_cast<std::size_t>(cfg.u64("n_positives"));
  d.positive_rate_min = cfg.num("pos_rate_min");
  d.positive_rate_max = cfg.num("pos_rate_max");
  d.max_edits = static_cast<std::size_t>(cfg.u64("max_edits"));
  d.n_phrases = static_cast<std::size_t>(cfg.u64("n_phrases"));
  d.seed = cfg.u64("seed");
  return d;
}

SuiteConfig suite_config(const RunConfig& cfg) {
  SuiteConfig s;
  s.params = watermark_params(cfg);
  s.paraphrase_rate = cfg.num("paraphrase_rate");
  s.max_edits = static_cast<std::size_t>(cfg.u64("max_edits"));
  s.n_phrases = static_cast<std::size_t>(cfg.u64("n_phrases"));
  s.attack_seed = stream_seed(cfg.u64("seed"), 0x61747461636bULL);
  return s;
}

WatermarkContext Artifacts::context() const {
  WatermarkContext ctx;
  ctx.lm = &lm;
  ctx.mapper = mapper ? &*mapper : nullptr;
  ctx.candidates = &candidates;
  ctx.vocab_size = vocab.size();
  return ctx;
}

namespace {

void require(const fs::path& p, const char* produced_by) {
  if (!fs::exists(p)) {
    throw DataError("missing " + p.string() + " (run `" + produced_by + "` first)");
  }
}

void save_config(const RunConfig& cfg, const fs::path& out) {
  std::ofstream f(out / files::kConfig, std::ios::binary);
  if (!f) throw DataError("cannot write to output directory " + out.string());
  f << "# config_hash=" << cfg.hash() << '\n' << cfg.serialize();
}

void prepare(const RunConfig& cfg, const fs::path& out) {
  fs::create_directories(out);
  set_jobs(static_cast<int>(cfg.integer("jobs")));
  save_config(cfg, out);
}

std::vector<TokenSeq> tokenize_lines(const std::vector<std::string>& lines, const Vocabulary& vocab) {
  std::vector<TokenSeq> out;
  out.reserve(lines.size());
  for (const auto& l : lines) out.push_back(tokenize(l, vocab));
  return out;
}

std::vector<std::string> nonempty_input(const fs::path& input) {
  auto lines = read_lines(input);
  if (lines.empty()) throw DataError("no texts in " + input.string());
  return lines;
}

std::vector<TokenSeq> eval_texts(const RunConfig& cfg, const fs::path& out, const Vocabulary& vocab) {
  require(out / files::kDocsHeldout, "ingest");
  auto docs = read_lines(out / files::kDocsHeldout);
  const auto n = static_cast<std::size_t>(cfg.u64("eval_texts"));
  if (docs.size() > n) docs.resize(n);
  if (docs.empty()) throw DataError("no held-out documents to evaluate on");
  return tokenize_lines(docs, vocab);
}

}  // namespace

Artifacts load_artifacts(const RunConfig& cfg, const fs::path& out, bool need_mapper) {
  require(out / files::kVocab, "ingest");
  require(out / files::kLm, "train-lm");
  Artifacts a{Vocabulary::load(out / files::kVocab), {}, std::nullopt, Lexicons::load(cfg.str("lexicons")), {}};
  a.lm = NGramLM::load(out / files::kLm, a.vocab);
  if (need_mapper || parse_scheme(cfg.str("scheme")) == Scheme::semantic) {
    require(out / files::kMapper, "train-mapper");
    a.mapper = load_model(out / files::kMapper, a.vocab);
  }
  a.candidates = build_candidate_table(a.vocab, a.lex);
  return a;
}

void ingest(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
  prepare(cfg, out);
  const auto lex = Lexicons::load(cfg.str("lexicons"));
  const auto corpus = ingest_corpus(cfg.str("corpus"), static_cast<std::size_t>(cfg.u64("min_words")),
                                    static_cast<std::size_t>(cfg.u64("max_words")));
  const auto split = split_documents(corpus.documents, cfg.num("heldout_fraction"), cfg.u64("seed"));
  const std::string header = cfg.provenance_header();
  write_lines(out / files::kDocsTrain, split.train, header);
  write_lines(out / files::kDocsHeldout, split.heldout, header);

  std::vector<std::string> vocab_src(corpus.documents.begin(), corpus.documents.end());
  const auto lex_texts = lex.vocabulary_texts();
  vocab_src.insert(vocab_src.end(), lex_texts.begin(), lex_texts.end());
  const auto vocab = build_vocab(vocab_src, static_cast<std::size_t>(cfg.u64("vocab_max")));
  vocab.save(out / files::kVocab);

  const auto& p = corpus.provenance;
  log << "ingest: read " << p.records_read << " records, dropped " << p.dropped_short << " short, truncated "
      << p.truncated << "; " << split.train.size() << " train / " << split.heldout.size() << " held-out; vocab "
      << vocab.size() << " types\n";
}

void train_lm_stage(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
  prepare(cfg, out);
  require(out / files::kVocab, "ingest");
  require(out / files::kDocsTrain, "ingest");
  const auto vocab = Vocabulary::load(out / files::kVocab);
  const auto docs = read_lines(out / files::kDocsTrain);
  const auto seqs = tokenize_corpus(docs, vocab);
  const auto lm = train_lm(seqs, vocab, static_cast<int>(cfg.integer("lm_order")), cfg.num("lm_smoothing"));
  lm.save(out / files::kLm);
  log << "train-lm: order " << lm.order() << " on " << seqs.size() << " documents\n";
}

namespace {

void write_dataset_stats(const fs::path& path, const DatasetStats& s, const char* split) {
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw DataError("cannot write: " + path.string());
  for (const auto& [kind, t] : s.by_kind) {
    out << split << ',' << kind << ",attempted," << t.attempted << '\n';
    out << split << ',' << kind << ",retained," << t.retained << '\n';
    for (const auto& [reason, n] : t.rejected) out << split << ',' << kind << ",rejected:" << reason << ',' << n << '\n';
  }
  out << split << ",all,anchors," << s.anchors << '\n';
  out << split << ",all,triplets," << s.triplets << '\n';
}

}  // namespace

void make_dataset(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
  prepare(cfg, out);
  require(out / files::kDocsTrain, "ingest");
  require(out / files::kDocsHeldout, "ingest");
  const auto lex = Lexicons::load(cfg.str("lexicons"));
  const auto train_docs = read_lines(out / files::kDocsTrain);
  auto val_docs = read_lines(out / files::kDocsHeldout);
  const auto n_val = static_cast<std::size_t>(cfg.u64("val_anchors"));
  if (val_docs.size() > n_val) val_docs.resize(n_val);

  DatasetConfig dc = dataset_config(cfg);
  std::unique_ptr<LLMClient> client;
  std::optional<PromptSet> prompts;
  LLMBackend backend;
  if (cfg.flag("llm_transforms")) {
    prompts = PromptSet::load(cfg.str("prompts"));
    auto lc = LLMClientConfig::from_env();
    if (!cfg.str("llm_fixture").empty()) {
      client = std::make_unique<FixtureLLMClient>(
          FixtureLLMClient::load(cfg.str("llm_fixture"), lc.model, lc.temperature));
    } else {
      client = std::make_unique<HttpLLMClient>(lc);
    }
    backend.client = client.get();
    backend.prompts = &*prompts;
    log << "make-dataset: LLM transforms via " << (cfg.str("llm_fixture").empty() ? lc.describe() : "fixture") << '\n';
  }
  const LLMBackend* llm = client ? &backend : nullptr;

  const auto train = build_triplets(train_docs, lex, dc, llm);
  DatasetConfig vc = dc;
  vc.seed = stream_seed(dc.seed, 0x76616cULL);
  const auto val = build_triplets(val_docs, lex, vc, llm);

  const std::string header = cfg.provenance_header();
  write_triplets(out / files::kTripletsTrain, train.records, header);
  write_triplets(out / files::kTripletsVal, val.records, header);
  {
    std::ofstream s(out / files::kDatasetStats, std::ios::binary);
    s << header << "\nsplit,kind,stat,count\n";
  }
  write_dataset_stats(out / files::kDatasetStats, train.stats, "train");
  write_dataset_stats(out / files::kDatasetStats, val.stats, "val");
  log << "make-dataset: " << train.records.size() << " train triplets from " << train_docs.size() << " anchors, "
      << val.records.size() << " validation triplets from " << val_docs.size() << " anchors\n";
}

void train_mapper(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
  prepare(cfg, out);
  require(out / files::kVocab, "ingest");
  require(out / files::kTripletsTrain, "make-dataset");
  const auto vocab = Vocabulary::load(out / files::kVocab);
  const auto train_set = to_training_triplets(read_triplets(out / files::kTripletsTrain), vocab);
  std::vector<Triplet> val_set;
  if (fs::exists(out / files::kTripletsVal)) {
    val_set = to_training_triplets(read_triplets(out / files::kTripletsVal), vocab);
  }
  const TrainConfig tc = train_config(cfg);
  ModelDims dims;
  dims.feature_dim = static_cast<std::size_t>(cfg.u64("feature_dim"));
  dims.hidden_dim = static_cast<std::size_t>(cfg.u64("hidden_dim"));
  dims.vocab_size = vocab.size();
  if (dims.feature_dim == 0 || dims.hidden_dim == 0) throw UsageError("feature_dim and hidden_dim must be >= 1");
  auto init = MappingModel::random(dims, vocab.hash(), stream_seed(tc.seed, 0x696e6974ULL));
  auto result = train(train_set, val_set, tc, std::move(init));
  result.model.metadata = {{"config_hash", cfg.hash()},
                           {"margin", cfg.str("margin")},
                           {"lambda_text", cfg.str("lambda_text")},
                           {"lambda_token", cfg.str("lambda_token")},
                           {"epochs", cfg.str("epochs")},
                           {"lr", cfg.str("lr")},
                           {"batch_size", cfg.str("batch_size")},
                           {"seed", cfg.str("seed")},
                           {"best_epoch", std::to_string(result.best_epoch)}};
  save_model(result.model, out / files::kMapper);
  write_train_log(out / files::kTrainLog, result.log, cfg.provenance_header());
  const auto& last = result.log.back();
  log << "train-mapper: " << train_set.size() << " triplets, " << tc.epochs << " epochs, best epoch "
      << result.best_epoch << ", final val loss " << fmt_num(last.val_loss) << '\n';
}

void watermark(const RunConfig& cfg, const fs::path& out, const fs::path& input, std::ostream& log) {
  prepare(cfg, out);
  const auto art = load_artifacts(cfg, out);
  const fs::path in = input.empty() ? out / files::kDocsHeldout : input;
  const auto texts = tokenize_lines(nonempty_input(in), art.vocab);
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (texts[i].empty()) throw DataError(in.string() + ": text " + std::to_string(i) + " has no tokens");
  }
  const auto recs = watermark_batch(art.context(), texts, watermark_params(cfg), Exec::parallel);
  const std::string header = cfg.provenance_header();
  write_records(out / files::kWatermarked, recs, art.vocab, header);
  std::vector<std::string> outputs;
  for (const auto& r : recs) outputs.push_back(detokenize(r.output.ids, art.vocab));
  write_lines(out / files::kWatermarkedText, outputs, header);
  std::size_t perturbed = 0, total = 0;
  for (const auto& r : recs) {
    total += r.perturbed.size();
    perturbed += static_cast<std::size_t>(std::count(r.perturbed.begin(), r.perturbed.end(), 1));
  }
  log << "watermark: " << recs.size() << " texts, " << perturbed << " of " << total
      << " positions passed the entropy gate\n";
}

void detect(const RunConfig& cfg, const fs::path& out, const fs::path& input, std::ostream& log) {
  if (input.empty()) throw UsageError("detect needs --input");
  prepare(cfg, out);
  const auto lines = nonempty_input(input);
  const auto art = load_artifacts(cfg, out);
  const auto params = watermark_params(cfg);
  const double threshold = cfg.num("detect_threshold");
  std::ofstream f(out / files::kDetections, std::ios::binary);
  if (!f) throw DataError("cannot write detections");
  f << cfg.provenance_header() << "\nindex,n_tokens,greens,green_fraction,z_score,watermarked\n";
  std::size_t flagged = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto toks = tokenize(lines[i], art.vocab);
    const auto r = semwm::detect(art.context(), toks, params);
    const bool wm = r.green_fraction > threshold;
    flagged += wm;
    sum += r.green_fraction;
    f << i << ',' << r.n_tokens << ',' << r.greens << ',' << fmt_num(r.green_fraction) << ',' << fmt_num(r.z_score)
      << ',' << (wm ? 1 : 0) << '\n';
  }
  log << "detect: " << lines.size() << " texts, mean green fraction " << std::fixed << std::setprecision(4)
      << sum / static_cast<double>(lines.size()) << ", " << flagged << " above threshold " << threshold << '\n';
  log.unsetf(std::ios::fixed);
}

void attack(const RunConfig& cfg, const fs::path& out, const fs::path& input, std::ostream& log) {
  prepare(cfg, out);
  const fs::path in = input.empty() ? out / files::kWatermarkedText : input;
  const auto lines = nonempty_input(in);
  const auto lex = Lexicons::load(cfg.str("lexicons"));
  TransformSpec spec;
  spec.kind = parse_transform_kind(cfg.str("attack_kind"));
  spec.replace_rate = cfg.num("paraphrase_rate");
  spec.max_edits = static_cast<std::size_t>(cfg.u64("max_edits"));
  spec.n_phrases = static_cast<std::size_t>(cfg.u64("n_phrases"));
  std::vector<std::string> attacked;
  std::ofstream status(out / "attack_log.csv", std::ios::binary);
  status << cfg.provenance_header() << "\nindex,status,reason\n";
  const auto seed = stream_seed(cfg.u64("seed"), 0x61747461636bULL);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    Rng rng(stream_seed(seed, i));
    auto o = apply_local(spec, lines[i], lex, rng);
    status << i << ',' << (o.text ? "ok" : "rejected") << ',' << o.reason << '\n';
    if (o.text) attacked.push_back(std::move(*o.text));
  }
  write_lines(out / files::kAttacked, attacked, cfg.provenance_header());
  log << "attack (" << to_string(spec.kind) << "): " << attacked.size() << " of " << lines.size()
      << " texts transformed\n";
}

std::vector<StealingResult> stealing_runs(const RunConfig& cfg, const Artifacts& art, std::span<const TokenSeq> targets,
                                          Scheme scheme) {
  WatermarkParams p = watermark_params(cfg);
  p.scheme = scheme;
  p.conditioning = Conditioning::global;
  // The baselines perturb every position, as in their original form.
  if (scheme != Scheme::semantic) p.entropy_threshold = cfg.num("baseline_entropy_threshold");
  const auto ks = cfg.size_list("steal_ks");
  const auto n = static_cast<std::size_t>(cfg.u64("steal_samples"));
  std::vector<StealingResult> out;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    WatermarkParams pt = p;
    pt.seed = stream_seed(p.seed, 0x737465616cULL, t);
    out.push_back(stealing_attack(art.context(), targets[t], pt, n, ks));
  }
  return out;
}

namespace {

std::vector<double> mean_rates(std::span<const StealingResult> rs) {
  std::vector<double> m(rs.empty() ? 0 : rs.front().rates.size(), 0.0);
  for (const auto& r : rs) {
    for (std::size_t j = 0; j < m.size(); ++j) m[j] += r.rates[j];
  }
  for (double& v : m) v /= static_cast<double>(rs.size());
  return m;
}

std::vector<TokenSeq> steal_targets(const RunConfig& cfg, const fs::path& out, const Vocabulary& vocab) {
  auto texts = eval_texts(cfg, out, vocab);
  const auto n = static_cast<std::size_t>(cfg.u64("steal_targets"));
  if (texts.size() > n) texts.resize(n);
  return texts;
}

}  // namespace

EvalReport evaluate(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
  prepare(cfg, out);
  const auto art = load_artifacts(cfg, out);
  const auto texts = eval_texts(cfg, out, art.vocab);
  auto report = run_suite(art.context(), art.lex, art.vocab, texts, suite_config(cfg));
  const auto params = watermark_params(cfg);
  if (cfg.u64("steal_samples") > 0 && cfg.u64("steal_targets") > 0 && params.scheme != Scheme::kgw &&
      params.conditioning == Conditioning::global) {
    const auto runs = stealing_runs(cfg, art, steal_targets(cfg, out, art.vocab), params.scheme);
    report.stealing_ks = cfg.size_list("steal_ks");
    report.stealing_rates = mean_rates(runs);
  }
  for (const auto& [k, v] : cfg.values()) report.provenance[k] = v;
  write_report(out / files::kEvalDir, report, cfg.provenance_header());
  print_report(log, report);
  return report;
}

void steal(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
  prepare(cfg, out);
  std::vector<Scheme> schemes;
  std::vector<std::string> names;
  {
    std::string list = cfg.str("steal_schemes");
    std::size_t start = 0;
    while (start <= list.size()) {
      auto end = list.find(',', start);
      if (end == std::string::npos) end = list.size();
      const auto name = list.substr(start, end - start);
      if (!name.empty()) schemes.push_back(parse_scheme(name));
      start = end + 1;
    }
  }
  const bool semantic = std::find(schemes.begin(), schemes.end(), Scheme::semantic) != schemes.end();
  const auto art = load_artifacts(cfg, out, semantic);
  const auto targets = steal_targets(cfg, out, art.vocab);
  std::vector<StealingResult> all;
  for (Scheme s : schemes) {
    const auto runs = stealing_runs(cfg, art, targets, s);
    const auto mean = mean_rates(runs);
    log << "steal (" << to_string(s) << "):";
    for (std::size_t j = 0; j < mean.size(); ++j) {
      log << " k=" << runs.front().ks[j] << " rate=" << std::fixed << std::setprecision(3) << mean[j];
    }
    log << '\n';
    log.unsetf(std::ios::fixed);
    for (auto& r : runs) {
      all.push_back(r);
      names.emplace_back(to_string(s));
    }
  }
  write_stealing(out / files::kStealing, names, all, cfg.provenance_header());
}

void sweep(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
  prepare(cfg, out);
  const auto art = load_artifacts(cfg, out);
  const auto texts = eval_texts(cfg, out, art.vocab);
  const auto rows = delta_sweep(art.context(), art.lex, art.vocab, texts, cfg.num_list("sweep_deltas"),
                                suite_config(cfg));
  write_sweep(out / files::kSweepDir, rows, cfg.provenance_header());
  log << "delta   overall  mean_ppl\n";
  for (const auto& r : rows) {
    log << std::fixed << std::setprecision(2) << std::setw(5) << r.delta << std::setw(9) << r.overall
        << std::setw(10) << r.mean_ppl << '\n';
  }
  log.unsetf(std::ios::fixed);
}

}  // namespace semwm::pipeline
