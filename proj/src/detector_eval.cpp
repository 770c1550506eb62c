#include "semwm/detector_eval.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <optional>
#include <sstream>

namespace semwm {

std::string fmt_num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc() ? std::string(buf, end) : std::string("nan");
}

double z_score(std::size_t greens, std::size_t n, double gamma) {
  if (n == 0) return 0.0;
  const double nd = static_cast<double>(n);
  return (static_cast<double>(greens) - gamma * nd) / std::sqrt(gamma * (1.0 - gamma) * nd);
}

DetectionResult detection_from_flags(std::span<const std::uint8_t> green_flags) {
  DetectionResult r;
  r.n_tokens = green_flags.size();
  for (auto f : green_flags) r.greens += f ? 1 : 0;
  if (r.n_tokens > 0) r.green_fraction = static_cast<double>(r.greens) / static_cast<double>(r.n_tokens);
  r.z_score = z_score(r.greens, r.n_tokens);
  return r;
}

DetectionResult detect(const WatermarkContext& ctx, const TokenSeq& text, const WatermarkParams& params) {
  if (text.empty()) throw DataError("cannot run detection on an empty text");
  auto r = detection_from_flags(detection_flags(ctx, text.ids, params));
  switch (params.scheme) {
    case Scheme::semantic: r.split_source = params.conditioning == Conditioning::global ? "self" : "self_prefix"; break;
    case Scheme::kgw: r.split_source = "previous_token"; break;
    case Scheme::unigram: r.split_source = "fixed"; break;
  }
  return r;
}

namespace {

// Midranks (1-based) of `v`.
std::vector<double> midranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = rank;
    i = j + 1;
  }
  return r;
}

}  // namespace

double roc_auc(std::span<const double> pos, std::span<const double> neg) {
  if (pos.empty() || neg.empty()) throw UsageError("roc_auc needs non-empty positive and negative lists");
  std::vector<double> all(pos.begin(), pos.end());
  all.insert(all.end(), neg.begin(), neg.end());
  const auto r = midranks(all);
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < pos.size(); ++i) rank_sum += r[i];
  const double n = static_cast<double>(pos.size());
  const double m = static_cast<double>(neg.size());
  // rank_sum - n(n+1)/2 counts positive-over-negative wins, ties as 1/2.
  return (rank_sum - n * (n + 1.0) / 2.0) / (n * m);
}

std::vector<RocPoint> roc_curve(std::span<const double> pos, std::span<const double> neg) {
  std::vector<double> thresholds(pos.begin(), pos.end());
  thresholds.insert(thresholds.end(), neg.begin(), neg.end());
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  std::vector<RocPoint> pts{{0.0, 0.0}};
  for (double t : thresholds) {
    const auto tp = std::count_if(pos.begin(), pos.end(), [&](double s) { return s >= t; });
    const auto fp = std::count_if(neg.begin(), neg.end(), [&](double s) { return s >= t; });
    pts.push_back({neg.empty() ? 0.0 : static_cast<double>(fp) / static_cast<double>(neg.size()),
                   pos.empty() ? 0.0 : static_cast<double>(tp) / static_cast<double>(pos.size())});
  }
  if (pts.back().fpr != 1.0 || pts.back().tpr != 1.0) pts.push_back({1.0, 1.0});
  return pts;
}

double overall_auc(double det, double para, double sent, double hate) {
  return (det + para + (100.0 - sent) + (100.0 - hate)) / 4.0;
}

double perplexity(const NGramLM& lm, std::span<const TokenId> tokens) {
  if (tokens.empty()) throw DataError("perplexity of an empty text is undefined");
  double nll = 0.0;
  for (std::size_t t = 0; t < tokens.size(); ++t) nll -= lm.log_prob(tokens.first(t), tokens[t]);
  return std::exp(nll / static_cast<double>(tokens.size()));
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) return 0.0;
  const auto rx = midranks(x), ry = midranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = (n + 1.0) / 2.0;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - mx);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - mx) * (ry[i] - mx);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

std::size_t ConditionResult::skip_count() const {
  std::size_t n = 0;
  for (const auto& [k, c] : skipped) n += c;
  return n;
}

const ConditionResult& EvalReport::condition(std::string_view name) const {
  for (const auto& c : conditions) {
    if (c.name == name) return c;
  }
  throw UsageError("no condition named " + std::string(name));
}

// ---------------------------------------------------------------------------
// suite

namespace {

struct Attack {
  std::string_view name;
  std::optional<TransformKind> kind;  // nullopt: no attack
};

constexpr Attack kAttacks[] = {
    {kCondDetect, std::nullopt},
    {kCondParaphrase, TransformKind::paraphrase},
    {kCondSentiment, TransformKind::sentiment_reversal},
    {kCondSentimentLatter, TransformKind::latter_half_reversal},
    {kCondHate, TransformKind::hate_insertion},
};
constexpr std::size_t kNumAttacks = std::size(kAttacks);

struct Scored {
  bool ok = false;
  double score = 0.0;
  std::string reason;
};

}  // namespace

EvalReport run_suite(const WatermarkContext& ctx, const Lexicons& lex, const Vocabulary& vocab,
                     std::span<const TokenSeq> texts, const SuiteConfig& config) {
  if (texts.empty()) throw DataError("evaluation needs at least one text");
  const auto records = watermark_batch(ctx, texts, config.params, config.exec);
  const std::size_t n = texts.size();

  // slots[i][a][side], side 0 = watermarked, 1 = original
  std::vector<std::array<std::array<Scored, 2>, kNumAttacks>> slots(n);
  std::vector<double> ppl_w(n), ppl_o(n);

  auto score_one = [&](std::size_t i) {
    const std::string texts_by_side[2] = {detokenize(records[i].output.ids, vocab), detokenize(texts[i].ids, vocab)};
    ppl_w[i] = perplexity(*ctx.lm, records[i].output.ids);
    ppl_o[i] = perplexity(*ctx.lm, texts[i].ids);
    for (std::size_t a = 0; a < kNumAttacks; ++a) {
      for (std::size_t side = 0; side < 2; ++side) {
        Scored& s = slots[i][a][side];
        std::string attacked = texts_by_side[side];
        if (kAttacks[a].kind) {
          TransformSpec spec;
          spec.kind = *kAttacks[a].kind;
          spec.replace_rate = config.paraphrase_rate;
          spec.max_edits = config.max_edits;
          spec.n_phrases = config.n_phrases;
          Rng rng(stream_seed(config.attack_seed, i, a * 2 + side));
          auto o = apply_local(spec, attacked, lex, rng);
          if (!o.text) {
            s.reason = o.reason;
            continue;
          }
          attacked = std::move(*o.text);
        }
        const auto toks = tokenize(attacked, vocab);
        if (toks.empty()) {
          s.reason = "empty";
          continue;
        }
        s.ok = true;
        s.score = detect(ctx, toks, config.params).green_fraction;
      }
    }
  };

  if (config.exec == Exec::parallel) {
    std::exception_ptr err;
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < n; ++i) {
      try {
        score_one(i);
      } catch (...) {
#pragma omp critical
        if (!err) err = std::current_exception();
      }
    }
    if (err) std::rethrow_exception(err);
  } else {
    for (std::size_t i = 0; i < n; ++i) score_one(i);
  }

  EvalReport report;
  report.n_texts = n;
  for (std::size_t a = 0; a < kNumAttacks; ++a) {
    ConditionResult c;
    c.name = std::string(kAttacks[a].name);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t side = 0; side < 2; ++side) {
        const Scored& s = slots[i][a][side];
        if (s.ok) {
          (side == 0 ? c.pos : c.neg).push_back(s.score);
          (side == 0 ? c.pos_index : c.neg_index).push_back(i);
        } else {
          ++c.skipped[(side == 0 ? "pos:" : "neg:") + s.reason];
        }
      }
    }
    c.valid = !c.pos.empty() && !c.neg.empty();
    if (c.valid) c.auc = roc_auc(c.pos, c.neg);
    report.conditions.push_back(std::move(c));
  }
  report.overall = overall_auc(100.0 * report.condition(kCondDetect).auc, 100.0 * report.condition(kCondParaphrase).auc,
                               100.0 * report.condition(kCondSentiment).auc, 100.0 * report.condition(kCondHate).auc);
  report.mean_ppl_watermarked = std::accumulate(ppl_w.begin(), ppl_w.end(), 0.0) / static_cast<double>(n);
  report.mean_ppl_original = std::accumulate(ppl_o.begin(), ppl_o.end(), 0.0) / static_cast<double>(n);
  return report;
}

// ---------------------------------------------------------------------------
// stealing

std::vector<double> decryption_rates(std::span<const std::vector<TokenId>> outputs, const GreenRedSplit& truth,
                                     std::span<const std::size_t> ks) {
  std::vector<std::size_t> freq(truth.size(), 0);
  for (const auto& o : outputs) {
    for (TokenId t : o) ++freq.at(static_cast<std::size_t>(t));
  }
  std::vector<TokenId> order(truth.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](TokenId a, TokenId b) {
    return freq[static_cast<std::size_t>(a)] > freq[static_cast<std::size_t>(b)];
  });
  std::vector<double> rates;
  for (std::size_t k : ks) {
    if (k == 0) throw UsageError("stealing k must be >= 1");
    const std::size_t kk = std::min(k, order.size());
    std::size_t hits = 0;
    for (std::size_t i = 0; i < kk; ++i) hits += truth.is_green(order[i]) ? 1 : 0;
    rates.push_back(static_cast<double>(hits) / static_cast<double>(k));
  }
  return rates;
}

StealingResult stealing_attack(const WatermarkContext& ctx, const TokenSeq& target, const WatermarkParams& params,
                               std::size_t n_samples, std::span<const std::size_t> ks) {
  GreenRedSplit truth;
  switch (params.scheme) {
    case Scheme::semantic:
      if (params.conditioning != Conditioning::global) {
        throw UsageError("stealing needs a fixed split; prefix conditioning has none");
      }
      if (!ctx.mapper) throw UsageError("semantic scheme requires a mapping model");
      truth = green_list(*ctx.mapper, target);
      break;
    case Scheme::unigram:
      truth = unigram_split(params.key, params.gamma, ctx.vocab_size);
      break;
    case Scheme::kgw:
      throw UsageError("stealing needs a fixed split; kgw has none");
  }
  std::vector<TokenSeq> copies(n_samples, target);
  const auto recs = watermark_batch(ctx, copies, params, Exec::parallel);
  std::vector<std::vector<TokenId>> outs;
  outs.reserve(recs.size());
  for (const auto& r : recs) outs.push_back(r.output.ids);
  StealingResult res;
  res.ks.assign(ks.begin(), ks.end());
  res.rates = decryption_rates(outs, truth, ks);
  res.n_samples = n_samples;
  return res;
}

std::vector<SweepRow> delta_sweep(const WatermarkContext& ctx, const Lexicons& lex, const Vocabulary& vocab,
                                  std::span<const TokenSeq> texts, std::vector<double> deltas,
                                  const SuiteConfig& config) {
  std::sort(deltas.begin(), deltas.end());
  std::vector<SweepRow> rows;
  for (double d : deltas) {
    SuiteConfig c = config;
    c.params.delta = d;
    const auto r = run_suite(ctx, lex, vocab, texts, c);
    SweepRow row;
    row.delta = d;
    row.overall = r.overall;
    row.mean_ppl = r.mean_ppl_watermarked;
    row.auc_det = r.condition(kCondDetect).auc;
    row.auc_para = r.condition(kCondParaphrase).auc;
    row.auc_sent = r.condition(kCondSentiment).auc;
    row.auc_hate = r.condition(kCondHate).auc;
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// reports

void print_report(std::ostream& os, const EvalReport& report) {
  os << std::left << std::setw(30) << "condition" << std::right << std::setw(10) << "AUC" << std::setw(8) << "n_pos"
     << std::setw(8) << "n_neg" << std::setw(9) << "skipped" << '\n';
  for (const auto& c : report.conditions) {
    std::ostringstream auc;
    auc << std::fixed << std::setprecision(2) << (c.valid ? 100.0 * c.auc : std::nan(""));
    os << std::left << std::setw(30) << c.name << std::right << std::setw(10) << auc.str() << std::setw(8)
       << c.pos.size() << std::setw(8) << c.neg.size() << std::setw(9) << c.skip_count() << '\n';
  }
  os << std::fixed << std::setprecision(2);
  os << "overall AUC: " << report.overall << '\n';
  os << "mean perplexity (watermarked / original): " << report.mean_ppl_watermarked << " / "
     << report.mean_ppl_original << '\n';
  for (std::size_t i = 0; i < report.stealing_ks.size(); ++i) {
    os << "decryption rate @" << report.stealing_ks[i] << ": " << std::setprecision(3) << report.stealing_rates[i]
       << '\n';
  }
  os.unsetf(std::ios::fixed);
}

namespace {

std::ofstream open_out(const std::filesystem::path& p, std::string_view header) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw DataError("cannot write: " + p.string());
  if (!header.empty()) out << header << '\n';
  return out;
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

// Minimal line/scatter plot on the unit square mapped to a 400x400 canvas.
struct Svg {
  std::ostringstream body;
  double x0, x1, y0, y1;
  static constexpr double W = 400, H = 400, M = 50;

  Svg(double xa, double xb, double ya, double yb) : x0(xa), x1(xb), y0(ya), y1(yb) {
    if (x1 <= x0) x1 = x0 + 1.0;
    if (y1 <= y0) y1 = y0 + 1.0;
  }
  double px(double x) const { return M + (x - x0) / (x1 - x0) * W; }
  double py(double y) const { return M + H - (y - y0) / (y1 - y0) * H; }

  void polyline(const std::vector<std::pair<double, double>>& pts, const char* color) {
    body << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (const auto& [x, y] : pts) body << fmt_fixed(px(x)) << ',' << fmt_fixed(py(y)) << ' ';
    body << "\"/>\n";
  }
  void dots(const std::vector<std::pair<double, double>>& pts, const char* color) {
    for (const auto& [x, y] : pts) {
      body << "<circle cx=\"" << fmt_fixed(px(x)) << "\" cy=\"" << fmt_fixed(py(y)) << "\" r=\"4\" fill=\"" << color
           << "\"/>\n";
    }
  }
  void text(double x, double y, const std::string& s, const char* color = "#000") {
    body << "<text x=\"" << fmt_fixed(x) << "\" y=\"" << fmt_fixed(y) << "\" font-size=\"12\" fill=\"" << color
         << "\">" << s << "</text>\n";
  }
  static std::string fmt_fixed(double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << v;
    return os.str();
  }
  void write(const std::filesystem::path& p, const std::string& title, const std::string& xl, const std::string& yl,
             std::string_view header) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw DataError("cannot write: " + p.string());
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W + 2 * M + 160 << "\" height=\"" << H + 2 * M
        << "\">\n";
    if (!header.empty()) out << "<!-- " << header << " -->\n";
    out << "<rect x=\"" << M << "\" y=\"" << M << "\" width=\"" << W << "\" height=\"" << H
        << "\" fill=\"none\" stroke=\"#444\"/>\n";
    out << "<text x=\"" << M << "\" y=\"" << M - 15 << "\" font-size=\"14\">" << title << "</text>\n";
    out << "<text x=\"" << M + W / 2 - 20 << "\" y=\"" << M + H + 35 << "\" font-size=\"12\">" << xl << "</text>\n";
    out << "<text x=\"10\" y=\"" << M + H / 2 << "\" font-size=\"12\">" << yl << "</text>\n";
    out << "<text x=\"" << M - 5 << "\" y=\"" << M + H + 15 << "\" font-size=\"10\">" << fmt_num(x0) << "</text>\n";
    out << "<text x=\"" << M + W - 20 << "\" y=\"" << M + H + 15 << "\" font-size=\"10\">" << fmt_num(x1)
        << "</text>\n";
    out << "<text x=\"" << 5 << "\" y=\"" << M + H << "\" font-size=\"10\">" << fmt_num(y0) << "</text>\n";
    out << "<text x=\"" << 5 << "\" y=\"" << M + 10 << "\" font-size=\"10\">" << fmt_num(y1) << "</text>\n";
    out << body.str() << "</svg>\n";
  }
};

}  // namespace

void write_report(const std::filesystem::path& dir, const EvalReport& report, std::string_view header) {
  std::filesystem::create_directories(dir);
  {
    auto out = open_out(dir / "summary.csv", header);
    out << "condition,auc,n_pos,n_neg,skipped\n";
    for (const auto& c : report.conditions) {
      out << c.name << ',' << (c.valid ? fmt_num(c.auc) : "nan") << ',' << c.pos.size() << ',' << c.neg.size() << ','
          << c.skip_count() << '\n';
    }
    out << "overall," << fmt_num(report.overall / 100.0) << ",,,\n";
    out << "mean_ppl_watermarked," << fmt_num(report.mean_ppl_watermarked) << ",,,\n";
    out << "mean_ppl_original," << fmt_num(report.mean_ppl_original) << ",,,\n";
    for (std::size_t i = 0; i < report.stealing_ks.size(); ++i) {
      out << "decryption_rate_at_" << report.stealing_ks[i] << ',' << fmt_num(report.stealing_rates[i]) << ",,,\n";
    }
  }
  for (const auto& c : report.conditions) {
    auto out = open_out(dir / ("scores_" + c.name + ".csv"), header);
    out << "index,class,green_fraction\n";
    for (std::size_t k = 0; k < c.pos.size(); ++k) out << c.pos_index[k] << ",watermarked," << fmt_num(c.pos[k]) << '\n';
    for (std::size_t k = 0; k < c.neg.size(); ++k) out << c.neg_index[k] << ",original," << fmt_num(c.neg[k]) << '\n';
    for (const auto& [reason, count] : c.skipped) out << "# skipped " << reason << '=' << count << '\n';
  }
  {
    auto out = open_out(dir / "skips.csv", header);
    out << "condition,side,reason,count\n";
    for (const auto& c : report.conditions) {
      for (const auto& [key, count] : c.skipped) {
        const auto colon = key.find(':');
        out << c.name << ',' << key.substr(0, colon) << ',' << key.substr(colon + 1) << ',' << count << '\n';
      }
    }
  }
  Svg svg(0.0, 1.0, 0.0, 1.0);
  svg.polyline({{0.0, 0.0}, {1.0, 1.0}}, "#bbbbbb");
  std::size_t ci = 0;
  for (const auto& c : report.conditions) {
    const char* color = kPalette[ci % std::size(kPalette)];
    if (c.valid) {
      std::vector<std::pair<double, double>> pts;
      for (const auto& p : roc_curve(c.pos, c.neg)) pts.emplace_back(p.fpr, p.tpr);
      svg.polyline(pts, color);
    }
    std::ostringstream label;
    label << c.name << " (" << std::fixed << std::setprecision(3) << c.auc << ")";
    svg.text(Svg::M + Svg::W + 10, Svg::M + 20 + 18 * static_cast<double>(ci), label.str(), color);
    ++ci;
  }
  svg.write(dir / "roc.svg", "ROC curves", "false positive rate", "TPR", header);
}

void write_sweep(const std::filesystem::path& dir, std::span<const SweepRow> rows, std::string_view header) {
  std::filesystem::create_directories(dir);
  {
    auto out = open_out(dir / "sweep.csv", header);
    out << "delta,overall_auc,mean_ppl,auc_det,auc_para,auc_sent,auc_hate\n";
    for (const auto& r : rows) {
      out << fmt_num(r.delta) << ',' << fmt_num(r.overall) << ',' << fmt_num(r.mean_ppl) << ',' << fmt_num(r.auc_det)
          << ',' << fmt_num(r.auc_para) << ',' << fmt_num(r.auc_sent) << ',' << fmt_num(r.auc_hate) << '\n';
    }
  }
  if (rows.empty()) return;
  double pmin = rows.front().mean_ppl, pmax = pmin, amin = rows.front().overall, amax = amin;
  for (const auto& r : rows) {
    pmin = std::min(pmin, r.mean_ppl);
    pmax = std::max(pmax, r.mean_ppl);
    amin = std::min(amin, r.overall);
    amax = std::max(amax, r.overall);
  }
  const double pad_p = std::max(1e-6, 0.05 * (pmax - pmin)), pad_a = std::max(1e-6, 0.05 * (amax - amin));
  Svg svg(pmin - pad_p, pmax + pad_p, amin - pad_a, amax + pad_a);
  std::vector<std::pair<double, double>> pts;
  for (const auto& r : rows) pts.emplace_back(r.mean_ppl, r.overall);
  svg.polyline(pts, "#999999");
  svg.dots(pts, kPalette[0]);
  for (const auto& r : rows) svg.text(svg.px(r.mean_ppl) + 6, svg.py(r.overall) - 6, "d=" + fmt_num(r.delta));
  svg.write(dir / "sweep.svg", "overall AUC vs perplexity", "mean perplexity", "overall AUC", header);
}

void write_stealing(const std::filesystem::path& path, std::span<const std::string> schemes,
                    std::span<const StealingResult> results, std::string_view header) {
  auto out = open_out(path, header);
  out << "scheme,run,k,decryption_rate\n";
  for (std::size_t i = 0; i < results.size(); ++i) {
    for (std::size_t j = 0; j < results[i].ks.size(); ++j) {
      out << schemes[i] << ',' << i << ',' << results[i].ks[j] << ',' << fmt_num(results[i].rates[j]) << '\n';
    }
  }
}

}  // namespace semwm
