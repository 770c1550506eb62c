#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <string>

#include "semwm/dataset_builder.hpp"
#include "semwm/detector_eval.hpp"
#include "semwm/mapping_model.hpp"
#include "semwm/run_config.hpp"
#include "semwm/text_core.hpp"
#include "semwm/toy_lm.hpp"
#include "semwm/trainer.hpp"
#include "semwm/watermark_engine.hpp"

// Pipeline stages behind the CLI subcommands. Each stage reads earlier
// artifacts from the output directory and writes its own there.
namespace semwm::pipeline {

namespace files {
inline constexpr const char* kDocsTrain = "docs_train.txt";
inline constexpr const char* kDocsHeldout = "docs_heldout.txt";
inline constexpr const char* kVocab = "vocab.txt";
inline constexpr const char* kLm = "lm.txt";
inline constexpr const char* kTripletsTrain = "triplets_train.jsonl";
inline constexpr const char* kTripletsVal = "triplets_val.jsonl";
inline constexpr const char* kDatasetStats = "dataset_stats.csv";
inline constexpr const char* kMapper = "mapper.bin";
inline constexpr const char* kTrainLog = "train_log.csv";
inline constexpr const char* kWatermarked = "watermarked.jsonl";
inline constexpr const char* kWatermarkedText = "watermarked.txt";
inline constexpr const char* kDetections = "detections.csv";
inline constexpr const char* kAttacked = "attacked.txt";
inline constexpr const char* kEvalDir = "eval";
inline constexpr const char* kStealing = "stealing.csv";
inline constexpr const char* kSweepDir = "sweep";
inline constexpr const char* kConfig = "run_config.txt";
}  // namespace files

WatermarkParams watermark_params(const RunConfig& cfg);
TrainConfig train_config(const RunConfig& cfg);
DatasetConfig dataset_config(const RunConfig& cfg);
SuiteConfig suite_config(const RunConfig& cfg);

/// Loaded artifacts with a ready WatermarkContext.
struct Artifacts {
  Vocabulary vocab;
  NGramLM lm;
  std::optional<MappingModel> mapper;
  Lexicons lex;
  CandidateTable candidates;

  WatermarkContext context() const;
};

/// The mapper is loaded when the configured scheme is semantic or
/// `need_mapper` is set.
Artifacts load_artifacts(const RunConfig& cfg, const std::filesystem::path& out, bool need_mapper = false);

void ingest(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log);
void train_lm_stage(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log);
void make_dataset(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log);
void train_mapper(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log);
/// Input: one text per line (default: held-out documents).
void watermark(const RunConfig& cfg, const std::filesystem::path& out, const std::filesystem::path& input,
               std::ostream& log);
void detect(const RunConfig& cfg, const std::filesystem::path& out, const std::filesystem::path& input,
            std::ostream& log);
void attack(const RunConfig& cfg, const std::filesystem::path& out, const std::filesystem::path& input,
            std::ostream& log);
EvalReport evaluate(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log);
void steal(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log);
void sweep(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log);

/// Stealing rates averaged over the configured targets for one scheme.
std::vector<StealingResult> stealing_runs(const RunConfig& cfg, const Artifacts& art,
                                          std::span<const TokenSeq> targets, Scheme scheme);

}  // namespace semwm::pipeline
