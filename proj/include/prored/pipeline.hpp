#ifndef PRORED_PIPELINE_HPP
#define PRORED_PIPELINE_HPP

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "prored/corpus.hpp"
#include "prored/features.hpp"
#include "prored/ngram.hpp"
#include "prored/regression.hpp"
#include "prored/simulate.hpp"

namespace prored::pipeline {

// File-based pipeline stages. Each stage is a pure function of its inputs
// and flags: rerunning with identical inputs reproduces outputs byte for
// byte. Missing upstream artifacts raise dependency errors naming the
// producing command.

struct SegmentArgs {
  std::string input;   // token table TSV
  std::string output;  // utterance-annotated token table TSV
  ColumnSchema schema;
  SegmentationConfig config;
};

struct SegmentSummary {
  ParseStats parse;
  std::size_t utterances = 0;
};

SegmentSummary run_segment(const SegmentArgs& args);

struct TrainArgs {
  std::string input;         // annotated table from `segment`
  std::string model_prefix;  // writes <prefix>.fwd.ngram and <prefix>.bwd.ngram
  int order = 2;
  SmoothingConfig smoothing;
};

void run_train(const TrainArgs& args);

struct ScoreArgs {
  std::string input;   // annotated table from `segment`
  std::string output;  // annotated table + fwd_logprob/bwd_logprob
  std::string model_prefix;        // used when external_probs is empty
  std::string external_probs;      // TSV recording_id/utterance_idx/token_idx/fwd/bwd
};

void run_score(const ScoreArgs& args);

struct FeaturesArgs {
  std::string input;   // scored table from `score`
  std::string output;  // feature table TSV; drop report at <output>.drops.tsv
  std::string frequency_lexicon;
  std::string phoneme_lexicon;
  std::string class_map;  // optional
  FeatureOptions options;
};

DropReport run_features(const FeaturesArgs& args);

struct FitArgs {
  std::string features;       // feature table from `features`
  std::string spec_file;      // model spec JSON; optional when spec is set
  std::optional<ModelSpec> spec;
  std::string output_prefix;  // writes <prefix>.terms.tsv and <prefix>.meta.json
  LmmOptions options;
};

FitResult run_fit(const FitArgs& args);

struct CompareArgs {
  std::string fit_a;  // fit output prefix or .meta.json path
  std::string fit_b;
  bool nested = false;
  int df = 0;
  std::string output;  // one-row TSV
};

ComparisonResult run_compare(const CompareArgs& args);

struct SimulateArgs {
  SimConfig config;
  std::string out_dir;  // writes tokens.tsv, lexicons, true_probs.tsv, truth.json
};

void run_simulate(const SimulateArgs& args);

struct ProfilesArgs {
  std::string features;
  std::string out_dir;  // duration_profile.csv, confound_profile.csv, coefficients.csv
  int duration_cap = 10;
  std::vector<std::pair<std::string, std::string>> fits;  // label -> fit prefix
};

void run_profiles(const ProfilesArgs& args);

// Reads back a fit's metadata block; enough for model comparison.
FitResult load_fit_meta(const std::string& prefix_or_meta_path);

}  // namespace prored::pipeline

#endif  // PRORED_PIPELINE_HPP
