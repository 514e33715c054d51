#ifndef PRORED_SIMULATE_HPP
#define PRORED_SIMULATE_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "prored/corpus.hpp"
#include "prored/ngram.hpp"
#include "prored/regression.hpp"

namespace prored {

// Synthetic spontaneous-speech corpus with known ground truth. Word
// sequences come from a first-order Markov grammar over a Zipfian lexicon
// with smoothly context-dependent transitions; utterance lengths are
// geometric, so the grammar is equivalent to a chain that emits EOS with
// constant hazard and both forward and pooled backward conditionals have
// closed forms. Log durations are a linear model in the Table-style
// predictors plus crossed speaker and word|POS intercepts.
struct SimConfig {
  std::uint64_t seed = 1;
  int n_utterances = 2000;
  int utterances_per_recording = 20;
  int n_speakers = 20;
  int n_word_types = 200;
  double zipf_exponent = 1.1;
  double mean_utterance_length = 8.0;  // geometric on {1, 2, ...}
  double topic_concentration = 1.0;    // strength of context dependence
  // > 0: restrict each word's transitions to its s angularly-nearest
  // successors (plus a vanishing floor elsewhere), giving near-uniform
  // context occupancy for convergence studies
  int successor_window = 0;
  // term -> planted coefficient; empty selects default_true_beta()
  std::map<std::string, double> true_beta;
  double sigma_speaker = 0.08;
  double sigma_wordpos = 0.10;
  double sigma_resid = 0.25;
  // > 0 tilts emissions toward improbable words near the utterance end,
  // coupling log probability to relative position by construction
  double confound_strength = 0.0;
  double phoneme_coef = 1.0;   // phonemes = max(1, 1 + round(c * rank^a * jitter))
  double phoneme_power = 0.4;
  bool impute_include_initial = false;
};

// Planted coefficients with the expected signs: longer utterances shorten
// words, late position and phoneme count lengthen them, higher forward and
// backward probability shorten them.
std::map<std::string, double> default_true_beta();

struct GroundTruth {
  std::map<std::string, double> beta;
  double sigma_speaker = 0.0;
  double sigma_wordpos = 0.0;
  double sigma_resid = 0.0;
  double imputed_max = 0.0;
  std::uint64_t seed = 0;
  // generator conditionals, aligned one-to-one with utterance tokens
  std::vector<std::vector<TokenScore>> true_scores;
  // per word type, rank order
  std::vector<std::string> words;
  std::vector<double> freq_per_million;
  std::vector<int> phonemes;
  std::vector<std::string> word_class;
  // the generating chain itself, for convergence checks: word-to-word
  // transitions (row = previous word), the BOS row, the expected
  // per-utterance occurrence counts m, and the per-step EOS hazard
  Eigen::MatrixXd chain_transition;
  Eigen::VectorXd chain_initial;
  Eigen::VectorXd chain_occupancy;
  double stop_hazard = 0.0;
};

struct SimResult {
  std::vector<Utterance> utterances;
  GroundTruth truth;
};

SimResult generate_corpus(const SimConfig& config);

struct RecoveryRow {
  std::string term;
  double truth = 0.0;
  double estimate = 0.0;
  double se = 0.0;
  double z = 0.0;      // (estimate - truth) / se
  bool covered = false;  // |z| <= 3
};

struct RecoveryReport {
  std::vector<RecoveryRow> rows;
  bool all_covered = true;
};

RecoveryReport recovery_report(const std::map<std::string, double>& true_beta,
                               const FitResult& fit);

}  // namespace prored

#endif  // PRORED_SIMULATE_HPP
