#ifndef PRORED_FEATURES_HPP
#define PRORED_FEATURES_HPP

#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "prored/corpus.hpp"
#include "prored/ngram.hpp"

namespace prored {

// Norming data: per-million word frequencies and phoneme counts.
struct Lexicon {
  std::unordered_map<std::string, double> freq_per_million;
  std::unordered_map<std::string, int> phoneme_count;

  // Frequencies below the floor are raised to it (unseen-but-listed words);
  // negative frequencies and phoneme counts < 1 are data errors.
  static constexpr double kFrequencyFloor = 0.01;
  static Lexicon from_files(const std::string& frequency_tsv, const std::string& phoneme_tsv);
};

using ClassMap = std::unordered_map<std::string, std::string>;  // word -> content|function
ClassMap class_map_from_file(const std::string& path);

// Per-token regression record.
struct FeatureRow {
  std::string recording_id;
  int utterance_idx = 0;
  int token_idx = 0;  // 0-based within utterance
  std::string surface;
  std::string word_pos_key;  // surface|pos grouping factor
  std::string speaker_key;
  std::string word_class;  // content | function | other
  int utterance_n = 1;
  double log_duration = 0.0;
  double log_freq = 0.0;
  int n_phonemes = 1;
  double log_utt_len = 0.0;
  double inv_rel_pos = 0.0;
  double fwd_logprob = 0.0;
  double bwd_logprob = 0.0;
};

struct DropReport {
  std::size_t tokens_total = 0;
  std::size_t rows_emitted = 0;
  std::size_t missing_frequency = 0;
  std::size_t missing_phonemes = 0;
};

struct FeatureTable {
  std::vector<FeatureRow> rows;
  DropReport drops;
  double imputed_max = 0.0;  // end-of-utterance imputation constant used
};

// -ln(1 - i/n) for 1 <= i < n; the value is undefined at i = n, where the
// corpus-level imputed maximum is substituted.
double inverse_relative_position(int i, int n, double imputed_max);

// Maximum of -ln(1 - i/n) over non-initial, non-final positions
// (1 < i < n) across the corpus; 0 when no such position exists. With
// include_initial, the range widens to 1 <= i < n.
double compute_imputation_max(const std::vector<Utterance>& utterances,
                              bool include_initial = false);

struct FeatureOptions {
  bool impute_include_initial = false;
};

// One row per token covered by both lexicons; rows lacking coverage are
// dropped and counted. scores must align one-to-one with tokens.
FeatureTable build_features(const std::vector<Utterance>& utterances,
                            const std::vector<std::vector<TokenScore>>& scores,
                            const Lexicon& lexicon, const ClassMap* class_map = nullptr,
                            const FeatureOptions& options = {});

// Spearman rank correlation with average ranks for ties.
double spearman_rho(std::span<const double> x, std::span<const double> y);

struct ProfileCell {
  int utterance_n = 0;
  int position_i = 0;
  std::size_t count = 0;
  double mean_fwd_logprob = 0.0;
  double mean_bwd_logprob = 0.0;
  double mean_log_duration = 0.0;
};

// Cell means over (utterance length, position); rows ordered by (n, i).
std::vector<ProfileCell> confound_profile(const FeatureTable& features);
// Duration-only variant, restricted to utterances of length <= cap.
std::vector<ProfileCell> duration_profile(const FeatureTable& features, int cap = 10);

Table feature_table_to_tsv(const FeatureTable& features);
FeatureTable feature_table_from_tsv(const Table& table, const std::string& origin);

}  // namespace prored

#endif  // PRORED_FEATURES_HPP
