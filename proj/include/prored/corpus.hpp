#ifndef PRORED_CORPUS_HPP
#define PRORED_CORPUS_HPP

#include <cstddef>
#include <iosfwd>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "prored/tsv.hpp"

namespace prored {

// One time-aligned word occurrence.
struct TokenRecord {
  std::string recording_id;
  std::string speaker_id;
  std::string surface;  // normalized word form
  std::string pos;      // may be empty
  double start_s = 0.0;
  double end_s = 0.0;
  double duration_ms = 0.0;  // (end_s - start_s) * 1000, always > 0
};

// Pause-delimited token sequence; the unit over which probabilities and
// positions are computed.
struct Utterance {
  std::string recording_id;
  std::string speaker_id;
  int utterance_idx = 0;  // 0-based within recording
  std::vector<TokenRecord> tokens;

  std::size_t size() const { return tokens.size(); }
};

// How utterances are merged after segmentation. Sliding concatenates each
// utterance with its successor (u_i' = u_i ++ u_{i+1}, one output per
// input); disjoint concatenates non-overlapping pairs instead.
enum class MergeMode { none, sliding, disjoint };

struct SegmentationConfig {
  double pause_threshold_ms = 70.0;
  MergeMode merge = MergeMode::none;
  bool lowercase = true;
  std::set<std::string> drop_tokens;  // non-speech labels, matched pre-normalization
};

// Maps the required logical fields to column names in the input table.
struct ColumnSchema {
  std::string recording_id = "recording_id";
  std::string speaker_id = "speaker_id";
  std::string word = "word";
  std::string pos = "pos";
  std::string start_s = "start_s";
  std::string end_s = "end_s";
};

struct ParseStats {
  std::size_t rows_read = 0;
  std::size_t tokens_kept = 0;
  std::size_t dropped_nonspeech = 0;  // drop_tokens matches
  std::size_t dropped_empty = 0;      // normalized to the empty string
};

// Lower-cases (optionally) and strips surrounding punctuation. No stemming.
std::string normalize_surface(std::string_view raw, bool lowercase);

// Parses a delimited token table into per-recording token lists, sorted by
// (recording_id, start_s). Rows whose word matches cfg.drop_tokens, or whose
// word normalizes to nothing, are dropped and counted.
std::vector<std::vector<TokenRecord>> parse_token_table(std::istream& in,
                                                        const ColumnSchema& schema,
                                                        const SegmentationConfig& cfg,
                                                        const std::string& origin,
                                                        ParseStats* stats = nullptr);

// Splits one recording's tokens into utterances. A boundary falls between
// adjacent tokens when the silent gap reaches cfg.pause_threshold_ms or the
// speaker changes. With cfg.merge_adjacent, each utterance within a
// (recording, speaker) run is concatenated with its successor (sliding:
// u_i' = u_i ++ u_{i+1}; the last is left unmerged).
std::vector<Utterance> segment_utterances(const std::vector<TokenRecord>& tokens,
                                          const SegmentationConfig& cfg);

std::vector<Utterance> segment_corpus(const std::vector<std::vector<TokenRecord>>& recordings,
                                      const SegmentationConfig& cfg);

// Reverses token order within each utterance. Involution; timing fields are
// carried along unchanged.
std::vector<Utterance> reverse_corpus(std::vector<Utterance> utterances);

// Utterance-annotated token table: input columns plus utterance_idx,
// position_i (1-based) and utterance_n.
Table to_annotated_table(const std::vector<Utterance>& utterances);
std::vector<Utterance> utterances_from_annotated_table(const Table& table,
                                                       const std::string& origin);

}  // namespace prored

#endif  // PRORED_CORPUS_HPP
