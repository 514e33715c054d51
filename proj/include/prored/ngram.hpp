#ifndef PRORED_NGRAM_HPP
#define PRORED_NGRAM_HPP

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "prored/corpus.hpp"

namespace prored {

enum class Direction { forward, backward };
enum class Smoothing { mle, add_k, kneser_ney };

struct SmoothingConfig {
  Smoothing method = Smoothing::kneser_ney;
  double k = 0.0;             // add_k pseudo-count, required > 0 for add_k
  double discount = 0.75;     // absolute discount in [0, 1) for kneser_ney
  std::uint32_t unk_threshold = 1;  // words with corpus count <= threshold map to UNK; 0 disables
};

const char* smoothing_name(Smoothing method);
Smoothing smoothing_from_name(const std::string& name);

// Direction-tagged smoothed conditional-probability model. A backward model
// is a forward model over reversed utterances; its queries take the
// following words, nearest first.
class NGramModel {
 public:
  static constexpr std::int32_t kUnk = 0;
  static constexpr std::int32_t kBos = 1;
  static constexpr std::int32_t kEos = 2;

  static NGramModel train(const std::vector<Utterance>& utterances, int order,
                          Direction direction, const SmoothingConfig& smoothing);

  // ln P(word | context). The context is the preceding words for forward
  // models and the following words (nearest first) for backward models; a
  // context shorter than order-1 is treated as utterance-edge and padded
  // with BOS. Longer contexts are a usage error.
  double cond_logprob(std::span<const std::string> context, const std::string& word) const;

  int order() const { return order_; }
  Direction direction() const { return direction_; }
  const SmoothingConfig& smoothing() const { return smoothing_; }
  std::uint64_t total_tokens() const { return total_tokens_; }

  const std::vector<std::string>& vocabulary() const { return id_to_word_; }
  // Number of predictable symbols: the vocabulary minus BOS.
  std::size_t event_vocab_size() const { return id_to_word_.size() - 1; }
  std::int32_t word_id(const std::string& word) const;  // kUnk when absent

  // Raw sliding-window count of an id sequence (1 <= length <= order).
  std::uint64_t raw_count(std::span<const std::int32_t> gram) const;
  // Marginal count of a context: sum of raw counts over continuations.
  std::uint64_t context_count(std::span<const std::int32_t> context) const;

  void save(std::ostream& out) const;
  void save(const std::string& path) const;
  static NGramModel load(std::istream& in, const std::string& origin);
  static NGramModel load(const std::string& path);

  // id-level query used by scoring loops; context must already be padded
  // to exactly order-1 ids (stream order for the underlying forward model).
  double logprob_ids(std::span<const std::int32_t> context, std::int32_t word) const;

 private:
  NGramModel() = default;
  void build_derived_tables();

  struct Level {
    // key: packed id sequence of length k (numerators) or k-1 (contexts)
    std::unordered_map<std::string, std::uint64_t> gram;      // raw counts
    std::unordered_map<std::string, std::uint64_t> ctx;       // marginals of gram
    std::unordered_map<std::string, std::uint64_t> adj;       // smoothing numerators
    std::unordered_map<std::string, std::uint64_t> adj_ctx;   // marginals of adj
    std::unordered_map<std::string, std::uint32_t> adj_types; // distinct continuations
  };

  double kn_logprob(std::span<const std::int32_t> context, std::int32_t word) const;
  double kn_prob(std::span<const std::int32_t> gram, int level) const;

  int order_ = 2;
  Direction direction_ = Direction::forward;
  SmoothingConfig smoothing_;
  std::uint64_t total_tokens_ = 0;
  std::unordered_map<std::string, std::int32_t> word_to_id_;
  std::vector<std::string> id_to_word_;
  std::vector<Level> levels_;  // levels_[k-1] holds order-k counts
};

struct TokenScore {
  double fwd_logprob = 0.0;
  double bwd_logprob = 0.0;
};

// Per-token log probabilities, aligned one-to-one with utterances' tokens.
// fwd scores condition on preceding words with BOS padding; bwd scores on
// following words with BOS padding on the reversed side.
std::vector<std::vector<TokenScore>> score_corpus(const NGramModel& forward_model,
                                                  const NGramModel& backward_model,
                                                  const std::vector<Utterance>& utterances);

}  // namespace prored

#endif  // PRORED_NGRAM_HPP
