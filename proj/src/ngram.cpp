#include "prored/ngram.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "prored/error.hpp"

namespace prored {

namespace {

constexpr const char* kMagic = "prored-ngram-v1";

// n-gram keys: packed little-endian id sequences
std::string pack_ids(std::span<const std::int32_t> ids) {
  std::string key(ids.size() * sizeof(std::int32_t), '\0');
  if (!ids.empty()) std::memcpy(key.data(), ids.data(), key.size());
  return key;
}

std::vector<std::int32_t> unpack_ids(std::string_view key) {
  std::vector<std::int32_t> ids(key.size() / sizeof(std::int32_t));
  if (!ids.empty()) std::memcpy(ids.data(), key.data(), key.size());
  return ids;
}

std::string_view key_context(std::string_view key) {
  return key.substr(0, key.size() - sizeof(std::int32_t));
}

std::string_view key_drop_first(std::string_view key) {
  return key.substr(sizeof(std::int32_t));
}

std::int32_t key_first_id(std::string_view key) {
  std::int32_t id;
  std::memcpy(&id, key.data(), sizeof(id));
  return id;
}

template <typename Map>
std::uint64_t lookup(const Map& map, const std::string& key) {
  auto it = map.find(key);
  return it == map.end() ? 0 : it->second;
}

}  // namespace

const char* smoothing_name(Smoothing method) {
  switch (method) {
    case Smoothing::mle: return "mle";
    case Smoothing::add_k: return "add_k";
    case Smoothing::kneser_ney: return "kneser_ney";
  }
  return "unknown";
}

Smoothing smoothing_from_name(const std::string& name) {
  if (name == "mle") return Smoothing::mle;
  if (name == "add_k") return Smoothing::add_k;
  if (name == "kneser_ney") return Smoothing::kneser_ney;
  throw Error(ErrorCategory::usage, "unknown smoothing method '" + name + "'");
}

std::int32_t NGramModel::word_id(const std::string& word) const {
  auto it = word_to_id_.find(word);
  return it == word_to_id_.end() ? kUnk : it->second;
}

NGramModel NGramModel::train(const std::vector<Utterance>& utterances, int order,
                             Direction direction, const SmoothingConfig& smoothing) {
  if (order < 1) throw Error(ErrorCategory::usage, "n-gram order must be >= 1");
  if (utterances.empty()) throw Error(ErrorCategory::data, "cannot train on an empty corpus");
  if (smoothing.method == Smoothing::add_k && smoothing.k <= 0.0) {
    throw Error(ErrorCategory::usage, "add_k smoothing requires k > 0");
  }
  if (smoothing.method == Smoothing::kneser_ney &&
      (smoothing.discount < 0.0 || smoothing.discount >= 1.0)) {
    throw Error(ErrorCategory::usage, "kneser_ney discount must lie in [0, 1)");
  }

  NGramModel model;
  model.order_ = order;
  model.direction_ = direction;
  model.smoothing_ = smoothing;

  const std::vector<Utterance>* corpus = &utterances;
  std::vector<Utterance> reversed;
  if (direction == Direction::backward) {
    reversed = reverse_corpus(utterances);
    corpus = &reversed;
  }

  // vocabulary: reserved symbols, then training words above the UNK
  // threshold in first-occurrence order
  std::unordered_map<std::string, std::uint64_t> word_counts;
  std::vector<std::string> occurrence_order;
  for (const Utterance& u : *corpus) {
    for (const TokenRecord& tok : u.tokens) {
      auto [it, inserted] = word_counts.try_emplace(tok.surface, 0);
      if (inserted) occurrence_order.push_back(tok.surface);
      ++it->second;
      ++model.total_tokens_;
    }
  }
  model.id_to_word_ = {"<unk>", "<s>", "</s>"};
  for (const std::string& word : occurrence_order) {
    if (word_counts[word] <= smoothing.unk_threshold) continue;
    model.id_to_word_.push_back(word);
  }
  for (std::size_t id = 0; id < model.id_to_word_.size(); ++id) {
    model.word_to_id_[model.id_to_word_[id]] = static_cast<std::int32_t>(id);
  }

  model.levels_.resize(order);
  std::vector<std::int32_t> padded;
  for (const Utterance& u : *corpus) {
    padded.assign(order - 1, kBos);
    for (const TokenRecord& tok : u.tokens) padded.push_back(model.word_id(tok.surface));
    padded.push_back(kEos);

    std::span<const std::int32_t> window(padded);
    for (std::size_t t = order - 1; t < padded.size(); ++t) {
      for (int k = 1; k <= order; ++k) {
        auto gram = window.subspan(t - k + 1, k);
        Level& level = model.levels_[k - 1];
        ++level.gram[pack_ids(gram)];
        ++level.ctx[pack_ids(gram.first(k - 1))];
      }
    }
  }

  model.build_derived_tables();
  return model;
}

// Smoothing numerators: raw counts at the top level; continuation type
// counts at lower levels, except that sequences beginning with BOS keep
// their raw counts (they have no left extension to count).
void NGramModel::build_derived_tables() {
  Level& top = levels_[order_ - 1];
  top.adj = top.gram;
  top.adj_ctx = top.ctx;

  for (int k = order_ - 1; k >= 1; --k) {
    Level& level = levels_[k - 1];
    const Level& upper = levels_[k];
    level.adj.clear();
    for (const auto& [key, count] : upper.gram) {
      (void)count;
      std::string suffix(key_drop_first(key));
      if (key_first_id(suffix) == kBos) continue;
      ++level.adj[suffix];
    }
    for (const auto& [key, count] : level.gram) {
      if (key_first_id(key) == kBos) level.adj[key] = count;
    }
    level.adj_ctx.clear();
    for (const auto& [key, count] : level.adj) {
      level.adj_ctx[std::string(key_context(key))] += count;
    }
  }
  for (Level& level : levels_) {
    level.adj_types.clear();
    for (const auto& [key, count] : level.adj) {
      (void)count;
      ++level.adj_types[std::string(key_context(key))];
    }
  }
}

std::uint64_t NGramModel::raw_count(std::span<const std::int32_t> gram) const {
  if (gram.empty() || gram.size() > static_cast<std::size_t>(order_)) {
    throw Error(ErrorCategory::usage, "raw_count length must be in [1, order]");
  }
  return lookup(levels_[gram.size() - 1].gram, pack_ids(gram));
}

std::uint64_t NGramModel::context_count(std::span<const std::int32_t> context) const {
  if (context.size() >= static_cast<std::size_t>(order_)) {
    throw Error(ErrorCategory::usage, "context length must be < order");
  }
  return lookup(levels_[context.size()].ctx, pack_ids(context));
}

double NGramModel::kn_prob(std::span<const std::int32_t> gram, int level) const {
  const double v = static_cast<double>(event_vocab_size());
  if (level == 0) return 1.0 / v;

  const Level& tables = levels_[level - 1];
  const auto context = gram.first(gram.size() - 1);
  const std::uint64_t den = lookup(tables.adj_ctx, pack_ids(context));
  if (den == 0) return kn_prob(gram.subspan(1), level - 1);

  const double d = smoothing_.discount;
  const std::uint64_t num = lookup(tables.adj, pack_ids(gram));
  const auto types_it = tables.adj_types.find(pack_ids(context));
  const double types = types_it == tables.adj_types.end() ? 0.0
                                                          : static_cast<double>(types_it->second);
  const double lambda = d * types / static_cast<double>(den);
  const double lower = level == 1 ? 1.0 / v : kn_prob(gram.subspan(1), level - 1);
  return std::max(static_cast<double>(num) - d, 0.0) / static_cast<double>(den) +
         lambda * lower;
}

double NGramModel::kn_logprob(std::span<const std::int32_t> context, std::int32_t word) const {
  std::vector<std::int32_t> gram(context.begin(), context.end());
  gram.push_back(word);
  return std::log(kn_prob(gram, order_));
}

double NGramModel::logprob_ids(std::span<const std::int32_t> context, std::int32_t word) const {
  if (context.size() != static_cast<std::size_t>(order_ - 1)) {
    throw Error(ErrorCategory::usage, "context must hold exactly order-1 ids");
  }
  switch (smoothing_.method) {
    case Smoothing::mle: {
      const std::uint64_t den = context_count(context);
      const double v = static_cast<double>(event_vocab_size());
      if (den == 0) return std::log(1.0 / v);  // unseen context: uniform
      std::vector<std::int32_t> gram(context.begin(), context.end());
      gram.push_back(word);
      const std::uint64_t num = raw_count(gram);
      return std::log(static_cast<double>(num) / static_cast<double>(den));
    }
    case Smoothing::add_k: {
      const std::uint64_t den = context_count(context);
      const double v = static_cast<double>(event_vocab_size());
      std::vector<std::int32_t> gram(context.begin(), context.end());
      gram.push_back(word);
      const std::uint64_t num = raw_count(gram);
      return std::log((static_cast<double>(num) + smoothing_.k) /
                      (static_cast<double>(den) + smoothing_.k * v));
    }
    case Smoothing::kneser_ney:
      return kn_logprob(context, word);
  }
  throw Error(ErrorCategory::usage, "unreachable smoothing method");
}

double NGramModel::cond_logprob(std::span<const std::string> context,
                                const std::string& word) const {
  if (context.size() > static_cast<std::size_t>(order_ - 1)) {
    throw Error(ErrorCategory::usage,
                "context holds " + std::to_string(context.size()) +
                    " words but the model order admits at most " +
                    std::to_string(order_ - 1));
  }
  std::vector<std::int32_t> ids;
  ids.reserve(order_ - 1);
  for (const std::string& w : context) ids.push_back(word_id(w));
  // backward models take following words nearest-first; the underlying
  // forward model over reversed text wants them in stream order
  if (direction_ == Direction::backward) std::reverse(ids.begin(), ids.end());
  std::vector<std::int32_t> full(static_cast<std::size_t>(order_ - 1) - ids.size(), kBos);
  full.insert(full.end(), ids.begin(), ids.end());
  return logprob_ids(full, word_id(word));
}

std::vector<std::vector<TokenScore>> score_corpus(const NGramModel& forward_model,
                                                  const NGramModel& backward_model,
                                                  const std::vector<Utterance>& utterances) {
  if (forward_model.direction() != Direction::forward) {
    throw Error(ErrorCategory::usage, "score_corpus: first model must be forward");
  }
  if (backward_model.direction() != Direction::backward) {
    throw Error(ErrorCategory::usage, "score_corpus: second model must be backward");
  }

  auto directional_scores = [](const NGramModel& model, const Utterance& u,
                               std::span<double> out) {
    const int order = model.order();
    std::vector<std::int32_t> padded(order - 1, NGramModel::kBos);
    for (const TokenRecord& tok : u.tokens) padded.push_back(model.word_id(tok.surface));
    std::span<const std::int32_t> window(padded);
    for (std::size_t j = 0; j < u.tokens.size(); ++j) {
      const std::size_t t = j + order - 1;
      out[j] = model.logprob_ids(window.subspan(t - order + 1, order - 1), padded[t]);
    }
  };

  std::vector<std::vector<TokenScore>> scores(utterances.size());
  std::vector<double> fwd, bwd;
  for (std::size_t ui = 0; ui < utterances.size(); ++ui) {
    const Utterance& u = utterances[ui];
    const std::size_t n = u.tokens.size();
    fwd.assign(n, 0.0);
    bwd.assign(n, 0.0);
    directional_scores(forward_model, u, fwd);

    Utterance reversed = u;
    std::reverse(reversed.tokens.begin(), reversed.tokens.end());
    directional_scores(backward_model, reversed, bwd);

    scores[ui].resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      scores[ui][j].fwd_logprob = fwd[j];
      scores[ui][j].bwd_logprob = bwd[n - 1 - j];
    }
  }
  return scores;
}

void NGramModel::save(std::ostream& out) const {
  out << kMagic << '\n';
  out << "order\t" << order_ << '\n';
  out << "direction\t" << (direction_ == Direction::forward ? "forward" : "backward") << '\n';
  out << "smoothing\t" << smoothing_name(smoothing_.method) << '\n';
  out << "k\t" << format_double(smoothing_.k) << '\n';
  out << "discount\t" << format_double(smoothing_.discount) << '\n';
  out << "unk_threshold\t" << smoothing_.unk_threshold << '\n';
  out << "total_tokens\t" << total_tokens_ << '\n';
  out << "vocab\t" << id_to_word_.size() << '\n';
  for (const std::string& word : id_to_word_) out << word << '\n';
  for (int k = 1; k <= order_; ++k) {
    const auto& gram = levels_[k - 1].gram;
    std::vector<std::pair<std::vector<std::int32_t>, std::uint64_t>> entries;
    entries.reserve(gram.size());
    for (const auto& [key, count] : gram) entries.emplace_back(unpack_ids(key), count);
    std::sort(entries.begin(), entries.end());
    out << "level\t" << k << '\t' << entries.size() << '\n';
    for (const auto& [ids, count] : entries) {
      for (std::int32_t id : ids) out << id << ' ';
      out << count << '\n';
    }
  }
  out << "end\n";
}

void NGramModel::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCategory::io, "cannot open '" + path + "' for writing");
  save(out);
  if (!out) throw Error(ErrorCategory::io, "failed writing '" + path + "'");
}

namespace {

std::string expect_tagged_line(std::istream& in, const std::string& tag,
                               const std::string& origin) {
  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorCategory::schema, origin + ": truncated model file at '" + tag + "'");
  }
  const std::string prefix = tag + "\t";
  if (line.rfind(prefix, 0) != 0) {
    throw Error(ErrorCategory::schema,
                origin + ": expected '" + tag + "' line, got '" + line + "'");
  }
  return line.substr(prefix.size());
}

}  // namespace

NGramModel NGramModel::load(std::istream& in, const std::string& origin) {
  std::string line;
  if (!std::getline(in, line) || line != kMagic) {
    throw Error(ErrorCategory::schema, origin + ": not a prored n-gram model (bad version tag)");
  }
  NGramModel model;
  model.order_ = static_cast<int>(parse_long(expect_tagged_line(in, "order", origin), origin));
  const std::string dir = expect_tagged_line(in, "direction", origin);
  if (dir == "forward") {
    model.direction_ = Direction::forward;
  } else if (dir == "backward") {
    model.direction_ = Direction::backward;
  } else {
    throw Error(ErrorCategory::schema, origin + ": unknown direction '" + dir + "'");
  }
  model.smoothing_.method = smoothing_from_name(expect_tagged_line(in, "smoothing", origin));
  model.smoothing_.k = parse_double(expect_tagged_line(in, "k", origin), origin);
  model.smoothing_.discount = parse_double(expect_tagged_line(in, "discount", origin), origin);
  model.smoothing_.unk_threshold =
      static_cast<std::uint32_t>(parse_long(expect_tagged_line(in, "unk_threshold", origin), origin));
  model.total_tokens_ =
      static_cast<std::uint64_t>(parse_long(expect_tagged_line(in, "total_tokens", origin), origin));

  const long vocab_size = parse_long(expect_tagged_line(in, "vocab", origin), origin);
  if (vocab_size < 3) throw Error(ErrorCategory::schema, origin + ": vocabulary too small");
  model.id_to_word_.reserve(vocab_size);
  for (long i = 0; i < vocab_size; ++i) {
    if (!std::getline(in, line)) {
      throw Error(ErrorCategory::schema, origin + ": truncated vocabulary");
    }
    model.id_to_word_.push_back(line);
    model.word_to_id_[line] = static_cast<std::int32_t>(i);
  }

  model.levels_.resize(model.order_);
  for (int k = 1; k <= model.order_; ++k) {
    std::string header = expect_tagged_line(in, "level", origin);
    std::istringstream hs(header);
    int level_no = 0;
    std::size_t entries = 0;
    hs >> level_no >> entries;
    if (level_no != k) {
      throw Error(ErrorCategory::schema, origin + ": unexpected level " + std::to_string(level_no));
    }
    Level& level = model.levels_[k - 1];
    std::vector<std::int32_t> ids(k);
    for (std::size_t e = 0; e < entries; ++e) {
      if (!std::getline(in, line)) {
        throw Error(ErrorCategory::schema, origin + ": truncated level " + std::to_string(k));
      }
      std::istringstream ls(line);
      for (int j = 0; j < k; ++j) {
        if (!(ls >> ids[j])) {
          throw Error(ErrorCategory::data, origin + ": malformed n-gram entry '" + line + "'");
        }
      }
      std::uint64_t count = 0;
      if (!(ls >> count)) {
        throw Error(ErrorCategory::data, origin + ": malformed n-gram entry '" + line + "'");
      }
      level.gram[pack_ids(ids)] = count;
      level.ctx[pack_ids(std::span<const std::int32_t>(ids).first(k - 1))] += count;
    }
  }
  if (!std::getline(in, line) || line != "end") {
    throw Error(ErrorCategory::schema, origin + ": missing end marker");
  }
  model.build_derived_tables();
  return model;
}

NGramModel NGramModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::io, "cannot open '" + path + "' for reading");
  return load(in, path);
}

}  // namespace prored
