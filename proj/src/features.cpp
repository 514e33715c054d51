#include "prored/features.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "prored/error.hpp"

namespace prored {

Lexicon Lexicon::from_files(const std::string& frequency_tsv, const std::string& phoneme_tsv) {
  Lexicon lexicon;
  {
    Table table = read_tsv(frequency_tsv);
    const std::size_t c_word = table.require_column("word");
    const std::size_t c_freq = table.require_column("freq_per_million");
    std::size_t line_no = 1;
    for (const auto& row : table.rows) {
      ++line_no;
      const std::string where = frequency_tsv + ":" + std::to_string(line_no);
      double freq = parse_double(row[c_freq], where);
      if (freq < 0.0) throw Error(ErrorCategory::data, where + ": negative frequency");
      lexicon.freq_per_million[row[c_word]] = std::max(freq, kFrequencyFloor);
    }
  }
  {
    Table table = read_tsv(phoneme_tsv);
    const std::size_t c_word = table.require_column("word");
    const std::size_t c_phon = table.require_column("n_phonemes");
    std::size_t line_no = 1;
    for (const auto& row : table.rows) {
      ++line_no;
      const std::string where = phoneme_tsv + ":" + std::to_string(line_no);
      long n = parse_long(row[c_phon], where);
      if (n < 1) throw Error(ErrorCategory::data, where + ": phoneme count must be >= 1");
      lexicon.phoneme_count[row[c_word]] = static_cast<int>(n);
    }
  }
  return lexicon;
}

ClassMap class_map_from_file(const std::string& path) {
  Table table = read_tsv(path);
  const std::size_t c_word = table.require_column("word");
  const std::size_t c_class = table.require_column("word_class");
  ClassMap map;
  std::size_t line_no = 1;
  for (const auto& row : table.rows) {
    ++line_no;
    const std::string& cls = row[c_class];
    if (cls != "content" && cls != "function" && cls != "other") {
      throw Error(ErrorCategory::data, path + ":" + std::to_string(line_no) +
                                           ": word_class must be content|function|other");
    }
    map[row[c_word]] = cls;
  }
  return map;
}

double inverse_relative_position(int i, int n, double imputed_max) {
  if (i < 1 || i > n) {
    throw Error(ErrorCategory::usage, "position i must satisfy 1 <= i <= n");
  }
  if (i == n) return imputed_max;
  return -std::log(1.0 - static_cast<double>(i) / static_cast<double>(n));
}

double compute_imputation_max(const std::vector<Utterance>& utterances, bool include_initial) {
  double best = 0.0;
  const int first = include_initial ? 1 : 2;
  for (const Utterance& u : utterances) {
    const int n = static_cast<int>(u.tokens.size());
    for (int i = first; i < n; ++i) {
      best = std::max(best, -std::log(1.0 - static_cast<double>(i) / n));
    }
  }
  return best;
}

FeatureTable build_features(const std::vector<Utterance>& utterances,
                            const std::vector<std::vector<TokenScore>>& scores,
                            const Lexicon& lexicon, const ClassMap* class_map,
                            const FeatureOptions& options) {
  if (scores.size() != utterances.size()) {
    throw Error(ErrorCategory::alignment,
                "scores cover " + std::to_string(scores.size()) + " utterances, corpus has " +
                    std::to_string(utterances.size()));
  }
  FeatureTable out;
  out.imputed_max = compute_imputation_max(utterances, options.impute_include_initial);

  for (std::size_t ui = 0; ui < utterances.size(); ++ui) {
    const Utterance& u = utterances[ui];
    if (scores[ui].size() != u.tokens.size()) {
      throw Error(ErrorCategory::alignment,
                  "utterance " + std::to_string(ui) + ": " + std::to_string(scores[ui].size()) +
                      " scores for " + std::to_string(u.tokens.size()) + " tokens");
    }
    const int n = static_cast<int>(u.tokens.size());
    for (int j = 0; j < n; ++j) {
      const TokenRecord& tok = u.tokens[j];
      ++out.drops.tokens_total;

      auto freq_it = lexicon.freq_per_million.find(tok.surface);
      if (freq_it == lexicon.freq_per_million.end()) {
        ++out.drops.missing_frequency;
        continue;
      }
      auto phon_it = lexicon.phoneme_count.find(tok.surface);
      if (phon_it == lexicon.phoneme_count.end()) {
        ++out.drops.missing_phonemes;
        continue;
      }

      FeatureRow row;
      row.recording_id = u.recording_id;
      row.utterance_idx = u.utterance_idx;
      row.token_idx = j;
      row.surface = tok.surface;
      row.word_pos_key = tok.surface + "|" + tok.pos;
      row.speaker_key = u.speaker_id;
      row.word_class = "other";
      if (class_map) {
        auto cls_it = class_map->find(tok.surface);
        if (cls_it != class_map->end()) row.word_class = cls_it->second;
      }
      row.utterance_n = n;
      row.log_duration = std::log(tok.duration_ms);
      row.log_freq = std::log(freq_it->second);
      row.n_phonemes = phon_it->second;
      row.log_utt_len = std::log(static_cast<double>(n));
      row.inv_rel_pos = inverse_relative_position(j + 1, n, out.imputed_max);
      row.fwd_logprob = scores[ui][j].fwd_logprob;
      row.bwd_logprob = scores[ui][j].bwd_logprob;

      if (!std::isfinite(row.log_duration) || !std::isfinite(row.fwd_logprob) ||
          !std::isfinite(row.bwd_logprob)) {
        throw Error(ErrorCategory::numeric,
                    "non-finite feature for token '" + tok.surface + "' in utterance " +
                        std::to_string(u.utterance_idx) + " of " + u.recording_id);
      }
      out.rows.push_back(std::move(row));
      ++out.drops.rows_emitted;
    }
  }
  return out;
}

namespace {

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman_rho(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw Error(ErrorCategory::usage, "spearman_rho requires equal-length vectors");
  }
  if (x.size() < 2) {
    throw Error(ErrorCategory::usage, "spearman_rho requires at least two observations");
  }
  auto constant = [](std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [&](double e) { return e == v.front(); });
  };
  if (constant(x) || constant(y)) {
    throw Error(ErrorCategory::numeric, "spearman_rho undefined for a constant vector");
  }

  const std::vector<double> rx = average_ranks(x);
  const std::vector<double> ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mean = (n + 1.0) / 2.0;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = rx[i] - mean;
    const double dy = ry[i] - mean;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  return sxy / std::sqrt(sxx * syy);
}

namespace {

std::vector<ProfileCell> profile_cells(const FeatureTable& features, int cap, bool with_probs) {
  std::map<std::pair<int, int>, ProfileCell> cells;
  for (const FeatureRow& row : features.rows) {
    const int n = row.utterance_n;
    if (cap > 0 && n > cap) continue;
    const int i = row.token_idx + 1;
    ProfileCell& cell = cells[{n, i}];
    cell.utterance_n = n;
    cell.position_i = i;
    ++cell.count;
    cell.mean_log_duration += row.log_duration;
    if (with_probs) {
      cell.mean_fwd_logprob += row.fwd_logprob;
      cell.mean_bwd_logprob += row.bwd_logprob;
    }
  }
  std::vector<ProfileCell> out;
  out.reserve(cells.size());
  for (auto& [key, cell] : cells) {
    (void)key;
    const double c = static_cast<double>(cell.count);
    cell.mean_log_duration /= c;
    cell.mean_fwd_logprob /= c;
    cell.mean_bwd_logprob /= c;
    out.push_back(cell);
  }
  return out;
}

}  // namespace

std::vector<ProfileCell> confound_profile(const FeatureTable& features) {
  if (features.rows.empty()) {
    throw Error(ErrorCategory::data, "confound_profile requires a non-empty feature table");
  }
  return profile_cells(features, 0, true);
}

std::vector<ProfileCell> duration_profile(const FeatureTable& features, int cap) {
  if (features.rows.empty()) {
    throw Error(ErrorCategory::data, "duration_profile requires a non-empty feature table");
  }
  return profile_cells(features, cap, false);
}

Table feature_table_to_tsv(const FeatureTable& features) {
  Table table;
  table.header = {"recording_id", "utterance_idx", "token_idx",   "surface",
                  "word_pos_key", "speaker_key",   "word_class",  "utterance_n",
                  "log_duration", "log_freq",      "n_phonemes",  "log_utt_len",
                  "inv_rel_pos",  "fwd_logprob",   "bwd_logprob"};
  for (const FeatureRow& row : features.rows) {
    table.rows.push_back({row.recording_id, std::to_string(row.utterance_idx),
                          std::to_string(row.token_idx), row.surface, row.word_pos_key,
                          row.speaker_key, row.word_class, std::to_string(row.utterance_n),
                          format_double(row.log_duration), format_double(row.log_freq),
                          std::to_string(row.n_phonemes), format_double(row.log_utt_len),
                          format_double(row.inv_rel_pos), format_double(row.fwd_logprob),
                          format_double(row.bwd_logprob)});
  }
  return table;
}

FeatureTable feature_table_from_tsv(const Table& table, const std::string& origin) {
  FeatureTable features;
  const std::size_t c_rec = table.require_column("recording_id");
  const std::size_t c_utt = table.require_column("utterance_idx");
  const std::size_t c_tok = table.require_column("token_idx");
  const std::size_t c_surface = table.require_column("surface");
  const std::size_t c_wp = table.require_column("word_pos_key");
  const std::size_t c_spk = table.require_column("speaker_key");
  const std::size_t c_class = table.require_column("word_class");
  const std::size_t c_n = table.require_column("utterance_n");
  const std::size_t c_ld = table.require_column("log_duration");
  const std::size_t c_lf = table.require_column("log_freq");
  const std::size_t c_np = table.require_column("n_phonemes");
  const std::size_t c_ll = table.require_column("log_utt_len");
  const std::size_t c_ip = table.require_column("inv_rel_pos");
  const std::size_t c_fwd = table.require_column("fwd_logprob");
  const std::size_t c_bwd = table.require_column("bwd_logprob");

  std::size_t line_no = 1;
  for (const auto& row : table.rows) {
    ++line_no;
    const std::string where = origin + ":" + std::to_string(line_no);
    FeatureRow f;
    f.recording_id = row[c_rec];
    f.utterance_idx = static_cast<int>(parse_long(row[c_utt], where));
    f.token_idx = static_cast<int>(parse_long(row[c_tok], where));
    f.surface = row[c_surface];
    f.word_pos_key = row[c_wp];
    f.speaker_key = row[c_spk];
    f.word_class = row[c_class];
    f.utterance_n = static_cast<int>(parse_long(row[c_n], where));
    f.log_duration = parse_double(row[c_ld], where);
    f.log_freq = parse_double(row[c_lf], where);
    f.n_phonemes = static_cast<int>(parse_long(row[c_np], where));
    f.log_utt_len = parse_double(row[c_ll], where);
    f.inv_rel_pos = parse_double(row[c_ip], where);
    f.fwd_logprob = parse_double(row[c_fwd], where);
    f.bwd_logprob = parse_double(row[c_bwd], where);
    features.rows.push_back(std::move(f));
    ++features.drops.rows_emitted;
    ++features.drops.tokens_total;
  }
  return features;
}

}  // namespace prored
