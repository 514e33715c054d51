#include "prored/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <istream>
#include <map>

#include "prored/error.hpp"

namespace prored {

std::string normalize_surface(std::string_view raw, bool lowercase) {
  std::size_t begin = 0;
  std::size_t end = raw.size();
  auto is_edge_punct = [](unsigned char c) {
    return std::ispunct(c) && c != '<' && c != '>' && c != '[' && c != ']';
  };
  while (begin < end && is_edge_punct(static_cast<unsigned char>(raw[begin]))) ++begin;
  while (end > begin && is_edge_punct(static_cast<unsigned char>(raw[end - 1]))) --end;
  std::string out(raw.substr(begin, end - begin));
  if (lowercase) {
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

std::vector<std::vector<TokenRecord>> parse_token_table(std::istream& in,
                                                        const ColumnSchema& schema,
                                                        const SegmentationConfig& cfg,
                                                        const std::string& origin,
                                                        ParseStats* stats) {
  Table table = read_delimited(in, '\t', origin);
  const std::size_t c_rec = table.require_column(schema.recording_id);
  const std::size_t c_spk = table.require_column(schema.speaker_id);
  const std::size_t c_word = table.require_column(schema.word);
  const std::size_t c_pos = table.require_column(schema.pos);
  const std::size_t c_start = table.require_column(schema.start_s);
  const std::size_t c_end = table.require_column(schema.end_s);

  ParseStats local;
  std::map<std::string, std::vector<TokenRecord>> by_recording;
  std::size_t line_no = 1;
  for (const auto& row : table.rows) {
    ++line_no;
    ++local.rows_read;
    const std::string where = origin + ":" + std::to_string(line_no);

    if (cfg.drop_tokens.count(row[c_word])) {
      ++local.dropped_nonspeech;
      continue;
    }
    TokenRecord tok;
    tok.recording_id = row[c_rec];
    tok.speaker_id = row[c_spk];
    tok.surface = normalize_surface(row[c_word], cfg.lowercase);
    tok.pos = row[c_pos];
    tok.start_s = parse_double(row[c_start], where + " (" + schema.start_s + ")");
    tok.end_s = parse_double(row[c_end], where + " (" + schema.end_s + ")");
    if (tok.start_s < 0.0) {
      throw Error(ErrorCategory::data, where + ": negative start time");
    }
    if (tok.end_s <= tok.start_s) {
      throw Error(ErrorCategory::data,
                  where + ": end_s must be strictly greater than start_s");
    }
    if (row[c_word].empty()) {
      throw Error(ErrorCategory::data, where + ": empty word field");
    }
    if (tok.surface.empty()) {
      // punctuation-only token; treated like a non-speech label
      ++local.dropped_empty;
      continue;
    }
    tok.duration_ms = (tok.end_s - tok.start_s) * 1000.0;
    ++local.tokens_kept;
    by_recording[tok.recording_id].push_back(std::move(tok));
  }

  std::vector<std::vector<TokenRecord>> recordings;
  recordings.reserve(by_recording.size());
  for (auto& [rec, tokens] : by_recording) {
    std::stable_sort(tokens.begin(), tokens.end(),
                     [](const TokenRecord& a, const TokenRecord& b) {
                       return a.start_s < b.start_s;
                     });
    recordings.push_back(std::move(tokens));
  }
  if (stats) *stats = local;
  return recordings;
}

namespace {

std::vector<Utterance> merge_adjacent_utterances(std::vector<Utterance> utterances) {
  std::vector<Utterance> merged;
  merged.reserve(utterances.size());
  std::size_t run_start = 0;
  while (run_start < utterances.size()) {
    std::size_t run_end = run_start + 1;
    while (run_end < utterances.size() &&
           utterances[run_end].recording_id == utterances[run_start].recording_id &&
           utterances[run_end].speaker_id == utterances[run_start].speaker_id) {
      ++run_end;
    }
    for (std::size_t i = run_start; i < run_end; ++i) {
      Utterance u = utterances[i];
      if (i + 1 < run_end) {
        const auto& next = utterances[i + 1].tokens;
        u.tokens.insert(u.tokens.end(), next.begin(), next.end());
      }
      merged.push_back(std::move(u));
    }
    run_start = run_end;
  }
  return merged;
}

}  // namespace

std::vector<Utterance> segment_utterances(const std::vector<TokenRecord>& tokens,
                                          const SegmentationConfig& cfg) {
  if (cfg.pause_threshold_ms <= 0.0) {
    throw Error(ErrorCategory::usage, "pause_threshold_ms must be positive");
  }
  std::vector<Utterance> utterances;
  if (tokens.empty()) return utterances;

  const double threshold_s = cfg.pause_threshold_ms / 1000.0;
  Utterance current;
  current.recording_id = tokens.front().recording_id;
  current.speaker_id = tokens.front().speaker_id;
  current.utterance_idx = 0;
  current.tokens.push_back(tokens.front());

  for (std::size_t i = 1; i < tokens.size(); ++i) {
    const TokenRecord& prev = current.tokens.back();
    const TokenRecord& tok = tokens[i];
    const double gap_s = tok.start_s - prev.end_s;
    const bool boundary = gap_s >= threshold_s || tok.speaker_id != prev.speaker_id ||
                          tok.recording_id != prev.recording_id;
    if (boundary) {
      int next_idx = current.utterance_idx + 1;
      if (tok.recording_id != current.recording_id) next_idx = 0;
      utterances.push_back(std::move(current));
      current = Utterance{};
      current.recording_id = tok.recording_id;
      current.speaker_id = tok.speaker_id;
      current.utterance_idx = next_idx;
    }
    current.tokens.push_back(tok);
  }
  utterances.push_back(std::move(current));

  if (cfg.merge_adjacent) {
    utterances = merge_adjacent_utterances(std::move(utterances));
    // re-index; merging preserves the count per recording
    int idx = 0;
    for (std::size_t i = 0; i < utterances.size(); ++i) {
      if (i > 0 && utterances[i].recording_id != utterances[i - 1].recording_id) idx = 0;
      utterances[i].utterance_idx = idx++;
    }
  }
  return utterances;
}

std::vector<Utterance> segment_corpus(const std::vector<std::vector<TokenRecord>>& recordings,
                                      const SegmentationConfig& cfg) {
  std::vector<Utterance> all;
  for (const auto& tokens : recordings) {
    auto utts = segment_utterances(tokens, cfg);
    all.insert(all.end(), std::make_move_iterator(utts.begin()),
               std::make_move_iterator(utts.end()));
  }
  return all;
}

std::vector<Utterance> reverse_corpus(std::vector<Utterance> utterances) {
  for (Utterance& u : utterances) {
    std::reverse(u.tokens.begin(), u.tokens.end());
  }
  return utterances;
}

Table to_annotated_table(const std::vector<Utterance>& utterances) {
  Table table;
  table.header = {"recording_id", "speaker_id", "word",         "pos",
                  "start_s",      "end_s",      "utterance_idx", "position_i",
                  "utterance_n"};
  for (const Utterance& u : utterances) {
    for (std::size_t i = 0; i < u.tokens.size(); ++i) {
      const TokenRecord& tok = u.tokens[i];
      table.rows.push_back({tok.recording_id, tok.speaker_id, tok.surface, tok.pos,
                            format_double(tok.start_s), format_double(tok.end_s),
                            std::to_string(u.utterance_idx), std::to_string(i + 1),
                            std::to_string(u.tokens.size())});
    }
  }
  return table;
}

std::vector<Utterance> utterances_from_annotated_table(const Table& table,
                                                       const std::string& origin) {
  const std::size_t c_rec = table.require_column("recording_id");
  const std::size_t c_spk = table.require_column("speaker_id");
  const std::size_t c_word = table.require_column("word");
  const std::size_t c_pos = table.require_column("pos");
  const std::size_t c_start = table.require_column("start_s");
  const std::size_t c_end = table.require_column("end_s");
  const std::size_t c_utt = table.require_column("utterance_idx");

  std::vector<Utterance> utterances;
  std::size_t line_no = 1;
  for (const auto& row : table.rows) {
    ++line_no;
    const std::string where = origin + ":" + std::to_string(line_no);
    TokenRecord tok;
    tok.recording_id = row[c_rec];
    tok.speaker_id = row[c_spk];
    tok.surface = row[c_word];
    tok.pos = row[c_pos];
    tok.start_s = parse_double(row[c_start], where);
    tok.end_s = parse_double(row[c_end], where);
    if (tok.end_s <= tok.start_s) {
      throw Error(ErrorCategory::data, where + ": end_s must exceed start_s");
    }
    tok.duration_ms = (tok.end_s - tok.start_s) * 1000.0;
    const int utt_idx = static_cast<int>(parse_long(row[c_utt], where));

    if (utterances.empty() || utterances.back().recording_id != tok.recording_id ||
        utterances.back().utterance_idx != utt_idx) {
      Utterance u;
      u.recording_id = tok.recording_id;
      u.speaker_id = tok.speaker_id;
      u.utterance_idx = utt_idx;
      utterances.push_back(std::move(u));
    }
    utterances.back().tokens.push_back(std::move(tok));
  }
  return utterances;
}

}  // namespace prored
