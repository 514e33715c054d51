#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "prored/error.hpp"
#include "prored/features.hpp"
#include "prored/rng.hpp"

using namespace prored;

namespace {

Utterance utterance_of(const std::vector<std::string>& words, double duration_ms = 100.0) {
  Utterance u;
  u.recording_id = "r";
  u.speaker_id = "s";
  double cursor = 0.0;
  for (const auto& w : words) {
    TokenRecord tok;
    tok.recording_id = "r";
    tok.speaker_id = "s";
    tok.surface = w;
    tok.pos = "n";
    tok.start_s = cursor;
    tok.end_s = cursor + duration_ms / 1000.0;
    tok.duration_ms = duration_ms;
    u.tokens.push_back(tok);
    cursor = tok.end_s + 0.01;
  }
  return u;
}

std::vector<std::vector<TokenScore>> flat_scores(const std::vector<Utterance>& utts,
                                                 double fwd = -1.0, double bwd = -2.0) {
  std::vector<std::vector<TokenScore>> scores(utts.size());
  for (std::size_t i = 0; i < utts.size(); ++i) {
    scores[i].assign(utts[i].size(), TokenScore{fwd, bwd});
  }
  return scores;
}

Lexicon tiny_lexicon(const std::vector<std::string>& words) {
  Lexicon lex;
  for (const auto& w : words) {
    lex.freq_per_million[w] = 100.0;
    lex.phoneme_count[w] = 3;
  }
  return lex;
}

}  // namespace

TEST_CASE("inverse relative position evaluates the transform") {
  CHECK(inverse_relative_position(1, 2, 99.0) ==
        doctest::Approx(0.6931471805599453).epsilon(1e-12));
  CHECK(inverse_relative_position(1, 10, 99.0) ==
        doctest::Approx(0.10536051565782631).epsilon(1e-12));
  CHECK(inverse_relative_position(5, 5, 3.25) == 3.25);  // final position imputed
  CHECK(inverse_relative_position(1, 1, 0.5) == 0.5);
  CHECK_THROWS_AS(inverse_relative_position(0, 3, 0.0), Error);
  CHECK_THROWS_AS(inverse_relative_position(4, 3, 0.0), Error);
}

TEST_CASE("transform is monotone in i and scale invariant") {
  for (int n : {2, 5, 17}) {
    double prev = -1.0;
    for (int i = 1; i < n; ++i) {
      const double v = inverse_relative_position(i, n, 0.0);
      CHECK(v > prev);
      prev = v;
    }
  }
  for (int k : {2, 3, 7}) {
    CHECK(inverse_relative_position(3, 8, 0.0) ==
          doctest::Approx(inverse_relative_position(3 * k, 8 * k, 0.0)).epsilon(1e-12));
  }
}

TEST_CASE("imputation maximum enumerates non-initial non-final positions") {
  // single utterance of n=3: only i=2 qualifies, -ln(1/3) = ln 3
  auto utts = std::vector<Utterance>{utterance_of({"a", "b", "c"})};
  CHECK(compute_imputation_max(utts) == doctest::Approx(1.0986122886681098).epsilon(1e-12));

  // corpus of one-word utterances has no interior positions
  auto singles = std::vector<Utterance>{utterance_of({"a"}), utterance_of({"b"})};
  CHECK(compute_imputation_max(singles) == 0.0);

  // adding a longer utterance never decreases the maximum
  double prev = 0.0;
  std::vector<Utterance> growing;
  for (int n = 2; n <= 14; ++n) {
    std::vector<std::string> words;
    for (int i = 0; i < n; ++i) words.push_back("w");
    growing.push_back(utterance_of(words));
    const double now = compute_imputation_max(growing);
    CHECK(now >= prev);
    prev = now;
  }

  // exhaustive-enumeration oracle on random corpora
  Rng rng(13579);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Utterance> corpus;
    for (int u = 0; u < 1 + static_cast<int>(rng.below(12)); ++u) {
      std::vector<std::string> words(1 + rng.below(9), "x");
      corpus.push_back(utterance_of(words));
    }
    double expected = 0.0;
    for (const auto& u : corpus) {
      const int n = static_cast<int>(u.size());
      for (int i = 2; i < n; ++i) {
        expected = std::max(expected, -std::log(1.0 - static_cast<double>(i) / n));
      }
    }
    CHECK(compute_imputation_max(corpus) == doctest::Approx(expected).epsilon(1e-15));
    // imputation dominance over every interior transform value
    for (const auto& u : corpus) {
      const int n = static_cast<int>(u.size());
      for (int i = 2; i < n; ++i) {
        CHECK(inverse_relative_position(i, n, 0.0) <= compute_imputation_max(corpus));
      }
    }
  }
}

TEST_CASE("build_features applies the Table transforms") {
  auto utts = std::vector<Utterance>{utterance_of({"the", "cat", "sat", "on", "mats"}, 120.0)};
  Lexicon lex = tiny_lexicon({"the", "cat", "sat", "on", "mats"});
  auto features = build_features(utts, flat_scores(utts), lex);
  REQUIRE(features.rows.size() == 5);
  for (const auto& row : features.rows) {
    CHECK(row.log_duration == doctest::Approx(std::log(120.0)).epsilon(1e-12));
    CHECK(row.log_utt_len == doctest::Approx(std::log(5.0)).epsilon(1e-12));
    CHECK(row.log_freq == doctest::Approx(std::log(100.0)).epsilon(1e-12));
    CHECK(row.n_phonemes == 3);
  }
  CHECK(features.rows[0].word_pos_key == "the|n");
  CHECK(features.rows[0].inv_rel_pos ==
        doctest::Approx(-std::log(1.0 - 1.0 / 5.0)).epsilon(1e-12));
  // final position gets the imputed maximum
  CHECK(features.rows[4].inv_rel_pos == doctest::Approx(features.imputed_max).epsilon(1e-12));
}

TEST_CASE("rows without lexicon coverage are dropped and counted") {
  auto utts = std::vector<Utterance>{utterance_of({"known", "mystery", "known"})};
  Lexicon lex = tiny_lexicon({"known"});
  lex.phoneme_count.erase("known");
  lex.phoneme_count["known"] = 4;
  auto features = build_features(utts, flat_scores(utts), lex);
  CHECK(features.rows.size() == 2);
  CHECK(features.drops.tokens_total == 3);
  CHECK(features.drops.missing_frequency == 1);
  CHECK(features.drops.rows_emitted + features.drops.missing_frequency +
            features.drops.missing_phonemes ==
        features.drops.tokens_total);
}

TEST_CASE("misaligned scores raise an alignment error") {
  auto utts = std::vector<Utterance>{utterance_of({"a", "b"})};
  auto scores = flat_scores(utts);
  scores[0].pop_back();
  Lexicon lex = tiny_lexicon({"a", "b"});
  CHECK_THROWS_AS(build_features(utts, scores, lex), Error);
  std::vector<std::vector<TokenScore>> empty;
  CHECK_THROWS_AS(build_features(utts, empty, lex), Error);
}

TEST_CASE("word classes come from the class map") {
  auto utts = std::vector<Utterance>{utterance_of({"the", "cat"})};
  Lexicon lex = tiny_lexicon({"the", "cat"});
  ClassMap classes = {{"the", "function"}, {"cat", "content"}};
  auto features = build_features(utts, flat_scores(utts), lex, &classes);
  CHECK(features.rows[0].word_class == "function");
  CHECK(features.rows[1].word_class == "content");
  auto no_map = build_features(utts, flat_scores(utts), lex);
  CHECK(no_map.rows[0].word_class == "other");
}

TEST_CASE("spearman rho on known configurations") {
  std::vector<double> x = {1, 2, 3, 4};
  SUBCASE("identity gives 1") {
    CHECK(spearman_rho(x, x) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("reversal gives -1") {
    std::vector<double> y = {4, 3, 2, 1};
    CHECK(spearman_rho(x, y) == doctest::Approx(-1.0).epsilon(1e-12));
  }
  SUBCASE("hand-computed 0.8 case") {
    // d^2 = (0,1,1,0) -> rho = 1 - 6*2/(4*15) = 0.8
    std::vector<double> y = {1, 3, 2, 4};
    CHECK(spearman_rho(x, y) == doctest::Approx(0.8).epsilon(1e-12));
  }
  SUBCASE("ties use average ranks") {
    std::vector<double> a = {1, 2, 2, 3};
    std::vector<double> b = {1, 2, 2, 3};
    CHECK(spearman_rho(a, b) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("invariant under strictly monotone transforms") {
    Rng rng(31337);
    std::vector<double> u(50), v(50);
    for (std::size_t i = 0; i < u.size(); ++i) {
      u[i] = rng.normal();
      v[i] = rng.normal() + 0.5 * u[i];
    }
    const double base = spearman_rho(u, v);
    std::vector<double> eu(u.size()), cv(v.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
      eu[i] = std::exp(u[i]);
      cv[i] = std::atan(3.0 * v[i]) + 7.0;
    }
    CHECK(spearman_rho(eu, v) == doctest::Approx(base).epsilon(1e-12));
    CHECK(spearman_rho(u, cv) == doctest::Approx(base).epsilon(1e-12));
  }
  SUBCASE("constant vectors are an error") {
    std::vector<double> c = {2, 2, 2, 2};
    CHECK_THROWS_AS(spearman_rho(x, c), Error);
  }
  SUBCASE("length checks") {
    std::vector<double> short_x = {1};
    std::vector<double> short_y = {2};
    CHECK_THROWS_AS(spearman_rho(short_x, short_y), Error);
  }
}

TEST_CASE("profiles partition rows and average cell values") {
  std::vector<Utterance> utts = {utterance_of({"a", "b"}), utterance_of({"c", "d"})};
  auto scores = flat_scores(utts);
  scores[0][0].fwd_logprob = -1.0;
  scores[1][0].fwd_logprob = -3.0;
  Lexicon lex = tiny_lexicon({"a", "b", "c", "d"});
  auto features = build_features(utts, scores, lex);

  auto cells = confound_profile(features);
  std::size_t total = 0;
  for (const auto& cell : cells) total += cell.count;
  CHECK(total == features.rows.size());

  // the (n=2, i=1) cell averages the two forward log probabilities
  bool found = false;
  for (const auto& cell : cells) {
    if (cell.utterance_n == 2 && cell.position_i == 1) {
      CHECK(cell.count == 2);
      CHECK(cell.mean_fwd_logprob == doctest::Approx(-2.0).epsilon(1e-12));
      found = true;
    }
  }
  CHECK(found);

  auto duration_cells = duration_profile(features, 10);
  std::size_t duration_total = 0;
  for (const auto& cell : duration_cells) duration_total += cell.count;
  CHECK(duration_total == features.rows.size());

  // cap excludes long utterances
  std::vector<std::string> long_words(12, "a");
  std::vector<Utterance> with_long = {utterance_of({"a", "b"}), utterance_of(long_words)};
  auto features_long = build_features(with_long, flat_scores(with_long), lex);
  auto capped = duration_profile(features_long, 10);
  for (const auto& cell : capped) CHECK(cell.utterance_n <= 10);
}

TEST_CASE("feature table TSV round-trip") {
  auto utts = std::vector<Utterance>{utterance_of({"a", "b", "c"}, 150.0)};
  Lexicon lex = tiny_lexicon({"a", "b", "c"});
  auto features = build_features(utts, flat_scores(utts), lex);
  Table table = feature_table_to_tsv(features);
  auto back = feature_table_from_tsv(table, "mem");
  REQUIRE(back.rows.size() == features.rows.size());
  for (std::size_t i = 0; i < back.rows.size(); ++i) {
    CHECK(back.rows[i].log_duration == features.rows[i].log_duration);  // shortest round-trip
    CHECK(back.rows[i].inv_rel_pos == features.rows[i].inv_rel_pos);
    CHECK(back.rows[i].word_pos_key == features.rows[i].word_pos_key);
    CHECK(back.rows[i].utterance_n == features.rows[i].utterance_n);
  }
}

TEST_CASE("lexicon loader floors tiny frequencies and validates") {
  write_text_file("/tmp/prored_test_freq.tsv",
                  "word\tfreq_per_million\nthe\t50000\nrare\t0.001\nzero\t0\n");
  write_text_file("/tmp/prored_test_phon.tsv", "word\tn_phonemes\nthe\t2\nrare\t3\nzero\t3\n");
  Lexicon lex = Lexicon::from_files("/tmp/prored_test_freq.tsv", "/tmp/prored_test_phon.tsv");
  CHECK(lex.freq_per_million.at("the") == 50000.0);
  CHECK(lex.freq_per_million.at("rare") == Lexicon::kFrequencyFloor);
  CHECK(lex.freq_per_million.at("zero") == Lexicon::kFrequencyFloor);

  write_text_file("/tmp/prored_test_phon_bad.tsv", "word\tn_phonemes\nthe\t0\n");
  CHECK_THROWS_AS(Lexicon::from_files("/tmp/prored_test_freq.tsv", "/tmp/prored_test_phon_bad.tsv"),
                  Error);
}
