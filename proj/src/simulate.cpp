#include "prored/simulate.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>

#include "prored/error.hpp"
#include "prored/features.hpp"
#include "prored/rng.hpp"

namespace prored {

std::map<std::string, double> default_true_beta() {
  return {{"(Intercept)", 5.0},   {"log_freq", -0.05},    {"n_phonemes", 0.12},
          {"log_utt_len", -0.10}, {"inv_rel_pos", 0.12},  {"fwd_logprob", -0.02},
          {"bwd_logprob", -0.02}};
}

namespace {

const std::vector<std::string> kPosTags = {"n", "v", "j", "d"};

struct Grammar {
  int v = 0;
  double stop_hazard = 0.0;             // per-step EOS probability
  Eigen::VectorXd zipf;                 // word-type probabilities, rank order
  Eigen::MatrixXd transition;           // P(word col | word row), words only
  Eigen::VectorXd initial;              // P(word | BOS)
  Eigen::VectorXd expected_occurrences; // m: expected occurrences per utterance
  Eigen::VectorXd angle;                // topic angle per word
  double bos_angle = 0.0;
};

Grammar build_grammar(const SimConfig& cfg, Rng& rng) {
  Grammar g;
  g.v = cfg.n_word_types;
  g.stop_hazard = 1.0 / cfg.mean_utterance_length;

  g.zipf.resize(g.v);
  for (int r = 0; r < g.v; ++r) g.zipf[r] = std::pow(static_cast<double>(r + 1), -cfg.zipf_exponent);
  g.zipf /= g.zipf.sum();

  g.angle.resize(g.v);
  if (cfg.successor_window > 0) {
    // regular spacing keeps every word inside exactly `window` successor
    // sets, so the windowed chain mixes uniformly
    for (int r = 0; r < g.v; ++r) g.angle[r] = 2.0 * M_PI * r / g.v;
    g.bos_angle = 0.0;
  } else {
    for (int r = 0; r < g.v; ++r) g.angle[r] = 2.0 * M_PI * rng.uniform();
    g.bos_angle = 2.0 * M_PI * rng.uniform();
  }

  const double kappa = cfg.topic_concentration;
  auto make_row = [&](double from_angle) {
    Eigen::VectorXd row(g.v);
    if (cfg.successor_window > 0) {
      // near-uniform mass over a window of words ahead of the current
      // topic angle (golden-ratio rotation, so the chain mixes over the
      // whole vocabulary), with a vanishing floor elsewhere to keep the
      // chain irreducible
      const double target = from_angle + 2.0 * M_PI * 0.381966011250105;
      std::vector<std::pair<double, int>> by_distance(g.v);
      for (int w = 0; w < g.v; ++w) {
        double d = std::abs(std::remainder(target - g.angle[w], 2.0 * M_PI));
        by_distance[w] = {d, w};
      }
      std::sort(by_distance.begin(), by_distance.end());
      for (int w = 0; w < g.v; ++w) row[w] = 1e-6 * g.zipf[w];
      const int window = std::min(cfg.successor_window, g.v);
      for (int k = 0; k < window; ++k) row[by_distance[k].second] = g.zipf[by_distance[k].second];
    } else {
      for (int w = 0; w < g.v; ++w) {
        row[w] = g.zipf[w] * std::exp(kappa * std::cos(from_angle - g.angle[w]));
      }
    }
    row /= row.sum();
    return row;
  };

  g.transition.resize(g.v, g.v);
  for (int prev = 0; prev < g.v; ++prev) g.transition.row(prev) = make_row(g.angle[prev]).transpose();
  g.initial = make_row(g.bos_angle);

  // m = mu_1 + (1-rho) T' m, the expected per-utterance occurrence counts;
  // these give the pooled reversed-chain conditionals in closed form
  const double keep = 1.0 - g.stop_hazard;
  Eigen::MatrixXd system = Eigen::MatrixXd::Identity(g.v, g.v) - keep * g.transition.transpose();
  g.expected_occurrences = system.partialPivLu().solve(g.initial);
  return g;
}

int sample_cdf(const Eigen::VectorXd& probs, double u) {
  double acc = 0.0;
  for (int i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  return static_cast<int>(probs.size()) - 1;
}

}  // namespace

SimResult generate_corpus(const SimConfig& cfg) {
  if (cfg.n_word_types < 2) throw Error(ErrorCategory::usage, "need at least 2 word types");
  if (cfg.n_utterances < 1) throw Error(ErrorCategory::usage, "need at least 1 utterance");
  if (cfg.n_speakers < 1) throw Error(ErrorCategory::usage, "need at least 1 speaker");
  if (cfg.utterances_per_recording < 1) {
    throw Error(ErrorCategory::usage, "need at least 1 utterance per recording");
  }
  if (cfg.mean_utterance_length < 1.0) {
    throw Error(ErrorCategory::usage, "mean utterance length must be >= 1");
  }
  if (cfg.zipf_exponent <= 0.0) throw Error(ErrorCategory::usage, "zipf exponent must be > 0");
  if (cfg.sigma_speaker < 0.0 || cfg.sigma_wordpos < 0.0 || cfg.sigma_resid < 0.0) {
    throw Error(ErrorCategory::usage, "variance parameters must be nonnegative");
  }

  const std::map<std::string, double> beta =
      cfg.true_beta.empty() ? default_true_beta() : cfg.true_beta;
  {
    const auto known = default_true_beta();
    for (const auto& [term, value] : beta) {
      (void)value;
      if (!known.count(term)) {
        throw Error(ErrorCategory::usage, "unknown true_beta term '" + term + "'");
      }
    }
  }
  auto beta_of = [&](const std::string& term) {
    auto it = beta.find(term);
    return it == beta.end() ? 0.0 : it->second;
  };

  Rng grammar_rng(Rng::derive(cfg.seed, 1));
  const Grammar grammar = build_grammar(cfg, grammar_rng);
  const int v = grammar.v;
  const double rho = grammar.stop_hazard;
  const double keep = 1.0 - rho;

  SimResult result;
  GroundTruth& truth = result.truth;
  truth.beta = beta;
  truth.sigma_speaker = cfg.sigma_speaker;
  truth.sigma_wordpos = cfg.sigma_wordpos;
  truth.sigma_resid = cfg.sigma_resid;
  truth.seed = cfg.seed;
  truth.chain_transition = grammar.transition;
  truth.chain_initial = grammar.initial;
  truth.chain_occupancy = grammar.expected_occurrences;
  truth.stop_hazard = rho;

  // lexicon: ranks named w1..wV, frequencies from the Zipf weights
  truth.words.resize(v);
  truth.freq_per_million.resize(v);
  truth.phonemes.resize(v);
  truth.word_class.resize(v);
  Rng lexicon_rng(Rng::derive(cfg.seed, 2));
  const int function_ranks = std::max(8, v / 10);
  for (int r = 0; r < v; ++r) {
    truth.words[r] = "w" + std::to_string(r + 1);
    truth.freq_per_million[r] = grammar.zipf[r] * 1e6;
    const double jitter = 0.6 + 0.8 * lexicon_rng.uniform();
    truth.phonemes[r] = std::max(
        1, 1 + static_cast<int>(std::lround(cfg.phoneme_coef *
                                            std::pow(static_cast<double>(r + 1),
                                                     cfg.phoneme_power) *
                                            jitter)));
    truth.word_class[r] = r < function_ranks ? "function" : "content";
  }

  // POS scheme: one base tag per rank; every seventh rank is homographic
  // and draws between two tags per occurrence
  auto base_tag = [&](int r) { return kPosTags[r % kPosTags.size()]; };
  auto alt_tag = [&](int r) { return kPosTags[(r + 1) % kPosTags.size()]; };
  auto is_homograph = [&](int r) { return (r + 1) % 7 == 0; };

  Rng effects_rng(Rng::derive(cfg.seed, 3));
  std::vector<double> speaker_effect(cfg.n_speakers);
  for (double& e : speaker_effect) e = cfg.sigma_speaker * effects_rng.normal();
  std::vector<double> wordpos_effect(static_cast<std::size_t>(v) * 2);
  for (double& e : wordpos_effect) e = cfg.sigma_wordpos * effects_rng.normal();
  auto wordpos_of = [&](int r, bool alt) { return wordpos_effect[2 * r + (alt ? 1 : 0)]; };

  // pass 1: word sequences, lengths and generator log probabilities
  struct DrawnToken {
    int rank = 0;
    bool alt_pos = false;
    double fwd = 0.0, bwd = 0.0;
  };
  std::vector<std::vector<DrawnToken>> drawn(cfg.n_utterances);

  for (int ui = 0; ui < cfg.n_utterances; ++ui) {
    Rng rng(Rng::derive(cfg.seed, 1000 + static_cast<std::uint64_t>(ui)));
    int n = 1;
    if (keep > 0.0) {
      const double u = rng.uniform();
      n = 1 + static_cast<int>(std::floor(std::log1p(-u) / std::log(keep)));
    }
    auto& tokens = drawn[ui];
    tokens.resize(n);

    int prev = -1;  // BOS
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd step;
      if (prev < 0) {
        step = grammar.initial;
      } else {
        step = grammar.transition.row(prev).transpose();
      }
      if (cfg.confound_strength != 0.0) {
        // damp the topic affinity toward the utterance end so that late
        // words are anti-collocational: their conditional probability drops
        // with relative position through the context channel, which word
        // frequency cannot absorb
        const double push = cfg.confound_strength * (static_cast<double>(i + 1) / n);
        const double prev_angle = prev < 0 ? grammar.bos_angle : grammar.angle[prev];
        Eigen::ArrayXd logits =
            step.array().log() -
            push * (grammar.angle.array() - prev_angle).cos();
        logits -= logits.maxCoeff();
        step = logits.exp().matrix();
        step /= step.sum();
      }
      const int w = sample_cdf(step, rng.uniform());
      tokens[i].rank = w;
      tokens[i].alt_pos = is_homograph(w) && rng.uniform() < 0.5;
      tokens[i].fwd = i == 0 ? std::log(step[w]) : std::log(keep * step[w]);
      prev = w;
    }
    for (int i = 0; i < n; ++i) {
      const int a = tokens[i].rank;
      if (i + 1 < n) {
        const int b = tokens[i + 1].rank;
        tokens[i].bwd = std::log(grammar.expected_occurrences[a] * keep *
                                 grammar.transition(a, b) /
                                 grammar.expected_occurrences[b]);
      } else {
        tokens[i].bwd = std::log(rho * grammar.expected_occurrences[a]);
      }
    }
  }

  // imputation constant over the whole generated corpus, matching the
  // feature stage's rule
  double imputed_max = 0.0;
  for (const auto& tokens : drawn) {
    const int n = static_cast<int>(tokens.size());
    const int first = cfg.impute_include_initial ? 1 : 2;
    for (int i = first; i < n; ++i) {
      imputed_max = std::max(imputed_max, -std::log(1.0 - static_cast<double>(i) / n));
    }
  }
  truth.imputed_max = imputed_max;

  // pass 2: durations and the timeline
  result.utterances.resize(cfg.n_utterances);
  truth.true_scores.resize(cfg.n_utterances);
  const double within_gap_s = 0.010;
  const double between_gap_s = 0.500;
  double cursor_s = 0.0;
  int current_recording = -1;

  for (int ui = 0; ui < cfg.n_utterances; ++ui) {
    Rng rng(Rng::derive(cfg.seed, 2000000 + static_cast<std::uint64_t>(ui)));
    const int recording = ui / cfg.utterances_per_recording;
    const int speaker = recording % cfg.n_speakers;
    if (recording != current_recording) {
      current_recording = recording;
      cursor_s = 0.0;
    } else {
      cursor_s += between_gap_s;
    }

    // zero-padded ids so lexicographic order matches generation order
    char rec_name[16], spk_name[16];
    std::snprintf(rec_name, sizeof(rec_name), "rec%06d", recording);
    std::snprintf(spk_name, sizeof(spk_name), "spk%04d", speaker);

    Utterance& utt = result.utterances[ui];
    utt.recording_id = rec_name;
    utt.speaker_id = spk_name;
    utt.utterance_idx = ui % cfg.utterances_per_recording;

    const auto& tokens = drawn[ui];
    const int n = static_cast<int>(tokens.size());
    utt.tokens.resize(n);
    truth.true_scores[ui].resize(n);

    for (int i = 0; i < n; ++i) {
      const DrawnToken& tok = tokens[i];
      const int r = tok.rank;
      const double irp = i + 1 == n
                             ? imputed_max
                             : -std::log(1.0 - static_cast<double>(i + 1) / n);
      double y = beta_of("(Intercept)");
      y += beta_of("log_freq") * std::log(truth.freq_per_million[r]);
      y += beta_of("n_phonemes") * truth.phonemes[r];
      y += beta_of("log_utt_len") * std::log(static_cast<double>(n));
      y += beta_of("inv_rel_pos") * irp;
      y += beta_of("fwd_logprob") * tok.fwd;
      y += beta_of("bwd_logprob") * tok.bwd;
      y += speaker_effect[speaker];
      y += wordpos_of(r, tok.alt_pos);
      y += cfg.sigma_resid * rng.normal();

      TokenRecord& rec = utt.tokens[i];
      rec.recording_id = utt.recording_id;
      rec.speaker_id = utt.speaker_id;
      rec.surface = truth.words[r];
      rec.pos = tok.alt_pos ? alt_tag(r) : base_tag(r);
      rec.duration_ms = std::exp(y);
      if (i > 0) cursor_s += within_gap_s;
      rec.start_s = cursor_s;
      rec.end_s = cursor_s + rec.duration_ms / 1000.0;
      cursor_s = rec.end_s;

      truth.true_scores[ui][i].fwd_logprob = tok.fwd;
      truth.true_scores[ui][i].bwd_logprob = tok.bwd;
    }
  }
  return result;
}

RecoveryReport recovery_report(const std::map<std::string, double>& true_beta,
                               const FitResult& fit) {
  RecoveryReport report;
  for (const auto& [term, value] : true_beta) {
    const Coefficient* found = nullptr;
    for (const Coefficient& c : fit.coefficients) {
      if (c.term == term) {
        found = &c;
        break;
      }
    }
    if (!found) {
      throw Error(ErrorCategory::usage, "fit has no term '" + term + "' to compare against");
    }
    RecoveryRow row;
    row.term = term;
    row.truth = value;
    row.estimate = found->estimate;
    row.se = found->std_error;
    row.z = (found->estimate - value) / found->std_error;
    row.covered = std::abs(row.z) <= 3.0;
    report.all_covered = report.all_covered && row.covered;
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace prored
