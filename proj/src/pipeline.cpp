#include "prored/pipeline.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "prored/error.hpp"

namespace prored::pipeline {

namespace {

namespace fs = std::filesystem;

void require_input(const std::string& path, const std::string& producer) {
  if (!fs::exists(path)) {
    throw Error(ErrorCategory::dependency,
                "input '" + path + "' does not exist; produce it with `prored " + producer + "`");
  }
}

std::string fwd_model_path(const std::string& prefix) { return prefix + ".fwd.ngram"; }
std::string bwd_model_path(const std::string& prefix) { return prefix + ".bwd.ngram"; }

}  // namespace

SegmentSummary run_segment(const SegmentArgs& args) {
  require_input(args.input, "simulate (or supply a token table)");
  std::ifstream in(args.input);
  if (!in) throw Error(ErrorCategory::io, "cannot open '" + args.input + "'");

  SegmentSummary summary;
  auto recordings = parse_token_table(in, args.schema, args.config, args.input, &summary.parse);
  auto utterances = segment_corpus(recordings, args.config);
  summary.utterances = utterances.size();
  write_tsv(args.output, to_annotated_table(utterances));
  return summary;
}

void run_train(const TrainArgs& args) {
  require_input(args.input, "segment");
  Table table = read_tsv(args.input);
  auto utterances = utterances_from_annotated_table(table, args.input);
  NGramModel fwd = NGramModel::train(utterances, args.order, Direction::forward, args.smoothing);
  NGramModel bwd = NGramModel::train(utterances, args.order, Direction::backward, args.smoothing);
  fwd.save(fwd_model_path(args.model_prefix));
  bwd.save(bwd_model_path(args.model_prefix));
}

namespace {

std::vector<std::vector<TokenScore>> external_scores(const std::string& path,
                                                     const std::vector<Utterance>& utterances) {
  Table table = read_tsv(path);
  const std::size_t c_rec = table.require_column("recording_id");
  const std::size_t c_utt = table.require_column("utterance_idx");
  const std::size_t c_tok = table.require_column("token_idx");
  const std::size_t c_fwd = table.require_column("fwd_logprob");
  const std::size_t c_bwd = table.require_column("bwd_logprob");

  std::map<std::tuple<std::string, long, long>, TokenScore> lookup;
  std::size_t line_no = 1;
  for (const auto& row : table.rows) {
    ++line_no;
    const std::string where = path + ":" + std::to_string(line_no);
    TokenScore score;
    score.fwd_logprob = parse_double(row[c_fwd], where);
    score.bwd_logprob = parse_double(row[c_bwd], where);
    lookup[{row[c_rec], parse_long(row[c_utt], where), parse_long(row[c_tok], where)}] = score;
  }

  std::vector<std::vector<TokenScore>> scores(utterances.size());
  for (std::size_t ui = 0; ui < utterances.size(); ++ui) {
    const Utterance& u = utterances[ui];
    scores[ui].resize(u.tokens.size());
    for (std::size_t j = 0; j < u.tokens.size(); ++j) {
      auto it = lookup.find({u.recording_id, u.utterance_idx, static_cast<long>(j)});
      if (it == lookup.end()) {
        throw Error(ErrorCategory::alignment,
                    path + ": no probability for " + u.recording_id + " utterance " +
                        std::to_string(u.utterance_idx) + " token " + std::to_string(j));
      }
      scores[ui][j] = it->second;
    }
  }
  return scores;
}

}  // namespace

void run_score(const ScoreArgs& args) {
  require_input(args.input, "segment");
  Table table = read_tsv(args.input);
  auto utterances = utterances_from_annotated_table(table, args.input);

  std::vector<std::vector<TokenScore>> scores;
  if (!args.external_probs.empty()) {
    require_input(args.external_probs, "simulate (true_probs.tsv) or an external scorer");
    scores = external_scores(args.external_probs, utterances);
  } else {
    if (!fs::exists(fwd_model_path(args.model_prefix)) ||
        !fs::exists(bwd_model_path(args.model_prefix))) {
      throw Error(ErrorCategory::dependency,
                  "models '" + fwd_model_path(args.model_prefix) + "' / '" +
                      bwd_model_path(args.model_prefix) +
                      "' not found; produce them with `prored train`");
    }
    NGramModel fwd = NGramModel::load(fwd_model_path(args.model_prefix));
    NGramModel bwd = NGramModel::load(bwd_model_path(args.model_prefix));
    scores = score_corpus(fwd, bwd, utterances);
  }

  Table out = table;
  out.header.push_back("fwd_logprob");
  out.header.push_back("bwd_logprob");
  std::size_t row = 0;
  for (std::size_t ui = 0; ui < utterances.size(); ++ui) {
    for (std::size_t j = 0; j < utterances[ui].tokens.size(); ++j, ++row) {
      out.rows[row].push_back(format_double(scores[ui][j].fwd_logprob));
      out.rows[row].push_back(format_double(scores[ui][j].bwd_logprob));
    }
  }
  write_tsv(args.output, out);
}

DropReport run_features(const FeaturesArgs& args) {
  require_input(args.input, "score");
  Table table = read_tsv(args.input);
  if (!table.find_column("fwd_logprob") || !table.find_column("bwd_logprob")) {
    throw Error(ErrorCategory::dependency,
                args.input + " lacks fwd_logprob/bwd_logprob columns; run `prored score` first");
  }
  auto utterances = utterances_from_annotated_table(table, args.input);

  const std::size_t c_fwd = table.require_column("fwd_logprob");
  const std::size_t c_bwd = table.require_column("bwd_logprob");
  std::vector<std::vector<TokenScore>> scores(utterances.size());
  std::size_t row = 0;
  for (std::size_t ui = 0; ui < utterances.size(); ++ui) {
    scores[ui].resize(utterances[ui].tokens.size());
    for (std::size_t j = 0; j < utterances[ui].tokens.size(); ++j, ++row) {
      const std::string where = args.input + ":" + std::to_string(row + 2);
      scores[ui][j].fwd_logprob = parse_double(table.rows[row][c_fwd], where);
      scores[ui][j].bwd_logprob = parse_double(table.rows[row][c_bwd], where);
    }
  }

  require_input(args.frequency_lexicon, "simulate (frequency.tsv) or supply a lexicon");
  require_input(args.phoneme_lexicon, "simulate (phonemes.tsv) or supply a lexicon");
  Lexicon lexicon = Lexicon::from_files(args.frequency_lexicon, args.phoneme_lexicon);
  ClassMap class_map;
  const ClassMap* class_map_ptr = nullptr;
  if (!args.class_map.empty()) {
    require_input(args.class_map, "simulate (word_class.tsv) or supply a class map");
    class_map = class_map_from_file(args.class_map);
    class_map_ptr = &class_map;
  }

  FeatureTable features =
      build_features(utterances, scores, lexicon, class_map_ptr, args.options);
  write_tsv(args.output, feature_table_to_tsv(features));

  Table drops;
  drops.header = {"tokens_total", "rows_emitted", "dropped_missing_frequency",
                  "dropped_missing_phonemes", "imputed_max"};
  drops.rows.push_back({std::to_string(features.drops.tokens_total),
                        std::to_string(features.drops.rows_emitted),
                        std::to_string(features.drops.missing_frequency),
                        std::to_string(features.drops.missing_phonemes),
                        format_double(features.imputed_max)});
  write_tsv(args.output + ".drops.tsv", drops);
  return features.drops;
}

namespace {

nlohmann::json fit_to_meta(const FitResult& fit, const ModelSpec& spec) {
  nlohmann::json meta;
  meta["criterion"] = fit.criterion == FitCriterion::reml ? "reml" : "ml";
  meta["response"] = fit.response;
  meta["fixed"] = fit.fixed_terms;
  meta["random"] = spec.random_intercepts;
  meta["n_obs"] = fit.n_obs;
  meta["log_likelihood"] = fit.log_likelihood;
  meta["ml_log_likelihood"] = fit.ml_log_likelihood;
  meta["sigma2_residual"] = fit.sigma2_residual;
  meta["converged"] = fit.converged;
  meta["boundary"] = fit.boundary;
  meta["iterations"] = fit.trace.iterations;
  meta["final_deviance"] = fit.trace.final_deviance;
  meta["theta"] = fit.theta;
  nlohmann::json components = nlohmann::json::array();
  for (const VarianceComponent& vc : fit.variance_components) {
    components.push_back({{"factor", vc.factor},
                          {"variance", vc.variance},
                          {"n_levels", vc.n_levels}});
  }
  meta["variance_components"] = components;
  return meta;
}

}  // namespace

FitResult run_fit(const FitArgs& args) {
  require_input(args.features, "features");
  ModelSpec spec;
  if (args.spec) {
    spec = *args.spec;
  } else if (!args.spec_file.empty()) {
    require_input(args.spec_file, "fit (write a model spec JSON)");
    spec = model_spec_from_json(read_text_file(args.spec_file), args.spec_file);
  } else {
    throw Error(ErrorCategory::usage, "fit needs a model spec (--spec file or inline)");
  }

  Table table = read_tsv(args.features);
  FeatureTable features = feature_table_from_tsv(table, args.features);
  DataFrame data = DataFrame::from_features(features);

  FitResult fit = spec.random_intercepts.empty() ? fit_ols(data, spec)
                                                 : fit_lmm(data, spec, args.options);

  Table terms;
  terms.header = {"term", "estimate", "std_error", "t_value", "p_value"};
  for (const Coefficient& c : fit.coefficients) {
    terms.rows.push_back({c.term, format_double(c.estimate), format_double(c.std_error),
                          format_double(c.t_value), format_double(c.p_value)});
  }
  write_tsv(args.output_prefix + ".terms.tsv", terms);
  write_text_file(args.output_prefix + ".meta.json", fit_to_meta(fit, spec).dump(2) + "\n");
  return fit;
}

FitResult load_fit_meta(const std::string& prefix_or_meta_path) {
  std::string path = prefix_or_meta_path;
  if (!fs::exists(path) || fs::is_directory(path)) path = prefix_or_meta_path + ".meta.json";
  if (!fs::exists(path)) {
    throw Error(ErrorCategory::dependency,
                "fit output '" + prefix_or_meta_path + "' not found; produce it with `prored fit`");
  }
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCategory::schema, path + ": invalid fit metadata: " + e.what());
  }
  FitResult fit;
  try {
    fit.criterion = meta.at("criterion").get<std::string>() == "reml" ? FitCriterion::reml
                                                                      : FitCriterion::ml;
    fit.response = meta.at("response").get<std::string>();
    fit.fixed_terms = meta.at("fixed").get<std::vector<std::string>>();
    fit.n_obs = meta.at("n_obs").get<std::size_t>();
    fit.log_likelihood = meta.at("log_likelihood").get<double>();
    fit.ml_log_likelihood = meta.at("ml_log_likelihood").get<double>();
    fit.sigma2_residual = meta.at("sigma2_residual").get<double>();
    fit.converged = meta.at("converged").get<bool>();
    fit.boundary = meta.at("boundary").get<bool>();
    fit.trace.iterations = meta.at("iterations").get<int>();
    fit.trace.final_deviance = meta.at("final_deviance").get<double>();
    fit.theta = meta.at("theta").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCategory::schema, path + ": bad fit metadata: " + e.what());
  }
  return fit;
}

ComparisonResult run_compare(const CompareArgs& args) {
  FitResult fit_a = load_fit_meta(args.fit_a);
  FitResult fit_b = load_fit_meta(args.fit_b);
  ComparisonResult result = compare_models(fit_a, fit_b, args.nested, args.df);

  Table out;
  out.header = {"delta_ll", "chi_sq", "df", "p_value"};
  out.rows.push_back({format_double(result.delta_ll), format_double(result.chi_sq),
                      std::to_string(result.df),
                      result.p_value ? format_double(*result.p_value)
                                     : std::string("non-nested (descriptive only)")});
  if (!args.output.empty()) write_tsv(args.output, out);
  return result;
}

void run_simulate(const SimulateArgs& args) {
  fs::create_directories(args.out_dir);
  SimResult sim = generate_corpus(args.config);
  const GroundTruth& truth = sim.truth;

  Table tokens;
  tokens.header = {"recording_id", "speaker_id", "word", "pos", "start_s", "end_s"};
  for (const Utterance& u : sim.utterances) {
    for (const TokenRecord& tok : u.tokens) {
      tokens.rows.push_back({tok.recording_id, tok.speaker_id, tok.surface, tok.pos,
                             format_fixed(tok.start_s, 4), format_fixed(tok.end_s, 4)});
    }
  }
  write_tsv(args.out_dir + "/tokens.tsv", tokens);

  Table probs;
  probs.header = {"recording_id", "utterance_idx", "token_idx", "fwd_logprob", "bwd_logprob"};
  for (std::size_t ui = 0; ui < sim.utterances.size(); ++ui) {
    const Utterance& u = sim.utterances[ui];
    for (std::size_t j = 0; j < u.tokens.size(); ++j) {
      probs.rows.push_back({u.recording_id, std::to_string(u.utterance_idx), std::to_string(j),
                            format_double(truth.true_scores[ui][j].fwd_logprob),
                            format_double(truth.true_scores[ui][j].bwd_logprob)});
    }
  }
  write_tsv(args.out_dir + "/true_probs.tsv", probs);

  Table freq;
  freq.header = {"word", "freq_per_million"};
  Table phon;
  phon.header = {"word", "n_phonemes"};
  Table cls;
  cls.header = {"word", "word_class"};
  for (std::size_t r = 0; r < truth.words.size(); ++r) {
    freq.rows.push_back({truth.words[r], format_double(truth.freq_per_million[r])});
    phon.rows.push_back({truth.words[r], std::to_string(truth.phonemes[r])});
    cls.rows.push_back({truth.words[r], truth.word_class[r]});
  }
  write_tsv(args.out_dir + "/frequency.tsv", freq);
  write_tsv(args.out_dir + "/phonemes.tsv", phon);
  write_tsv(args.out_dir + "/word_class.tsv", cls);

  nlohmann::json truth_json;
  truth_json["seed"] = truth.seed;
  truth_json["beta"] = truth.beta;
  truth_json["sigma_speaker"] = truth.sigma_speaker;
  truth_json["sigma_wordpos"] = truth.sigma_wordpos;
  truth_json["sigma_resid"] = truth.sigma_resid;
  truth_json["imputed_max"] = truth.imputed_max;
  write_text_file(args.out_dir + "/truth.json", truth_json.dump(2) + "\n");
}

void run_profiles(const ProfilesArgs& args) {
  require_input(args.features, "features");
  Table table = read_tsv(args.features);
  FeatureTable features = feature_table_from_tsv(table, args.features);
  fs::create_directories(args.out_dir);

  auto cells_to_table = [](const std::vector<ProfileCell>& cells, bool with_probs) {
    Table out;
    out.header = {"utterance_n", "position_i", "count", "mean_log_duration"};
    if (with_probs) {
      out.header.push_back("mean_fwd_logprob");
      out.header.push_back("mean_bwd_logprob");
    }
    for (const ProfileCell& cell : cells) {
      std::vector<std::string> row = {std::to_string(cell.utterance_n),
                                      std::to_string(cell.position_i),
                                      std::to_string(cell.count),
                                      format_double(cell.mean_log_duration)};
      if (with_probs) {
        row.push_back(format_double(cell.mean_fwd_logprob));
        row.push_back(format_double(cell.mean_bwd_logprob));
      }
      out.rows.push_back(std::move(row));
    }
    return out;
  };

  write_csv(args.out_dir + "/duration_profile.csv",
            cells_to_table(duration_profile(features, args.duration_cap), false));
  write_csv(args.out_dir + "/confound_profile.csv",
            cells_to_table(confound_profile(features), true));

  if (!args.fits.empty()) {
    Table coef;
    coef.header = {"label", "term", "estimate", "se", "t", "p", "abs_t"};
    for (const auto& [label, prefix] : args.fits) {
      std::string terms_path = prefix;
      if (!fs::exists(terms_path)) terms_path = prefix + ".terms.tsv";
      if (!fs::exists(terms_path)) {
        throw Error(ErrorCategory::dependency,
                    "fit output '" + prefix + "' not found; produce it with `prored fit`");
      }
      Table terms = read_tsv(terms_path);
      const std::size_t c_term = terms.require_column("term");
      const std::size_t c_est = terms.require_column("estimate");
      const std::size_t c_se = terms.require_column("std_error");
      const std::size_t c_t = terms.require_column("t_value");
      const std::size_t c_p = terms.require_column("p_value");
      std::size_t line_no = 1;
      for (const auto& row : terms.rows) {
        ++line_no;
        const std::string where = terms_path + ":" + std::to_string(line_no);
        const double t = parse_double(row[c_t], where);
        coef.rows.push_back({label, row[c_term], row[c_est], row[c_se], row[c_t], row[c_p],
                             format_double(std::abs(t))});
      }
    }
    write_csv(args.out_dir + "/coefficients.csv", coef);
  }
}

}  // namespace prored::pipeline
