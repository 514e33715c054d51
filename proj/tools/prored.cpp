// prored: probabilistic-reduction corpus pipeline.
//
// File-based stages: segment -> train -> score -> features -> fit ->
// compare/profiles, plus a synthetic-corpus generator. Every stage is
// deterministic given its inputs, flags and --seed.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "prored/error.hpp"
#include "prored/pipeline.hpp"

namespace {

using nlohmann::json;
using namespace prored;

int exit_code_for(ErrorCategory cat) {
  switch (cat) {
    case ErrorCategory::usage: return 2;
    case ErrorCategory::io: return 3;
    case ErrorCategory::schema: return 4;
    case ErrorCategory::data: return 5;
    case ErrorCategory::alignment: return 6;
    case ErrorCategory::dependency: return 7;
    case ErrorCategory::numeric: return 8;
  }
  return 1;
}

std::vector<std::pair<std::string, std::string>> parse_key_values(
    const std::vector<std::string>& entries, const std::string& flag) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const std::string& entry : entries) {
    const std::size_t eq = entry.rfind('=');
    if (eq == std::string::npos || eq == 0) {
      throw Error(ErrorCategory::usage, flag + " expects key=value, got '" + entry + "'");
    }
    out.emplace_back(entry.substr(0, eq), entry.substr(eq + 1));
  }
  return out;
}

void apply_schema_flag(const std::string& flag_value, ColumnSchema& schema) {
  if (flag_value.empty()) return;
  std::vector<std::string> entries;
  std::size_t start = 0;
  while (start <= flag_value.size()) {
    std::size_t pos = flag_value.find(',', start);
    if (pos == std::string::npos) pos = flag_value.size();
    if (pos > start) entries.push_back(flag_value.substr(start, pos - start));
    start = pos + 1;
  }
  for (const auto& [key, value] : parse_key_values(entries, "--schema")) {
    if (key == "recording_id") schema.recording_id = value;
    else if (key == "speaker_id") schema.speaker_id = value;
    else if (key == "word") schema.word = value;
    else if (key == "pos") schema.pos = value;
    else if (key == "start_s") schema.start_s = value;
    else if (key == "end_s") schema.end_s = value;
    else throw Error(ErrorCategory::usage, "--schema: unknown field '" + key + "'");
  }
}

struct ConfigFile {
  json root;

  const json* section(const std::string& name) const {
    auto it = root.find(name);
    return it == root.end() ? nullptr : &*it;
  }
};

ConfigFile load_config(const std::string& path) {
  ConfigFile cfg;
  if (path.empty()) {
    cfg.root = json::object();
    return cfg;
  }
  try {
    cfg.root = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCategory::schema, path + ": invalid config JSON: " + e.what());
  }
  if (!cfg.root.is_object()) {
    throw Error(ErrorCategory::schema, path + ": config must be a JSON object");
  }
  return cfg;
}

// config value wins only when the flag was not given on the command line
template <typename T>
void config_override(const CLI::Option* opt, const json* section, const char* key, T& value) {
  if (!section || opt->count() > 0) return;
  auto it = section->find(key);
  if (it == section->end()) return;
  try {
    value = it->get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCategory::schema, std::string("config key '") + key + "': " + e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"probabilistic-reduction corpus pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 1;
  std::string out_dir;
  app.add_option("--config", config_path, "pipeline config JSON");
  auto* seed_opt = app.add_option("--seed", seed, "master random seed");
  auto* out_opt = app.add_option("--out", out_dir, "output directory for simulate/profiles");

  // segment
  auto* segment = app.add_subcommand("segment", "split a token table into inter-pause utterances");
  pipeline::SegmentArgs seg_args;
  std::string schema_flag;
  std::vector<std::string> drop_tokens;
  segment->add_option("--input", seg_args.input, "token table TSV")->required();
  segment->add_option("--output", seg_args.output, "annotated table TSV")->required();
  auto* pause_opt = segment->add_option("--pause-ms", seg_args.config.pause_threshold_ms,
                                        "pause threshold in milliseconds");
  auto* merge_opt = segment->add_flag("--merge-adjacent", seg_args.config.merge_adjacent,
                                      "concatenate each utterance with its successor");
  bool no_lowercase = false;
  auto* lower_opt = segment->add_flag("--no-lowercase", no_lowercase, "keep original casing");
  auto* drop_opt = segment->add_option("--drop", drop_tokens, "non-speech label to discard");
  segment->add_option("--schema", schema_flag, "column mapping, e.g. word=token,start_s=begin");

  // train
  auto* train = app.add_subcommand("train", "train forward and backward n-gram models");
  pipeline::TrainArgs train_args;
  std::string smoothing_name_flag = "kneser_ney";
  train->add_option("--input", train_args.input, "annotated table TSV")->required();
  train->add_option("--model-prefix", train_args.model_prefix, "output model prefix")->required();
  auto* order_opt = train->add_option("--order", train_args.order, "n-gram order (2=bigram)");
  auto* smooth_opt = train->add_option("--smoothing", smoothing_name_flag, "mle|add_k|kneser_ney");
  auto* k_opt = train->add_option("--k", train_args.smoothing.k, "add-k pseudo-count");
  auto* discount_opt =
      train->add_option("--discount", train_args.smoothing.discount, "Kneser-Ney discount");
  auto* unk_opt = train->add_option("--unk-threshold", train_args.smoothing.unk_threshold,
                                    "map words with count <= threshold to UNK (0 disables)");

  // score
  auto* score = app.add_subcommand("score", "attach per-token log probabilities");
  pipeline::ScoreArgs score_args;
  score->add_option("--input", score_args.input, "annotated table TSV")->required();
  score->add_option("--output", score_args.output, "scored table TSV")->required();
  score->add_option("--model-prefix", score_args.model_prefix, "trained model prefix");
  score->add_option("--external-probs", score_args.external_probs,
                    "external probability TSV (recording_id, utterance_idx, token_idx, fwd, bwd)");

  // features
  auto* features = app.add_subcommand("features", "assemble the regression feature table");
  pipeline::FeaturesArgs feat_args;
  features->add_option("--input", feat_args.input, "scored table TSV")->required();
  features->add_option("--output", feat_args.output, "feature table TSV")->required();
  auto* freq_opt = features->add_option("--frequency", feat_args.frequency_lexicon,
                                        "frequency lexicon TSV (word, freq_per_million)");
  auto* phon_opt = features->add_option("--phonemes", feat_args.phoneme_lexicon,
                                        "phoneme lexicon TSV (word, n_phonemes)");
  auto* class_opt =
      features->add_option("--class-map", feat_args.class_map, "word class TSV (word, word_class)");
  auto* imp_opt = features->add_flag("--impute-include-initial",
                                     feat_args.options.impute_include_initial,
                                     "pool initial positions into the imputation maximum");

  // fit
  auto* fit = app.add_subcommand("fit", "fit a mixed-effects regression");
  pipeline::FitArgs fit_args;
  std::string criterion_flag;
  fit->add_option("--features", fit_args.features, "feature table TSV")->required();
  auto* spec_opt = fit->add_option("--spec", fit_args.spec_file, "model spec JSON");
  fit->add_option("--output-prefix", fit_args.output_prefix, "fit output prefix")->required();
  fit->add_option("--criterion", criterion_flag, "override spec criterion: ml|reml");
  fit->add_option("--max-iterations", fit_args.options.max_iterations,
                  "optimizer evaluation budget");

  // compare
  auto* compare = app.add_subcommand("compare", "log-likelihood model comparison");
  pipeline::CompareArgs cmp_args;
  compare->add_option("--fit-a", cmp_args.fit_a, "first fit prefix or meta.json")->required();
  compare->add_option("--fit-b", cmp_args.fit_b, "second fit prefix or meta.json")->required();
  compare->add_flag("--nested", cmp_args.nested, "models are nested; compute the chi^2 p-value");
  compare->add_option("--df", cmp_args.df, "degrees of freedom for the nested test");
  compare->add_option("--output", cmp_args.output, "one-row comparison TSV");

  // simulate
  auto* simulate = app.add_subcommand("simulate", "generate a synthetic corpus with ground truth");
  pipeline::SimulateArgs sim_args;
  std::vector<std::string> beta_flags;
  auto* sim_utt = simulate->add_option("--utterances", sim_args.config.n_utterances,
                                       "number of utterances");
  auto* sim_upr = simulate->add_option("--utterances-per-recording",
                                       sim_args.config.utterances_per_recording,
                                       "utterances per recording");
  auto* sim_spk = simulate->add_option("--speakers", sim_args.config.n_speakers, "speaker count");
  auto* sim_vocab = simulate->add_option("--vocab", sim_args.config.n_word_types, "word types");
  auto* sim_zipf = simulate->add_option("--zipf", sim_args.config.zipf_exponent, "Zipf exponent");
  auto* sim_len = simulate->add_option("--mean-length", sim_args.config.mean_utterance_length,
                                       "mean utterance length");
  auto* sim_conf = simulate->add_option("--confound", sim_args.config.confound_strength,
                                        "position-probability confound strength");
  auto* sim_ss = simulate->add_option("--sigma-speaker", sim_args.config.sigma_speaker,
                                      "speaker intercept sd");
  auto* sim_sw = simulate->add_option("--sigma-wordpos", sim_args.config.sigma_wordpos,
                                      "word|POS intercept sd");
  auto* sim_sr = simulate->add_option("--sigma-resid", sim_args.config.sigma_resid, "residual sd");
  simulate->add_option("--beta", beta_flags, "planted coefficient, e.g. --beta fwd_logprob=-0.02");

  // profiles
  auto* profiles = app.add_subcommand("profiles", "emit figure-data CSVs");
  pipeline::ProfilesArgs prof_args;
  std::vector<std::string> fit_flags;
  profiles->add_option("--features", prof_args.features, "feature table TSV")->required();
  auto* cap_opt = profiles->add_option("--cap", prof_args.duration_cap,
                                       "max utterance length in the duration profile");
  profiles->add_option("--fit", fit_flags, "labelled fit output, e.g. --fit bigram=out/fit");

  try {
    app.parse(argc, argv);

    const ConfigFile cfg = load_config(config_path);

    if (segment->parsed()) {
      const json* section = cfg.section("segment");
      config_override(pause_opt, section, "pause_ms", seg_args.config.pause_threshold_ms);
      config_override(merge_opt, section, "merge_adjacent", seg_args.config.merge_adjacent);
      bool lowercase = seg_args.config.lowercase;
      if (lower_opt->count() > 0) lowercase = !no_lowercase;
      if (section && lower_opt->count() == 0 && section->contains("lowercase")) {
        lowercase = section->at("lowercase").get<bool>();
      }
      seg_args.config.lowercase = lowercase;
      std::vector<std::string> drops = drop_tokens;
      if (section && drop_opt->count() == 0 && section->contains("drop_tokens")) {
        drops = section->at("drop_tokens").get<std::vector<std::string>>();
      }
      seg_args.config.drop_tokens.insert(drops.begin(), drops.end());
      apply_schema_flag(schema_flag, seg_args.schema);
      if (section && section->contains("schema")) {
        for (const auto& [key, value] : section->at("schema").items()) {
          apply_schema_flag(key + "=" + value.get<std::string>(), seg_args.schema);
        }
      }
      const auto summary = pipeline::run_segment(seg_args);
      std::printf("segment: %zu tokens kept, %zu utterances, %zu non-speech dropped\n",
                  summary.parse.tokens_kept, summary.utterances,
                  summary.parse.dropped_nonspeech + summary.parse.dropped_empty);
    } else if (train->parsed()) {
      const json* section = cfg.section("train");
      config_override(order_opt, section, "order", train_args.order);
      config_override(smooth_opt, section, "smoothing", smoothing_name_flag);
      config_override(k_opt, section, "k", train_args.smoothing.k);
      config_override(discount_opt, section, "discount", train_args.smoothing.discount);
      config_override(unk_opt, section, "unk_threshold", train_args.smoothing.unk_threshold);
      train_args.smoothing.method = smoothing_from_name(smoothing_name_flag);
      pipeline::run_train(train_args);
      std::printf("train: wrote %s.fwd.ngram and %s.bwd.ngram\n",
                  train_args.model_prefix.c_str(), train_args.model_prefix.c_str());
    } else if (score->parsed()) {
      pipeline::run_score(score_args);
      std::printf("score: wrote %s\n", score_args.output.c_str());
    } else if (features->parsed()) {
      const json* section = cfg.section("features");
      config_override(freq_opt, section, "frequency_lexicon", feat_args.frequency_lexicon);
      config_override(phon_opt, section, "phoneme_lexicon", feat_args.phoneme_lexicon);
      config_override(class_opt, section, "class_map", feat_args.class_map);
      config_override(imp_opt, section, "impute_include_initial",
                      feat_args.options.impute_include_initial);
      if (feat_args.frequency_lexicon.empty() || feat_args.phoneme_lexicon.empty()) {
        throw Error(ErrorCategory::usage,
                    "features needs --frequency and --phonemes (flags or config)");
      }
      const DropReport drops = pipeline::run_features(feat_args);
      std::printf("features: %zu rows, %zu dropped (no frequency), %zu dropped (no phonemes)\n",
                  drops.rows_emitted, drops.missing_frequency, drops.missing_phonemes);
    } else if (fit->parsed()) {
      const json* section = cfg.section("fit");
      if (spec_opt->count() == 0 && section) {
        // the fit section may itself be the model spec
        ModelSpec spec = model_spec_from_json(section->dump(), config_path + "#fit");
        fit_args.spec = spec;
      }
      if (!criterion_flag.empty()) {
        if (!fit_args.spec && !fit_args.spec_file.empty()) {
          fit_args.spec = model_spec_from_json(read_text_file(fit_args.spec_file),
                                               fit_args.spec_file);
        }
        if (!fit_args.spec) {
          throw Error(ErrorCategory::usage, "--criterion requires a model spec");
        }
        if (criterion_flag == "ml") {
          fit_args.spec->criterion = FitCriterion::ml;
        } else if (criterion_flag == "reml") {
          fit_args.spec->criterion = FitCriterion::reml;
        } else {
          throw Error(ErrorCategory::usage, "--criterion must be ml or reml");
        }
      }
      const FitResult result = pipeline::run_fit(fit_args);
      std::printf("fit: %s, n=%zu, logLik=%.4f (ML %.4f), converged=%s%s\n",
                  result.criterion == FitCriterion::reml ? "REML" : "ML", result.n_obs,
                  result.log_likelihood, result.ml_log_likelihood,
                  result.converged ? "yes" : "NO",
                  result.boundary ? ", boundary (some theta at 0)" : "");
    } else if (compare->parsed()) {
      const ComparisonResult result = pipeline::run_compare(cmp_args);
      if (result.p_value) {
        std::printf("compare: deltaLL=%.4f chi2=%.4f df=%d p=%.6g\n", result.delta_ll,
                    result.chi_sq, result.df, *result.p_value);
      } else {
        std::printf("compare: deltaLL=%.4f chi2=%.4f (non-nested, descriptive only)\n",
                    result.delta_ll, result.chi_sq);
      }
    } else if (simulate->parsed()) {
      const json* section = cfg.section("simulate");
      config_override(sim_utt, section, "n_utterances", sim_args.config.n_utterances);
      config_override(sim_upr, section, "utterances_per_recording",
                      sim_args.config.utterances_per_recording);
      config_override(sim_spk, section, "n_speakers", sim_args.config.n_speakers);
      config_override(sim_vocab, section, "n_word_types", sim_args.config.n_word_types);
      config_override(sim_zipf, section, "zipf_exponent", sim_args.config.zipf_exponent);
      config_override(sim_len, section, "mean_utterance_length",
                      sim_args.config.mean_utterance_length);
      config_override(sim_conf, section, "confound_strength", sim_args.config.confound_strength);
      config_override(sim_ss, section, "sigma_speaker", sim_args.config.sigma_speaker);
      config_override(sim_sw, section, "sigma_wordpos", sim_args.config.sigma_wordpos);
      config_override(sim_sr, section, "sigma_resid", sim_args.config.sigma_resid);
      if (section && section->contains("true_beta") && beta_flags.empty()) {
        sim_args.config.true_beta =
            section->at("true_beta").get<std::map<std::string, double>>();
      }
      for (const auto& [term, value] : parse_key_values(beta_flags, "--beta")) {
        if (sim_args.config.true_beta.empty()) sim_args.config.true_beta = default_true_beta();
        sim_args.config.true_beta[term] = parse_double(value, "--beta " + term);
      }
      if (seed_opt->count() > 0) sim_args.config.seed = seed;
      if (out_opt->count() == 0) {
        throw Error(ErrorCategory::usage, "simulate needs --out <dir>");
      }
      sim_args.out_dir = out_dir;
      pipeline::run_simulate(sim_args);
      std::printf("simulate: wrote corpus and ground truth under %s\n", sim_args.out_dir.c_str());
    } else if (profiles->parsed()) {
      const json* section = cfg.section("profiles");
      config_override(cap_opt, section, "duration_cap", prof_args.duration_cap);
      prof_args.fits = parse_key_values(fit_flags, "--fit");
      if (out_opt->count() == 0) {
        throw Error(ErrorCategory::usage, "profiles needs --out <dir>");
      }
      prof_args.out_dir = out_dir;
      pipeline::run_profiles(prof_args);
      std::printf("profiles: wrote figure data under %s\n", prof_args.out_dir.c_str());
    }
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const Error& e) {
    std::cerr << "error[" << error_category_name(e.category()) << "]: " << e.what() << "\n";
    return exit_code_for(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
