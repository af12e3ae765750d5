#include <CLI11.hpp>

#include <array>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gapcoref/config.hpp"
#include "gapcoref/embeddings_io.hpp"
#include "gapcoref/error.hpp"
#include "gapcoref/gap_data.hpp"
#include "gapcoref/metrics.hpp"
#include "gapcoref/synthetic.hpp"
#include "gapcoref/tokenizer.hpp"
#include "gapcoref/trainer.hpp"

namespace fs = std::filesystem;
using namespace gapcoref;

namespace {

std::vector<GapRecord> read_all(const std::vector<std::string>& paths) {
  std::vector<GapRecord> out;
  for (const auto& p : paths) {
    auto part = read_gap_file(p);
    out.insert(out.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  return out;
}

std::shared_ptr<const EmbeddingStore> maybe_embeddings(const fs::path& path) {
  if (path.empty()) return nullptr;
  return std::make_shared<const EmbeddingStore>(load_external_embeddings_file(path));
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
}

int cmd_stats(const std::vector<std::string>& paths) {
  for (const auto& path : paths) {
    const auto records = read_gap_file(path);
    const DatasetStats s = dataset_stats(records);
    std::printf("%-40s %8s %8s %8s %8s\n", "file", "total", "A", "B", "N");
    std::printf("%-40s %8lld %8lld %8lld %8lld\n", fs::path(path).filename().string().c_str(),
                static_cast<long long>(s.total), static_cast<long long>(s.a_count), static_cast<long long>(s.b_count),
                static_cast<long long>(s.n_count));
    std::int64_t male = 0, female = 0;
    bool genders_known = true;
    try {
      const GenderCounts g = gender_counts(records);
      male = g.male;
      female = g.female;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::UnknownPronoun) throw;
      genders_known = false;
    }
    std::printf("total=%lld\na_count=%lld\nb_count=%lld\nn_count=%lld\n", static_cast<long long>(s.total),
                static_cast<long long>(s.a_count), static_cast<long long>(s.b_count), static_cast<long long>(s.n_count));
    if (genders_known) std::printf("male=%lld\nfemale=%lld\n", static_cast<long long>(male), static_cast<long long>(female));
  }
  return 0;
}

int cmd_folds(const std::string& path, int k, std::uint64_t seed, const std::string& out) {
  const auto records = read_gap_file(path);
  const FoldPlan plan = stratified_folds(records, k, seed);
  std::string tsv = "ID\tfold\tgender\n";
  std::vector<std::array<int, 2>> per_fold(static_cast<std::size_t>(k), {0, 0});
  for (const auto& r : records) {
    const int f = plan.fold_of(r.id);
    const Gender g = pronoun_gender(r);
    per_fold[static_cast<std::size_t>(f)][g == Gender::Male ? 0 : 1] += 1;
    tsv += r.id + '\t' + std::to_string(f) + '\t' + to_string(g) + '\n';
  }
  if (out.empty()) std::cout << tsv;
  else write_text_file(out, tsv);
  for (int f = 0; f < k; ++f) {
    std::fprintf(stderr, "fold %d: male=%d female=%d\n", f, per_fold[static_cast<std::size_t>(f)][0],
                 per_fold[static_cast<std::size_t>(f)][1]);
  }
  return 0;
}

int cmd_train(const RunConfig& config) {
  config.validate();
  std::cout << echo_config(config) << std::flush;
  if (config.data.empty()) throw Error(ErrorCode::BadConfig, "train needs data");
  if (config.vocab.empty()) throw Error(ErrorCode::BadConfig, "train needs a vocabulary (see build-vocab)");

  const auto records = read_gap_file(config.data);
  const std::vector<GapRecord> eval_records =
      config.eval_data.empty() ? std::vector<GapRecord>{} : read_gap_file(config.eval_data);
  const Vocab vocab = Vocab::load_file(config.vocab);

  BackboneSpec spec;
  spec.external = maybe_embeddings(config.embeddings);
  if (!spec.external) spec.encoder = config.encoder;

  const FoldPlan plan =
      config.folds == 1 ? FoldPlan::single(records) : stratified_folds(records, config.folds, config.trainer.seed);

  fs::create_directories(config.output_dir);
  write_text_file(config.output_dir / "effective_config.txt", echo_config(config));

  std::vector<std::string> logs(static_cast<std::size_t>(plan.k), "step,lr,loss\n");
  const TrainOutput out = train(config.kind, records, plan, eval_records, config.trainer, vocab, spec,
                                [&](const TrainLogEntry& e) {
                                  char buf[128];
                                  std::snprintf(buf, sizeof buf, "%lld,%.10g,%.10g\n", static_cast<long long>(e.step),
                                                e.lr, e.loss);
                                  logs[static_cast<std::size_t>(e.fold)] += buf;
                                });
  print_warnings(out.warnings);

  for (int f = 0; f < plan.k; ++f) {
    const auto fi = static_cast<std::size_t>(f);
    write_text_file(config.output_dir / ("train_log_fold" + std::to_string(f) + ".csv"), logs[fi]);
    save_checkpoint(out.models[fi], config.output_dir / ("fold" + std::to_string(f) + ".ckpt"));
    std::string losses;
    for (double l : out.epoch_losses[fi]) losses += " " + std::to_string(l);
    std::fprintf(stderr, "fold %d: epoch losses%s (uniform baseline %.6f)\n", f, losses.c_str(),
                 out.uniform_baseline_loss[fi]);
  }
  if (!out.out_of_fold.empty()) write_predictions_csv(out.out_of_fold, config.output_dir / "oof_predictions.csv");
  if (!eval_records.empty()) {
    write_predictions_csv(average_folds(out.eval), config.output_dir / "test_predictions.csv");
  }
  return 0;
}

std::vector<FoldModel> load_models(const std::vector<std::string>& paths, const fs::path& embeddings) {
  const auto store = maybe_embeddings(embeddings);
  std::vector<FoldModel> models;
  for (const auto& p : paths) models.push_back(load_checkpoint(p, store));
  return models;
}

int cmd_predict(const std::vector<std::string>& checkpoints, const std::string& vocab_path, const std::string& data,
                const std::string& embeddings, const std::string& out) {
  const Vocab vocab = Vocab::load_file(vocab_path);
  const auto records = read_gap_file(data);
  FoldPredictions fp;
  std::vector<std::string> warnings;
  for (const auto& m : load_models(checkpoints, embeddings)) fp.folds.push_back(predict(m, records, vocab, &warnings));
  print_warnings(warnings);
  const std::string csv = format_predictions_csv(average_folds(fp));
  if (out.empty()) std::cout << csv;
  else write_text_file(out, csv);
  return 0;
}

int cmd_extract(const std::string& checkpoint, const std::string& vocab_path, const std::string& data,
                const std::string& embeddings, const std::string& out, bool score) {
  const Vocab vocab = Vocab::load_file(vocab_path);
  const auto records = read_gap_file(data);
  const FoldModel model = load_checkpoint(checkpoint, maybe_embeddings(embeddings));
  std::vector<ExtractedAnswer> answers;
  answers.reserve(records.size());
  for (const auto& r : records) answers.push_back(extract_answer(model, to_query(r), vocab));
  const std::string tsv = format_answers_tsv(answers);
  if (out.empty()) std::cout << tsv;
  else write_text_file(out, tsv);
  if (score) {
    std::size_t correct = 0, scored = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (gold_label(records[i]) == Label::N) continue;
      ++scored;
      correct += exact_answer_match(answers[i], records[i]) ? 1 : 0;
    }
    std::fprintf(stderr, "exact_answer_accuracy=%.6f (%zu/%zu non-N records)\n",
                 scored ? static_cast<double>(correct) / static_cast<double>(scored) : 0.0, correct, scored);
  }
  return 0;
}

int cmd_ensemble(const std::vector<std::string>& inputs, const std::string& out) {
  std::vector<Predictions> systems;
  for (const auto& p : inputs) systems.push_back(read_predictions_csv(p));
  const std::string csv = format_predictions_csv(ensemble_average(systems));
  if (out.empty()) std::cout << csv;
  else write_text_file(out, csv);
  return 0;
}

int cmd_evaluate(const std::string& predictions, const std::string& gold, bool macro) {
  const MetricsReport report = gender_metrics(read_predictions_csv(predictions), read_gap_file(gold), macro);
  std::cout << format_report(report);
  return 0;
}

int cmd_build_vocab(const std::vector<std::string>& paths, std::size_t max_words, const std::string& out) {
  std::vector<std::string> texts;
  for (const auto& r : read_all(paths)) {
    texts.push_back(r.text);
    texts.push_back(r.pronoun + " is neither");
  }
  write_text_file(out, build_vocab(texts, max_words).serialize());
  return 0;
}

int cmd_synth(std::size_t count, std::uint64_t seed, double neither, const std::string& out) {
  const std::string tsv = format_gap_tsv(synthetic_gap({count, seed, neither}));
  if (out.empty()) std::cout << tsv;
  else write_text_file(out, tsv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gendered pronoun resolution toolkit"};
  app.require_subcommand(1);

  std::vector<std::string> stats_paths;
  auto* stats = app.add_subcommand("stats", "Dataset statistics for GAP-format files");
  stats->add_option("files", stats_paths, "GAP TSV files")->required()->check(CLI::ExistingFile);

  std::string folds_data, folds_out;
  int folds_k = 5;
  std::uint64_t folds_seed = 42;
  auto* folds = app.add_subcommand("folds", "Gender-stratified fold assignment");
  folds->add_option("file", folds_data, "GAP TSV file")->required()->check(CLI::ExistingFile);
  folds->add_option("-k,--folds", folds_k, "Number of folds");
  folds->add_option("--seed", folds_seed, "Root seed");
  folds->add_option("-o,--out", folds_out, "Output TSV (default stdout)");

  std::string config_path;
  std::vector<std::string> overrides;
  std::string opt_model, opt_data, opt_eval, opt_vocab, opt_embeddings, opt_out;
  auto* trainc = app.add_subcommand("train", "Train one formulation across folds");
  trainc->add_option("-c,--config", config_path, "Config file (key = value)")->check(CLI::ExistingFile);
  trainc->add_option("--set", overrides, "Override, key=value (repeatable)");
  trainc->add_option("--model", opt_model, "qa, mc or seq");
  trainc->add_option("--data", opt_data, "Training GAP TSV");
  trainc->add_option("--eval", opt_eval, "Evaluation GAP TSV");
  trainc->add_option("--vocab", opt_vocab, "Vocabulary file");
  trainc->add_option("--embeddings", opt_embeddings, "External embedding file (CSEM1)");
  trainc->add_option("-o,--out", opt_out, "Output directory");

  std::vector<std::string> pred_ckpts;
  std::string pred_vocab, pred_data, pred_emb, pred_out;
  auto* predictc = app.add_subcommand("predict", "Fold-averaged predictions from checkpoints");
  predictc->add_option("--checkpoint", pred_ckpts, "Checkpoint files")->required()->check(CLI::ExistingFile);
  predictc->add_option("--vocab", pred_vocab, "Vocabulary file")->required()->check(CLI::ExistingFile);
  predictc->add_option("--data", pred_data, "GAP TSV")->required()->check(CLI::ExistingFile);
  predictc->add_option("--embeddings", pred_emb, "External embedding file");
  predictc->add_option("-o,--out", pred_out, "Output CSV (default stdout)");

  std::string ex_ckpt, ex_vocab, ex_data, ex_emb, ex_out;
  bool ex_score = false;
  auto* extract = app.add_subcommand("extract-answers", "Best answer span per record, without candidates");
  extract->add_option("--checkpoint", ex_ckpt, "QA checkpoint")->required()->check(CLI::ExistingFile);
  extract->add_option("--vocab", ex_vocab, "Vocabulary file")->required()->check(CLI::ExistingFile);
  extract->add_option("--data", ex_data, "GAP TSV")->required()->check(CLI::ExistingFile);
  extract->add_option("--embeddings", ex_emb, "External embedding file");
  extract->add_option("-o,--out", ex_out, "Output TSV (default stdout)");
  extract->add_flag("--score", ex_score, "Report exact-answer accuracy against the gold candidates");

  std::vector<std::string> ens_inputs;
  std::string ens_out;
  auto* ensemble = app.add_subcommand("ensemble", "Average prediction CSVs");
  ensemble->add_option("inputs", ens_inputs, "Prediction CSVs")->required()->check(CLI::ExistingFile);
  ensemble->add_option("-o,--out", ens_out, "Output CSV (default stdout)");

  std::string ev_pred, ev_gold;
  bool ev_macro = false;
  auto* evaluate = app.add_subcommand("evaluate", "Gender-split F1, bias and log loss");
  evaluate->add_option("predictions", ev_pred, "Prediction CSV")->required()->check(CLI::ExistingFile);
  evaluate->add_option("gold", ev_gold, "Gold GAP TSV")->required()->check(CLI::ExistingFile);
  evaluate->add_flag("--macro", ev_macro, "Overall F1 as the mean of the gender F1s");

  std::vector<std::string> bv_inputs;
  std::string bv_out;
  std::size_t bv_max = 30000;
  auto* build = app.add_subcommand("build-vocab", "Build a wordpiece vocabulary from GAP files");
  build->add_option("inputs", bv_inputs, "GAP TSV files")->required()->check(CLI::ExistingFile);
  build->add_option("-o,--out", bv_out, "Vocabulary file")->required();
  build->add_option("--max-words", bv_max, "Whole-word budget");

  std::size_t syn_count = 500;
  std::uint64_t syn_seed = 7;
  double syn_neither = 0.1;
  std::string syn_out;
  auto* synth = app.add_subcommand("synth", "Write a synthetic GAP-format corpus");
  synth->add_option("-n,--count", syn_count, "Records");
  synth->add_option("--seed", syn_seed, "Seed");
  synth->add_option("--neither", syn_neither, "Fraction of neither records");
  synth->add_option("-o,--out", syn_out, "Output TSV (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*stats) return cmd_stats(stats_paths);
    if (*folds) return cmd_folds(folds_data, folds_k, folds_seed, folds_out);
    if (*trainc) {
      ConfigValues values;
      if (!config_path.empty()) values = read_config_file(config_path);
      auto add = [&](const char* key, const std::string& v) {
        if (!v.empty()) values.emplace_back(key, v);
      };
      add("model", opt_model);
      add("data", opt_data);
      add("eval_data", opt_eval);
      add("vocab", opt_vocab);
      add("embeddings", opt_embeddings);
      add("output_dir", opt_out);
      for (const auto& o : overrides) {
        const auto parsed = parse_config_text(o);
        if (parsed.size() != 1) throw Error(ErrorCode::BadConfig, "--set expects key=value, got '" + o + "'");
        values.push_back(parsed.front());
      }
      return cmd_train(resolve_run_config(values));
    }
    if (*predictc) return cmd_predict(pred_ckpts, pred_vocab, pred_data, pred_emb, pred_out);
    if (*extract) return cmd_extract(ex_ckpt, ex_vocab, ex_data, ex_emb, ex_out, ex_score);
    if (*ensemble) return cmd_ensemble(ens_inputs, ens_out);
    if (*evaluate) return cmd_evaluate(ev_pred, ev_gold, ev_macro);
    if (*build) return cmd_build_vocab(bv_inputs, bv_max, bv_out);
    if (*synth) return cmd_synth(syn_count, syn_seed, syn_neither, syn_out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 2;
}
