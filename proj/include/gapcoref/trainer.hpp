#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gapcoref/embeddings_io.hpp"
#include "gapcoref/encoder.hpp"
#include "gapcoref/gap_data.hpp"
#include "gapcoref/mc.hpp"
#include "gapcoref/optim.hpp"
#include "gapcoref/prob.hpp"
#include "gapcoref/qa.hpp"
#include "gapcoref/seq.hpp"
#include "gapcoref/tokenizer.hpp"

namespace gapcoref {

enum class ModelKind { QA, MC, Seq };
enum class Schedule { WarmupLinear, Triangular };
// Where the calibration regression for the QA formulation is fitted: on each
// fold's own training split, or once on pooled out-of-fold features.
enum class LrFitMode { PerFold, OutOfFold };

const char* to_string(ModelKind kind);
const char* to_string(Schedule schedule);
ModelKind parse_model_kind(std::string_view text);  // throws BadConfig
Schedule parse_schedule(std::string_view text);     // throws BadConfig

struct TrainerConfig {
  double learning_rate = 1e-5;
  AdamConfig adam;
  double warmup_fraction = 0.10;
  int batch_size = 12;
  int epochs = 2;
  Schedule schedule = Schedule::WarmupLinear;
  // 0 selects 100 x the training split size.
  std::int64_t triangular_steps_per_cycle = 0;
  double grad_clip = 1.0;  // <= 0 disables
  std::uint64_t seed = 42;

  int window = kDefaultWindow;
  int max_seq_len = kDefaultMaxSeqLen;
  int max_answer_len = kDefaultMaxAnswerLen;
  double lr_C = kDefaultLrC;
  LrFitMode lr_fit = LrFitMode::PerFold;
  int seq_hidden = kDefaultSeqHidden;
  double seq_dropout = kDefaultSeqDropout;

  // Published regime for each formulation: QA batch 12 / 2 epochs, MC batch 4
  // / 2 epochs, Seq batch 10 / 30 epochs on the triangular schedule.
  static TrainerConfig defaults_for(ModelKind kind);

  void validate() const;  // throws BadConfig
};

// Source of token states: a trainable encoder or fixed precomputed states.
class Backbone {
 public:
  static Backbone from_encoder(EncoderParams params);
  static Backbone from_store(std::shared_ptr<const EmbeddingStore> store);

  bool has_encoder() const { return encoder_.has_value(); }
  int hidden_dim() const;
  EncoderParams& encoder() { return *encoder_; }
  const EncoderParams& encoder() const { return *encoder_; }
  const std::shared_ptr<const EmbeddingStore>& store() const { return store_; }

  // `key` addresses the store; the encoder ignores it.
  TokenStates forward(const std::string& key, const EncodedInput& input, EncoderTape* tape = nullptr) const;
  void backward(const EncoderTape& tape, const Matrix& d_states);
  ParameterList parameters();

 private:
  std::optional<EncoderParams> encoder_;
  std::shared_ptr<const EmbeddingStore> store_;
  int hidden_dim_ = 0;
};

// How each fold's backbone is created.
struct BackboneSpec {
  std::optional<EncoderConfig> encoder;            // seeded per fold
  std::shared_ptr<const EmbeddingStore> external;  // shared by all folds
};

struct FoldModel {
  ModelKind kind = ModelKind::QA;
  Backbone backbone;
  std::optional<QaHead> qa_head;
  std::optional<LrModel> lr;
  std::optional<McHead> mc_head;
  std::optional<SeqHead> seq_head;
  int window = kDefaultWindow;
  int max_seq_len = kDefaultMaxSeqLen;
  int max_answer_len = kDefaultMaxAnswerLen;

  ParameterList parameters();
};

struct TrainLogEntry {
  int fold = 0;
  std::int64_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
};

// Per fold: predictions on the shared evaluation set.
struct FoldPredictions {
  std::vector<Predictions> folds;
};

struct TrainOutput {
  FoldPredictions eval;
  Predictions out_of_fold;
  std::vector<FoldModel> models;
  std::vector<TrainLogEntry> log;
  std::vector<std::vector<double>> epoch_losses;  // [fold][epoch]
  std::vector<double> uniform_baseline_loss;      // [fold], loss of all-equal logits
  std::vector<std::string> warnings;
};

using LogSink = std::function<void(const TrainLogEntry&)>;

// Trains one model per fold on the fold's training split and predicts the
// evaluation records (and the fold's held-out records) with it. Batches come
// from a seeded shuffle each epoch; the last partial batch is kept.
TrainOutput train(ModelKind kind, const std::vector<GapRecord>& records, const FoldPlan& folds,
                  const std::vector<GapRecord>& eval_records, const TrainerConfig& config, const Vocab& vocab,
                  const BackboneSpec& backbone, const LogSink& on_step = {});

// Per-id mean over folds. Throws CoverageMismatch when folds disagree on ids.
Predictions average_folds(const FoldPredictions& predictions);

// Records the model cannot encode (mentions beyond the length budget) get the
// uniform triple and a warning.
Predictions predict(const FoldModel& model, const std::vector<GapRecord>& records, const Vocab& vocab,
                    std::vector<std::string>* warnings = nullptr);

// Pooled span features under a trained QA model.
PooledFeatures qa_features(const FoldModel& model, const GapRecord& record, const Vocab& vocab);

// Candidate-free answer extraction with a trained QA model.
ExtractedAnswer extract_answer(const FoldModel& model, const QaQuery& query, const Vocab& vocab);

// Per-fold model files ("CSCK1" magic, versioned). A model trained on external
// states is saved without encoder weights and needs the store again on load.
void save_checkpoint(const FoldModel& model, const std::filesystem::path& path);
FoldModel load_checkpoint(const std::filesystem::path& path,
                          std::shared_ptr<const EmbeddingStore> external = nullptr);

}  // namespace gapcoref
