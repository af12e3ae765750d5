#include "gapcoref/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "gapcoref/error.hpp"
#include "gapcoref/rng.hpp"

namespace gapcoref {

const char* to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::QA: return "qa";
    case ModelKind::MC: return "mc";
    case ModelKind::Seq: return "seq";
  }
  return "?";
}

const char* to_string(Schedule schedule) {
  return schedule == Schedule::WarmupLinear ? "warmup_linear" : "triangular";
}

ModelKind parse_model_kind(std::string_view text) {
  if (text == "qa") return ModelKind::QA;
  if (text == "mc") return ModelKind::MC;
  if (text == "seq") return ModelKind::Seq;
  throw Error(ErrorCode::BadConfig, "unknown model kind '" + std::string(text) + "' (expected qa, mc or seq)");
}

Schedule parse_schedule(std::string_view text) {
  if (text == "warmup_linear") return Schedule::WarmupLinear;
  if (text == "triangular") return Schedule::Triangular;
  throw Error(ErrorCode::BadConfig, "unknown schedule '" + std::string(text) + "'");
}

TrainerConfig TrainerConfig::defaults_for(ModelKind kind) {
  TrainerConfig c;
  switch (kind) {
    case ModelKind::QA:
      c.batch_size = 12;
      c.epochs = 2;
      break;
    case ModelKind::MC:
      c.batch_size = 4;
      c.epochs = 2;
      break;
    case ModelKind::Seq:
      c.batch_size = 10;
      c.epochs = 30;
      c.schedule = Schedule::Triangular;
      break;
  }
  return c;
}

void TrainerConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::BadConfig, what); };
  if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
  if (!(warmup_fraction > 0.0 && warmup_fraction < 1.0)) fail("warmup_fraction must lie in (0, 1)");
  if (batch_size < 1) fail("batch_size must be positive");
  if (epochs < 1) fail("epochs must be positive");
  if (triangular_steps_per_cycle < 0 || triangular_steps_per_cycle % 2 != 0) {
    fail("triangular_steps_per_cycle must be even (0 selects 100 x training size)");
  }
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0)) fail("Adam betas must lie in [0, 1)");
  if (!(adam.epsilon > 0.0)) fail("Adam epsilon must be positive");
  if (adam.weight_decay < 0.0) fail("weight_decay must be non-negative");
  if (window < 1) fail("window must be positive");
  if (max_seq_len < 4) fail("max_seq_len must be at least 4");
  if (max_answer_len < 1) fail("max_answer_len must be positive");
  if (!(lr_C > 0.0)) fail("lr_C must be positive");
  if (seq_hidden < 1) fail("seq_hidden must be positive");
  if (!(seq_dropout >= 0.0 && seq_dropout < 1.0)) fail("seq_dropout must lie in [0, 1)");
}

Backbone Backbone::from_encoder(EncoderParams params) {
  Backbone b;
  b.hidden_dim_ = params.config.hidden_dim;
  b.encoder_ = std::move(params);
  return b;
}

Backbone Backbone::from_store(std::shared_ptr<const EmbeddingStore> store) {
  if (!store) throw Error(ErrorCode::BadConfig, "null embedding store");
  Backbone b;
  b.hidden_dim_ = store->hidden_dim();
  b.store_ = std::move(store);
  return b;
}

int Backbone::hidden_dim() const { return hidden_dim_; }

TokenStates Backbone::forward(const std::string& key, const EncodedInput& input, EncoderTape* tape) const {
  if (encoder_) return encoder_forward(*encoder_, input, tape);
  return store_->states(key, static_cast<std::int64_t>(input.size()));
}

void Backbone::backward(const EncoderTape& tape, const Matrix& d_states) {
  if (encoder_) encoder_backward(*encoder_, tape, d_states);
}

ParameterList Backbone::parameters() {
  if (encoder_) return encoder_->parameters();
  return {};
}

ParameterList FoldModel::parameters() {
  ParameterList out = backbone.parameters();
  auto append = [&](ParameterList more) { out.insert(out.end(), more.begin(), more.end()); };
  if (qa_head) append(qa_head->parameters());
  if (mc_head) append(mc_head->parameters());
  if (seq_head) append(seq_head->parameters());
  return out;
}

namespace {

std::string fold_label(const char* what, int fold) { return std::string(what) + "/fold" + std::to_string(fold); }

FoldModel make_model(ModelKind kind, const BackboneSpec& spec, const TrainerConfig& config, const Vocab& vocab,
                     int fold) {
  FoldModel model;
  model.kind = kind;
  model.window = config.window;
  model.max_seq_len = config.max_seq_len;
  model.max_answer_len = config.max_answer_len;
  if (spec.external) {
    model.backbone = Backbone::from_store(spec.external);
  } else if (spec.encoder) {
    EncoderConfig ec = *spec.encoder;
    ec.vocab_size = static_cast<int>(vocab.size());
    ec.max_positions = std::max(ec.max_positions, config.max_seq_len);
    ec.seed = derive_seed(config.seed, fold_label("encoder", fold));
    model.backbone = Backbone::from_encoder(init_params(ec));
  } else {
    throw Error(ErrorCode::BadConfig, "backbone needs an encoder config or external embeddings");
  }
  const int h = model.backbone.hidden_dim();
  const std::uint64_t head_seed = derive_seed(config.seed, fold_label("head", fold));
  switch (kind) {
    case ModelKind::QA: model.qa_head = QaHead::init(h, head_seed); break;
    case ModelKind::MC: model.mc_head = McHead::init(h, head_seed); break;
    case ModelKind::Seq: model.seq_head = SeqHead::init(h, config.seq_hidden, config.seq_dropout, head_seed); break;
  }
  return model;
}

// Runs the epoch/batch loop. `forward_backward(index, dropout_rng)` returns
// the example loss and accumulates unscaled gradients.
template <typename ForwardBackward>
std::vector<double> run_epochs(FoldModel& model, std::size_t n_examples, const TrainerConfig& config, int fold,
                               ForwardBackward&& forward_backward, TrainOutput& out, const LogSink& on_step) {
  std::vector<double> epoch_losses;
  if (n_examples == 0) return epoch_losses;
  ParameterList params = model.parameters();
  Adam adam(config.adam);
  const auto bs = static_cast<std::size_t>(config.batch_size);
  const auto steps_per_epoch = static_cast<std::int64_t>((n_examples + bs - 1) / bs);
  const std::int64_t total_steps = steps_per_epoch * config.epochs;
  const std::int64_t cycle =
      config.triangular_steps_per_cycle > 0 ? config.triangular_steps_per_cycle : 100 * static_cast<std::int64_t>(n_examples);
  Rng dropout_rng(derive_seed(config.seed, fold_label("dropout", fold)));

  std::int64_t step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<std::size_t> order(n_examples);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(config.seed, fold_label("shuffle", fold) + "/epoch" + std::to_string(epoch)));
    shuffle_rng.shuffle(order);

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n_examples; start += bs) {
      const std::size_t end = std::min(n_examples, start + bs);
      zero_grads(params);
      double batch_loss = 0.0;
      for (std::size_t i = start; i < end; ++i) batch_loss += forward_backward(order[i], dropout_rng);
      const double inv = 1.0 / static_cast<double>(end - start);
      for (Parameter* p : params) {
        if (p->trainable) p->grad *= inv;
      }
      clip_grad_norm(params, config.grad_clip);
      const double lr = config.schedule == Schedule::WarmupLinear
                            ? warmup_linear_lr(step, total_steps, config.learning_rate, config.warmup_fraction)
                            : triangular_lr(step, config.learning_rate, cycle);
      adam.step(params, lr);
      const double mean_loss = batch_loss * inv;
      if (!std::isfinite(mean_loss)) throw Error(ErrorCode::NumericFailure, "training loss is not finite");
      const TrainLogEntry entry{fold, step, lr, mean_loss};
      out.log.push_back(entry);
      if (on_step) on_step(entry);
      epoch_loss += batch_loss;
      ++step;
    }
    epoch_losses.push_back(epoch_loss / static_cast<double>(n_examples));
  }
  return epoch_losses;
}

void train_qa(FoldModel& model, const std::vector<GapRecord>& train_records, const TrainerConfig& config,
              const Vocab& vocab, int fold, TrainOutput& out, const LogSink& on_step) {
  std::vector<QaExample> examples;
  double baseline = 0.0;
  for (const auto& r : train_records) {
    try {
      if (auto ex = build_qa_example(r, vocab, config.window, config.max_seq_len)) {
        baseline += std::log(static_cast<double>(ex->encoded.size()));
        examples.push_back(std::move(*ex));
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::AnswerTruncated) throw;
      out.warnings.push_back("skipping QA training example: " + std::string(e.what()));
    }
  }
  out.uniform_baseline_loss.push_back(examples.empty() ? 0.0 : baseline / static_cast<double>(examples.size()));

  QaHead& head = *model.qa_head;
  auto fb = [&](std::size_t i, Rng&) {
    const QaExample& ex = examples[i];
    EncoderTape tape;
    const TokenStates states = model.backbone.forward(ex.record_id, ex.encoded, &tape);
    const SpanLogits logits = qa_forward(states, head);
    const double loss = qa_loss(logits, *ex.answer_span);
    const Matrix d_states = qa_head_backward(states, qa_loss_gradient(logits, *ex.answer_span), head);
    model.backbone.backward(tape, d_states);
    return loss;
  };
  out.epoch_losses.push_back(run_epochs(model, examples.size(), config, fold, fb, out, on_step));
}

void train_mc(FoldModel& model, const std::vector<GapRecord>& train_records, const TrainerConfig& config,
              const Vocab& vocab, int fold, TrainOutput& out, const LogSink& on_step) {
  std::vector<McExample> examples;
  for (const auto& r : train_records) {
    try {
      examples.push_back(build_mc_example(r, vocab, config.max_seq_len));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::FirstSegmentTooLong) throw;
      out.warnings.push_back("skipping MC training example: " + std::string(e.what()));
    }
  }
  out.uniform_baseline_loss.push_back(std::log(3.0));

  McHead& head = *model.mc_head;
  auto fb = [&](std::size_t i, Rng&) {
    const McExample& ex = examples[i];
    std::array<EncoderTape, kNumChoices> tapes;
    std::array<TokenStates, kNumChoices> states;
    for (int c = 0; c < kNumChoices; ++c) {
      const auto k = static_cast<std::size_t>(c);
      states[k] = model.backbone.forward(mc_choice_key(ex.record_id, c), ex.choice_inputs[k], &tapes[k]);
    }
    const ChoiceStates view = {&states[0], &states[1], &states[2]};
    const ProbTriple probs = mc_forward(view, head);
    const auto d = mc_backward(view, probs, ex.gold_choice, head);
    for (int c = 0; c < kNumChoices; ++c) {
      const auto k = static_cast<std::size_t>(c);
      model.backbone.backward(tapes[k], d[k]);
    }
    return mc_loss(probs, ex.gold_choice);
  };
  out.epoch_losses.push_back(run_epochs(model, examples.size(), config, fold, fb, out, on_step));
}

void train_seq(FoldModel& model, const std::vector<GapRecord>& train_records, const TrainerConfig& config,
               const Vocab& vocab, int fold, TrainOutput& out, const LogSink& on_step) {
  std::vector<SeqExample> examples;
  for (const auto& r : train_records) {
    try {
      examples.push_back(build_seq_example(r, vocab, config.max_seq_len));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::AnswerTruncated) throw;
      out.warnings.push_back("skipping Seq training example: " + std::string(e.what()));
    }
  }
  out.uniform_baseline_loss.push_back(std::log(3.0));

  SeqHead& head = *model.seq_head;
  auto fb = [&](std::size_t i, Rng& dropout_rng) {
    const SeqExample& ex = examples[i];
    EncoderTape tape;
    SeqTape seq_tape;
    const TokenStates states = model.backbone.forward(ex.record_id, ex.encoded, &tape);
    const ProbTriple probs = seq_forward(states, ex.a_span, ex.b_span, ex.p_span, head, true, &dropout_rng, &seq_tape);
    model.backbone.backward(tape, seq_backward(states, seq_tape, ex.gold, head));
    return seq_loss(probs, ex.gold);
  };
  out.epoch_losses.push_back(run_epochs(model, examples.size(), config, fold, fb, out, on_step));
}

LrModel fit_lr_on(const FoldModel& model, const std::vector<GapRecord>& records, const Vocab& vocab, double C) {
  std::vector<PooledFeatures> features;
  std::vector<Label> labels;
  features.reserve(records.size());
  for (const auto& r : records) {
    features.push_back(qa_features(model, r, vocab));
    labels.push_back(gold_label(r));
  }
  return fit_span_lr(features, labels, C);
}

}  // namespace

PooledFeatures qa_features(const FoldModel& model, const GapRecord& record, const Vocab& vocab) {
  const QaInput input = build_qa_input(to_query(record), vocab, model.window, model.max_seq_len);
  const TokenStates states = model.backbone.forward(record.id, input.encoded);
  const SpanLogits logits = qa_forward(states, *model.qa_head);
  return span_pool_features(logits, candidate_spans(record, input));
}

ExtractedAnswer extract_answer(const FoldModel& model, const QaQuery& query, const Vocab& vocab) {
  if (!model.qa_head) throw Error(ErrorCode::BadConfig, "answer extraction needs a QA model");
  const QaInput input = build_qa_input(query, vocab, model.window, model.max_seq_len);
  const TokenStates states = model.backbone.forward(query.id, input.encoded);
  const SpanLogits logits = qa_forward(states, *model.qa_head);
  const TokenSpan best = extract_best_span(logits, input.encoded.passage_range, model.max_answer_len);
  return answer_from_span(query, input, best);
}

Predictions predict(const FoldModel& model, const std::vector<GapRecord>& records, const Vocab& vocab,
                    std::vector<std::string>* warnings) {
  Predictions out;
  for (const auto& r : records) {
    ProbTriple p;
    try {
      switch (model.kind) {
        case ModelKind::QA: {
          if (!model.lr) throw Error(ErrorCode::BadConfig, "QA model has no calibration regression");
          p = qa_probabilities(*model.lr, qa_features(model, r, vocab));
          break;
        }
        case ModelKind::MC: {
          const McExample ex = build_mc_example(r, vocab, model.max_seq_len);
          std::array<TokenStates, kNumChoices> states;
          for (int c = 0; c < kNumChoices; ++c) {
            const auto k = static_cast<std::size_t>(c);
            states[k] = model.backbone.forward(mc_choice_key(r.id, c), ex.choice_inputs[k]);
          }
          p = mc_forward({&states[0], &states[1], &states[2]}, *model.mc_head);
          break;
        }
        case ModelKind::Seq: {
          const SeqExample ex = build_seq_example(r, vocab, model.max_seq_len);
          const TokenStates states = model.backbone.forward(r.id, ex.encoded);
          p = seq_forward(states, ex.a_span, ex.b_span, ex.p_span, *model.seq_head, false);
          break;
        }
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::AnswerTruncated && e.code() != ErrorCode::FirstSegmentTooLong) throw;
      if (warnings) warnings->push_back("uniform prediction for " + r.id + ": " + e.what());
      p = ProbTriple{};
    }
    out[r.id] = p;
  }
  return out;
}

TrainOutput train(ModelKind kind, const std::vector<GapRecord>& records, const FoldPlan& folds,
                  const std::vector<GapRecord>& eval_records, const TrainerConfig& config, const Vocab& vocab,
                  const BackboneSpec& backbone, const LogSink& on_step) {
  config.validate();
  if (folds.k < 1) throw Error(ErrorCode::BadConfig, "fold plan is empty");
  for (const auto& r : records) folds.fold_of(r.id);

  TrainOutput out;
  for (int fold = 0; fold < folds.k; ++fold) {
    const std::vector<GapRecord> train_split = folds.training_split(records, fold);
    FoldModel model = make_model(kind, backbone, config, vocab, fold);
    switch (kind) {
      case ModelKind::QA: train_qa(model, train_split, config, vocab, fold, out, on_step); break;
      case ModelKind::MC: train_mc(model, train_split, config, vocab, fold, out, on_step); break;
      case ModelKind::Seq: train_seq(model, train_split, config, vocab, fold, out, on_step); break;
    }
    out.models.push_back(std::move(model));
  }

  if (kind == ModelKind::QA) {
    if (config.lr_fit == LrFitMode::OutOfFold && folds.k > 1) {
      std::vector<PooledFeatures> features;
      std::vector<Label> labels;
      for (int fold = 0; fold < folds.k; ++fold) {
        for (const auto& r : folds.holdout_split(records, fold)) {
          features.push_back(qa_features(out.models[static_cast<std::size_t>(fold)], r, vocab));
          labels.push_back(gold_label(r));
        }
      }
      const LrModel shared = fit_span_lr(features, labels, config.lr_C);
      for (auto& m : out.models) m.lr = shared;
    } else {
      for (int fold = 0; fold < folds.k; ++fold) {
        FoldModel& m = out.models[static_cast<std::size_t>(fold)];
        m.lr = fit_lr_on(m, folds.training_split(records, fold), vocab, config.lr_C);
      }
    }
  }

  for (int fold = 0; fold < folds.k; ++fold) {
    const FoldModel& m = out.models[static_cast<std::size_t>(fold)];
    out.eval.folds.push_back(predict(m, eval_records, vocab, &out.warnings));
    for (auto& [id, p] : predict(m, folds.holdout_split(records, fold), vocab, &out.warnings)) {
      out.out_of_fold[id] = p;
    }
  }
  return out;
}

Predictions average_folds(const FoldPredictions& predictions) {
  Predictions out;
  if (predictions.folds.empty()) return out;
  const Predictions& first = predictions.folds.front();
  for (const auto& fold : predictions.folds) {
    if (fold.size() != first.size() ||
        !std::equal(fold.begin(), fold.end(), first.begin(), [](const auto& x, const auto& y) { return x.first == y.first; })) {
      throw Error(ErrorCode::CoverageMismatch, "folds cover different evaluation ids");
    }
  }
  const double n = static_cast<double>(predictions.folds.size());
  for (const auto& [id, _] : first) {
    ProbTriple mean{0.0, 0.0, 0.0};
    for (const auto& fold : predictions.folds) {
      const ProbTriple& p = fold.at(id);
      mean.p_a += p.p_a;
      mean.p_b += p.p_b;
      mean.p_n += p.p_n;
    }
    mean.p_a /= n;
    mean.p_b /= n;
    mean.p_n /= n;
    out[id] = mean;
  }
  return out;
}

}  // namespace gapcoref
