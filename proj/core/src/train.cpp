#include "c2s/train.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <thread>

#include "c2s/errors.hpp"
#include "c2s/json_reader.hpp"
#include "c2s/log.hpp"
#include "c2s/ops.hpp"
#include "c2s/optim.hpp"
#include "c2s/random.hpp"

namespace c2s {

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (max_epochs < 1) throw ConfigError("train.max_epochs must be >= 1");
  if (patience < 1) throw ConfigError("train.patience must be >= 1");
  if (!(learning_rate > 0.0f) || !std::isfinite(learning_rate)) throw ConfigError("train.learning_rate must be positive");
  if (dropout && (!(*dropout >= 0.0f) || *dropout >= 1.0f)) throw ConfigError("train.dropout must lie in [0, 1)");
}

nlohmann::json to_json(const TrainConfig& c) {
  nlohmann::json j{{"batch_size", c.batch_size}, {"max_epochs", c.max_epochs},       {"patience", c.patience},
                   {"learning_rate", c.learning_rate}, {"seed", c.seed}, {"fold", c.fold}};
  if (c.dropout) j["dropout"] = *c.dropout;
  return j;
}

TrainConfig train_config_from_json(const nlohmann::json& j, const std::string& pointer) {
  JsonReader r(j, pointer);
  TrainConfig c;
  r.read("batch_size", c.batch_size);
  r.read("max_epochs", c.max_epochs);
  r.read("patience", c.patience);
  r.read("learning_rate", c.learning_rate);
  float dropout = 0.0f;
  if (r.read("dropout", dropout)) c.dropout = dropout;
  r.read("seed", c.seed);
  r.read("fold", c.fold);
  r.finish();
  try {
    c.validate();
  } catch (const ConfigError& e) {
    JsonReader::fail(pointer.empty() ? "/" : pointer, e.what());
  }
  return c;
}

namespace {

constexpr std::size_t kEvalChunk = 64;

}  // namespace

Tensor predict_windows(Model& model, const Tensor& ecog, std::span<const std::size_t> offsets, std::size_t length,
                       std::size_t context) {
  NoGradScope no_grad;
  const std::size_t b = model.config().out_channels;
  std::vector<float> out(offsets.size() * b * length);
  const Tensor no_spec = Tensor::zeros({b, ecog.dim(1)});
  for (std::size_t start = 0; start < offsets.size(); start += kEvalChunk) {
    const auto chunk = offsets.subspan(start, std::min(kEvalChunk, offsets.size() - start));
    const auto batch = gather(ecog, no_spec, chunk, length, context);
    const auto pred = slice_time(model.forward(batch.input, Mode::eval), context, length);
    std::copy(pred.data().begin(), pred.data().end(), out.begin() + start * b * length);
  }
  return Tensor({offsets.size(), b, length}, std::move(out));
}

double window_loss(Model& model, const Tensor& ecog, const Tensor& spec, std::span<const std::size_t> offsets,
                   std::size_t length, std::size_t context) {
  if (offsets.empty()) return 0.0;
  const auto pred = predict_windows(model, ecog, offsets, length, context);
  const auto target = gather(ecog, spec, offsets, length, context).target;
  return mean_squared_error(pred.data(), target.data());
}

TrainResult train(Model& model, const TrainData& data, const TrainConfig& cfg,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  cfg.validate();
  if (data.train.empty()) throw ConfigError("no training windows");
  if (cfg.dropout) {
    // Dropout rate is read at forward time from the model config.
    ModelConfig c = model.config();
    c.dropout = *cfg.dropout;
    Model rebuilt = Model::build(c, 0);
    rebuilt.load_state(model.state());
    model = std::move(rebuilt);
  }
  auto params = model.parameters();
  AdamOptions opts;
  opts.learning_rate = cfg.learning_rate;
  AdamState adam = AdamState::create(params, opts);

  const bool have_val = !data.validation.empty();
  TrainResult result;
  result.best_val_loss = std::numeric_limits<double>::infinity();
  ModelSnapshot best = model.snapshot();
  std::size_t stale = 0;
  std::vector<std::size_t> order = data.train;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    Rng rng(derive_seed(cfg.seed, epoch));
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0, batch = 0; start < order.size(); start += cfg.batch_size, ++batch) {
      const std::span<const std::size_t> idx(order.data() + start, std::min(cfg.batch_size, order.size() - start));
      const auto b = gather(data.ecog, data.spec, idx, data.length, data.context);
      Tape tape;
      TapeScope scope(tape);
      const auto out = model.forward(b.input, Mode::train, derive_seed(cfg.seed, (epoch << 32) | batch));
      const auto loss = mse_loss(slice_time(out, data.context, data.length), b.target);
      const float value = loss.item();
      if (!std::isfinite(value)) {
        throw NumericError("training diverged: loss is " + std::to_string(value) + " at epoch " +
                           std::to_string(epoch) + ", batch " + std::to_string(batch));
      }
      zero_grads(params);
      tape.backward(loss);
      adam_step(params, adam);
      loss_sum += static_cast<double>(value) * static_cast<double>(idx.size());
      seen += idx.size();
    }
    const double train_loss = loss_sum / static_cast<double>(seen);
    const double val_loss =
        have_val ? window_loss(model, data.ecog, data.spec, data.validation, data.length, data.context) : train_loss;
    if (!std::isfinite(val_loss)) {
      throw NumericError("training diverged: validation loss is not finite after epoch " + std::to_string(epoch));
    }
    const EpochRecord rec{epoch, train_loss, val_loss};
    result.history.push_back(rec);
    log::debug("epoch " + std::to_string(epoch) + " train " + std::to_string(train_loss) + " val " +
               std::to_string(val_loss));
    if (on_epoch) on_epoch(rec);
    if (val_loss < result.best_val_loss) {
      result.best_val_loss = val_loss;
      result.best_epoch = epoch;
      best = model.snapshot();
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }
  }
  model.restore(best);
  return result;
}

EvalReport evaluate(Model& model, const Tensor& ecog, const Tensor& spec, std::span<const std::size_t> offsets,
                    std::size_t length, std::size_t context, std::span<const WordAnnotation> annotations) {
  if (offsets.empty()) throw ConfigError("no test windows to evaluate");
  if (!annotations.empty() && annotations.size() != offsets.size()) {
    throw ConfigError("evaluate: one annotation per test window is required");
  }
  const auto pred = predict_windows(model, ecog, offsets, length, context);
  const auto target = gather(ecog, spec, offsets, length, context).target;
  const std::size_t n = offsets.size(), b = pred.dim(1);

  EvalReport r;
  r.mse = mean_squared_error(pred.data(), target.data());
  // Concatenate windows along time: [B x (N * length)].
  std::vector<float> pc(b * n * length), tc(b * n * length);
  for (std::size_t w = 0; w < n; ++w) {
    for (std::size_t i = 0; i < b; ++i) {
      const std::size_t src = (w * b + i) * length, dst = i * n * length + w * length;
      std::copy_n(pred.data().begin() + src, length, pc.begin() + dst);
      std::copy_n(target.data().begin() + src, length, tc.begin() + dst);
    }
  }
  const auto cc = band_correlation(Tensor({b, n * length}, std::move(pc)), Tensor({b, n * length}, std::move(tc)));
  r.cc_per_band = cc.cc;
  r.cc_degenerate = cc.degenerate;
  r.cc_mean = cc.mean();
  for (std::size_t w = 0; w < annotations.size(); ++w) {
    const std::size_t at = w * b * length;
    Tensor pw({b, length}, std::vector<float>(pred.data().begin() + at, pred.data().begin() + at + b * length));
    Tensor tw({b, length}, std::vector<float>(target.data().begin() + at, target.data().begin() + at + b * length));
    r.per_word.push_back({annotations[w].word_id, annotations[w].repetition, band_correlation(pw, tw).mean()});
  }
  return r;
}

FoldSetup prepare_fold(const PairedRecording& rec, const FoldPlan& plan, std::size_t fold,
                       const WindowOptions& windows) {
  FoldSetup s;
  s.windows = fold_windows(rec, plan, fold, windows);
  s.norm = compute_norm_stats(rec, s.windows.reserved);
  s.normalized = normalize(rec, s.norm);
  // Largest normalized envelope value on frames outside the test side.
  const auto& ecog = s.normalized.ecog.values;
  const std::size_t e = ecog.dim(0), t = ecog.dim(1);
  std::vector<char> keep(t, 1);
  for (const auto& r : s.windows.reserved) {
    for (std::size_t j = r.begin; j < std::min(r.end, t); ++j) keep[j] = 0;
  }
  float peak = -std::numeric_limits<float>::infinity();
  for (std::size_t i = 0; i < e; ++i) {
    for (std::size_t j = 0; j < t; ++j) {
      if (keep[j]) peak = std::max(peak, ecog.data()[i * t + j]);
    }
  }
  s.probe_amplitude = std::isfinite(peak) ? peak : 0.0f;
  return s;
}

FoldOutcome run_fold(const PairedRecording& rec, const FoldPlan& plan, std::size_t fold, const ModelConfig& mc,
                     const TrainConfig& tc, const WindowOptions& windows) {
  FoldOutcome out;
  out.fold = fold;
  try {
    const auto setup = prepare_fold(rec, plan, fold, windows);
    TrainConfig cfg = tc;
    cfg.fold = fold;
    cfg.seed = derive_seed(tc.seed, 100 + fold);
    Model model = Model::build(mc, derive_seed(tc.seed, 200 + fold));
    TrainData data{setup.normalized.ecog.values, setup.normalized.spec.values, setup.windows.train,
                   setup.windows.validation, windows.length, windows.context};
    out.training = train(model, data, cfg);
    std::vector<WordAnnotation> ann;
    for (std::size_t idx : setup.windows.test_annotation) ann.push_back(rec.annotations[idx]);
    out.report = evaluate(model, data.ecog, data.spec, setup.windows.test, windows.length, windows.context, ann);
    out.report.fold = std::to_string(fold);
    out.report.train_history = out.training.history;
    out.norm = setup.norm;
    out.probe_amplitude = setup.probe_amplitude;
    out.model = std::move(model);
    out.ok = true;
  } catch (const std::exception& e) {
    out.error = e.what();
    out.error_kind = error_kind(e);
    log::error("fold " + std::to_string(fold) + " failed: " + out.error);
  }
  return out;
}

nlohmann::json CrossvalResult::to_json() const {
  nlohmann::json j;
  j["folds"] = nlohmann::json::array();
  j["failures"] = nlohmann::json::array();
  for (const auto& f : folds) {
    if (f.ok) {
      j["folds"].push_back(f.report.to_json());
    } else {
      j["failures"].push_back({{"fold", f.fold}, {"kind", f.error_kind}, {"error", f.error}});
    }
  }
  j["mean"] = mean ? mean->to_json() : nlohmann::json(nullptr);
  return j;
}

CrossvalResult crossval_run(const PairedRecording& rec, std::size_t k, const ModelConfig& mc, const TrainConfig& tc,
                            const WindowOptions& windows, std::size_t jobs,
                            const std::function<void(const FoldOutcome&)>& on_fold) {
  const auto plan = kfold_split(rec, k);
  CrossvalResult result;
  result.folds.resize(k);
  std::mutex callback_mutex;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t f = next++; f < k; f = next++) {
      result.folds[f] = run_fold(rec, plan, f, mc, tc, windows);
      if (on_fold) {
        std::lock_guard lock(callback_mutex);
        on_fold(result.folds[f]);
      }
    }
  };
  jobs = std::clamp<std::size_t>(jobs, 1, k);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < jobs; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  std::vector<EvalReport> ok;
  for (const auto& f : result.folds) {
    if (f.ok) ok.push_back(f.report);
  }
  if (!ok.empty()) result.mean = mean_report(ok);
  return result;
}

}  // namespace c2s
