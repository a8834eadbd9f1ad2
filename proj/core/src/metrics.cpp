#include "c2s/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "c2s/errors.hpp"

namespace c2s {

double mean_squared_error(std::span<const float> pred, std::span<const float> target) {
  if (pred.size() != target.size()) throw ShapeError("mse: argument sizes differ");
  if (pred.empty()) throw ShapeError("mse: empty arguments");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = static_cast<double>(pred[i]) - target[i];
    s += d * d;
  }
  return s / static_cast<double>(pred.size());
}

double pearson(std::span<const float> x, std::span<const float> y, bool* degenerate) {
  if (x.size() != y.size()) throw ShapeError("pearson: argument sizes differ");
  const std::size_t n = x.size();
  if (degenerate) *degenerate = false;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  // Relative test so float rounding noise on a constant signal still counts as constant.
  auto flat = [n](double ss, double m) { return n < 2 || ss <= 1e-24 * std::max(1.0, m * m) * static_cast<double>(n); };
  if (flat(sxx, mx) || flat(syy, my)) {
    if (degenerate) *degenerate = true;
    return 0.0;
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double BandCorrelation::mean() const {
  if (cc.empty()) return 0.0;
  double s = 0.0;
  for (double v : cc) s += v;
  return s / static_cast<double>(cc.size());
}

BandCorrelation band_correlation(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape() || pred.ndim() != 2) {
    throw ShapeError("band_correlation expects two equal [B x T] arrays, got " + shape_string(pred.shape()) +
                     " and " + shape_string(target.shape()));
  }
  const std::size_t b = pred.dim(0), t = pred.dim(1);
  BandCorrelation out;
  for (std::size_t i = 0; i < b; ++i) {
    bool flag = false;
    out.cc.push_back(pearson(pred.data().subspan(i * t, t), target.data().subspan(i * t, t), &flag));
    out.degenerate.push_back(flag);
  }
  return out;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j;
  if (fold == "mean") {
    j["fold"] = "mean";
  } else {
    j["fold"] = std::stoi(fold);
  }
  j["mse"] = mse;
  j["cc_per_band"] = cc_per_band;
  j["cc_mean"] = cc_mean;
  std::vector<std::size_t> flagged;
  for (std::size_t i = 0; i < cc_degenerate.size(); ++i) {
    if (cc_degenerate[i]) flagged.push_back(i);
  }
  j["cc_constant_bands"] = flagged;
  j["per_word"] = nlohmann::json::array();
  for (const auto& w : per_word) j["per_word"].push_back({{"word_id", w.word_id}, {"rep", w.repetition}, {"cc", w.cc}});
  j["train_history"] = nlohmann::json::array();
  for (const auto& h : train_history) {
    j["train_history"].push_back({{"epoch", h.epoch}, {"train_loss", h.train_loss}, {"val_loss", h.val_loss}});
  }
  return j;
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
  EvalReport r;
  try {
    const auto& f = j.at("fold");
    r.fold = f.is_string() ? f.get<std::string>() : std::to_string(f.get<int>());
    r.mse = j.at("mse").get<double>();
    r.cc_per_band = j.at("cc_per_band").get<std::vector<double>>();
    r.cc_mean = j.at("cc_mean").get<double>();
    r.cc_degenerate.assign(r.cc_per_band.size(), false);
    if (j.contains("cc_constant_bands")) {
      for (auto i : j["cc_constant_bands"].get<std::vector<std::size_t>>()) r.cc_degenerate.at(i) = true;
    }
    for (const auto& w : j.value("per_word", nlohmann::json::array())) {
      r.per_word.push_back({w.at("word_id").get<std::size_t>(), w.at("rep").get<std::size_t>(), w.at("cc").get<double>()});
    }
    for (const auto& h : j.value("train_history", nlohmann::json::array())) {
      r.train_history.push_back(
          {h.at("epoch").get<std::size_t>(), h.at("train_loss").get<double>(), h.at("val_loss").get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed report: ") + e.what());
  }
  return r;
}

EvalReport mean_report(std::span<const EvalReport> reports) {
  if (reports.empty()) throw ConfigError("mean_report needs at least one report");
  EvalReport m;
  m.fold = "mean";
  const std::size_t bands = reports.front().cc_per_band.size();
  m.cc_per_band.assign(bands, 0.0);
  m.cc_degenerate.assign(bands, false);
  const double n = static_cast<double>(reports.size());
  for (const auto& r : reports) {
    if (r.cc_per_band.size() != bands) throw ShapeError("mean_report: band counts differ between folds");
    m.mse += r.mse / n;
    m.cc_mean += r.cc_mean / n;
    for (std::size_t i = 0; i < bands; ++i) {
      m.cc_per_band[i] += r.cc_per_band[i] / n;
      if (i < r.cc_degenerate.size() && r.cc_degenerate[i]) m.cc_degenerate[i] = true;
    }
  }
  return m;
}

}  // namespace c2s
