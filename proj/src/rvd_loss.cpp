#include "revol/rvd_loss.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "revol/errors.hpp"

namespace revol {

bool PredictionRecord::has_actual() const { return std::isfinite(actual_ratio); }

double denormalize(double eps_hat, const SampleStats& stats, double last_close) {
  if (!(stats.sigma_hat > 0.0)) throw ArgumentError("denormalize needs a positive sigma_hat");
  return last_close * std::exp(stats.m_hat + stats.sigma_hat * eps_hat);
}

nn::Var denormalize_ratio(nn::Var m_hat, nn::Var sigma_hat, nn::Var eps_hat) {
  return nn::exp(nn::add(m_hat, nn::mul(sigma_hat, eps_hat)));
}

double composite_loss(std::span<const LossTerm> terms, double beta) {
  if (terms.empty()) throw ArgumentError("loss of an empty batch");
  if (!(beta >= 0.0)) throw ArgumentError("beta must be >= 0");
  double total = 0.0;
  for (const auto& t : terms) {
    const double err = t.predicted_ratio - t.actual_ratio;
    total += err * err + beta * t.guidance_gap * t.guidance_gap;
  }
  return total / static_cast<double>(terms.size());
}

nn::Var composite_loss(nn::Var predicted_ratio, nn::Var actual_ratio, nn::Var arithmetic_mean, nn::Var m_hat,
                       double beta) {
  if (predicted_ratio.rows() == 0) throw ArgumentError("loss of an empty batch");
  if (!(beta >= 0.0)) throw ArgumentError("beta must be >= 0");
  nn::Var mse = nn::mean(nn::square(nn::sub(predicted_ratio, actual_ratio)));
  if (beta == 0.0) return mse;
  nn::Var guidance = nn::mean(nn::square(nn::sub(arithmetic_mean, m_hat)));
  return nn::add(mse, nn::scale(guidance, beta));
}

void write_predictions_csv(std::ostream& out, std::span<const PredictionRecord> records) {
  out << "date,symbol,pred_return,actual_return\n";
  char buf[192];
  for (const auto& r : records) {
    if (r.has_actual()) {
      std::snprintf(buf, sizeof buf, "%s,%s,%.17g,%.17g\n", r.date.to_string().c_str(), r.symbol.c_str(),
                    r.predicted_ratio, r.actual_ratio);
    } else {
      std::snprintf(buf, sizeof buf, "%s,%s,%.17g,\n", r.date.to_string().c_str(), r.symbol.c_str(),
                    r.predicted_ratio);
    }
    out << buf;
  }
}

std::vector<PredictionRecord> read_predictions_csv(std::istream& in, const std::string& source) {
  std::vector<PredictionRecord> out;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header) {
      if (line != "date,symbol,pred_return,actual_return") {
        throw ParseError(source, line_no, "expected header 'date,symbol,pred_return,actual_return'");
      }
      header = true;
      continue;
    }
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (line.back() == ',') f.emplace_back();
    if (f.size() != 4) throw ParseError(source, line_no, "expected 4 fields");
    PredictionRecord r;
    auto d = Date::parse(f[0]);
    if (!d) throw ParseError(source, line_no, "bad date '" + f[0] + "'");
    r.date = *d;
    r.symbol = f[1];
    try {
      std::size_t used = 0;
      r.predicted_ratio = std::stod(f[2], &used);
      if (used != f[2].size()) throw std::invalid_argument("trailing");
      if (!(r.predicted_ratio > 0.0)) throw ParseError(source, line_no, "predicted return must be positive");
      if (f[3].empty()) {
        r.actual_ratio = std::numeric_limits<double>::quiet_NaN();
      } else {
        r.actual_ratio = std::stod(f[3], &used);
        if (used != f[3].size()) throw std::invalid_argument("trailing");
      }
    } catch (const std::logic_error&) {
      throw ParseError(source, line_no, "bad number");
    }
    out.push_back(std::move(r));
  }
  if (!header) throw ParseError(source, line_no, "missing header");
  return out;
}

}  // namespace revol
