#include "gwheat/offspring.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "gwheat/error.hpp"

namespace gwheat {

namespace {

constexpr double kSumTolerance = 1e-12;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

double parse_real(std::string_view text, std::string_view context) {
  text = trim(text);
  // std::from_chars for double is available in libstdc++ 11.
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty())
    fail(ErrorCode::invalid_input,
         "malformed number '" + std::string(text) + "' in " + std::string(context));
  return value;
}

std::uint32_t parse_index(std::string_view text, std::string_view context) {
  text = trim(text);
  std::uint64_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty() ||
      value > 1'000'000)
    fail(ErrorCode::invalid_input,
         "malformed child count '" + std::string(text) + "' in " + std::string(context));
  return static_cast<std::uint32_t>(value);
}

}  // namespace

OffspringDistribution OffspringDistribution::from_pmf(
    std::vector<std::pair<std::uint32_t, double>> weights) {
  if (weights.empty()) fail(ErrorCode::invalid_input, "empty offspring pmf");
  std::sort(weights.begin(), weights.end());
  double total = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const auto [k, w] = weights[i];
    if (k == 0)
      fail(ErrorCode::invalid_input, "offspring pmf has a k=0 entry (p_0 must be 0)");
    if (i > 0 && weights[i - 1].first == k)
      fail(ErrorCode::invalid_input, "offspring pmf repeats k=" + std::to_string(k));
    if (!(w > 0.0) || !std::isfinite(w))
      fail(ErrorCode::invalid_input,
           "offspring weight for k=" + std::to_string(k) + " must be positive");
    total += w;
  }
  if (std::abs(total - 1.0) > kSumTolerance)
    fail(ErrorCode::invalid_input, "offspring weights sum to " + std::to_string(total) +
                                       ", expected 1 within 1e-12");
  for (auto& kw : weights) kw.second /= total;
  if (weights.size() == 1 && weights.front().first == 1)
    fail(ErrorCode::invalid_input, "offspring law p_1 = 1 is excluded");

  OffspringDistribution d;
  d.kind_ = Kind::explicit_pmf;
  d.pmf_ = std::move(weights);
  d.finalize();
  return d;
}

OffspringDistribution OffspringDistribution::shifted_geometric(double q) {
  if (!(q > 0.0 && q < 1.0))
    fail(ErrorCode::invalid_input, "geometric parameter must satisfy 0 < q < 1");
  OffspringDistribution d;
  d.kind_ = Kind::shifted_geometric;
  d.q_ = q;
  d.log_q_ = std::log(q);
  d.finalize();
  return d;
}

void OffspringDistribution::finalize() {
  mean_ = recomputed_mean();
  if (!(mean_ > 1.0) || !std::isfinite(mean_))
    fail(ErrorCode::invalid_input,
         "offspring mean m = " + std::to_string(mean_) + " must satisfy 1 < m < inf");
  cdf_.clear();
  double acc = 0.0;
  for (const auto& [k, p] : pmf_) {
    acc += p;
    cdf_.push_back(acc);
  }
  if (!cdf_.empty()) cdf_.back() = 1.0;
}

double OffspringDistribution::probability(std::uint32_t k) const noexcept {
  if (k == 0) return 0.0;
  if (kind_ == Kind::shifted_geometric) return (1.0 - q_) * std::pow(q_, k - 1.0);
  for (const auto& [kk, p] : pmf_)
    if (kk == k) return p;
  return 0.0;
}

double OffspringDistribution::recomputed_mean() const noexcept {
  if (kind_ == Kind::shifted_geometric) return 1.0 / (1.0 - q_);
  double m = 0.0;
  for (const auto& [k, p] : pmf_) m += k * p;
  return m;
}

std::optional<std::uint32_t> OffspringDistribution::degenerate() const noexcept {
  if (kind_ == Kind::explicit_pmf && pmf_.size() == 1) return pmf_.front().first;
  return std::nullopt;
}

std::uint32_t OffspringDistribution::sample(double u) const noexcept {
  if (kind_ == Kind::shifted_geometric) {
    // P(K > k) = q^k  <=>  K = 1 + floor(log(1-u) / log q).
    const double k = std::floor(std::log1p(-u) / log_q_);
    if (!(k < 4.0e9)) return 4'000'000'000u;
    return 1u + static_cast<std::uint32_t>(k);
  }
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  const auto idx = static_cast<std::size_t>(it - cdf_.begin());
  return pmf_[std::min(idx, pmf_.size() - 1)].first;
}

std::string OffspringDistribution::to_string() const {
  std::ostringstream os;
  os.precision(17);
  if (kind_ == Kind::shifted_geometric) {
    os << "geom:" << q_;
    return os.str();
  }
  os << "pmf:";
  for (std::size_t i = 0; i < pmf_.size(); ++i) {
    if (i) os << ',';
    os << pmf_[i].first << '=' << pmf_[i].second;
  }
  return os.str();
}

OffspringDistribution parse_offspring(std::string_view spec) {
  spec = trim(spec);
  if (spec.starts_with("geom:")) {
    return OffspringDistribution::shifted_geometric(parse_real(spec.substr(5), spec));
  }
  if (!spec.starts_with("pmf:"))
    fail(ErrorCode::invalid_input,
         "offspring spec must start with 'pmf:' or 'geom:', got '" + std::string(spec) + "'");
  std::string_view body = spec.substr(4);
  std::vector<std::pair<std::uint32_t, double>> weights;
  while (!body.empty()) {
    const auto comma = body.find(',');
    const std::string_view item = body.substr(0, comma);
    const auto eq = item.find('=');
    if (eq == std::string_view::npos)
      fail(ErrorCode::invalid_input, "malformed pmf entry '" + std::string(item) + "'");
    weights.emplace_back(parse_index(item.substr(0, eq), spec),
                         parse_real(item.substr(eq + 1), spec));
    if (comma == std::string_view::npos) break;
    body.remove_prefix(comma + 1);
    if (body.empty()) fail(ErrorCode::invalid_input, "trailing comma in offspring spec");
  }
  return OffspringDistribution::from_pmf(std::move(weights));
}

}  // namespace gwheat
