#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "inttower/errors.hpp"
#include "inttower/features.hpp"

namespace inttower {

namespace {

std::vector<double> gaussian(Rng& rng, std::size_t n, double sd) {
  std::vector<double> v(n);
  for (double& x : v) x = sd * rng.normal();
  return v;
}

// Sign pattern of the first `bits` coordinates.
std::size_t sign_code(const double* v, std::size_t bits) {
  std::size_t code = 0;
  for (std::size_t t = 0; t < bits; ++t) code = (code << 1) | (v[t] > 0.0 ? 1u : 0u);
  return code;
}

}  // namespace

void generate_synthetic(const FeatureSchema& schema, const SyntheticConfig& cfg, const std::filesystem::path& out) {
  schema.validate();
  if (cfg.num_users == 0 || cfg.num_items == 0 || cfg.latent_rank == 0 || cfg.interests == 0) {
    throw ConfigError("synthetic sizes must be positive");
  }
  if (!(cfg.positive_rate > 0.0 && cfg.positive_rate < 1.0)) throw ConfigError("positive_rate must be in (0, 1)");
  Rng rng(cfg.seed);
  const std::size_t r = cfg.latent_rank, k = cfg.interests;
  const double sd = 1.0 / std::sqrt(static_cast<double>(r));

  const auto user_latent = gaussian(rng, cfg.num_users * k * r, 1.0);
  const auto item_latent = gaussian(rng, cfg.num_items * r, sd);
  const auto user_bias = gaussian(rng, cfg.num_users, 0.3);
  const auto item_bias = gaussian(rng, cfg.num_items, 0.3);

  const std::size_t m = schema.user_fields.size(), n = schema.item_fields.size();
  std::vector<std::vector<std::size_t>> user_attr(cfg.num_users, std::vector<std::size_t>(m));
  std::vector<std::vector<std::size_t>> item_attr(cfg.num_items, std::vector<std::size_t>(n));
  for (std::size_t u = 0; u < cfg.num_users; ++u) {
    user_attr[u][0] = u;
    if (m > 1) user_attr[u][1] = sign_code(&user_latent[u * k * r], std::min<std::size_t>(2, r));
    for (std::size_t f = 2; f < m; ++f) user_attr[u][f] = rng.index(10);
  }
  for (std::size_t i = 0; i < cfg.num_items; ++i) {
    item_attr[i][0] = i;
    if (n > 1) item_attr[i][1] = sign_code(&item_latent[i * r], std::min<std::size_t>(3, r));
    for (std::size_t f = 2; f < n; ++f) item_attr[i][f] = rng.index(20);
  }

  std::vector<std::size_t> users(cfg.num_rows), items(cfg.num_rows);
  std::vector<double> scores(cfg.num_rows);
  for (std::size_t row = 0; row < cfg.num_rows; ++row) {
    const std::size_t u = rng.index(cfg.num_users);
    const std::size_t i = rng.index(cfg.num_items);
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t h = 0; h < k; ++h) {
      double s = 0.0;
      for (std::size_t t = 0; t < r; ++t) s += user_latent[(u * k + h) * r + t] * item_latent[i * r + t];
      best = std::max(best, s);
    }
    users[row] = u;
    items[row] = i;
    scores[row] = best + user_bias[u] + item_bias[i] + cfg.noise * rng.normal();
  }
  double threshold = 0.0;
  if (!scores.empty()) {
    auto sorted = scores;
    const auto pos = static_cast<std::size_t>((1.0 - cfg.positive_rate) * static_cast<double>(sorted.size() - 1));
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(pos), sorted.end());
    threshold = sorted[pos];
  }

  std::ofstream os(out, std::ios::binary);
  if (!os) throw DataError("cannot write " + out.string());
  for (const auto& f : schema.user_fields) os << f << ',';
  for (const auto& f : schema.item_fields) os << f << ',';
  os << schema.label_field << '\n';
  for (std::size_t row = 0; row < cfg.num_rows; ++row) {
    for (std::size_t v : user_attr[users[row]]) os << v << ',';
    for (std::size_t v : item_attr[items[row]]) os << v << ',';
    os << (scores[row] > threshold ? '1' : '0') << '\n';
  }
  if (!os) throw DataError("failed writing " + out.string());
}

}  // namespace inttower
