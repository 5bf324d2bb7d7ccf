#include "e2e/constellation/constellation.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "e2e/error.hpp"

namespace e2e::constellation {

namespace {

unsigned gray_to_binary(unsigned g) {
  unsigned b = g;
  for (unsigned shift = 1; shift < 32; shift <<= 1) b ^= b >> shift;
  return b;
}

}  // namespace

Constellation::Constellation(int max_order, std::vector<cd> points) : max_order_(max_order), points_(std::move(points)) {
  if (max_order < 1 || max_order > 12) throw ConfigError("constellation order must be in [1, 12]");
  if (points_.size() != (std::size_t{1} << max_order)) {
    throw ShapeError("constellation needs 2^" + std::to_string(max_order) + " points, got " +
                     std::to_string(points_.size()));
  }
}

Constellation Constellation::qam(int max_order) {
  if (max_order < 1 || max_order > 12) throw ConfigError("unsupported QAM order " + std::to_string(max_order));
  const int bits_i = (max_order + 1) / 2;
  const int bits_q = max_order / 2;
  const std::size_t n = std::size_t{1} << max_order;
  std::vector<cd> pts(n);
  for (std::size_t idx = 0; idx < n; ++idx) {
    unsigned gi = 0, gq = 0;
    for (int m = 0; m < max_order; ++m) {
      const unsigned bit = (idx >> (max_order - 1 - m)) & 1U;
      if (m % 2 == 0)
        gi = (gi << 1) | bit;
      else
        gq = (gq << 1) | bit;
    }
    const double li = 2.0 * gray_to_binary(gi) - ((1U << bits_i) - 1.0);
    const double lq = bits_q > 0 ? 2.0 * gray_to_binary(gq) - ((1U << bits_q) - 1.0) : 0.0;
    pts[idx] = cd(li, lq);
  }
  double pow = 0.0;
  for (const cd& p : pts) pow += std::norm(p);
  const double s = std::sqrt(pow / static_cast<double>(n));
  for (cd& p : pts) p /= s;
  return Constellation(max_order, std::move(pts));
}

std::vector<cd> Constellation::normalized() const { return normalize(points_); }

ad::Tensor Constellation::to_tensor() const {
  const std::size_t n = points_.size();
  ad::Tensor t({2, n});
  for (std::size_t i = 0; i < n; ++i) {
    t[i] = points_[i].real();
    t[n + i] = points_[i].imag();
  }
  return t;
}

Constellation Constellation::from_tensor(int max_order, const ad::Tensor& t) {
  if (t.rank() != 2 || t.dim(0) != 2) throw ShapeError("constellation tensor must be [2 x P]");
  const std::size_t n = t.dim(1);
  std::vector<cd> pts(n);
  for (std::size_t i = 0; i < n; ++i) pts[i] = cd(t[i], t[n + i]);
  return Constellation(max_order, std::move(pts));
}

std::vector<cd> normalize(std::span<const cd> points) {
  if (points.empty()) throw DomainError("normalize: empty constellation");
  const double n = static_cast<double>(points.size());
  cd mean{};
  for (const cd& p : points) mean += p;
  mean /= n;
  double var = 0.0;
  for (const cd& p : points) var += std::norm(p - mean);
  var /= n;
  if (!(var > 1e-300)) throw DomainError("normalize: all constellation points are identical");
  const double s = std::sqrt(var);
  std::vector<cd> out(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) out[i] = (points[i] - mean) / s;
  return out;
}

std::size_t padded_index(unsigned group, int order, int max_order) {
  return static_cast<std::size_t>(group) << (max_order - order);
}

SubsetView subset(std::span<const cd> normalized, int max_order, int order) {
  if (order < 1 || order > max_order) {
    throw ConfigError("modulation order " + std::to_string(order) + " outside [1, " + std::to_string(max_order) + "]");
  }
  if (normalized.size() != (std::size_t{1} << max_order)) throw ShapeError("subset: table size mismatch");
  SubsetView v;
  v.order = order;
  v.max_order = max_order;
  const std::size_t count = std::size_t{1} << order;
  double pow = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t idx = padded_index(static_cast<unsigned>(i), order, max_order);
    v.indices.push_back(idx);
    v.points.push_back(normalized[idx]);
    pow += std::norm(normalized[idx]);
  }
  v.power = pow / static_cast<double>(count);
  return v;
}

void write_table(std::ostream& os, const SubsetView& view) {
  os << "# order " << view.order << " max_order " << view.max_order << "\n";
  os << "index label re im\n";
  os << std::setprecision(17);
  for (std::size_t i = 0; i < view.points.size(); ++i) {
    std::string label;
    for (int m = 0; m < view.order; ++m) label += static_cast<char>('0' + view.bit(i, m));
    os << view.indices[i] << ' ' << label << ' ' << view.points[i].real() << ' ' << view.points[i].imag() << '\n';
  }
}

SubsetView read_table(std::istream& is) {
  SubsetView v;
  std::string line;
  if (!std::getline(is, line)) throw FormatError("constellation table: empty input");
  {
    std::istringstream hs(line);
    std::string hash, k1, k2;
    if (!(hs >> hash >> k1 >> v.order >> k2 >> v.max_order) || hash != "#" || k1 != "order" || k2 != "max_order") {
      throw FormatError("constellation table: bad header '" + line + "'");
    }
  }
  if (!std::getline(is, line) || line != "index label re im") throw FormatError("constellation table: missing columns");
  double pow = 0.0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::size_t idx = 0;
    std::string label;
    double re = 0.0, im = 0.0;
    if (!(ls >> idx >> label >> re >> im)) throw FormatError("constellation table: bad row '" + line + "'");
    v.indices.push_back(idx);
    v.points.emplace_back(re, im);
    pow += re * re + im * im;
  }
  if (v.points.size() != (std::size_t{1} << v.order)) throw FormatError("constellation table: wrong row count");
  v.power = pow / static_cast<double>(v.points.size());
  return v;
}

}  // namespace e2e::constellation
