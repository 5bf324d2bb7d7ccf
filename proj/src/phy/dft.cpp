#include "e2e/phy/dft.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <utility>
#include <vector>

#include "e2e/error.hpp"

namespace e2e::phy {

namespace {

class PlanCache {
 public:
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  fftw_plan get(int n, int sign) {
    std::lock_guard lock(mu_);
    auto it = plans_.find({n, sign});
    if (it != plans_.end()) return it->second;
    std::vector<cd> a(n), b(n);
    fftw_plan p = fftw_plan_dft_1d(n, reinterpret_cast<fftw_complex*>(a.data()),
                                   reinterpret_cast<fftw_complex*>(b.data()), sign,
                                   FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (p == nullptr) throw Error("fftw: failed to plan a length-" + std::to_string(n) + " transform");
    plans_.emplace(std::make_pair(n, sign), p);
    return p;
  }

 private:
  std::mutex mu_;
  std::map<std::pair<int, int>, fftw_plan> plans_;
};

PlanCache& cache() {
  static PlanCache c;
  return c;
}

void run(std::span<const cd> in, std::span<cd> out, int sign) {
  if (in.size() != out.size()) throw ShapeError("dft: input and output lengths differ");
  const int n = static_cast<int>(in.size());
  if (n == 0) return;
  fftw_plan p = cache().get(n, sign);
  // the cached plan is out-of-place
  thread_local std::vector<cd> src;
  src.assign(in.begin(), in.end());
  fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(src.data()), reinterpret_cast<fftw_complex*>(out.data()));
  const double s = 1.0 / std::sqrt(static_cast<double>(n));
  for (cd& v : out) v *= s;
}

}  // namespace

void dft(std::span<const cd> in, std::span<cd> out) { run(in, out, FFTW_FORWARD); }
void idft(std::span<const cd> in, std::span<cd> out) { run(in, out, FFTW_BACKWARD); }

}  // namespace e2e::phy
