#include "c2s/fft.hpp"

#include <fftw3.h>

#include <cstring>
#include <limits>
#include <map>
#include <memory>
#include <mutex>

#include "c2s/errors.hpp"

namespace c2s::fft {

namespace {

// FFTW's planner is not thread-safe; execution is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

class Plan {
 public:
  explicit Plan(fftw_plan p) : plan_(p) {
    if (!plan_) throw Error("FFTW failed to create a plan");
  }
  ~Plan() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan_);
  }
  Plan(const Plan&) = delete;
  Plan& operator=(const Plan&) = delete;
  void execute() const { fftw_execute(plan_); }

 private:
  fftw_plan plan_;
};

template <typename T>
struct FftwBuffer {
  explicit FftwBuffer(std::size_t n) : ptr(static_cast<T*>(fftw_malloc(sizeof(T) * (n ? n : 1)))) {
    if (!ptr) throw std::bad_alloc();
  }
  ~FftwBuffer() { fftw_free(ptr); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  T* ptr;
};

int as_int(std::size_t n) {
  if (n == 0 || n > static_cast<std::size_t>(std::numeric_limits<int>::max())) {
    throw ConfigError("FFT size out of range: " + std::to_string(n));
  }
  return static_cast<int>(n);
}

enum class Kind { forward, backward, r2c, c2r };

// A plan with its own aligned buffers, executed in place on them.
struct CachedPlan {
  CachedPlan(Kind kind, std::size_t n) : in(bytes_in(kind, n)), out(bytes_out(kind, n)) {
    std::lock_guard lock(planner_mutex());
    const int len = as_int(n);
    auto* ci = reinterpret_cast<fftw_complex*>(in.ptr);
    auto* co = reinterpret_cast<fftw_complex*>(out.ptr);
    auto* ri = reinterpret_cast<double*>(in.ptr);
    auto* ro = reinterpret_cast<double*>(out.ptr);
    fftw_plan raw = nullptr;
    switch (kind) {
      case Kind::forward: raw = fftw_plan_dft_1d(len, ci, co, FFTW_FORWARD, FFTW_ESTIMATE); break;
      case Kind::backward: raw = fftw_plan_dft_1d(len, ci, co, FFTW_BACKWARD, FFTW_ESTIMATE); break;
      case Kind::r2c: raw = fftw_plan_dft_r2c_1d(len, ri, co, FFTW_ESTIMATE); break;
      case Kind::c2r: raw = fftw_plan_dft_c2r_1d(len, ci, ro, FFTW_ESTIMATE); break;
    }
    plan = std::make_unique<Plan>(raw);
  }

  static std::size_t bytes_in(Kind kind, std::size_t n) {
    return kind == Kind::r2c ? n * sizeof(double) : (kind == Kind::c2r ? n / 2 + 1 : n) * sizeof(fftw_complex);
  }
  static std::size_t bytes_out(Kind kind, std::size_t n) {
    return kind == Kind::c2r ? n * sizeof(double) : (kind == Kind::r2c ? n / 2 + 1 : n) * sizeof(fftw_complex);
  }

  FftwBuffer<unsigned char> in;
  FftwBuffer<unsigned char> out;
  std::unique_ptr<Plan> plan;
};

// Plans are reused per thread; sizes in this library come from a small set.
CachedPlan& cached_plan(Kind kind, std::size_t n) {
  thread_local std::map<std::pair<Kind, std::size_t>, std::unique_ptr<CachedPlan>> cache;
  auto& slot = cache[{kind, n}];
  if (!slot) slot = std::make_unique<CachedPlan>(kind, n);
  return *slot;
}

std::vector<Complex> complex_dft(std::span<const Complex> x, Kind kind) {
  const std::size_t n = x.size();
  auto& p = cached_plan(kind, n);
  std::memcpy(p.in.ptr, x.data(), n * sizeof(fftw_complex));
  p.plan->execute();
  std::vector<Complex> out(n);
  std::memcpy(static_cast<void*>(out.data()), p.out.ptr, n * sizeof(fftw_complex));
  return out;
}

}  // namespace

std::vector<Complex> rfft(std::span<const double> x, std::size_t n) {
  auto& p = cached_plan(Kind::r2c, n);
  auto* in = reinterpret_cast<double*>(p.in.ptr);
  const std::size_t copy = std::min(n, x.size());
  std::memcpy(in, x.data(), copy * sizeof(double));
  std::fill(in + copy, in + n, 0.0);
  p.plan->execute();
  std::vector<Complex> bins(n / 2 + 1);
  std::memcpy(static_cast<void*>(bins.data()), p.out.ptr, bins.size() * sizeof(fftw_complex));
  return bins;
}

std::vector<double> irfft(std::span<const Complex> bins, std::size_t n) {
  if (bins.size() != n / 2 + 1) {
    throw ShapeError("irfft: expected " + std::to_string(n / 2 + 1) + " bins, got " + std::to_string(bins.size()));
  }
  auto& p = cached_plan(Kind::c2r, n);
  // c2r destroys its input; the cached buffer is rewritten on every call.
  std::memcpy(p.in.ptr, bins.data(), bins.size() * sizeof(fftw_complex));
  p.plan->execute();
  const auto* out = reinterpret_cast<const double*>(p.out.ptr);
  std::vector<double> result(out, out + n);
  const double scale = 1.0 / static_cast<double>(n);
  for (auto& v : result) v *= scale;
  return result;
}

std::vector<Complex> fft(std::span<const Complex> x) { return complex_dft(x, Kind::forward); }

std::vector<Complex> ifft(std::span<const Complex> x) {
  auto out = complex_dft(x, Kind::backward);
  const double scale = 1.0 / static_cast<double>(x.size());
  for (auto& v : out) v *= scale;
  return out;
}

std::size_t good_size(std::size_t min_size, std::size_t multiple) {
  if (multiple == 0) throw ConfigError("good_size: multiple must be positive");
  std::size_t m = (min_size + multiple - 1) / multiple;
  if (m == 0) m = 1;
  for (;; ++m) {
    std::size_t r = m;
    for (std::size_t p : {2, 3, 5}) {
      while (r % p == 0) r /= p;
    }
    if (r == 1) return m * multiple;
  }
}

}  // namespace c2s::fft
