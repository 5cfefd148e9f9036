#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string_view>

#include "sagelink/kernels.hpp"

namespace sagelink::kernels {

namespace detail {
const KernelTable* avx2_table_build();
}

namespace {

bool cpu_has_avx2() {
#if (defined(__x86_64__) || defined(_M_X64)) && defined(__GNUC__)
  return __builtin_cpu_supports("avx2") != 0;
#else
  return false;
#endif
}

std::atomic<const KernelTable*> g_active{nullptr};

const KernelTable* pick_default() {
  const char* env = std::getenv("SAGELINK_KERNELS");
  const std::string_view choice = env ? env : "";
  if (choice == "scalar") return &scalar_table();
  if (choice == "avx2") {
    const KernelTable* t = avx2_table();
    if (!t)
      throw std::runtime_error(
          "SAGELINK_KERNELS=avx2 requested but AVX2 is unavailable");
    return t;
  }
  const KernelTable* t = avx2_table();
  return t ? t : &scalar_table();
}

}  // namespace

const KernelTable* avx2_table() {
  return cpu_has_avx2() ? detail::avx2_table_build() : nullptr;
}

const KernelTable& active() {
  const KernelTable* t = g_active.load(std::memory_order_acquire);
  if (!t) {
    t = pick_default();
    g_active.store(t, std::memory_order_release);
  }
  return *t;
}

Backend active_backend() {
  return &active() == &scalar_table() ? Backend::scalar : Backend::avx2;
}

void set_backend(Backend backend) {
  if (backend == Backend::scalar) {
    g_active.store(&scalar_table(), std::memory_order_release);
    return;
  }
  const KernelTable* t = avx2_table();
  if (!t)
    throw std::invalid_argument("AVX2 backend unavailable on this machine");
  g_active.store(t, std::memory_order_release);
}

}  // namespace sagelink::kernels
