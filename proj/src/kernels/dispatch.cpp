#include <atomic>
#include <cstdlib>
#include <string>

#include "relzero/kernels.hpp"

namespace relzero::kernels {
namespace {

const KernelSet* by_name(std::string_view name) {
  if (name == "scalar") return &scalar();
  if (name == "avx2") return avx2();
  if (name == "neon") return neon();
  return nullptr;
}

const KernelSet* detect() {
  if (const char* env = std::getenv("RELZERO_KERNEL")) {
    if (const KernelSet* forced = by_name(env)) return forced;
  }
  if (const KernelSet* k = avx2()) return k;
  if (const KernelSet* k = neon()) return k;
  return &scalar();
}

std::atomic<const KernelSet*> g_active{nullptr};

}  // namespace

const KernelSet& active() {
  const KernelSet* k = g_active.load(std::memory_order_acquire);
  if (k == nullptr) {
    k = detect();
    g_active.store(k, std::memory_order_release);
  }
  return *k;
}

bool select(std::string_view name) {
  const KernelSet* k = by_name(name);
  if (k == nullptr) return false;
  g_active.store(k, std::memory_order_release);
  return true;
}

}  // namespace relzero::kernels
