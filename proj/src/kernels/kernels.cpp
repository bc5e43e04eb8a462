#include "txl/kernels.hpp"

#include <cstdlib>

namespace txl::kernels {

#if defined(__x86_64__) || defined(__i386__)
const KernelTable* avx2_table_ptr();
#endif
#if defined(__ARM_NEON) && defined(__aarch64__)
const KernelTable* neon_table_ptr();
#endif

namespace {

const KernelTable* lookup(const std::string& name) {
  if (name == "scalar") return &scalar_table();
#if defined(__x86_64__) || defined(__i386__)
  if (name == "avx2" && __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) {
    return avx2_table_ptr();
  }
#endif
#if defined(__ARM_NEON) && defined(__aarch64__)
  if (name == "neon") return neon_table_ptr();
#endif
  return nullptr;
}

const KernelTable* pick_default() {
  if (const char* env = std::getenv("TXL_KERNELS")) {
    if (const KernelTable* t = lookup(env)) return t;
  }
#if defined(__x86_64__) || defined(__i386__)
  if (const KernelTable* t = lookup("avx2")) return t;
#endif
#if defined(__ARM_NEON) && defined(__aarch64__)
  if (const KernelTable* t = lookup("neon")) return t;
#endif
  return &scalar_table();
}

const KernelTable*& active_slot() {
  static const KernelTable* slot = pick_default();
  return slot;
}

}  // namespace

std::vector<std::string> available() {
  std::vector<std::string> names{"scalar"};
  for (const char* name : {"avx2", "neon"}) {
    if (lookup(name) != nullptr) names.emplace_back(name);
  }
  return names;
}

const KernelTable* find(const std::string& name) { return lookup(name); }

const KernelTable& active() { return *active_slot(); }

bool select(const std::string& name) {
  const KernelTable* t = lookup(name);
  if (t == nullptr) return false;
  active_slot() = t;
  return true;
}

}  // namespace txl::kernels
