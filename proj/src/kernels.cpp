// Runtime backend selection. Resolution order: explicit select_backend(),
// FPLOC_KERNELS env var, CPU probe.

#include "fploc/kernels.hpp"

#include <cstdlib>
#include <string>

#include "fploc/exceptions.hpp"

namespace fploc::kern {

const Ops& scalar_ops();
#if FPLOC_HAVE_AVX2_BUILD
const Ops& avx2_ops();
#endif

namespace {

bool cpu_has_avx2_fma() {
#if FPLOC_HAVE_AVX2_BUILD
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

struct Active {
  const Ops* ops;
  Backend backend;
};

Active resolve_initial() {
  const char* env = std::getenv("FPLOC_KERNELS");
  if (env != nullptr && env[0] != '\0') {
    const std::string name(env);
    if (name == "scalar") return {&scalar_ops(), Backend::Scalar};
    if (name == "avx2") {
      if (!available(Backend::Avx2)) {
        throw ConfigError("FPLOC_KERNELS=avx2 but AVX2+FMA is not available "
                          "on this CPU/build");
      }
#if FPLOC_HAVE_AVX2_BUILD
      return {&avx2_ops(), Backend::Avx2};
#endif
    }
    throw ConfigError("unknown FPLOC_KERNELS value '" + name +
                      "' (expected 'scalar' or 'avx2')");
  }
  const Backend best = detect_best();
  return {&ops(best), best};
}

Active& state() {
  static Active a = resolve_initial();
  return a;
}

}  // namespace

Backend detect_best() {
  return cpu_has_avx2_fma() ? Backend::Avx2 : Backend::Scalar;
}

bool available(Backend b) {
  switch (b) {
    case Backend::Scalar: return true;
    case Backend::Avx2: return cpu_has_avx2_fma();
  }
  return false;
}

const Ops& ops(Backend b) {
  if (!available(b)) {
    throw ConfigError(std::string("kernel backend '") + backend_name(b) +
                      "' is not available on this CPU/build");
  }
#if FPLOC_HAVE_AVX2_BUILD
  if (b == Backend::Avx2) return avx2_ops();
#endif
  return scalar_ops();
}

const char* backend_name(Backend b) {
  switch (b) {
    case Backend::Scalar: return "scalar";
    case Backend::Avx2: return "avx2";
  }
  return "?";
}

const Ops& active() { return *state().ops; }

Backend active_backend() { return state().backend; }

void select_backend(Backend b) {
  state() = {&ops(b), b};
}

}  // namespace fploc::kern
