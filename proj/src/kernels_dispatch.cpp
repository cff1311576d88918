// Copyright (c) 2026 the gsps authors.
// SPDX-License-Identifier: Apache-2.0

#include <cstdlib>
#include <cstring>

#include "gsps/kernels.hpp"

namespace gsps::kernels {

const KernelTable& scalar_table();  // kernels_scalar.cpp
const KernelTable* avx2_table();    // kernels_avx2.cpp, null off-x86

namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
    return __builtin_cpu_supports("avx2") != 0;
#else
    return false;
#endif
}

Backend initial_backend() {
    // GSPS_KERNELS=scalar|avx2 overrides autodetection (used by the
    // equivalence tests and the --kernels CLI flag).
    if (const char* env = std::getenv("GSPS_KERNELS")) {
        if (std::strcmp(env, "scalar") == 0) return Backend::Scalar;
        if (std::strcmp(env, "avx2") == 0 && backend_supported(Backend::Avx2))
            return Backend::Avx2;
    }
    return backend_supported(Backend::Avx2) ? Backend::Avx2 : Backend::Scalar;
}

Backend& current() {
    static Backend b = initial_backend();
    return b;
}

}  // namespace

bool backend_supported(Backend b) {
    switch (b) {
        case Backend::Scalar: return true;
        case Backend::Avx2: return avx2_table() != nullptr && cpu_has_avx2();
    }
    return false;
}

const char* backend_name(Backend b) {
    switch (b) {
        case Backend::Scalar: return "scalar";
        case Backend::Avx2: return "avx2";
    }
    return "?";
}

bool set_backend(Backend b) {
    if (!backend_supported(b)) return false;
    current() = b;
    return true;
}

Backend active_backend() { return current(); }

const KernelTable& table() {
    if (current() == Backend::Avx2) return *avx2_table();
    return scalar_table();
}

const KernelTable* table_for(Backend b) {
    if (!backend_supported(b)) return nullptr;
    return b == Backend::Avx2 ? avx2_table() : &scalar_table();
}

}  // namespace gsps::kernels
