// Copyright 2026 The growprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "growprune/numeric.hpp"

#if defined(__SSE__) || defined(_M_X64)
#include <xmmintrin.h>
#define GROWPRUNE_HAVE_MXCSR 1
#endif

namespace growprune {

namespace {
constexpr unsigned kFlushToZero = 0x8000;
constexpr unsigned kDenormalsAreZero = 0x0040;
}  // namespace

DenormalGuard::DenormalGuard(bool enable) {
#ifdef GROWPRUNE_HAVE_MXCSR
    if (enable) {
        saved_ = _mm_getcsr();
        _mm_setcsr(saved_ | kFlushToZero | kDenormalsAreZero);
        active_ = true;
    }
#else
    (void)enable;
#endif
}

DenormalGuard::~DenormalGuard() {
#ifdef GROWPRUNE_HAVE_MXCSR
    if (active_) _mm_setcsr(saved_);
#endif
}

}  // namespace growprune
