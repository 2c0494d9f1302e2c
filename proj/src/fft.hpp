#pragma once

#include "bolab/spectral.hpp"

namespace bolab::detail {

// Unnormalized DFT, sign = -1: out_k = sum_j in_j exp(-2 pi i jk/n).
CVec dft(const CVec& in, int sign);

}  // namespace bolab::detail
