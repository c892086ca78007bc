#pragma once

#include <cstddef>
#include <utility>

#include "wdce/tensor.hpp"

namespace wdce {

/// Matrix forms of the orthonormal Haar low/high-pass filters for an even
/// frame count T. Column j of `low` carries 1/sqrt(2) at rows 2j and 2j+1;
/// column j of `high` carries +1/sqrt(2) and -1/sqrt(2) there. With this
/// scaling L'L = H'H = I, L'H = 0 and LL' + HH' = I, so the inverse
/// transform is the transpose and Parseval holds exactly.
struct HaarFilterPair {
    std::size_t frames = 0;  // T
    TensorPtr low;           // T x T/2
    TensorPtr high;          // T x T/2
};

/// Rejects odd or zero T.
HaarFilterPair build_haar(std::size_t frames);

struct DwtBands {
    TensorPtr low;   // ... x T/2
    TensorPtr high;  // ... x T/2
};

/// Single-level Haar split along the last axis. x is typically N x VC x T.
DwtBands dwt(const TensorPtr& x, const HaarFilterPair& filters);

/// Exact inverse: low * L' + high * H'.
TensorPtr idwt(const TensorPtr& low, const TensorPtr& high, const HaarFilterPair& filters);

}  // namespace wdce
