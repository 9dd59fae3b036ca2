#pragma once

#include <cstdint>
#include <string>

#include "isl/corpus.hpp"
#include "isl/splits.hpp"

namespace isl {

struct Ratio {
  std::uint64_t num = 0;
  std::uint64_t den = 1;

  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

/// round-half-up(num * n / den) in exact integer arithmetic.
std::size_t round_ratio(Ratio r, std::size_t n);

/// Every original symbol entry ends up `ratio` times in the split. Copies
/// are appended with provenance duplicate#1..#(ratio-1).
Split upsample_fixed(const Corpus& corpus, const Split& split, const std::string& symbol,
                     std::size_t ratio);

/// Brings the symbol entries to round(base_ratio * N), with N the nominal
/// (pre-upsampling) split size, cycling copies evenly over the originals.
Split upsample_adaptive(const Corpus& corpus, const Split& split, const std::string& symbol,
                        Ratio base_ratio);

}  // namespace isl
