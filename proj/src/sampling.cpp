#include "isl/sampling.hpp"

#include <vector>

#include "isl/error.hpp"

namespace isl {

std::size_t round_ratio(Ratio r, std::size_t n) {
  if (r.den == 0) throw Error("ratio with zero denominator");
  const auto scaled = static_cast<__uint128_t>(r.num) * n;
  return static_cast<std::size_t>((2 * scaled + r.den) / (2 * static_cast<__uint128_t>(r.den)));
}

namespace {

std::vector<std::size_t> original_positions(const Corpus& corpus, const Split& split,
                                            const std::string& symbol) {
  std::vector<std::size_t> pos;
  for (std::size_t p = 0; p < split.entries.size(); ++p) {
    const SplitEntry& e = split.entries[p];
    if (e.origin != Origin::duplicate && corpus[e.index].output.contains(symbol)) pos.push_back(p);
  }
  return pos;
}

}  // namespace

Split upsample_fixed(const Corpus& corpus, const Split& split, const std::string& symbol,
                     std::size_t ratio) {
  if (ratio < 1) throw Error("upsample_fixed: ratio must be >= 1");
  const std::vector<std::size_t> originals = original_positions(corpus, split, symbol);
  if (originals.empty()) throw Error("upsample_fixed: split has no examples of '" + symbol + "'");
  Split out = split;
  for (std::size_t p : originals) {
    for (std::size_t c = 1; c < ratio; ++c) {
      out.entries.push_back({split.entries[p].index, Origin::duplicate, c});
    }
  }
  return out;
}

Split upsample_adaptive(const Corpus& corpus, const Split& split, const std::string& symbol,
                        Ratio base_ratio) {
  const std::vector<std::size_t> originals = original_positions(corpus, split, symbol);
  const std::size_t k = originals.size();
  if (k == 0) throw Error("upsample_adaptive: split has no examples of '" + symbol + "'");
  const std::size_t target = round_ratio(base_ratio, split.spec.total);
  if (target < k) {
    throw Error("upsample_adaptive: target " + std::to_string(target) + " is below k=" +
                std::to_string(k) + "; downsampling is not supported");
  }
  // target = q*k + r: the first r originals get q+1 entries, the rest q.
  const std::size_t q = target / k;
  const std::size_t r = target % k;
  Split out = split;
  for (std::size_t c = 1; c <= q; ++c) {
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t copies = q + (i < r ? 1 : 0);
      if (c < copies) out.entries.push_back({split.entries[originals[i]].index, Origin::duplicate, c});
    }
  }
  return out;
}

}  // namespace isl
