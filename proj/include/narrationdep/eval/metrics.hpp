#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "narrationdep/core/error.hpp"

namespace narrationdep {

/// Confusion counts with the depressed class (1) as positive.
struct Confusion {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;

  std::uint64_t total() const noexcept { return tp + fp + fn + tn; }
  bool operator==(const Confusion&) const = default;
};

struct Metrics {
  Confusion counts;
  double precision = 0, recall = 0, f1 = 0, accuracy = 0;
  // Set when precision, recall or F1 hit a zero denominator and were reported as 0.
  bool degenerate = false;
};

inline Confusion confusion(const std::vector<int>& preds, const std::vector<int>& labels) {
  if (preds.size() != labels.size()) {
    throw InputError("confusion: " + std::to_string(preds.size()) + " predictions vs " +
                     std::to_string(labels.size()) + " labels");
  }
  Confusion c;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const int p = preds[i], y = labels[i];
    if ((p != 0 && p != 1) || (y != 0 && y != 1)) throw InputError("confusion: values must be 0 or 1");
    if (p == 1 && y == 1) ++c.tp;
    else if (p == 1 && y == 0) ++c.fp;
    else if (p == 0 && y == 1) ++c.fn;
    else ++c.tn;
  }
  return c;
}

inline Metrics prf1_accuracy(const Confusion& c) {
  if (c.total() == 0) throw InputError("prf1_accuracy: empty confusion matrix");
  Metrics m;
  m.counts = c;
  const auto tp = static_cast<double>(c.tp);
  if (c.tp + c.fp > 0) m.precision = tp / static_cast<double>(c.tp + c.fp);
  else m.degenerate = true;
  if (c.tp + c.fn > 0) m.recall = tp / static_cast<double>(c.tp + c.fn);
  else m.degenerate = true;
  // 2PR/(P+R) written over the counts: one rounding, so exact fractions compare equal.
  if (c.tp > 0) m.f1 = 2 * tp / static_cast<double>(2 * c.tp + c.fp + c.fn);
  else m.degenerate = true;
  m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  return m;
}

inline std::vector<int> threshold(const std::vector<double>& probs, double at = 0.5) {
  std::vector<int> out;
  out.reserve(probs.size());
  for (double p : probs) out.push_back(p >= at ? 1 : 0);
  return out;
}

}  // namespace narrationdep
