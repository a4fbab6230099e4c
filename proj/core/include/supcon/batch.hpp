#pragma once

#include <cstdint>
#include <vector>

#include "supcon/embedding.hpp"

namespace supcon {

// Square boolean mask over (anchor, other) index pairs.
struct PairMask {
  std::size_t n = 0;
  std::vector<std::uint8_t> m;  // n * n entries, row-major

  PairMask() = default;
  explicit PairMask(std::size_t size, bool fill = false)
      : n(size), m(size * size, fill ? 1 : 0) {}

  bool at(std::size_t i, std::size_t j) const { return m[i * n + j] != 0; }
  void set(std::size_t i, std::size_t j, bool v) { m[i * n + j] = v ? 1 : 0; }
};

// Index sets and labels of a multiviewed batch of 2N augmented samples.
// Row 2k and 2k+1 are the two views of source sample k; view_pair maps each
// view to the other one. positive_mask holds P(i) membership and
// active_mask holds A(i) membership (all others, minus anything a positive
// cap removed). Embeddings live separately so the same structure can be
// reused across forward passes.
struct BatchStructure {
  std::vector<int> labels;              // one class id per row
  std::vector<std::size_t> view_pair;   // fixed-point-free involution
  PairMask positive_mask;               // P(i); subset of active_mask
  PairMask active_mask;                 // A(i); never contains the diagonal

  std::size_t size() const { return labels.size(); }

  std::vector<std::size_t> positives(std::size_t i) const;
  std::vector<std::size_t> actives(std::size_t i) const;
  // Active rows that are not positives of i.
  std::vector<std::size_t> negatives(std::size_t i) const;
  std::size_t positive_count(std::size_t i) const;

  // Throws Error if any structural invariant is broken (involution,
  // label consistency, positive_mask outside active_mask, diagonal).
  void validate() const;
};

// Embeddings plus structure: the unit of work for every batch loss.
struct MultiviewBatch {
  UnitRows z;
  BatchStructure structure;

  MultiviewBatch(UnitRows embeddings, BatchStructure s);
  std::size_t size() const { return structure.size(); }
};

// Structure for 2N rows where row 2k/2k+1 are views of source k.
// with_labels: positives = all same-label rows; otherwise view pair only.
BatchStructure make_batch_structure(const std::vector<int>& source_labels,
                                    bool with_labels);

}  // namespace supcon
