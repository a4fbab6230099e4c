#include "supcon/batch.hpp"

#include <string>

#include "supcon/errors.hpp"

namespace supcon {

std::vector<std::size_t> BatchStructure::positives(std::size_t i) const {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < size(); ++j)
    if (positive_mask.at(i, j)) out.push_back(j);
  return out;
}

std::vector<std::size_t> BatchStructure::actives(std::size_t i) const {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < size(); ++j)
    if (active_mask.at(i, j)) out.push_back(j);
  return out;
}

std::vector<std::size_t> BatchStructure::negatives(std::size_t i) const {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < size(); ++j)
    if (active_mask.at(i, j) && !positive_mask.at(i, j)) out.push_back(j);
  return out;
}

std::size_t BatchStructure::positive_count(std::size_t i) const {
  std::size_t c = 0;
  for (std::size_t j = 0; j < size(); ++j)
    if (positive_mask.at(i, j)) ++c;
  return c;
}

void BatchStructure::validate() const {
  const std::size_t n = size();
  if (view_pair.size() != n)
    throw Error("batch: view_pair size mismatch");
  if (positive_mask.n != n || active_mask.n != n)
    throw Error("batch: mask size mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = view_pair[i];
    if (j >= n) throw Error("batch: view_pair out of range at row " + std::to_string(i));
    if (j == i) throw Error("batch: view_pair has fixed point at row " + std::to_string(i));
    if (view_pair[j] != i)
      throw Error("batch: view_pair not an involution at row " + std::to_string(i));
    if (labels[i] != labels[j])
      throw Error("batch: view pair labels differ at row " + std::to_string(i));
    if (active_mask.at(i, i))
      throw Error("batch: active_mask contains diagonal at row " + std::to_string(i));
    for (std::size_t k = 0; k < n; ++k) {
      if (!positive_mask.at(i, k)) continue;
      if (k == i)
        throw Error("batch: positive_mask contains diagonal at row " + std::to_string(i));
      if (!active_mask.at(i, k))
        throw Error("batch: positive outside active set at row " + std::to_string(i));
      if (labels[i] != labels[k])
        throw Error("batch: positive with different label at row " + std::to_string(i));
    }
  }
}

MultiviewBatch::MultiviewBatch(UnitRows embeddings, BatchStructure s)
    : z(std::move(embeddings)), structure(std::move(s)) {
  if (z.rows() != structure.size())
    throw Error("batch: embedding row count does not match structure");
  structure.validate();
}

BatchStructure make_batch_structure(const std::vector<int>& source_labels,
                                    bool with_labels) {
  const std::size_t n_src = source_labels.size();
  const std::size_t n = 2 * n_src;
  BatchStructure s;
  s.labels.resize(n);
  s.view_pair.resize(n);
  s.positive_mask = PairMask(n);
  s.active_mask = PairMask(n);
  for (std::size_t k = 0; k < n_src; ++k) {
    s.labels[2 * k] = source_labels[k];
    s.labels[2 * k + 1] = source_labels[k];
    s.view_pair[2 * k] = 2 * k + 1;
    s.view_pair[2 * k + 1] = 2 * k;
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      s.active_mask.set(i, j, true);
      const bool pos = with_labels ? (s.labels[i] == s.labels[j])
                                   : (s.view_pair[i] == j);
      if (pos) s.positive_mask.set(i, j, true);
    }
  }
  return s;
}

}  // namespace supcon
