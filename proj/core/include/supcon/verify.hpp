#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "supcon/batch.hpp"
#include "supcon/embedding.hpp"
#include "supcon/rng.hpp"

namespace supcon {

// One property check over seeded random or constructed instances. `worst` is
// the check's extreme observed value (max abs error for equality checks, max
// signed violation for inequality checks); `pass` is computed by the check
// itself so callers never re-derive the pass rule.
struct PropertyResult {
  std::string name;
  bool pass = false;
  double worst = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

// Random batch with both the raw rows and their normalized versions.
struct RandomBatch {
  Matrix w;
  Matrix z;
  BatchStructure structure;
};
RandomBatch random_batch(Rng& rng, std::size_t sources, std::size_t dim,
                         int classes, bool with_labels);

// Analytical total gradients (z-space and w-space) against the quad-precision
// central-difference oracle, on a fixed grid of batch shapes and
// temperatures, n batches per variant over {SelfSup, SupOut, SupIn}.
PropertyResult check_gradients(std::size_t n_per_variant, double fd_step,
                               std::uint64_t seed);

// In-variant total <= out-variant total on random batches.
PropertyResult check_jensen(std::size_t n_batches, std::uint64_t seed);
// Equality when every anchor's positive similarities coincide (simplex and
// all-identical constructions).
PropertyResult check_jensen_equality(std::size_t n_cases, std::uint64_t seed);

// Out-variant with all-distinct classes equals the self-supervised loss.
PropertyResult check_hierarchy_selfsup(std::size_t n, std::uint64_t seed);
// Out-variant restricted to the designated cross positive at tau=1 equals
// the n-pairs loss.
PropertyResult check_hierarchy_npairs(std::size_t n, std::uint64_t seed);
// Capping positives at k=1 leaves exactly the view pair and reduces the
// out-variant to the self-supervised loss on the reduced active sets.
PropertyResult check_hierarchy_cap1(std::size_t n, std::uint64_t seed);

// Hinge identity on the unit sphere plus the closed form of the
// self-supervised loss on a three-element configuration.
PropertyResult check_triplet_identity(std::size_t n, std::uint64_t seed);
// |exact - approx| <= bound over gap/tau in [-10, -1].
PropertyResult check_triplet_bound(std::size_t n_triples, std::uint64_t seed);

// Contrastive-form and direct softmax cross entropy agree on random logits.
PropertyResult check_xent_equivalence(std::size_t n, std::uint64_t seed);
// Their gradients agree.
PropertyResult check_xent_gradients(std::size_t n, std::uint64_t seed);

// Smoothed cross entropy <= its contrastive upper bound, C in {2..8}.
PropertyResult check_smoothing_bound(std::size_t n, std::uint64_t seed);

// Every pre-normalization gradient row is orthogonal to its input row.
PropertyResult check_tangency(std::size_t n, std::uint64_t seed);

// Tangent-norm identity, vanishing easy-positive contribution, the
// per-pair contribution-norm decomposition, and strict growth of the hard
// positive's weight with the negative count (2 to 64).
PropertyResult check_hardness(std::uint64_t seed);

// Full suite at production counts; order is stable.
std::vector<PropertyResult> run_verification_suite(std::uint64_t seed);

}  // namespace supcon
