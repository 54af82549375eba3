#pragma once

// Entropy-based distances between symbol sequences and UPGMA clustering.

#include <cstddef>
#include <string>
#include <vector>

#include "mkteff/entropy.hpp"
#include "mkteff/series.hpp"

namespace mkteff {

enum class KlSupport {
  SmoothedUnion,  // pseudo-count added to every block seen in either sequence
  Intersection,   // only blocks seen in both, renormalized, no smoothing
};

struct KlOptions {
  KlSupport support = KlSupport::SmoothedUnion;
  double pseudo_count = 0.5;
};

/// KL(P|Q) in base-A units over the chosen support.
double kl_divergence(const BlockDistribution& p, const BlockDistribution& q,
                     const KlOptions& options = {});

/// KL(P|Q) / H^G(P) + KL(Q|P) / H^G(Q). Both distributions must share the
/// alphabet and block length.
double kl_distance(const BlockDistribution& p, const BlockDistribution& q,
                   const KlOptions& options = {});

/// Block length usable by both sequences: the smaller of the two selections.
int common_block_length(const SymbolSequence& a, const SymbolSequence& b);

/// kl_distance on the block distributions at the common block length.
double kl_distance(const SymbolSequence& a, const SymbolSequence& b, const KlOptions& options = {});

/// Corrected block entropy of the joint co-movement symbols of two series.
EntropyEstimate comovement_entropy(const Series& first, const Series& second);

struct DistanceMatrix {
  std::vector<std::string> labels;
  std::vector<double> values;  // row-major n x n

  DistanceMatrix() = default;
  explicit DistanceMatrix(std::vector<std::string> names);
  std::size_t size() const noexcept { return labels.size(); }
  double& at(std::size_t i, std::size_t j) { return values[i * size() + j]; }
  double at(std::size_t i, std::size_t j) const { return values[i * size() + j]; }
  /// Sets both (i, j) and (j, i).
  void set(std::size_t i, std::size_t j, double d);
};

struct Merge {
  std::size_t a = 0;  // cluster ids, a < b: leaves are 0..n-1, merge m creates n+m
  std::size_t b = 0;
  double height = 0.0;
  std::size_t size = 0;
};

struct Dendrogram {
  std::vector<std::string> labels;
  std::vector<Merge> merges;

  std::size_t leaves() const noexcept { return labels.size(); }
};

/// Average-linkage agglomeration. Among equally close pairs the one whose
/// smallest member leaves have the lowest indices merges first.
Dendrogram upgma(const DistanceMatrix& matrix);

/// Cluster index per leaf from merges strictly below `threshold`; clusters
/// are numbered in order of their first leaf.
std::vector<std::size_t> cut_dendrogram(const Dendrogram& tree, double threshold);

/// Height of the merge joining each pair of leaves.
DistanceMatrix cophenetic(const Dendrogram& tree);

/// Leaves in display order: at every node the smaller subtree comes first.
std::vector<std::size_t> leaf_order(const Dendrogram& tree);

/// Newick text; node depth is half the merge height.
std::string to_newick(const Dendrogram& tree);

}  // namespace mkteff
