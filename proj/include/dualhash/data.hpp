#ifndef DUALHASH_DATA_HPP
#define DUALHASH_DATA_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "dualhash/model.hpp"
#include "dualhash/numerics.hpp"

namespace dualhash {

using label_mask = std::uint64_t;

enum class split_tag : std::uint8_t { train, query };

/// Samples with label bitmasks; single-label data sets exactly one bit.
/// Training rows double as the retrieval database.
struct Dataset {
  Mat features;
  std::vector<label_mask> labels;
  std::vector<split_tag> split;
  std::size_t num_classes = 0;

  std::size_t size() const { return labels.size(); }
  index_list rows(split_tag tag) const;
  Dataset subset(const index_list &rows) const;
  void validate() const;
};

inline bool share_label(label_mask a, label_mask b) { return (a & b) != 0; }

/// Class means are scaled unit basis vectors when classes <= d_a, random
/// points on the sphere of the same radius otherwise. Every sample is tagged
/// train; see split_queries.
Dataset gen_gaussian_clusters(Rng &rng, std::size_t classes,
                              std::size_t per_class, std::size_t d_a,
                              double spread, double radius = 1.0);

/// Each sample draws 1 to 3 labels out of `labels`; its feature is the mean
/// of its label centres plus isotropic noise.
Dataset gen_multilabel_clusters(Rng &rng, std::size_t labels, std::size_t n,
                                std::size_t d_a, double spread,
                                double radius = 1.0);

/// Tags `per_class` samples of each class (by first label bit) as queries.
void split_queries(Dataset &ds, std::size_t per_class, Rng &rng);

/// Per-dimension zero mean / unit variance using statistics of the train
/// rows, applied to all rows.
void standardize(Dataset &ds);

enum class pair_mode { all, sampled };

/// Pairs over the given rows (indices local to that row list).
std::vector<Pair> build_pairs(const Dataset &ds, const index_list &rows,
                              pair_mode mode, std::size_t per_anchor, Rng &rng);

void save_dataset_csv(const Dataset &ds, const std::string &features_path,
                      const std::string &labels_path);
Dataset load_dataset_csv(const std::string &features_path,
                         const std::string &labels_path);

}  // namespace dualhash

#endif  // DUALHASH_DATA_HPP
