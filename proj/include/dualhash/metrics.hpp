#ifndef DUALHASH_METRICS_HPP
#define DUALHASH_METRICS_HPP

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dualhash/data.hpp"
#include "dualhash/numerics.hpp"

namespace dualhash {

/// Throws domain_error unless every entry is exactly +1 or -1.
void check_codes(const Mat &codes);

/// Number of disagreeing bits, computed as (d - <h1, h2>) / 2.
int hamming_dist(const Eigen::Ref<const Eigen::RowVectorXd> &h1,
                 const Eigen::Ref<const Eigen::RowVectorXd> &h2);

/// sum_{k <= N} P(k) rel(k) / min(N, R_q) over the first N entries of a
/// ranked relevance list. nullopt when R_q == 0 (the query is skipped).
std::optional<double> average_precision(std::span<const int> relevance,
                                        std::size_t R_q, std::size_t N);

/// Database rows ordered by Hamming distance to q, ties by ascending index.
std::vector<std::size_t> hamming_rank(const Eigen::Ref<const Eigen::RowVectorXd> &q,
                                      const Mat &db_codes);

/// Query and database codes with their label masks.
struct RetrievalSet {
  Mat query_codes;
  std::vector<label_mask> query_labels;
  Mat db_codes;
  std::vector<label_mask> db_labels;

  void validate() const;
};

struct MapResult {
  double value = 0.0;       // mean over evaluated queries
  std::size_t evaluated = 0;
  std::size_t skipped = 0;  // queries with no relevant item
};

/// mAP over Hamming-ranked lists; top_n caps N (mAP@N).
MapResult mean_ap(const RetrievalSet &s, std::optional<std::size_t> top_n = std::nullopt);

/// Mean precision among the first K retrieved, for each K.
std::vector<std::pair<std::size_t, double>> precision_at_topk(
    const RetrievalSet &s, const std::vector<std::size_t> &ks);

/// Mean over queries of the precision inside the Hamming ball of radius r;
/// a query whose ball is empty contributes 0.
double precision_within_radius(const RetrievalSet &s, int r = 2);

/// (recall, precision) averaged over queries at a grid of ranks, starting
/// at rank 1 and ending at the full database.
std::vector<std::pair<double, double>> pr_curve(const RetrievalSet &s,
                                                std::size_t points = 100);

/// (1/n) sum_i ||u_i - sgn(u_i)||_1 / d, with sgn(0) = +1.
double quantization_error(const Mat &U);

struct HammingHistograms {
  std::vector<double> intra;  // bins 0..d, normalized to sum 1
  std::vector<double> inter;
  double mean_intra = 0.0;
  double mean_inter = 0.0;
  double separability() const { return mean_inter - mean_intra; }
};

/// Distances over all unordered pairs, split by whether labels intersect.
HammingHistograms hamming_histograms(const Mat &codes,
                                     std::span<const label_mask> labels);

struct RetrievalReport {
  double map = 0.0;
  std::vector<std::pair<std::size_t, double>> ap_at_topk;
  double ap_at_r2 = 0.0;
  std::vector<std::pair<double, double>> pr_curve;
  double quant_error = 0.0;
  double separability = 0.0;
  HammingHistograms histograms;
  std::size_t queries_skipped = 0;

  std::string to_json(int indent = 2) const;
  std::string topk_csv() const;
  std::string pr_csv() const;
  std::string histogram_csv() const;
};

/// Full report from continuous outputs of queries and database.
RetrievalReport evaluate_retrieval(const Mat &query_outputs,
                                   std::span<const label_mask> query_labels,
                                   const Mat &db_outputs,
                                   std::span<const label_mask> db_labels,
                                   std::optional<std::size_t> top_n = std::nullopt);

}  // namespace dualhash

#endif  // DUALHASH_METRICS_HPP
