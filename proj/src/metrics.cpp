#include "dualhash/metrics.hpp"

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "dualhash/model.hpp"

namespace dualhash {

void check_codes(const Mat &codes) {
  for (Eigen::Index i = 0; i < codes.size(); ++i) {
    const double v = codes.data()[i];
    if (v != 1.0 && v != -1.0)
      throw domain_error("code entry " + std::to_string(v) + " is not +-1");
  }
}

int hamming_dist(const Eigen::Ref<const Eigen::RowVectorXd> &h1,
                 const Eigen::Ref<const Eigen::RowVectorXd> &h2) {
  check_same_size(h1.size(), h2.size(), "hamming_dist");
  for (Eigen::Index k = 0; k < h1.size(); ++k)
    if ((h1[k] != 1.0 && h1[k] != -1.0) || (h2[k] != 1.0 && h2[k] != -1.0))
      throw domain_error("hamming_dist: entries must be +-1");
  return int(std::lround(0.5 * (double(h1.size()) - h1.dot(h2))));
}

std::optional<double> average_precision(std::span<const int> relevance,
                                        std::size_t R_q, std::size_t N) {
  if (N == 0) throw std::invalid_argument("average_precision: N must be >= 1");
  if (R_q == 0) return std::nullopt;
  const std::size_t upto = std::min(N, relevance.size());
  double acc = 0.0;
  std::size_t hits = 0;
  for (std::size_t k = 0; k < upto; ++k) {
    if (!relevance[k]) continue;
    ++hits;
    acc += double(hits) / double(k + 1);
  }
  return acc / double(std::min(N, R_q));
}

std::vector<std::size_t> hamming_rank(const Eigen::Ref<const Eigen::RowVectorXd> &q,
                                      const Mat &db) {
  check_same_size(q.size(), db.cols(), "hamming_rank");
  const Eigen::Index d = db.cols();
  const Eigen::VectorXd dots = db * q.transpose();
  // counting sort keeps ascending index inside each distance bucket
  std::vector<std::vector<std::size_t>> bucket(std::size_t(d) + 1);
  for (Eigen::Index i = 0; i < db.rows(); ++i)
    bucket[std::size_t(std::lround(0.5 * (double(d) - dots[i])))].push_back(std::size_t(i));
  std::vector<std::size_t> order;
  order.reserve(std::size_t(db.rows()));
  for (auto &b : bucket) order.insert(order.end(), b.begin(), b.end());
  return order;
}

void RetrievalSet::validate() const {
  if (std::size_t(query_codes.rows()) != query_labels.size() ||
      std::size_t(db_codes.rows()) != db_labels.size())
    throw dimension_error("RetrievalSet: codes and labels differ in length");
  if (query_codes.cols() != db_codes.cols())
    throw dimension_error("RetrievalSet: code lengths differ");
  if (db_codes.rows() == 0) throw std::invalid_argument("RetrievalSet: empty database");
  check_codes(query_codes);
  check_codes(db_codes);
}

namespace {

std::vector<int> relevance_list(const RetrievalSet &s, Eigen::Index q,
                                std::size_t *R_q) {
  const auto order = hamming_rank(s.query_codes.row(q), s.db_codes);
  std::vector<int> rel(order.size());
  std::size_t total = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    rel[k] = share_label(s.query_labels[std::size_t(q)], s.db_labels[order[k]]);
    total += std::size_t(rel[k]);
  }
  if (R_q) *R_q = total;
  return rel;
}

}  // namespace

MapResult mean_ap(const RetrievalSet &s, std::optional<std::size_t> top_n) {
  s.validate();
  const std::size_t N = top_n ? *top_n : std::size_t(s.db_codes.rows());
  MapResult out;
  double acc = 0.0;
  for (Eigen::Index q = 0; q < s.query_codes.rows(); ++q) {
    std::size_t R_q = 0;
    const auto rel = relevance_list(s, q, &R_q);
    const auto ap = average_precision(rel, R_q, N);
    if (!ap) {
      ++out.skipped;
      continue;
    }
    acc += *ap;
    ++out.evaluated;
  }
  out.value = out.evaluated ? acc / double(out.evaluated) : 0.0;
  return out;
}

std::vector<std::pair<std::size_t, double>> precision_at_topk(
    const RetrievalSet &s, const std::vector<std::size_t> &ks) {
  s.validate();
  std::vector<double> acc(ks.size(), 0.0);
  for (Eigen::Index q = 0; q < s.query_codes.rows(); ++q) {
    const auto rel = relevance_list(s, q, nullptr);
    for (std::size_t t = 0; t < ks.size(); ++t) {
      const std::size_t K = std::min(ks[t], rel.size());
      if (K == 0) throw std::invalid_argument("precision_at_topk: K must be >= 1");
      std::size_t hits = 0;
      for (std::size_t k = 0; k < K; ++k) hits += std::size_t(rel[k]);
      acc[t] += double(hits) / double(K);
    }
  }
  std::vector<std::pair<std::size_t, double>> out;
  const double nq = double(std::max<Eigen::Index>(s.query_codes.rows(), 1));
  for (std::size_t t = 0; t < ks.size(); ++t) out.emplace_back(ks[t], acc[t] / nq);
  return out;
}

double precision_within_radius(const RetrievalSet &s, int r) {
  s.validate();
  if (s.query_codes.rows() == 0) return 0.0;
  const double d = double(s.db_codes.cols());
  double acc = 0.0;
  for (Eigen::Index q = 0; q < s.query_codes.rows(); ++q) {
    const Eigen::VectorXd dots = s.db_codes * s.query_codes.row(q).transpose();
    std::size_t inside = 0, hits = 0;
    for (Eigen::Index i = 0; i < dots.size(); ++i) {
      if (std::lround(0.5 * (d - dots[i])) > r) continue;
      ++inside;
      hits += share_label(s.query_labels[std::size_t(q)], s.db_labels[std::size_t(i)]);
    }
    if (inside) acc += double(hits) / double(inside);
  }
  return acc / double(s.query_codes.rows());
}

std::vector<std::pair<double, double>> pr_curve(const RetrievalSet &s,
                                                std::size_t points) {
  s.validate();
  const std::size_t n_db = std::size_t(s.db_codes.rows());
  if (points == 0) throw std::invalid_argument("pr_curve: points must be >= 1");
  std::vector<std::size_t> ranks{1};
  for (std::size_t t = 1; t <= points; ++t) {
    const std::size_t k = std::max<std::size_t>(1, (t * n_db + points - 1) / points);
    if (k > ranks.back()) ranks.push_back(k);
  }
  std::vector<double> rec(ranks.size(), 0.0), prec(ranks.size(), 0.0);
  std::size_t used = 0;
  for (Eigen::Index q = 0; q < s.query_codes.rows(); ++q) {
    std::size_t R_q = 0;
    const auto rel = relevance_list(s, q, &R_q);
    if (R_q == 0) continue;
    ++used;
    std::size_t hits = 0, k = 0;
    for (std::size_t t = 0; t < ranks.size(); ++t) {
      for (; k < ranks[t]; ++k) hits += std::size_t(rel[k]);
      rec[t] += double(hits) / double(R_q);
      prec[t] += double(hits) / double(ranks[t]);
    }
  }
  std::vector<std::pair<double, double>> out;
  for (std::size_t t = 0; t < ranks.size(); ++t)
    out.emplace_back(used ? rec[t] / double(used) : 0.0,
                     used ? prec[t] / double(used) : 0.0);
  return out;
}

double quantization_error(const Mat &U) {
  if (U.size() == 0) throw std::invalid_argument("quantization_error: empty codes");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < U.size(); ++i) {
    const double u = U.data()[i];
    acc += std::abs(u - sign_of(u));
  }
  return acc / double(U.size());
}

HammingHistograms hamming_histograms(const Mat &codes,
                                     std::span<const label_mask> labels) {
  check_codes(codes);
  if (std::size_t(codes.rows()) != labels.size())
    throw dimension_error("hamming_histograms: codes and labels differ in length");
  const auto d = std::size_t(codes.cols());
  std::vector<double> intra(d + 1, 0.0), inter(d + 1, 0.0);
  double n_intra = 0.0, n_inter = 0.0;
  const Mat G = codes * codes.transpose();
  for (Eigen::Index i = 0; i < codes.rows(); ++i)
    for (Eigen::Index j = i + 1; j < codes.rows(); ++j) {
      const auto h = std::size_t(std::lround(0.5 * (double(d) - G(i, j))));
      if (share_label(labels[std::size_t(i)], labels[std::size_t(j)])) {
        intra[h] += 1.0;
        n_intra += 1.0;
      } else {
        inter[h] += 1.0;
        n_inter += 1.0;
      }
    }
  if (n_inter == 0.0)
    throw std::invalid_argument("hamming_histograms: no inter-class pairs");
  if (n_intra == 0.0)
    throw std::invalid_argument("hamming_histograms: no intra-class pairs");
  HammingHistograms out;
  for (std::size_t h = 0; h <= d; ++h) {
    out.mean_intra += double(h) * intra[h] / n_intra;
    out.mean_inter += double(h) * inter[h] / n_inter;
    intra[h] /= n_intra;
    inter[h] /= n_inter;
  }
  out.intra = std::move(intra);
  out.inter = std::move(inter);
  return out;
}

std::string RetrievalReport::to_json(int indent) const {
  nlohmann::json j;
  j["map"] = map;
  j["ap_at_r2"] = ap_at_r2;
  j["quant_error"] = quant_error;
  j["separability"] = separability;
  j["queries_skipped"] = queries_skipped;
  auto &topk = j["ap_at_topk"] = nlohmann::json::array();
  for (const auto &[k, p] : ap_at_topk) topk.push_back({{"k", k}, {"precision", p}});
  auto &pr = j["pr_curve"] = nlohmann::json::array();
  for (const auto &[r, p] : pr_curve) pr.push_back({{"recall", r}, {"precision", p}});
  j["hamming_intra"] = histograms.intra;
  j["hamming_inter"] = histograms.inter;
  return j.dump(indent);
}

std::string RetrievalReport::topk_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "k,precision\n";
  for (const auto &[k, p] : ap_at_topk) os << k << "," << p << "\n";
  return os.str();
}

std::string RetrievalReport::pr_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "recall,precision\n";
  for (const auto &[r, p] : pr_curve) os << r << "," << p << "\n";
  return os.str();
}

std::string RetrievalReport::histogram_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "distance,intra,inter\n";
  for (std::size_t h = 0; h < histograms.intra.size(); ++h)
    os << h << "," << histograms.intra[h] << "," << histograms.inter[h] << "\n";
  return os.str();
}

RetrievalReport evaluate_retrieval(const Mat &query_outputs,
                                   std::span<const label_mask> query_labels,
                                   const Mat &db_outputs,
                                   std::span<const label_mask> db_labels,
                                   std::optional<std::size_t> top_n) {
  RetrievalSet s{binarize(query_outputs),
                 {query_labels.begin(), query_labels.end()},
                 binarize(db_outputs),
                 {db_labels.begin(), db_labels.end()}};
  RetrievalReport rep;
  const auto m = mean_ap(s, top_n);
  rep.map = m.value;
  rep.queries_skipped = m.skipped;
  std::vector<std::size_t> ks;
  for (std::size_t k : {1, 5, 10, 20, 50, 100, 200, 500, 1000})
    if (k <= std::size_t(db_outputs.rows())) ks.push_back(k);
  rep.ap_at_topk = precision_at_topk(s, ks);
  rep.ap_at_r2 = precision_within_radius(s, 2);
  rep.pr_curve = pr_curve(s);
  rep.quant_error = quantization_error(db_outputs);
  rep.histograms = hamming_histograms(s.db_codes, db_labels);
  rep.separability = rep.histograms.separability();
  return rep;
}

}  // namespace dualhash
