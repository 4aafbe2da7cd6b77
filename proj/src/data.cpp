#include "dualhash/data.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace dualhash {

namespace {

Mat class_means(Rng &rng, std::size_t classes, std::size_t d_a, double radius) {
  Mat means = Mat::Zero(Eigen::Index(classes), Eigen::Index(d_a));
  for (std::size_t c = 0; c < classes; ++c) {
    if (classes <= d_a) {
      means(Eigen::Index(c), Eigen::Index(c)) = radius;
      continue;
    }
    Vec v(static_cast<Eigen::Index>(d_a));
    do {
      for (auto &e : v) e = rng.normal();
    } while (v.norm() < 1e-12);
    means.row(Eigen::Index(c)) = radius * v.normalized().transpose();
  }
  return means;
}

int first_label(label_mask m) {
  for (int b = 0; b < 64; ++b)
    if (m & (label_mask(1) << b)) return b;
  return -1;
}

}  // namespace

index_list Dataset::rows(split_tag tag) const {
  index_list out;
  for (std::size_t i = 0; i < split.size(); ++i)
    if (split[i] == tag) out.push_back(i);
  return out;
}

Dataset Dataset::subset(const index_list &r) const {
  Dataset out;
  out.num_classes = num_classes;
  out.features.resize(Eigen::Index(r.size()), features.cols());
  for (std::size_t k = 0; k < r.size(); ++k) {
    out.features.row(Eigen::Index(k)) = features.row(Eigen::Index(r[k]));
    out.labels.push_back(labels[r[k]]);
    out.split.push_back(split[r[k]]);
  }
  return out;
}

void Dataset::validate() const {
  if (std::size_t(features.rows()) != labels.size() ||
      labels.size() != split.size())
    throw dimension_error("Dataset: features/labels/split lengths differ");
  if (num_classes == 0 || num_classes > 64)
    throw std::invalid_argument("Dataset: num_classes must be in [1, 64]");
  std::vector<std::size_t> train_count(num_classes, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 0) throw std::invalid_argument("Dataset: unlabeled sample");
    if (split[i] != split_tag::train) continue;
    for (std::size_t c = 0; c < num_classes; ++c)
      if (labels[i] & (label_mask(1) << c)) ++train_count[c];
  }
  for (std::size_t c = 0; c < num_classes; ++c)
    if (train_count[c] < 2)
      throw std::invalid_argument("Dataset: class " + std::to_string(c) +
                                  " has fewer than 2 training samples");
}

Dataset gen_gaussian_clusters(Rng &rng, std::size_t classes,
                              std::size_t per_class, std::size_t d_a,
                              double spread, double radius) {
  if (classes < 2) throw std::invalid_argument("need at least 2 classes");
  if (classes > 64) throw std::invalid_argument("at most 64 classes");
  if (per_class == 0 || d_a == 0)
    throw std::invalid_argument("per_class and d_a must be positive");
  Dataset ds;
  ds.num_classes = classes;
  const Mat means = class_means(rng, classes, d_a, radius);
  ds.features.resize(Eigen::Index(classes * per_class), Eigen::Index(d_a));
  std::size_t r = 0;
  for (std::size_t c = 0; c < classes; ++c)
    for (std::size_t k = 0; k < per_class; ++k, ++r) {
      for (std::size_t j = 0; j < d_a; ++j)
        ds.features(Eigen::Index(r), Eigen::Index(j)) =
            means(Eigen::Index(c), Eigen::Index(j)) + spread * rng.normal();
      ds.labels.push_back(label_mask(1) << c);
      ds.split.push_back(split_tag::train);
    }
  return ds;
}

Dataset gen_multilabel_clusters(Rng &rng, std::size_t labels, std::size_t n,
                                std::size_t d_a, double spread, double radius) {
  if (labels < 2 || labels > 64)
    throw std::invalid_argument("labels must lie in [2, 64]");
  Dataset ds;
  ds.num_classes = labels;
  const Mat means = class_means(rng, labels, d_a, radius);
  ds.features.resize(Eigen::Index(n), Eigen::Index(d_a));
  for (std::size_t r = 0; r < n; ++r) {
    const auto count = 1 + rng.uniform_index(std::min<std::size_t>(3, labels));
    label_mask m = 0;
    while (std::size_t(std::popcount(m)) < count)
      m |= label_mask(1) << rng.uniform_index(labels);
    Vec f = Vec::Zero(Eigen::Index(d_a));
    for (std::size_t c = 0; c < labels; ++c)
      if (m & (label_mask(1) << c)) f += means.row(Eigen::Index(c)).transpose();
    f /= double(std::popcount(m));
    for (std::size_t j = 0; j < d_a; ++j) f[Eigen::Index(j)] += spread * rng.normal();
    ds.features.row(Eigen::Index(r)) = f.transpose();
    ds.labels.push_back(m);
    ds.split.push_back(split_tag::train);
  }
  return ds;
}

void split_queries(Dataset &ds, std::size_t per_class, Rng &rng) {
  std::vector<index_list> by_class(ds.num_classes);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const int c = first_label(ds.labels[i]);
    if (c >= 0) by_class[std::size_t(c)].push_back(i);
  }
  for (auto &members : by_class) {
    // partial Fisher-Yates
    const std::size_t take = std::min(per_class, members.size());
    for (std::size_t k = 0; k < take; ++k) {
      const std::size_t j = k + rng.uniform_index(members.size() - k);
      std::swap(members[k], members[j]);
      ds.split[members[k]] = split_tag::query;
    }
  }
}

void standardize(Dataset &ds) {
  const auto train = ds.rows(split_tag::train);
  if (train.size() < 2) throw std::invalid_argument("standardize: < 2 train rows");
  const Eigen::Index d = ds.features.cols();
  for (Eigen::Index j = 0; j < d; ++j) {
    double mean = 0.0;
    for (auto i : train) mean += ds.features(Eigen::Index(i), j);
    mean /= double(train.size());
    double var = 0.0;
    for (auto i : train) {
      const double e = ds.features(Eigen::Index(i), j) - mean;
      var += e * e;
    }
    var /= double(train.size());
    const double sd = var > 0.0 ? std::sqrt(var) : 1.0;
    ds.features.col(j).array() = (ds.features.col(j).array() - mean) / sd;
  }
}

std::vector<Pair> build_pairs(const Dataset &ds, const index_list &rows,
                              pair_mode mode, std::size_t per_anchor, Rng &rng) {
  std::vector<Pair> pairs;
  const std::size_t n = rows.size();
  auto similar = [&](std::size_t a, std::size_t b) {
    return share_label(ds.labels[rows[a]], ds.labels[rows[b]]) ? 1 : 0;
  };
  if (mode == pair_mode::all) {
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a + 1; b < n; ++b) pairs.push_back({a, b, similar(a, b)});
    return pairs;
  }
  if (n < 2) return pairs;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t k = 0; k < per_anchor; ++k) {
      auto b = std::size_t(rng.uniform_index(n - 1));
      if (b >= a) ++b;
      pairs.push_back({a, b, similar(a, b)});
    }
  return pairs;
}

void save_dataset_csv(const Dataset &ds, const std::string &features_path,
                      const std::string &labels_path) {
  std::ofstream f(features_path), l(labels_path);
  if (!f || !l) throw std::runtime_error("cannot write dataset CSV");
  f << std::setprecision(17);
  for (Eigen::Index r = 0; r < ds.features.rows(); ++r) {
    for (Eigen::Index c = 0; c < ds.features.cols(); ++c)
      f << (c ? "," : "") << ds.features(r, c);
    f << "\n";
  }
  l << "index,label_mask,split,num_classes\n";
  for (std::size_t i = 0; i < ds.size(); ++i)
    l << i << "," << ds.labels[i] << ","
      << (ds.split[i] == split_tag::train ? "train" : "query") << ","
      << ds.num_classes << "\n";
}

Dataset load_dataset_csv(const std::string &features_path,
                         const std::string &labels_path) {
  std::ifstream f(features_path), l(labels_path);
  if (!f || !l) throw std::runtime_error("cannot read dataset CSV");
  std::vector<std::vector<double>> rows;
  for (std::string line; std::getline(f, line);) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    for (std::string tok; std::getline(ss, tok, ',');) row.push_back(std::stod(tok));
    if (!rows.empty() && row.size() != rows.front().size())
      throw dimension_error("load_dataset_csv: ragged feature rows");
    rows.push_back(std::move(row));
  }
  Dataset ds;
  std::string line;
  std::getline(l, line);  // header
  while (std::getline(l, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string idx, mask, split, classes;
    std::getline(ss, idx, ',');
    std::getline(ss, mask, ',');
    std::getline(ss, split, ',');
    std::getline(ss, classes, ',');
    ds.labels.push_back(std::stoull(mask));
    if (split != "train" && split != "query")
      throw std::invalid_argument("load_dataset_csv: bad split tag '" + split + "'");
    ds.split.push_back(split == "query" ? split_tag::query : split_tag::train);
    ds.num_classes = std::stoul(classes);
  }
  if (rows.size() != ds.labels.size())
    throw dimension_error("load_dataset_csv: feature/label row counts differ");
  const std::size_t d = rows.empty() ? 0 : rows.front().size();
  ds.features.resize(Eigen::Index(rows.size()), Eigen::Index(d));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < d; ++c)
      ds.features(Eigen::Index(r), Eigen::Index(c)) = rows[r][c];
  return ds;
}

}  // namespace dualhash
