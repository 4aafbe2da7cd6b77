#include "dualhash/model.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

namespace dualhash {

void PairwiseLossSpec::validate(std::size_t n) const {
  if (pairs.empty()) throw std::invalid_argument("pair set is empty");
  if (!(alpha_loss > 0.0 && alpha_loss <= 1.0))
    throw std::invalid_argument("alpha_loss must lie in (0, 1]");
  for (const auto &p : pairs) {
    if (p.i >= n || p.j >= n || p.i == p.j)
      throw std::invalid_argument("pair (" + std::to_string(p.i) + ", " +
                                  std::to_string(p.j) + ") invalid for n = " +
                                  std::to_string(n));
    if (p.similar != 0 && p.similar != 1)
      throw std::invalid_argument("pair similarity must be 0 or 1");
  }
}

double pairwise_loss(const PairwiseLossSpec &spec, const Mat &U, Mat *grad) {
  spec.validate(std::size_t(U.rows()));
  const double w = 1.0 / static_cast<double>(spec.pairs.size());
  const double alpha = spec.alpha_loss;
  if (grad) grad->setZero(U.rows(), U.cols());
  double total = 0.0;
  for (const auto &p : spec.pairs) {
    const auto ui = U.row(Eigen::Index(p.i));
    const auto uj = U.row(Eigen::Index(p.j));
    const double s = 0.5 * ui.dot(uj);
    total += pair_loss(alpha, s, p.similar);
    if (grad) {
      const double g = 0.5 * w * pair_loss_slope(alpha, s, p.similar);
      grad->row(Eigen::Index(p.i)) += g * uj;
      grad->row(Eigen::Index(p.j)) += g * ui;
    }
  }
  return w * total;
}

void save_params(std::ostream &os, const MlpSpec &spec, const Vec &x) {
  if (std::size_t(x.size()) != spec.num_params())
    throw dimension_error("save_params: parameter count does not match spec");
  os << "# dualhash-params v1\n# widths:";
  for (std::size_t l = 0; l < spec.layer_widths.size(); ++l)
    os << (l ? "," : "") << spec.layer_widths[l];
  os << "\n# output: "
     << (spec.output == output_activation::tanh ? "tanh" : "identity") << "\n";
  os << std::setprecision(17);
  for (Eigen::Index k = 0; k < x.size(); ++k) os << x[k] << "\n";
}

void save_params(const std::string &path, const MlpSpec &spec, const Vec &x) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path);
  save_params(os, spec, x);
}

std::pair<MlpSpec, Vec> load_params(std::istream &is) {
  std::string line;
  if (!std::getline(is, line) || line != "# dualhash-params v1")
    throw std::runtime_error("load_params: missing header");
  MlpSpec spec;
  spec.layer_widths.clear();
  if (!std::getline(is, line) || line.rfind("# widths:", 0) != 0)
    throw std::runtime_error("load_params: missing widths line");
  std::stringstream ws(line.substr(9));
  for (std::string tok; std::getline(ws, tok, ',');)
    spec.layer_widths.push_back(std::stoul(tok));
  if (!std::getline(is, line) || line.rfind("# output: ", 0) != 0)
    throw std::runtime_error("load_params: missing output line");
  const auto act = line.substr(10);
  if (act == "tanh")
    spec.output = output_activation::tanh;
  else if (act == "identity")
    spec.output = output_activation::identity;
  else
    throw std::runtime_error("load_params: unknown output activation " + act);
  spec.validate();
  Vec x(static_cast<Eigen::Index>(spec.num_params()));
  for (Eigen::Index k = 0; k < x.size(); ++k)
    if (!(is >> x[k])) throw std::runtime_error("load_params: truncated values");
  return {spec, x};
}

std::pair<MlpSpec, Vec> load_params(const std::string &path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  return load_params(is);
}

}  // namespace dualhash
