#include "slds/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace slds {

namespace {

std::vector<int> dense_labels(const std::vector<int>& labels, int& count) {
  std::map<int, int> index;
  for (int v : labels) index.emplace(v, 0);
  count = 0;
  for (auto& [label, slot] : index) slot = count++;
  std::vector<int> out;
  out.reserve(labels.size());
  for (int v : labels) out.push_back(index[v]);
  return out;
}

double entropy_of(const Eigen::VectorXd& counts, double total) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < counts.size(); ++i) {
    if (counts[i] > 0.0) {
      const double p = counts[i] / total;
      h -= p * std::log(p);
    }
  }
  return h;
}

}  // namespace

Eigen::MatrixXi contingency(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw InputError("label sequences differ in length");
  int ka = 0, kb = 0;
  const auto da = dense_labels(a, ka);
  const auto db = dense_labels(b, kb);
  Eigen::MatrixXi table = Eigen::MatrixXi::Zero(ka, kb);
  for (std::size_t t = 0; t < a.size(); ++t) ++table(da[t], db[t]);
  return table;
}

double nmi(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw InputError("label sequences differ in length");
  if (a.empty()) throw InputError("label sequences are empty");
  const Eigen::MatrixXd table = contingency(a, b).cast<double>();
  const auto total = static_cast<double>(a.size());
  const Eigen::VectorXd rows = table.rowwise().sum();
  const Eigen::VectorXd cols = table.colwise().sum().transpose();
  const double ha = entropy_of(rows, total);
  const double hb = entropy_of(cols, total);
  if (table.rows() == 1 && table.cols() == 1) return 1.0;
  if (table.rows() == 1 || table.cols() == 1) return 0.0;
  double mi = 0.0;
  for (Eigen::Index i = 0; i < table.rows(); ++i) {
    for (Eigen::Index j = 0; j < table.cols(); ++j) {
      const double n = table(i, j);
      if (n > 0.0) mi += (n / total) * std::log(n * total / (rows[i] * cols[j]));
    }
  }
  // summation order differs between nmi(a, b) and nmi(b, a); the symmetric mean keeps it exact
  double mi_t = 0.0;
  for (Eigen::Index j = 0; j < table.cols(); ++j) {
    for (Eigen::Index i = 0; i < table.rows(); ++i) {
      const double n = table(i, j);
      if (n > 0.0) mi_t += (n / total) * std::log(n * total / (cols[j] * rows[i]));
    }
  }
  const double value = (mi + mi_t) / (ha + hb);
  return std::clamp(value, 0.0, 1.0);
}

int switch_count(const std::vector<int>& seq) {
  int n = 0;
  for (std::size_t t = 1; t < seq.size(); ++t) n += seq[t] != seq[t - 1] ? 1 : 0;
  return n;
}

}  // namespace slds
