#include "tdrl/reports.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace tdrl {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return std::string(buf);
}

std::string to_key_value(const std::vector<std::pair<std::string, std::string>>& entries) {
  std::ostringstream os;
  for (const auto& [k, v] : entries) os << k << " = " << v << "\n";
  return os.str();
}

std::string condition_report_text(const ConditionReport& rep) {
  std::vector<std::pair<std::string, std::string>> entries;
  entries.emplace_back("verdict", verdict_name(rep.verdict));
  entries.emplace_back("ratio", format_double(rep.ratio));
  entries.emplace_back("threshold", format_double(rep.threshold));
  entries.emplace_back("all_zero", rep.all_zero ? "true" : "false");
  entries.emplace_back("fd_stability", format_double(rep.fd_stability));
  std::string svs;
  for (Eigen::Index i = 0; i < rep.singular_values.size(); ++i)
    svs += (i ? "," : "") + format_double(rep.singular_values(i));
  entries.emplace_back("singular_values", svs);
  if (!rep.note.empty()) entries.emplace_back("note", rep.note);
  return to_key_value(entries);
}

std::string history_csv(const TrainHistory& hist) {
  std::ostringstream os;
  os << "epoch,train_recon,train_kld,train_elbo,val_recon,val_kld,val_elbo\n";
  for (size_t e = 0; e < hist.train.size(); ++e) {
    os << e << "," << format_double(hist.train[e].recon) << "," << format_double(hist.train[e].kld)
       << "," << format_double(hist.train[e].elbo) << "," << format_double(hist.val[e].recon) << ","
       << format_double(hist.val[e].kld) << "," << format_double(hist.val[e].elbo) << "\n";
  }
  return os.str();
}

std::string matrix_csv(const MatrixXd& m) {
  std::ostringstream os;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) os << (j ? "," : "") << format_double(m(i, j));
    os << "\n";
  }
  return os.str();
}

std::string svg_scatter(const VectorXd& x, const VectorXd& y, const std::string& title,
                        int max_points) {
  const int W = 480, H = 480, pad = 48;
  const Eigen::Index n = std::min<Eigen::Index>(x.size(), y.size());
  const Eigen::Index stride = std::max<Eigen::Index>(1, n / max_points);
  double xmin = x.minCoeff(), xmax = x.maxCoeff();
  double ymin = y.minCoeff(), ymax = y.maxCoeff();
  if (xmax - xmin < 1e-12) xmax = xmin + 1.0;
  if (ymax - ymin < 1e-12) ymax = ymin + 1.0;
  auto sx = [&](double v) { return pad + (v - xmin) / (xmax - xmin) * (W - 2 * pad); };
  auto sy = [&](double v) { return H - pad - (v - ymin) / (ymax - ymin) * (H - 2 * pad); };
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << title
     << "</text>\n";
  os << "<line x1=\"" << pad << "\" y1=\"" << H - pad << "\" x2=\"" << W - pad << "\" y2=\""
     << H - pad << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << pad << "\" y1=\"" << pad << "\" x2=\"" << pad << "\" y2=\"" << H - pad
     << "\" stroke=\"black\"/>\n";
  for (Eigen::Index i = 0; i < n; i += stride)
    os << "<circle cx=\"" << sx(x(i)) << "\" cy=\"" << sy(y(i))
       << "\" r=\"1.5\" fill=\"steelblue\" fill-opacity=\"0.5\"/>\n";
  os << "</svg>\n";
  return os.str();
}

}  // namespace tdrl
