#include "evci/ridge.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "evci/errors.hpp"
#include "evci/random.hpp"

namespace evci {

namespace {

// Reciprocal condition estimate below which the normal equations are
// treated as singular.
constexpr double kMinRcond = 1e-13;

constexpr double kTieTolerance = 1e-12;

Eigen::VectorXd solve_normal_equations(const Eigen::MatrixXd& gram, const Eigen::VectorXd& xty,
                                       double alpha) {
  Eigen::MatrixXd a = gram;
  a.diagonal().array() += alpha;
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success || llt.rcond() < kMinRcond) {
    throw SolverError("normal equations are singular at alpha=" + format_double(alpha) +
                      "; the features are rank deficient, use alpha > 0");
  }
  return llt.solve(xty);
}

void check_xy(const FeatureMatrix& x, const Eigen::VectorXd& y) {
  if (x.rows() == 0) throw EmptyInputError("design matrix has no rows");
  if (x.rows() != y.size()) {
    throw ShapeError("design matrix has " + std::to_string(x.rows()) + " rows but target has " +
                     std::to_string(y.size()));
  }
  if (!x.allFinite() || !y.allFinite()) throw DomainError("non-finite entry in regression data");
}

FeatureMatrix gather_rows(const FeatureMatrix& x, const std::vector<Eigen::Index>& rows) {
  FeatureMatrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = x.row(rows[r]);
  return out;
}

Eigen::VectorXd gather(const Eigen::VectorXd& y, const std::vector<Eigen::Index>& rows) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) out(static_cast<Eigen::Index>(r)) = y(rows[r]);
  return out;
}

}  // namespace

PortDataset make_port_dataset(const TelemetrySeries& series, PortId port,
                              const FeatureOptions& options) {
  const DeltaSocSeries delta = compute_delta_soc(series, port);
  const auto n = static_cast<Eigen::Index>(delta.size());
  const Eigen::Index p = 2 + static_cast<Eigen::Index>(kPortCount) + (options.include_cs ? 1 : 0);

  PortDataset data;
  data.port = port;
  data.feature_names = {"i_pcc", "i_bess"};
  for (PortId q : kAllPorts) data.feature_names.push_back("i_" + std::string(label(q)));
  if (options.include_cs) data.feature_names.push_back("cs_" + std::string(label(port)));

  data.x.resize(n, p);
  data.y = Eigen::Map<const Eigen::VectorXd>(delta.values.data(), n);
  data.transition_mask = delta.transition_mask;
  for (Eigen::Index t = 0; t < n; ++t) {
    const TelemetryRecord& r = series.records[static_cast<std::size_t>(t + 1)];
    data.x(t, 0) = r.i_pcc;
    data.x(t, 1) = r.i_bess;
    for (std::size_t q = 0; q < kPortCount; ++q) data.x(t, 2 + static_cast<Eigen::Index>(q)) = r.ports[q].i_ev;
    if (options.include_cs) data.x(t, p - 1) = r.port(port).cs;
  }
  return data;
}

PortDataset drop_transitions(const PortDataset& data) {
  std::vector<Eigen::Index> keep;
  keep.reserve(data.transition_mask.size());
  for (std::size_t t = 0; t < data.transition_mask.size(); ++t) {
    if (!data.transition_mask[t]) keep.push_back(static_cast<Eigen::Index>(t));
  }
  PortDataset out;
  out.port = data.port;
  out.feature_names = data.feature_names;
  out.x = gather_rows(data.x, keep);
  out.y = gather(data.y, keep);
  out.transition_mask.assign(keep.size(), 0);
  return out;
}

Eigen::VectorXd ridge_coefficients(const FeatureMatrix& x, const Eigen::VectorXd& y, double alpha) {
  check_xy(x, y);
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw DomainError("alpha must be finite and >= 0");
  return solve_normal_equations(x.transpose() * x, x.transpose() * y, alpha);
}

RidgeModel fit_ridge(const FeatureMatrix& x, const Eigen::VectorXd& y, double alpha,
                     std::vector<std::string> feature_names) {
  check_xy(x, y);
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw DomainError("alpha must be finite and >= 0");
  if (!feature_names.empty() && static_cast<Eigen::Index>(feature_names.size()) != x.cols()) {
    throw ShapeError("feature name count does not match column count");
  }

  RidgeModel model;
  model.feature_names = std::move(feature_names);
  model.alpha = alpha;
  model.standardizer = Standardizer::fit(x);
  model.target_mean = y.mean();

  const FeatureMatrix xs = model.standardizer.transform(x);
  const Eigen::VectorXd yc = y.array() - model.target_mean;
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(xs.cols(), xs.cols());
  gram.selfadjointView<Eigen::Lower>().rankUpdate(xs.transpose());
  gram = gram.selfadjointView<Eigen::Lower>();
  model.coefficients = solve_normal_equations(gram, xs.transpose() * yc, alpha);
  return model;
}

Eigen::VectorXd predict(const RidgeModel& model, const FeatureMatrix& x) {
  if (x.cols() != model.feature_count()) {
    throw ShapeError("model expects " + std::to_string(model.feature_count()) +
                     " features, got " + std::to_string(x.cols()));
  }
  Eigen::VectorXd out = model.standardizer.transform(x) * model.coefficients;
  out.array() += model.target_mean;
  return out;
}

double mse(std::span<const double> y_true, std::span<const double> y_pred) {
  if (y_true.size() != y_pred.size()) {
    throw ShapeError("mse inputs differ in length: " + std::to_string(y_true.size()) + " vs " +
                     std::to_string(y_pred.size()));
  }
  if (y_true.empty()) throw EmptyInputError("mse of empty vectors");
  double sum = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const double d = y_true[i] - y_pred[i];
    sum += d * d;
  }
  return sum / static_cast<double>(y_true.size());
}

double mse(const Eigen::VectorXd& y_true, const Eigen::VectorXd& y_pred) {
  return mse(std::span<const double>(y_true.data(), static_cast<std::size_t>(y_true.size())),
             std::span<const double>(y_pred.data(), static_cast<std::size_t>(y_pred.size())));
}

LeastSquaresBaseline fit_least_squares(const FeatureMatrix& x, const Eigen::VectorXd& y) {
  check_xy(x, y);
  LeastSquaresBaseline model;
  model.standardizer = Standardizer::fit(x);
  const FeatureMatrix xs = model.standardizer.transform(x);
  model.coefficients = xs.completeOrthogonalDecomposition().solve(y);
  return model;
}

Eigen::VectorXd predict(const LeastSquaresBaseline& model, const FeatureMatrix& x) {
  if (x.cols() != model.coefficients.size()) throw ShapeError("least-squares baseline column mismatch");
  return model.standardizer.transform(x) * model.coefficients;
}

std::vector<double> default_alpha_grid() {
  std::vector<double> grid;
  for (int i = 0; i < 30; ++i) grid.push_back(std::pow(10.0, -3.0 + 6.0 * i / 29.0));
  grid.push_back(10.05);
  std::sort(grid.begin(), grid.end());
  return grid;
}

void CvConfig::validate() const {
  if (folds < 2) throw ConfigError("cross-validation needs k >= 2 folds");
  if (alpha_grid.empty()) throw ConfigError("alpha grid is empty");
  for (std::size_t i = 0; i < alpha_grid.size(); ++i) {
    if (!(alpha_grid[i] >= 0.0) || !std::isfinite(alpha_grid[i])) {
      throw ConfigError("alpha grid entries must be finite and >= 0");
    }
    if (i && !(alpha_grid[i] > alpha_grid[i - 1])) {
      throw ConfigError("alpha grid must be strictly ascending");
    }
  }
}

std::string FitReport::to_csv() const {
  std::ostringstream out;
  out << "# chosen_alpha=" << format_double(chosen_alpha)
      << ",train_mse=" << format_double(train_mse) << ",test_mse=" << format_double(test_mse)
      << '\n';
  out << "alpha,mean_mse";
  const std::size_t k = fold_mse.empty() ? 0 : fold_mse.front().size();
  for (std::size_t f = 0; f < k; ++f) out << ",fold" << f;
  out << '\n';
  for (std::size_t a = 0; a < alphas.size(); ++a) {
    out << format_double(alphas[a]) << ',' << format_double(mean_mse[a]);
    for (double v : fold_mse[a]) out << ',' << format_double(v);
    out << '\n';
  }
  return out.str();
}

std::pair<RidgeModel, FitReport> grid_search_cv(const FeatureMatrix& x, const Eigen::VectorXd& y,
                                                const CvConfig& cv) {
  cv.validate();
  check_xy(x, y);
  const Eigen::Index n = x.rows();
  const auto k = static_cast<Eigen::Index>(cv.folds);
  if (k > n) {
    throw ConfigError(std::to_string(k) + " folds requested for " + std::to_string(n) + " samples");
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng rng(cv.shuffle_seed);
  for (std::size_t i = order.size() - 1; i > 0; --i) {
    std::swap(order[i], order[rng.below(i + 1)]);
  }

  FitReport report;
  report.alphas = cv.alpha_grid;
  report.fold_mse.assign(cv.alpha_grid.size(), std::vector<double>(static_cast<std::size_t>(k)));

  for (Eigen::Index f = 0; f < k; ++f) {
    const Eigen::Index lo = f * n / k;
    const Eigen::Index hi = (f + 1) * n / k;
    std::vector<Eigen::Index> train_rows;
    std::vector<Eigen::Index> test_rows(order.begin() + lo, order.begin() + hi);
    train_rows.reserve(static_cast<std::size_t>(n - (hi - lo)));
    train_rows.insert(train_rows.end(), order.begin(), order.begin() + lo);
    train_rows.insert(train_rows.end(), order.begin() + hi, order.end());

    const FeatureMatrix x_train = gather_rows(x, train_rows);
    const Eigen::VectorXd y_train = gather(y, train_rows);
    const Standardizer scaler = Standardizer::fit(x_train);
    const FeatureMatrix xs = scaler.transform(x_train);
    const double y_mean = y_train.mean();
    const Eigen::VectorXd yc = y_train.array() - y_mean;
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(xs.cols(), xs.cols());
    gram.selfadjointView<Eigen::Lower>().rankUpdate(xs.transpose());
    gram = gram.selfadjointView<Eigen::Lower>();
    const Eigen::VectorXd xty = xs.transpose() * yc;

    const FeatureMatrix xs_test = scaler.transform(gather_rows(x, test_rows));
    const Eigen::VectorXd y_test = gather(y, test_rows);
    for (std::size_t a = 0; a < cv.alpha_grid.size(); ++a) {
      const Eigen::VectorXd beta = solve_normal_equations(gram, xty, cv.alpha_grid[a]);
      Eigen::VectorXd pred = xs_test * beta;
      pred.array() += y_mean;
      report.fold_mse[a][static_cast<std::size_t>(f)] = mse(y_test, pred);
    }
  }

  std::size_t best = 0;
  report.mean_mse.resize(cv.alpha_grid.size());
  for (std::size_t a = 0; a < cv.alpha_grid.size(); ++a) {
    const auto& folds = report.fold_mse[a];
    report.mean_mse[a] = std::accumulate(folds.begin(), folds.end(), 0.0) /
                         static_cast<double>(folds.size());
    const double incumbent = report.mean_mse[best];
    if (report.mean_mse[a] < incumbent - kTieTolerance * std::abs(incumbent)) best = a;
  }
  report.chosen_alpha = cv.alpha_grid[best];

  RidgeModel model = fit_ridge(x, y, report.chosen_alpha);
  report.train_mse = mse(y, predict(model, x));
  return {std::move(model), std::move(report)};
}

void save_model(const RidgeModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "# evci ridge model\n";
  out << "alpha=" << format_double(model.alpha) << '\n';
  out << "target_mean=" << format_double(model.target_mean) << '\n';
  out << "feature,mean,scale,coefficient\n";
  for (Eigen::Index j = 0; j < model.feature_count(); ++j) {
    const std::string name = j < static_cast<Eigen::Index>(model.feature_names.size())
                                 ? model.feature_names[static_cast<std::size_t>(j)]
                                 : "x" + std::to_string(j);
    out << name << ',' << format_double(model.standardizer.mean()(j)) << ','
        << format_double(model.standardizer.scale()(j)) << ','
        << format_double(model.coefficients(j)) << '\n';
  }
  if (!out) throw Error("write failed: " + path.string());
}

RidgeModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  RidgeModel model;
  std::vector<double> means, scales, coefs;
  bool have_alpha = false, have_mean = false, in_table = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (!in_table) {
      if (line.rfind("alpha=", 0) == 0) {
        model.alpha = parse_double(std::string_view(line).substr(6), line_no);
        have_alpha = true;
      } else if (line.rfind("target_mean=", 0) == 0) {
        model.target_mean = parse_double(std::string_view(line).substr(12), line_no);
        have_mean = true;
      } else if (line == "feature,mean,scale,coefficient") {
        in_table = true;
      } else {
        throw ParseError(line_no, "unexpected model line '" + line + "'");
      }
      continue;
    }
    const auto f = split_csv_line(line);
    if (f.size() != 4) throw ParseError(line_no, "expected feature,mean,scale,coefficient");
    model.feature_names.emplace_back(f[0]);
    means.push_back(parse_double(f[1], line_no));
    scales.push_back(parse_double(f[2], line_no));
    coefs.push_back(parse_double(f[3], line_no));
  }
  if (!have_alpha || !have_mean || !in_table) {
    throw ParseError(line_no, "model file is missing alpha, target_mean or the feature table");
  }
  if (coefs.empty()) throw EmptyInputError("model file has no features");
  const auto p = static_cast<Eigen::Index>(coefs.size());
  model.standardizer = Standardizer(Eigen::Map<Eigen::VectorXd>(means.data(), p),
                                    Eigen::Map<Eigen::VectorXd>(scales.data(), p));
  model.coefficients = Eigen::Map<Eigen::VectorXd>(coefs.data(), p);
  return model;
}

}  // namespace evci
