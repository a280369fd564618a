#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "evci/telemetry.hpp"

namespace evci {

/// Which columns go into a port's design matrix.
struct FeatureOptions {
  /// Append the port's own charge-status flag after the currents.
  bool include_cs = true;
};

/// Regression problem for one port. Row t holds the measurements of record
/// t+1, the second whose current produced the change soc(t+1) - soc(t).
struct PortDataset {
  PortId port = PortId::Ev0Terra53;
  std::vector<std::string> feature_names;
  FeatureMatrix x;
  Eigen::VectorXd y;                          // delta SoC
  std::vector<std::uint8_t> transition_mask;  // aligned with rows
};

/// Columns: i_pcc, i_bess, i_ev of all six ports, then cs of `port`.
PortDataset make_port_dataset(const TelemetrySeries& series, PortId port,
                              const FeatureOptions& options = {});

/// Rows whose transition mask is 0; arrival/departure jumps are not a
/// function of the measured currents and are excluded from fitting.
PortDataset drop_transitions(const PortDataset& data);

struct RidgeModel {
  std::vector<std::string> feature_names;
  Standardizer standardizer;
  Eigen::VectorXd coefficients;  // on standardized features
  double alpha = 0.0;
  double target_mean = 0.0;

  Eigen::Index feature_count() const { return coefficients.size(); }
};

/// Solves (X'X + alpha I) b = X'y as given, without scaling or centering.
Eigen::VectorXd ridge_coefficients(const FeatureMatrix& x, const Eigen::VectorXd& y, double alpha);

/// Minimizes ||y_c - X_s b||^2 + alpha ||b||^2 where X_s is X standardized
/// with its own statistics and y_c is y centered. Solves the normal
/// equations (X_s'X_s + alpha I) b = X_s'y_c with a Cholesky factorization.
/// Throws SolverError when the system is numerically singular, which only
/// happens for alpha = 0 on rank-deficient X.
RidgeModel fit_ridge(const FeatureMatrix& x, const Eigen::VectorXd& y, double alpha,
                     std::vector<std::string> feature_names = {});

/// standardized(x) * coefficients + target_mean.
Eigen::VectorXd predict(const RidgeModel& model, const FeatureMatrix& x);

double mse(std::span<const double> y_true, std::span<const double> y_pred);
double mse(const Eigen::VectorXd& y_true, const Eigen::VectorXd& y_pred);

/// Ordinary least squares on standardized features without an intercept,
/// taking the minimum-norm solution when X is rank deficient.
struct LeastSquaresBaseline {
  Standardizer standardizer;
  Eigen::VectorXd coefficients;
};

LeastSquaresBaseline fit_least_squares(const FeatureMatrix& x, const Eigen::VectorXd& y);
Eigen::VectorXd predict(const LeastSquaresBaseline& model, const FeatureMatrix& x);

/// 30 log-spaced points on [1e-3, 1e3] plus 10.05, ascending.
std::vector<double> default_alpha_grid();

struct CvConfig {
  std::vector<double> alpha_grid = default_alpha_grid();
  int folds = 20;
  std::uint64_t shuffle_seed = 0;

  void validate() const;
};

struct FitReport {
  std::vector<double> alphas;
  std::vector<std::vector<double>> fold_mse;  // [alpha][fold]
  std::vector<double> mean_mse;               // per alpha
  double chosen_alpha = 0.0;
  double train_mse = 0.0;
  double test_mse = std::numeric_limits<double>::quiet_NaN();

  /// Deterministic text rendering; two equal reports render identically.
  std::string to_csv() const;
};

/// k-fold grid search: rows are shuffled once with the seed and cut into k
/// contiguous blocks. Each fold re-fits the standardizer on its own training
/// part. The chosen alpha minimizes the mean fold MSE (ties within a relative
/// 1e-12 go to the smaller alpha), and the returned model is refit on all rows.
std::pair<RidgeModel, FitReport> grid_search_cv(const FeatureMatrix& x, const Eigen::VectorXd& y,
                                                const CvConfig& cv = {});

void save_model(const RidgeModel& model, const std::filesystem::path& path);
RidgeModel load_model(const std::filesystem::path& path);

}  // namespace evci
