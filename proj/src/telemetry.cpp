#include "evci/telemetry.hpp"

#include <cmath>

#include "evci/errors.hpp"

namespace evci {

namespace {

constexpr std::array<std::string_view, kPortCount> kPortLabels = {
    "EV0_Terra53",         "EV1_TerraHP-Cord_a", "EV1_TerraHP-Cord_b",
    "EV2_TerraHP-Cord_a",  "EV2_TerraHP-Cord_b", "EV3_TerraHP",
};

constexpr std::array<int, kPortCount> kBoards = {0, 1, 1, 2, 2, 3};

}  // namespace

std::string_view label(PortId p) { return kPortLabels[index_of(p)]; }

std::optional<PortId> port_from_label(std::string_view s) {
  for (PortId p : kAllPorts) {
    if (label(p) == s) return p;
  }
  return std::nullopt;
}

int charging_board(PortId p) { return kBoards[index_of(p)]; }

Channel channel_of(Quantity q) {
  switch (q) {
    case Quantity::ChargeStatus:
    case Quantity::Soc:
      return Channel::Ocpp;
    default:
      return Channel::Goose;
  }
}

std::string_view label(Channel c) { return c == Channel::Ocpp ? "OCPP" : "GOOSE"; }

void TelemetrySeries::validate() const {
  for (std::size_t k = 1; k < records.size(); ++k) {
    if (records[k].t != records[k - 1].t + 1) {
      throw RangeError("timestamp " + std::to_string(records[k].t) + " at record " +
                       std::to_string(k) + " does not follow " +
                       std::to_string(records[k - 1].t) + " by 1 s");
    }
  }
}

DeltaSocSeries compute_delta_soc(const TelemetrySeries& series, PortId port) {
  if (series.size() < 2) {
    throw EmptyInputError("delta SoC needs at least 2 records, got " +
                          std::to_string(series.size()));
  }
  DeltaSocSeries out;
  out.port = port;
  const std::size_t n = series.size() - 1;
  out.values.resize(n);
  out.transition_mask.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    const PortSample& now = series.records[t].port(port);
    const PortSample& next = series.records[t + 1].port(port);
    out.values[t] = next.soc - now.soc;
    out.transition_mask[t] = now.cs != next.cs ? 1 : 0;
  }
  return out;
}

Standardizer::Standardizer(Eigen::VectorXd mean, Eigen::VectorXd scale)
    : mean_(std::move(mean)), scale_(std::move(scale)) {
  if (mean_.size() != scale_.size()) {
    throw ShapeError("standardizer mean/scale length mismatch");
  }
}

Standardizer Standardizer::fit(const FeatureMatrix& train) {
  if (train.rows() == 0 || train.cols() == 0) {
    throw EmptyInputError("cannot fit a standardizer on an empty matrix");
  }
  const double n = static_cast<double>(train.rows());
  Eigen::VectorXd mean = train.colwise().sum().transpose() / n;
  Eigen::VectorXd scale(train.cols());
  for (Eigen::Index j = 0; j < train.cols(); ++j) {
    const double var = (train.col(j).array() - mean(j)).square().sum() / n;
    const double sd = std::sqrt(var);
    scale(j) = sd > 0.0 ? sd : 1.0;
  }
  return Standardizer(std::move(mean), std::move(scale));
}

FeatureMatrix Standardizer::transform(const FeatureMatrix& x) const {
  if (x.cols() != mean_.size()) {
    throw ShapeError("expected " + std::to_string(mean_.size()) + " columns, got " +
                     std::to_string(x.cols()));
  }
  FeatureMatrix out(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    out.col(j) = (x.col(j).array() - mean_(j)) / scale_(j);
  }
  return out;
}

std::pair<Standardizer, FeatureMatrix> standardize(const FeatureMatrix& train_matrix,
                                                   const FeatureMatrix& apply_to) {
  if (train_matrix.cols() != apply_to.cols()) {
    throw ShapeError("train has " + std::to_string(train_matrix.cols()) +
                     " columns but apply_to has " + std::to_string(apply_to.cols()));
  }
  Standardizer s = Standardizer::fit(train_matrix);
  FeatureMatrix transformed = s.transform(apply_to);
  return {std::move(s), std::move(transformed)};
}

std::pair<TelemetrySeries, TelemetrySeries> split_dataset(const TelemetrySeries& series,
                                                          std::int64_t train_seconds,
                                                          std::int64_t test_seconds) {
  if (train_seconds < 0 || test_seconds < 0) {
    throw RangeError("split lengths must be non-negative");
  }
  const auto total = static_cast<std::int64_t>(series.size());
  if (train_seconds + test_seconds > total) {
    throw RangeError("requested " + std::to_string(train_seconds) + " + " +
                     std::to_string(test_seconds) + " s from a " + std::to_string(total) +
                     " s series");
  }
  const auto begin = series.records.begin();
  TelemetrySeries train{{begin, begin + train_seconds}, series.meta};
  TelemetrySeries test{{begin + train_seconds, begin + train_seconds + test_seconds},
                       series.meta};
  train.meta.duration = train_seconds;
  test.meta.duration = test_seconds;
  return {std::move(train), std::move(test)};
}

}  // namespace evci
