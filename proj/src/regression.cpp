#include "posecal/regression.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

namespace posecal {

MatX full_observation_block(const RobotModel& model, const MeasurementConfig& config,
                            CalibrationMode mode) {
  const auto n = static_cast<Eigen::Index>(model.n_joints());
  if (needs_wrench(mode) && !config.wrench) {
    throw InvalidInput(std::string(to_string(mode)) +
                       " calibration needs a wrench in every measurement configuration");
  }
  MatX B = MatX::Zero(3, 3 * n);
  if (mode != CalibrationMode::Elastostatic) {
    B.leftCols(2 * n) = param_jacobian(model, config.q);
  } else if (static_cast<std::size_t>(config.q.size()) != model.n_joints()) {
    throw InvalidInput("joint vector does not match model");
  }
  if (mode != CalibrationMode::Geometric) {
    B.rightCols(n) = build_A(model, config.q, *config.wrench);
  }
  return B;
}

ObservationBlock build_B(const RobotModel& model, const MeasurementConfig& config,
                         CalibrationMode mode, const ParamMask& mask) {
  if (mask.size() != model.n_params()) throw InvalidInput("mask does not match model");
  const MatX full = full_observation_block(model, config, mode);
  ObservationBlock block{MatX(3, mask.count()), config};
  const auto idx = mask.indices();
  for (std::size_t c = 0; c < idx.size(); ++c) {
    block.B.col(static_cast<Eigen::Index>(c)) = full.col(static_cast<Eigen::Index>(idx[c]));
  }
  return block;
}

std::vector<ObservationBlock> build_blocks(const RobotModel& model, const ExperimentPlan& plan,
                                           const ParamMask& mask) {
  std::vector<ObservationBlock> blocks;
  blocks.reserve(plan.size());
  for (const auto& config : plan.configs) blocks.push_back(build_B(model, config, plan.mode, mask));
  return blocks;
}

namespace {

// Lexicographic key over (q, wrench, extra) used to fix summation order.
bool config_less(const MeasurementConfig& a, const MeasurementConfig& b) {
  const auto lex = [](const auto& x, const auto& y) {
    return std::lexicographical_compare(x.data(), x.data() + x.size(), y.data(), y.data() + y.size());
  };
  if (lex(a.q, b.q)) return true;
  if (lex(b.q, a.q)) return false;
  if (a.wrench.has_value() != b.wrench.has_value()) return !a.wrench.has_value();
  if (a.wrench) return lex(*a.wrench, *b.wrench);
  return false;
}

std::vector<std::size_t> canonical_order(std::span<const ObservationBlock> blocks,
                                         std::span<const MeasurementRecord> records = {}) {
  std::vector<std::size_t> order(blocks.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    if (config_less(blocks[i].config, blocks[j].config)) return true;
    if (config_less(blocks[j].config, blocks[i].config)) return false;
    if (!records.empty()) {
      const Vec3& a = records[i].dp;
      const Vec3& b = records[j].dp;
      return std::lexicographical_compare(a.data(), a.data() + 3, b.data(), b.data() + 3);
    }
    return false;
  });
  return order;
}

std::vector<std::string> labels_for(const ParamMask& mask) { return mask.names(); }

}  // namespace

MatX normal_matrix(std::span<const ObservationBlock> blocks) {
  if (blocks.empty()) throw InvalidInput("no observation blocks");
  const Eigen::Index d = blocks.front().B.cols();
  MatX M = MatX::Zero(d, d);
  for (std::size_t i : canonical_order(blocks)) {
    if (blocks[i].B.cols() != d) throw InvalidInput("observation blocks differ in width");
    M.noalias() += blocks[i].B.transpose() * blocks[i].B;
  }
  // Mirror the upper triangle so M is exactly symmetric.
  M.triangularView<Eigen::StrictlyLower>() = M.transpose().triangularView<Eigen::StrictlyLower>();
  return M;
}

IdentifiabilityReport assess_identifiability(const MatX& normal,
                                             std::span<const std::string> labels) {
  IdentifiabilityReport report;
  const Eigen::Index d = normal.rows();
  if (d == 0) {
    report.scaled_condition = std::numeric_limits<double>::infinity();
    report.weak_directions.push_back("(no active parameters)");
    return report;
  }
  const auto label = [&](Eigen::Index j) {
    return j < static_cast<Eigen::Index>(labels.size()) ? labels[static_cast<std::size_t>(j)]
                                                        : "p" + std::to_string(j + 1);
  };

  const double floor = kNegligibleColumn * kNegligibleColumn * normal.diagonal().maxCoeff();
  VecX inv_sqrt(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const double diag = normal(j, j);
    if (!(diag > floor) || !std::isfinite(diag)) {
      report.weak_directions.push_back(label(j) + " (column numerically zero)");
      inv_sqrt[j] = 0.0;
    } else {
      inv_sqrt[j] = 1.0 / std::sqrt(diag);
    }
  }
  if (!report.weak_directions.empty()) {
    report.scaled_condition = std::numeric_limits<double>::infinity();
    return report;
  }

  const MatX S = inv_sqrt.asDiagonal() * normal * inv_sqrt.asDiagonal();
  Eigen::SelfAdjointEigenSolver<MatX> eig(S);
  const VecX& lambda = eig.eigenvalues();
  const double lmax = lambda.maxCoeff();
  const double lmin = lambda.minCoeff();
  report.scaled_condition =
      lmin > 0.0 ? lmax / lmin : std::numeric_limits<double>::infinity();
  report.identifiable = report.scaled_condition < kConditionLimit;
  if (!report.identifiable) {
    for (Eigen::Index e = 0; e < d; ++e) {
      if (lambda[e] * kConditionLimit > lmax) continue;
      const VecX v = eig.eigenvectors().col(e);
      std::ostringstream os;
      bool first = true;
      for (Eigen::Index j = 0; j < d; ++j) {
        if (std::abs(v[j]) < 0.2) continue;
        os << (first ? "" : " ") << (v[j] >= 0 ? "+" : "-") << label(j);
        first = false;
      }
      report.weak_directions.push_back(os.str());
    }
  }
  return report;
}

void require_identifiable(const MatX& normal, std::span<const std::string> labels) {
  const auto report = assess_identifiability(normal, labels);
  if (report.identifiable) return;
  std::ostringstream os;
  os << "unidentifiable plan: scaled information matrix condition ";
  if (std::isfinite(report.scaled_condition)) {
    os << report.scaled_condition;
  } else {
    os << "inf";
  }
  os << " >= " << kConditionLimit << "; null-space directions:";
  for (const auto& dir : report.weak_directions) os << " [" << dir << "]";
  throw Unidentifiable(os.str());
}

LinearIdentifier::LinearIdentifier(std::span<const ObservationBlock> blocks, const ParamMask& mask)
    : n_meas_(blocks.size()) {
  if (blocks.empty()) throw InvalidInput("no observation blocks");
  const Eigen::Index d = static_cast<Eigen::Index>(mask.count());
  stacked_.resize(3 * static_cast<Eigen::Index>(n_meas_), d);
  for (std::size_t i = 0; i < n_meas_; ++i) {
    if (blocks[i].B.cols() != d) throw InvalidInput("observation block width does not match mask");
    stacked_.middleRows(3 * static_cast<Eigen::Index>(i), 3) = blocks[i].B;
  }
  const auto labels = labels_for(mask);
  require_identifiable(normal_matrix(blocks), labels);

  scale_ = stacked_.colwise().norm().transpose();
  MatX scaled = stacked_ * scale_.cwiseInverse().asDiagonal();
  qr_.compute(scaled);
}

VecX LinearIdentifier::solve(std::span<const Vec3> dp) const {
  if (dp.size() != n_meas_) throw InvalidInput("displacement count does not match blocks");
  VecX rhs(3 * static_cast<Eigen::Index>(n_meas_));
  for (std::size_t i = 0; i < n_meas_; ++i) rhs.segment<3>(3 * static_cast<Eigen::Index>(i)) = dp[i];
  const VecX y = qr_.solve(rhs);
  return y.cwiseQuotient(scale_);
}

VecX LinearIdentifier::residuals(std::span<const Vec3> dp, const VecX& estimate) const {
  VecX r(3 * static_cast<Eigen::Index>(n_meas_));
  for (std::size_t i = 0; i < n_meas_; ++i) r.segment<3>(3 * static_cast<Eigen::Index>(i)) = dp[i];
  r.noalias() -= stacked_ * estimate;
  return r;
}

IdentificationResult identify(std::span<const ObservationBlock> blocks,
                              std::span<const MeasurementRecord> records, const ParamMask& mask) {
  if (blocks.size() != records.size()) {
    throw InvalidInput("identify: " + std::to_string(blocks.size()) + " blocks but " +
                       std::to_string(records.size()) + " measurement records");
  }
  for (const auto& rec : records) {
    if (!rec.dp.allFinite()) throw InvalidInput("identify: non-finite displacement");
  }
  const auto order = canonical_order(blocks, records);
  std::vector<ObservationBlock> sorted_blocks;
  std::vector<Vec3> dp;
  sorted_blocks.reserve(order.size());
  dp.reserve(order.size());
  for (auto i : order) {
    sorted_blocks.push_back(blocks[i]);
    dp.push_back(records[i].dp);
  }
  const LinearIdentifier solver(sorted_blocks, mask);
  IdentificationResult result;
  result.active = solver.solve(dp);
  result.estimate = ParamVector(mask.expand(result.active));
  const VecX sorted_res = solver.residuals(dp, result.active);
  result.residuals.resize(sorted_res.size());
  for (std::size_t r = 0; r < order.size(); ++r) {
    result.residuals.segment<3>(3 * static_cast<Eigen::Index>(order[r])) =
        sorted_res.segment<3>(3 * static_cast<Eigen::Index>(r));
  }
  result.residual_rms =
      std::sqrt(result.residuals.squaredNorm() / static_cast<double>(result.residuals.size()));
  return result;
}

MatX covariance(std::span<const ObservationBlock> blocks, double sigma, const ParamMask& mask) {
  if (!(sigma >= 0.0)) throw InvalidInput("sigma must be >= 0");
  const MatX M = normal_matrix(blocks);
  if (M.rows() != static_cast<Eigen::Index>(mask.count())) {
    throw InvalidInput("observation block width does not match mask");
  }
  require_identifiable(M, labels_for(mask));
  const VecX inv_sqrt = M.diagonal().cwiseSqrt().cwiseInverse();
  const MatX S = inv_sqrt.asDiagonal() * M * inv_sqrt.asDiagonal();
  const Eigen::LDLT<MatX> ldlt(S);
  MatX inv = ldlt.solve(MatX::Identity(M.rows(), M.cols()));
  inv = inv_sqrt.asDiagonal() * inv * inv_sqrt.asDiagonal();
  inv = 0.5 * (inv + inv.transpose());
  return sigma * sigma * inv;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    cells.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_cell(const std::string& cell, std::size_t line_no, const std::string& column) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(cell, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != cell.size() || !std::isfinite(v)) {
    throw InvalidInput("measurement CSV line " + std::to_string(line_no) + ", column " + column +
                       ": '" + cell + "' is not a finite number");
  }
  return v;
}

}  // namespace

std::vector<MeasurementRecord> read_measurements_csv(std::istream& in, std::size_t n_joints) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    header = split_csv_line(line);
    break;
  }
  if (header.empty()) throw InvalidInput("measurement CSV is empty");

  std::vector<std::string> expected;
  for (std::size_t i = 1; i <= n_joints; ++i) expected.push_back("q" + std::to_string(i));
  const bool with_wrench = header.size() == n_joints + 9;
  if (with_wrench) {
    for (int i = 1; i <= 6; ++i) expected.push_back("w" + std::to_string(i));
  }
  for (const char* c : {"dpx", "dpy", "dpz"}) expected.emplace_back(c);
  if (header != expected) {
    std::ostringstream os;
    os << "measurement CSV header mismatch on line " << line_no << ": expected ";
    for (std::size_t i = 0; i < expected.size(); ++i) os << (i ? "," : "") << expected[i];
    throw InvalidInput(os.str());
  }

  std::vector<MeasurementRecord> records;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != expected.size()) {
      throw InvalidInput("measurement CSV line " + std::to_string(line_no) + ": expected " +
                         std::to_string(expected.size()) + " columns, got " +
                         std::to_string(cells.size()));
    }
    MeasurementRecord rec;
    rec.config.q.resize(static_cast<Eigen::Index>(n_joints));
    std::size_t c = 0;
    for (std::size_t i = 0; i < n_joints; ++i, ++c) {
      rec.config.q[static_cast<Eigen::Index>(i)] = parse_cell(cells[c], line_no, expected[c]);
    }
    if (with_wrench) {
      Vec6 w;
      for (int i = 0; i < 6; ++i, ++c) w[i] = parse_cell(cells[c], line_no, expected[c]);
      rec.config.wrench = w;
    }
    for (int i = 0; i < 3; ++i, ++c) rec.dp[i] = parse_cell(cells[c], line_no, expected[c]);
    records.push_back(std::move(rec));
  }
  return records;
}

void write_measurements_csv(std::ostream& out, std::span<const MeasurementRecord> records,
                            std::size_t n_joints) {
  const bool with_wrench =
      std::any_of(records.begin(), records.end(), [](const auto& r) { return r.config.wrench.has_value(); });
  for (std::size_t i = 1; i <= n_joints; ++i) out << (i > 1 ? "," : "") << "q" << i;
  if (with_wrench) {
    for (int i = 1; i <= 6; ++i) out << ",w" << i;
  }
  out << ",dpx,dpy,dpz\n";
  const auto old_precision = out.precision(17);
  for (const auto& rec : records) {
    if (static_cast<std::size_t>(rec.config.q.size()) != n_joints) {
      throw InvalidInput("measurement record joint count mismatch");
    }
    for (std::size_t i = 0; i < n_joints; ++i) out << (i ? "," : "") << rec.config.q[static_cast<Eigen::Index>(i)];
    if (with_wrench) {
      const Vec6 w = rec.config.wrench.value_or(Vec6::Zero());
      for (int i = 0; i < 6; ++i) out << "," << w[i];
    }
    out << "," << rec.dp.x() << "," << rec.dp.y() << "," << rec.dp.z() << "\n";
  }
  out.precision(old_precision);
}

}  // namespace posecal
