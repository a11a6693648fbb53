#pragma once

#include <Eigen/Core>

#include <iosfwd>
#include <string_view>
#include <vector>

namespace fedgia {

enum class RunStatus { Converged, IterCap, Diverged };

std::string_view to_string(RunStatus status);

/// One row per aggregation round.
struct TraceRow {
  long k = 0;
  /// 1-based aggregation count, so cr == 2 * tau.
  long tau = 0;
  long cr = 0;
  double objective = 0.0;
  /// ||grad f(x)||^2 at the freshly aggregated global parameter.
  double error = 0.0;
  /// Augmented Lagrangian of the state uploaded for this aggregation.
  double lagrangian = 0.0;
  double elapsed_s = 0.0;
  /// Worst per-client z_i - x_i - pi_i/sigma norm (FedGiA only, else 0).
  double state_identity_res = 0.0;
  /// Worst per-client first-order identity residual (FedGiA only, else 0).
  double first_order_res = 0.0;
};

struct RunTrace {
  std::vector<TraceRow> rows;
  RunStatus status = RunStatus::IterCap;
  long iterations = 0;
  /// Global parameter at termination.
  Eigen::VectorXd x;

  const TraceRow& final_row() const { return rows.back(); }
};

/// `k,tau,cr,objective,error,lagrangian,elapsed_s`; values use shortest
/// round-trip formatting.
void write_trace_csv(std::ostream& out, const RunTrace& trace);

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);

/// Exit code for the CLI: 0 converged, 3 iteration cap, 4 diverged.
int exit_code(RunStatus status);

}  // namespace fedgia
