#include "fedgia/trace.hpp"

#include <charconv>
#include <ostream>
#include <string>

namespace fedgia {

std::string_view to_string(RunStatus status) {
  switch (status) {
    case RunStatus::Converged: return "converged";
    case RunStatus::IterCap: return "itercap";
    case RunStatus::Diverged: return "diverged";
  }
  return "?";
}

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

void write_trace_csv(std::ostream& out, const RunTrace& trace) {
  out << "k,tau,cr,objective,error,lagrangian,elapsed_s\n";
  for (const auto& row : trace.rows) {
    out << row.k << ',' << row.tau << ',' << row.cr << ',' << format_double(row.objective) << ','
        << format_double(row.error) << ',' << format_double(row.lagrangian) << ','
        << format_double(row.elapsed_s) << '\n';
  }
}

int exit_code(RunStatus status) {
  switch (status) {
    case RunStatus::Converged: return 0;
    case RunStatus::IterCap: return 3;
    case RunStatus::Diverged: return 4;
  }
  return 1;
}

}  // namespace fedgia
