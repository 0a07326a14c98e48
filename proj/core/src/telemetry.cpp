#include <fstream>

#include "bpr/errors.hpp"
#include "bpr/optim.hpp"

namespace bpr {

void write_telemetry_csv(const MomentumTelemetry& telemetry, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write telemetry " + path.string());
  out << "iteration,mean_abs_m\n";
  out.precision(17);
  for (const auto& [iteration, mean_abs_m] : telemetry.window_mean_abs_m) {
    out << iteration << ',' << mean_abs_m << '\n';
  }
}

}  // namespace bpr
