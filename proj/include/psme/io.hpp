#pragma once

// CSV serialization of records and trajectories. Every file starts with '#'
// provenance lines (software version, seed, config echo) followed by the
// column header. Doubles are written with 17 significant digits.

#include <cstdint>
#include <iosfwd>
#include <string>

#include <nlohmann/json.hpp>

#include "psme/traj.hpp"

namespace psme {

inline constexpr const char* kVersion = "0.1.0";

struct Provenance {
  nlohmann::ordered_json config;
  std::uint64_t seed = 0;
};

/// %.17g
std::string format_double(double v);

void write_provenance(std::ostream& out, const Provenance& p);

/// Header `t,dy`; row n carries (t_{n+1}, dy_n).
void write_measurement_record(std::ostream& out, const MeasurementRecord& r, const Provenance& p);
/// Header `t,dN`.
void write_counting_record(std::ostream& out, const CountingRecord& r, const Provenance& p);
void write_record(std::ostream& out, const AnyRecord& r, const Provenance& p);

/// Reads either record format, detected from the header. The time column must
/// agree with `dt` to 1e-9 relative; `dt` is used verbatim for the result.
AnyRecord read_record(std::istream& in, double dt);

/// Header `t,x,y,z,log_lambda,purity`. Requires a qubit trajectory.
void write_trajectory(std::ostream& out, const TrajectoryResult& r, const Provenance& p);

}  // namespace psme
