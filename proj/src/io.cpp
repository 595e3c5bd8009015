#include "psme/io.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace psme {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  return cells;
}

double parse_double(const std::string& s, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error("record line " + std::to_string(line) + ": cannot parse '" + s + "'");
  }
}

std::string strip(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
  return s;
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_provenance(std::ostream& out, const Provenance& p) {
  out << "# psme " << kVersion << '\n';
  out << "# seed: " << p.seed << '\n';
  out << "# config: " << p.config.dump() << '\n';
}

void write_measurement_record(std::ostream& out, const MeasurementRecord& r, const Provenance& p) {
  write_provenance(out, p);
  out << "t,dy\n";
  for (std::size_t n = 0; n < r.steps(); ++n) {
    out << format_double(r.time(n + 1)) << ',' << format_double(r.increments[n]) << '\n';
  }
}

void write_counting_record(std::ostream& out, const CountingRecord& r, const Provenance& p) {
  write_provenance(out, p);
  out << "t,dN\n";
  for (std::size_t n = 0; n < r.steps(); ++n) {
    out << format_double(r.time(n + 1)) << ',' << r.counts[n] << '\n';
  }
}

void write_record(std::ostream& out, const AnyRecord& r, const Provenance& p) {
  std::visit(
      [&](const auto& rec) {
        if constexpr (std::is_same_v<std::decay_t<decltype(rec)>, MeasurementRecord>) {
          write_measurement_record(out, rec, p);
        } else {
          write_counting_record(out, rec, p);
        }
      },
      r);
}

AnyRecord read_record(std::istream& in, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("read_record: dt must be positive");
  std::string line;
  std::size_t line_no = 0;
  std::string header;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip(line);
    if (line.empty() || line.front() == '#') continue;
    header = line;
    break;
  }
  const bool counting = header == "t,dN";
  if (!counting && header != "t,dy") {
    throw Error("record header must be 't,dy' or 't,dN', got '" + header + "'");
  }

  std::vector<double> times;
  std::vector<double> values;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip(line);
    if (line.empty() || line.front() == '#') continue;
    const auto cells = split(line);
    if (cells.size() != 2) throw Error("record line " + std::to_string(line_no) + ": expected 2 columns");
    times.push_back(parse_double(cells[0], line_no));
    values.push_back(parse_double(cells[1], line_no));
  }
  if (times.empty()) throw Error("record has no rows");

  double t0 = times.front() - dt;
  if (std::abs(t0) < 1e-9 * dt) t0 = 0.0;
  for (std::size_t n = 0; n < times.size(); ++n) {
    const double expected = t0 + static_cast<double>(n + 1) * dt;
    if (std::abs(times[n] - expected) > 1e-9 * std::max(1.0, std::abs(expected))) {
      throw Error("record time column is inconsistent with dt = " + format_double(dt) +
                  " at row " + std::to_string(n + 1));
    }
  }

  if (counting) {
    CountingRecord r{dt, {}, t0};
    for (double v : values) {
      if (v != 0.0 && v != 1.0) throw Error("counting record entries must be 0 or 1");
      r.counts.push_back(static_cast<int>(v));
    }
    return r;
  }
  MeasurementRecord r{dt, std::move(values), t0};
  r.validate();
  return r;
}

void write_trajectory(std::ostream& out, const TrajectoryResult& r, const Provenance& p) {
  if (r.bloch.size() != r.states.size()) {
    throw Error("trajectory CSV requires a two-level system");
  }
  write_provenance(out, p);
  out << "t,x,y,z,log_lambda,purity\n";
  for (std::size_t n = 0; n < r.states.size(); ++n) {
    const auto& b = r.bloch[n];
    out << format_double(r.times[n]) << ',' << format_double(b.x) << ',' << format_double(b.y)
        << ',' << format_double(b.z) << ',' << format_double(r.states[n].log_lambda) << ','
        << format_double(purity(r.states[n].rho)) << '\n';
  }
}

}  // namespace psme
