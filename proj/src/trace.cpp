#include "clickrender/trace.hpp"

#include "clickrender/format.hpp"

#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace clickrender {

const Eigen::VectorXd& Trace::displacement(const std::string& finger_id) const {
  for (const auto& [id, channel] : displacement_um)
    if (id == finger_id) return channel;
  throw std::out_of_range("trace has no displacement channel for finger '" + finger_id + "'");
}

void Trace::validate() const {
  if (!(sample_period_s > 0.0)) throw std::logic_error("trace sample period must be positive");
  const auto n = lateral_mN.size();
  if (normal_mN.size() != n || command_mN.size() != n) throw std::logic_error("trace channels differ in length");
  for (const auto& [id, channel] : displacement_um)
    if (channel.size() != n) throw std::logic_error("displacement channel '" + id + "' differs in length");
}

void write_trace_csv(std::ostream& os, const Trace& trace) {
  trace.validate();
  os << "t_s,lateral_mN,normal_mN";
  for (const auto& [id, channel] : trace.displacement_um) os << ",disp_um_" << id;
  os << '\n';
  for (Eigen::Index i = 0; i < trace.size(); ++i) {
    os << fmt_double(trace.time(i)) << ',' << fmt_double(trace.lateral_mN[i]) << ','
       << fmt_double(trace.normal_mN[i]);
    for (const auto& [id, channel] : trace.displacement_um) os << ',' << fmt_double(channel[i]);
    os << '\n';
  }
}

Trace read_trace_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("empty trace CSV");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (header.size() < 3 || header[0] != "t_s" || header[1] != "lateral_mN" || header[2] != "normal_mN")
    throw std::runtime_error("unexpected trace CSV header: " + line);
  const std::string prefix = "disp_um_";
  std::vector<std::vector<double>> cols(header.size());
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t c = 0;
    while (std::getline(ss, cell, ',')) {
      if (c >= cols.size()) throw std::runtime_error("trace CSV row has too many cells");
      cols[c++].push_back(std::stod(cell));
    }
    if (c != cols.size()) throw std::runtime_error("trace CSV row has too few cells");
  }
  auto to_vec = [](const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())).eval();
  };
  Trace trace;
  if (cols[0].size() >= 2) trace.sample_period_s = cols[0][1] - cols[0][0];
  if (!cols[0].empty()) trace.t0_s = cols[0][0];
  trace.lateral_mN = to_vec(cols[1]);
  trace.normal_mN = to_vec(cols[2]);
  trace.command_mN = Eigen::VectorXd::Zero(trace.lateral_mN.size());
  for (std::size_t c = 3; c < header.size(); ++c) {
    if (header[c].rfind(prefix, 0) != 0) throw std::runtime_error("unexpected trace column " + header[c]);
    trace.displacement_um.emplace_back(header[c].substr(prefix.size()), to_vec(cols[c]));
  }
  return trace;
}

}  // namespace clickrender
