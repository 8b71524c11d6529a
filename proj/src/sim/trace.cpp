#include <cmath>
#include <iomanip>

#include <json.hpp>

#include "rgov/sim.hpp"

namespace rgov {

using nlohmann::json;

namespace {

json array_of(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

}  // namespace

std::string_view to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::kGoalReached: return "goal_reached";
    case Outcome::kHorizon: return "horizon";
    case Outcome::kCollision: return "collision";
    case Outcome::kDiverged: return "diverged";
  }
  return "unknown";
}

void write_ndjson(const Trace& trace, std::ostream& out) {
  const json header = {
      {"schema", 1},
      {"scenario", trace.scenario},
      {"seed", trace.seed},
      {"bound_method", std::string(to_string(trace.method))},
      {"ultimate_bound", trace.ultimate_bound},
      {"goal_eps", trace.goal_eps},
      {"eps_e", trace.eps_e},
  };
  out << header.dump() << "\n";
  for (const auto& r : trace.records) {
    json j = {
        {"t", r.t},
        {"x", array_of(r.x)},
        {"y", array_of(r.y)},
        {"g", array_of(r.g)},
        {"g_bar", array_of(r.g_bar)},
        {"sigma", r.sigma},
        {"delta_e", r.delta_e},
        {"bound", r.bound},
        {"bound_sdp", r.bound_sdp ? json(*r.bound_sdp) : json(nullptr)},
        {"alpha_star", r.alpha_star},
        {"dist_sq_obstacles", r.dist_sq_obstacles},
        {"dist_sq_true", r.dist_sq_true},
        {"dist_sq_output", r.dist_sq_output},
        {"governor_moved", r.governor_moved},
        {"flags",
         {{"stalled", r.flags.stalled},
          {"envelope_violation", r.flags.envelope_violation},
          {"singular_clamp", r.flags.singular_clamp}}},
    };
    out << j.dump() << "\n";
  }
}

void write_csv(const Trace& trace, std::ostream& out) {
  const Eigen::Index nx = trace.records.empty() ? 6 : trace.records.front().x.size();
  out << "t";
  for (Eigen::Index i = 0; i < nx; ++i) out << ",x" << i;
  out << ",y0,y1,g0,g1,g_bar0,g_bar1,sigma,delta_e,bound,bound_sdp,alpha_star,"
         "dist_sq_obstacles,dist_sq_true,dist_sq_output,governor_moved,stalled,"
         "envelope_violation,singular_clamp\n";
  const auto old_precision = out.precision(17);
  for (const auto& r : trace.records) {
    out << r.t;
    for (Eigen::Index i = 0; i < r.x.size(); ++i) out << "," << r.x(i);
    out << "," << r.y(0) << "," << r.y(1) << "," << r.g(0) << "," << r.g(1) << ","
        << r.g_bar(0) << "," << r.g_bar(1) << "," << r.sigma << "," << r.delta_e << ","
        << r.bound << ",";
    if (r.bound_sdp) out << *r.bound_sdp;
    out << "," << r.alpha_star << "," << r.dist_sq_obstacles << "," << r.dist_sq_true << ","
        << r.dist_sq_output << "," << int(r.governor_moved) << "," << int(r.flags.stalled) << ","
        << int(r.flags.envelope_violation) << "," << int(r.flags.singular_clamp) << "\n";
  }
  out.precision(old_precision);
}

std::vector<std::size_t> chain_violations(const Trace& trace) {
  std::vector<std::size_t> bad;
  for (std::size_t i = 0; i < trace.records.size(); ++i) {
    const auto& r = trace.records[i];
    if (!r.governor_moved) continue;
    const double slack = 1e-9 * std::max(1.0, r.dist_sq_obstacles);
    const bool lower = r.dist_sq_output <= r.bound + slack;
    const bool upper = r.bound <= r.dist_sq_obstacles - trace.eps_e + slack;
    if (!lower || !upper) bad.push_back(i);
  }
  return bad;
}

}  // namespace rgov
