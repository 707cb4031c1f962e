#include "mfdsm/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <system_error>

#include <json.hpp>

namespace mfdsm {

namespace {

using nlohmann::json;

[[noreturn]] void parse_fail(const std::string& where, const std::string& what) {
  throw Error(ErrorCode::ParseError, where + ": " + what);
}

void reject_unknown(const json& obj, const std::string& where,
                    std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) parse_fail(where, "expected an object");
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& item : obj.items()) {
    if (!keys.count(item.key())) parse_fail(where, "unknown key '" + item.key() + "'");
  }
}

const json& require(const json& obj, const std::string& where, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) parse_fail(where, std::string("missing key '") + key + "'");
  return *it;
}

double number(const json& v, const std::string& where) {
  if (!v.is_number()) parse_fail(where, "expected a number");
  return v.get<double>();
}

std::size_t count(const json& v, const std::string& where) {
  if (!v.is_number_unsigned()) parse_fail(where, "expected a nonnegative integer");
  return v.get<std::size_t>();
}

std::size_t label(const json& v, const std::string& where) {
  const std::size_t x = count(v, where);
  if (x == 0) parse_fail(where, "labels are 1-based");
  return x - 1;
}

AffineFunction affine(const json& obj, const std::string& where) {
  reject_unknown(obj, where, {"intercept", "slope"});
  AffineFunction f;
  f.intercept = number(require(obj, where, "intercept"), where + ".intercept");
  if (obj.contains("slope")) f.slope = number(obj["slope"], where + ".slope");
  return f;
}

std::vector<OptionSpec> options_from(const json& arr, const std::string& where) {
  if (!arr.is_array()) parse_fail(where, "expected an array");
  std::vector<OptionSpec> out;
  for (std::size_t u = 0; u < arr.size(); ++u) {
    const std::string w = where + "[" + std::to_string(u + 1) + "]";
    const auto& o = arr[u];
    reject_unknown(o, w, {"alpha", "delivery", "reserve_price", "demand_price"});
    OptionSpec opt;
    opt.alpha = number(require(o, w, "alpha"), w + ".alpha");
    opt.delivery = affine(require(o, w, "delivery"), w + ".delivery");
    opt.reserve_price = affine(require(o, w, "reserve_price"), w + ".reserve_price");
    opt.demand_price = affine(require(o, w, "demand_price"), w + ".demand_price");
    out.push_back(opt);
  }
  return out;
}

TrajectoryModel trajectory_from(const json& obj) {
  const std::string where = "trajectory";
  if (!obj.is_object()) parse_fail(where, "expected an object");
  const auto& kind = require(obj, where, "kind");
  if (kind == "periodic_valley") {
    reject_unknown(obj, where, {"kind", "period", "tau_begin", "tau_end", "base_level", "dip_depth"});
    ValleyParams v;
    v.period = count(require(obj, where, "period"), where + ".period");
    v.tau_begin = count(require(obj, where, "tau_begin"), where + ".tau_begin");
    v.tau_end = count(require(obj, where, "tau_end"), where + ".tau_end");
    if (obj.contains("base_level")) v.base_level = number(obj["base_level"], where + ".base_level");
    if (obj.contains("dip_depth")) v.dip_depth = number(obj["dip_depth"], where + ".dip_depth");
    return TrajectoryModel::periodic_valley(v);
  }
  if (kind == "table") {
    reject_unknown(obj, where, {"kind", "successor", "theta", "initial_state"});
    const auto& succ = require(obj, where, "successor");
    const auto& theta = require(obj, where, "theta");
    if (!succ.is_array() || !theta.is_array()) parse_fail(where, "successor and theta must be arrays");
    std::vector<std::size_t> successor;
    for (const auto& x : succ) successor.push_back(label(x, where + ".successor"));
    std::vector<double> th;
    for (const auto& x : theta) th.push_back(number(x, where + ".theta"));
    std::size_t initial = 0;
    if (obj.contains("initial_state")) initial = label(obj["initial_state"], where + ".initial_state");
    return TrajectoryModel::table(std::move(successor), std::move(th), initial);
  }
  parse_fail(where + ".kind", "expected 'table' or 'periodic_valley'");
}

nlohmann::ordered_json options_json(const std::vector<OptionSpec>& options) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& o : options) {
    nlohmann::ordered_json j;
    j["alpha"] = o.alpha;
    j["delivery"] = {{"intercept", o.delivery.intercept}, {"slope", o.delivery.slope}};
    j["reserve_price"] = {{"intercept", o.reserve_price.intercept}, {"slope", o.reserve_price.slope}};
    j["demand_price"] = {{"intercept", o.demand_price.intercept}, {"slope", o.demand_price.slope}};
    arr.push_back(j);
  }
  return arr;
}

std::size_t line_of(const std::string& text, std::size_t byte, std::size_t& column) {
  std::size_t line = 1;
  column = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return line;
}

}  // namespace

Scenario scenario_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t column = 0;
    // e.byte points one past the offending character.
    const std::size_t line = line_of(text, e.byte == 0 ? 0 : e.byte - 1, column);
    throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ", column " +
                                           std::to_string(column) + ": " + e.what());
  }
  const std::string where = "scenario";
  reject_unknown(doc, where,
                 {"n", "p", "beta", "options", "trajectory", "distance", "state_overrides"});
  Scenario scn;
  scn.n = count(require(doc, where, "n"), "n");
  scn.p = number(require(doc, where, "p"), "p");
  scn.beta = number(require(doc, where, "beta"), "beta");
  scn.options = options_from(require(doc, where, "options"), "options");
  scn.trajectory = trajectory_from(require(doc, where, "trajectory"));

  const auto& dist = require(doc, where, "distance");
  reject_unknown(dist, "distance", {"kind", "scale"});
  if (require(dist, "distance", "kind") != "scaled_absolute") {
    parse_fail("distance.kind", "only 'scaled_absolute' is supported");
  }
  scn.distance.kind = DistanceKind::ScaledAbsolute;
  scn.distance.scale = number(require(dist, "distance", "scale"), "distance.scale");

  if (doc.contains("state_overrides")) {
    const auto& arr = doc["state_overrides"];
    if (!arr.is_array()) parse_fail("state_overrides", "expected an array");
    for (std::size_t j = 0; j < arr.size(); ++j) {
      const std::string w = "state_overrides[" + std::to_string(j + 1) + "]";
      reject_unknown(arr[j], w, {"states", "options"});
      StateOverride ov;
      const auto& states = require(arr[j], w, "states");
      if (!states.is_array()) parse_fail(w + ".states", "expected an array");
      for (const auto& s : states) ov.states.push_back(label(s, w + ".states"));
      ov.options = options_from(require(arr[j], w, "options"), w + ".options");
      scn.state_overrides.push_back(std::move(ov));
    }
  }
  return scn;
}

std::string scenario_to_json(const Scenario& scn) {
  nlohmann::ordered_json doc;
  doc["n"] = scn.n;
  doc["p"] = scn.p;
  doc["beta"] = scn.beta;
  doc["options"] = options_json(scn.options);
  nlohmann::ordered_json traj;
  if (const auto& v = scn.trajectory.valley()) {
    traj["kind"] = "periodic_valley";
    traj["period"] = v->period;
    traj["tau_begin"] = v->tau_begin;
    traj["tau_end"] = v->tau_end;
    traj["base_level"] = v->base_level;
    traj["dip_depth"] = v->dip_depth;
  } else {
    traj["kind"] = "table";
    auto succ = nlohmann::ordered_json::array();
    for (std::size_t s : scn.trajectory.successors()) succ.push_back(s + 1);
    traj["successor"] = succ;
    traj["theta"] = scn.trajectory.thetas();
    traj["initial_state"] = scn.trajectory.initial_state() + 1;
  }
  doc["trajectory"] = traj;
  doc["distance"] = {{"kind", "scaled_absolute"}, {"scale", scn.distance.scale}};
  if (!scn.state_overrides.empty()) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& ov : scn.state_overrides) {
      auto states = nlohmann::ordered_json::array();
      for (std::size_t s : ov.states) states.push_back(s + 1);
      arr.push_back({{"states", states}, {"options", options_json(ov.options)}});
    }
    doc["state_overrides"] = arr;
  }
  return doc.dump(2) + "\n";
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FileNotFound, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

Scenario load_scenario(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  try {
    return scenario_from_json(text);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ParseError) {
      throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
    }
    throw;
  }
}

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string policy_csv(const Policy& pol) {
  std::string out = "m_count,s,g_r,g_d\n";
  for (std::size_t s = 0; s < pol.states(); ++s) {
    for (std::size_t m = 0; m < pol.grid_size(); ++m) {
      const auto& a = pol.at(m, s);
      out += std::to_string(m) + ',' + std::to_string(s + 1) + ',' +
             std::to_string(a.reserve + 1) + ',' + std::to_string(a.demand + 1) + '\n';
    }
  }
  return out;
}

std::string value_csv(const ValueFunction& v) {
  std::string out = "m_count,s,value\n";
  for (std::size_t s = 0; s < v.states(); ++s) {
    for (std::size_t m = 0; m < v.grid_size(); ++m) {
      out += std::to_string(m) + ',' + std::to_string(s + 1) + ',' + format_double(v.at(m, s)) + '\n';
    }
  }
  return out;
}

std::string trace_csv(const SimulationTrace& trace) {
  std::string out = "t,s,m_count,g_r,g_d,theta,step_cost\n";
  for (const auto& st : trace.steps) {
    out += std::to_string(st.t) + ',' + std::to_string(st.s + 1) + ',' + std::to_string(st.m_count) +
           ',' + std::to_string(st.action.reserve + 1) + ',' + std::to_string(st.action.demand + 1) +
           ',' + format_double(st.theta) + ',' + format_double(st.step_cost) + '\n';
  }
  return out;
}

std::string kernel_row_csv(std::span<const double> row) {
  std::string out = "m_next_count,probability\n";
  for (std::size_t j = 0; j < row.size(); ++j) {
    out += std::to_string(j) + ',' + format_double(row[j]) + '\n';
  }
  return out;
}

std::string policy_grid_csv(const Policy& pol) {
  std::string out = "x,m_count,s,option\n";
  for (int x = 0; x <= 1; ++x) {
    for (std::size_t s = 0; s < pol.states(); ++s) {
      for (std::size_t m = 0; m < pol.grid_size(); ++m) {
        out += std::to_string(x) + ',' + std::to_string(m) + ',' + std::to_string(s + 1) + ',' +
               std::to_string(policy_action(pol, x, m, s) + 1) + '\n';
      }
    }
  }
  return out;
}

std::string sample_path_csv(const SimulationTrace& trace) {
  std::string out = "t,s,m_count,theta\n";
  for (const auto& st : trace.steps) {
    out += std::to_string(st.t) + ',' + std::to_string(st.s + 1) + ',' +
           std::to_string(st.m_count) + ',' + format_double(st.theta) + '\n';
  }
  return out;
}

void OutputBundle::add(std::filesystem::path path, std::string content) {
  files_.emplace_back(std::move(path), std::move(content));
}

void OutputBundle::commit() const {
  std::vector<std::filesystem::path> staged;
  auto cleanup = [&] {
    std::error_code ec;
    for (const auto& tmp : staged) std::filesystem::remove(tmp, ec);
  };
  for (const auto& [path, content] : files_) {
    auto tmp = path;
    tmp += ".tmp";
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (out) staged.push_back(tmp);
    out << content;
    out.close();
    if (!out) {
      cleanup();
      throw Error(ErrorCode::Io, "failed to write " + tmp.string());
    }
  }
  for (std::size_t i = 0; i < files_.size(); ++i) {
    std::error_code ec;
    std::filesystem::rename(staged[i], files_[i].first, ec);
    if (ec) {
      cleanup();
      throw Error(ErrorCode::Io, "failed to publish " + files_[i].first.string() + ": " + ec.message());
    }
  }
}

}  // namespace mfdsm
