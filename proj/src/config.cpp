#include "mhrsim/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mhrsim {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

KvConfig KvConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_string(ss.str());
}

KvConfig KvConfig::parse_string(const std::string& text) {
  KvConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config: line " + std::to_string(lineno) + " has no '='");
    const std::string key = trim(t.substr(0, eq));
    const std::string val = trim(t.substr(eq + 1));
    if (key.empty())
      throw std::runtime_error("config: line " + std::to_string(lineno) + " has empty key");
    cfg.values_[key] = val;
  }
  return cfg;
}

bool KvConfig::has(const std::string& key) const { return values_.count(key) > 0; }

std::string KvConfig::get_string(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

std::string KvConfig::require_string(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw std::runtime_error("config: missing required key '" + key + "'");
  return it->second;
}

double KvConfig::get_double(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::size_t used = 0;
  const double v = std::stod(it->second, &used);
  if (used != it->second.size())
    throw std::runtime_error("config: bad number for '" + key + "'");
  return v;
}

long KvConfig::get_long(const std::string& key, long fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::size_t used = 0;
  const long v = std::stol(it->second, &used);
  if (used != it->second.size())
    throw std::runtime_error("config: bad integer for '" + key + "'");
  return v;
}

std::uint64_t KvConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::size_t used = 0;
  const unsigned long long v = std::stoull(it->second, &used);
  if (used != it->second.size())
    throw std::runtime_error("config: bad integer for '" + key + "'");
  return v;
}

std::vector<std::string> KvConfig::get_list(const std::string& key) const {
  const auto it = values_.find(key);
  std::vector<std::string> out;
  if (it == values_.end()) return out;
  std::istringstream ss(it->second);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::string t = trim(item);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

std::vector<double> KvConfig::get_double_list(const std::string& key) const {
  std::vector<double> out;
  for (const std::string& item : get_list(key)) {
    const auto c1 = item.find(':');
    if (c1 == std::string::npos) {
      out.push_back(std::stod(item));
      continue;
    }
    const auto c2 = item.find(':', c1 + 1);
    if (c2 == std::string::npos)
      throw std::runtime_error("config: range needs lo:hi:step in '" + key + "'");
    const double lo = std::stod(item.substr(0, c1));
    const double hi = std::stod(item.substr(c1 + 1, c2 - c1 - 1));
    const double step = std::stod(item.substr(c2 + 1));
    if (!(step > 0.0)) throw std::runtime_error("config: range step must be > 0");
    for (double v = lo; v <= hi + 1e-12; v += step) out.push_back(v);
  }
  return out;
}

Setting parse_setting(const std::string& s) {
  if (s == "observational") return Setting::observational;
  if (s == "counterfactual") return Setting::counterfactual;
  throw std::runtime_error("config: unknown setting '" + s + "'");
}

CensorDist parse_censor_dist(const std::string& s) {
  if (s == "none") return CensorDist::none;
  if (s == "uniform") return CensorDist::uniform;
  if (s == "weibull") return CensorDist::weibull;
  throw std::runtime_error("config: unknown censoring distribution '" + s + "'");
}

ThetaMethod parse_theta_method(const std::string& s) {
  if (s == "sample_average") return ThetaMethod::sample_average;
  if (s == "kde_quadrature") return ThetaMethod::kde_quadrature;
  throw std::runtime_error("config: unknown theta method '" + s + "'");
}

Ties parse_ties(const std::string& s) {
  if (s == "efron") return Ties::efron;
  if (s == "breslow") return Ties::breslow;
  throw std::runtime_error("config: unknown tie method '" + s + "'");
}

const char* setting_name(Setting s) {
  return s == Setting::observational ? "observational" : "counterfactual";
}

const char* censor_dist_name(CensorDist d) {
  switch (d) {
    case CensorDist::none: return "none";
    case CensorDist::uniform: return "uniform";
    case CensorDist::weibull: return "weibull";
  }
  return "?";
}

RunConfig RunConfig::from_file(const std::string& path) {
  const KvConfig kv = KvConfig::parse_file(path);
  RunConfig rc;

  for (const std::string& s : kv.get_list("settings"))
    rc.grid.settings.push_back(parse_setting(s));
  if (rc.grid.settings.empty()) rc.grid.settings.push_back(Setting::counterfactual);

  for (double n : kv.get_double_list("sample_sizes"))
    rc.grid.sample_sizes.push_back(static_cast<long>(n));
  if (rc.grid.sample_sizes.empty()) rc.grid.sample_sizes.push_back(2000);

  rc.grid.mhrs = kv.get_double_list("mhrs");
  if (rc.grid.mhrs.empty()) rc.grid.mhrs = {0.5, 0.8, 1.0, 1.25, 2.0};

  for (const std::string& s : kv.get_list("censor_dists"))
    rc.grid.censor_dists.push_back(parse_censor_dist(s));
  if (rc.grid.censor_dists.empty()) rc.grid.censor_dists.push_back(CensorDist::uniform);

  rc.grid.censor_rates = kv.get_double_list("censor_rates");
  if (rc.grid.censor_rates.empty())
    rc.grid.censor_rates = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};

  rc.grid.replicates = kv.get_long("replicates", 1000);
  rc.grid.master_seed = kv.get_u64("master_seed", 1);
  rc.grid.theta_method =
      parse_theta_method(kv.get_string("theta_method", "kde_quadrature"));
  rc.grid.ties = parse_ties(kv.get_string("ties", "efron"));

  rc.output_dir = kv.get_string("output_dir", "out");
  rc.threads = static_cast<int>(kv.get_long("threads", 0));
  rc.calib_n = kv.get_long("calib_n", 1000000);
  rc.calib_tol = kv.get_double("calib_tol", 0.005);
  rc.calib_cache = kv.get_string("calib_cache", rc.output_dir + "/alpha_star_cache.txt");
  return rc;
}

CurveConfig CurveConfig::from_file(const std::string& path) {
  const KvConfig kv = KvConfig::parse_file(path);
  CurveConfig cc;
  cc.setting = parse_setting(kv.get_string("setting", "counterfactual"));
  cc.n = kv.get_long("n", 50000);
  cc.mhr = kv.get_double("mhr", 2.0);
  cc.censor_dist = parse_censor_dist(kv.get_string("censor_dist", "none"));
  cc.censor_rate = kv.get_double("censor_rate", 0.0);
  cc.grid = kv.get_double_list("grid");
  if (cc.grid.empty()) throw std::runtime_error("config: curve grid must be nonempty");
  cc.curves = kv.get_list("curves");
  if (cc.curves.empty())
    cc.curves = {"marginal_unweighted", "conditional_unweighted"};
  const std::string axis =
      kv.get_string("x_axis", cc.censor_rate > 0.0 ? "resolved_fraction" : "event_fraction");
  if (axis == "event_fraction") {
    cc.axis = CurveAxis::event_fraction;
  } else if (axis == "resolved_fraction") {
    cc.axis = CurveAxis::resolved_fraction;
  } else {
    throw std::runtime_error("config: unknown x_axis '" + axis + "'");
  }
  cc.master_seed = kv.get_u64("master_seed", 1);
  cc.output_dir = kv.get_string("output_dir", "out");
  cc.theta_method = parse_theta_method(kv.get_string("theta_method", "kde_quadrature"));
  cc.ties = parse_ties(kv.get_string("ties", "efron"));
  cc.calib_n = kv.get_long("calib_n", 1000000);
  cc.calib_tol = kv.get_double("calib_tol", 0.005);
  cc.calib_cache = kv.get_string("calib_cache", cc.output_dir + "/alpha_star_cache.txt");
  return cc;
}

}  // namespace mhrsim
