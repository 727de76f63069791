#include "wealthdyn/service.hpp"

#include <cmath>
#include <stdexcept>

#include <httplib.h>
#include <json.hpp>

#include "wealthdyn/fokker_planck.hpp"
#include "wealthdyn/io.hpp"

namespace wealthdyn {

using nlohmann::json;

namespace {

// Request-shape problems map to 400; everything else thrown by the modules maps to 422.
struct BadRequest : std::runtime_error {
  using std::runtime_error::runtime_error;
};

HttpResponse error(int status, const std::string& kind, const std::string& detail) {
  return {status, dump_json(json{{"error", kind}, {"detail", detail}})};
}

double number(const json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number()) throw BadRequest(std::string("'") + key + "' must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw BadRequest(std::string("'") + key + "' must be finite");
  return d;
}

double required(const json& j, const char* key) {
  if (!j.contains(key)) throw BadRequest(std::string("missing '") + key + "'");
  return number(j, key, 0.0);
}

std::vector<double> numbers(const json& j, const char* key) {
  if (!j.is_array()) throw BadRequest(std::string("'") + key + "' must be an array of numbers");
  std::vector<double> out;
  for (const auto& v : j) {
    if (!v.is_number()) throw BadRequest(std::string("'") + key + "' must be an array of numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

TaxPolicy parse_policy(const json& body, double default_threshold) {
  TaxPolicy p;
  const json sched = body.contains("schedule") ? body.at("schedule") : json::object();
  if (!sched.is_object()) throw BadRequest("'schedule' must be an object");
  if (sched.contains("thresholds") || sched.contains("rates")) {
    if (!sched.contains("thresholds") || !sched.contains("rates"))
      throw BadRequest("'schedule' needs both 'thresholds' and 'rates'");
    p.thresholds = numbers(sched.at("thresholds"), "thresholds");
    p.rates = numbers(sched.at("rates"), "rates");
  } else {
    p.thresholds = {number(sched, "threshold", default_threshold)};
    p.rates = {number(sched, "rate", 0.0)};
  }
  p.avoidance_elasticity = number(body, "epsilon", 0.0);
  p.consumption_elasticity = number(body, "eta", 0.0);
  try {
    p.validate();
  } catch (const TaxError& e) {
    throw BadRequest(e.what());
  }
  return p;
}

std::vector<double> parse_rate_grid(const json& body) {
  if (!body.contains("rate_grid")) {
    std::vector<double> r;
    for (int k = 0; k <= 50; ++k) r.push_back(0.01 * k);
    return r;
  }
  const json& g = body.at("rate_grid");
  if (g.is_array()) return numbers(g, "rate_grid");
  if (!g.is_object()) throw BadRequest("'rate_grid' must be an array or {start, stop, step}");
  const double a = required(g, "start"), b = required(g, "stop"), s = required(g, "step");
  if (!(s > 0.0) || b < a) throw BadRequest("'rate_grid' needs step > 0 and stop >= start");
  std::vector<double> r;
  const auto n = static_cast<long>(std::floor((b - a) / s + 1e-9));
  if (n > 100000) throw BadRequest("'rate_grid' too long");
  for (long k = 0; k <= n; ++k) r.push_back(a + s * static_cast<double>(k));
  return r;
}

json point_json(const LafferPoint& p) {
  return {{"rate", p.rate}, {"revenue_static", p.revenue_static}, {"revenue_long_run", p.revenue_long_run}};
}

json grid_json(const WealthGrid& g) {
  return {{"lower_asinh", g.lower_asinh}, {"bin_width", g.bin_width}, {"n_bins", g.n_bins}};
}

HttpResponse laffer(const ServiceState& st, const json& body) {
  const TaxPolicy p = parse_policy(body, st.default_threshold);
  const std::vector<double> rates = parse_rate_grid(body);
  json pts = json::array();
  for (const LafferPoint& lp : laffer_curve(p, st.baseline, st.env, rates)) pts.push_back(point_json(lp));
  return {200, dump_json(json{{"points", pts}})};
}

HttpResponse steady(const ServiceState& st, const json& body) {
  const TaxPolicy p = parse_policy(body, st.default_threshold);
  bool rebate = false;
  if (body.contains("rebate")) {
    if (!body.at("rebate").is_boolean()) throw BadRequest("'rebate' must be a boolean");
    rebate = body.at("rebate").get<bool>();
  }
  const TaxOutcome o = evaluate_policy(p, st.baseline, st.env);
  json out{{"grid", grid_json(st.baseline.grid)},
           {"theta", to_json(o.theta)},
           {"density_after", to_json(o.density_after.mass)},
           {"revenue_static", o.revenue_static},
           {"revenue_long_run", o.revenue_long_run},
           {"rebate", nullptr}};
  if (rebate) {
    const RebateResult r = rebate_fixed_point(p, st.baseline, st.env);
    out["rebate"] = r.rebate;
    out["density_rebated"] = to_json(r.density.mass);
  }
  return {200, dump_json(out)};
}

HttpResponse optimum(const ServiceState& st, const json& body) {
  TaxPolicy p = parse_policy(body, st.default_threshold);
  const double coarse = number(body, "coarse_points", 41);
  if (coarse < 3 || coarse > 1001 || coarse != std::floor(coarse)) throw BadRequest("'coarse_points' must be an integer in [3, 1001]");
  const RevenueOptimum o = revenue_maximizing_rate(p, st.baseline, st.env, static_cast<int>(coarse));
  json curve = json::array();
  for (const auto& lp : o.curve) curve.push_back(point_json(lp));
  return {200, dump_json(json{{"rate", o.rate},
                              {"revenue_static", o.at_optimum.revenue_static},
                              {"revenue_long_run", o.at_optimum.revenue_long_run},
                              {"curve", curve}})};
}

HttpResponse estate(const json& body) {
  EstateModel m;
  m.mu = number(body, "mu", m.mu);
  m.sigma = number(body, "sigma", m.sigma);
  m.delta = number(body, "delta", m.delta);
  std::vector<double> rates;
  if (body.contains("rates")) {
    rates = numbers(body.at("rates"), "rates");
  } else {
    for (int k = 0; k <= 20; ++k) rates.push_back(0.05 * k);
  }
  const TaxComparison c = tax_comparison_curve(m, rates);
  return {200, dump_json(json{{"rates", c.rates},
                              {"alpha_annual", c.alpha_annual},
                              {"alpha_estate", c.alpha_estate},
                              {"alpha0", m.alpha0()},
                              {"alpha1", m.alpha1()}})};
}

HttpResponse baseline(const ServiceState& st) {
  const WealthGrid& g = st.baseline.grid;
  const double start = asinh(10.0 * st.spec.w_min);
  json out{{"grid", grid_json(g)},
           {"wealth", to_json(g.wealth_centers())},
           {"mass", to_json(st.baseline.mass)},
           {"density_asinh", to_json(st.baseline.density_asinh())},
           {"tail_start_asinh", start},
           {"tail_alpha", tail_alpha(st.baseline, start)},
           {"sigma2_coef", st.spec.sigma2_coef},
           {"consumption_rate", st.spec.consumption_rate},
           {"threshold", st.default_threshold}};
  return {200, dump_json(out)};
}

}  // namespace

ServiceState ServiceState::from_baseline(const ParetoBaseline& spec, double threshold) {
  return {spec, spec.snapshot(), spec.environment(), threshold};
}

HttpResponse handle_request(const ServiceState& st, const std::string& method, const std::string& path,
                            const std::string& body) {
  const bool get = method == "GET", post = method == "POST";
  const bool known = path == "/api/health" || path == "/api/baseline" || path == "/api/tax/laffer" ||
                     path == "/api/tax/steady-state" || path == "/api/tax/optimum" || path == "/api/tax/estate-compare";
  if (!known) return error(404, "not_found", "no endpoint " + path);
  const bool wants_get = path == "/api/health" || path == "/api/baseline";
  if ((wants_get && !get) || (!wants_get && !post)) return error(405, "method_not_allowed", method + " " + path);
  try {
    if (path == "/api/health") return {200, dump_json(json{{"status", "ok"}})};
    if (path == "/api/baseline") return baseline(st);
    json j;
    try {
      j = body.empty() ? json::object() : json::parse(body);
    } catch (const json::parse_error& e) {
      return error(400, "bad_request", std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object()) return error(400, "bad_request", "request body must be a JSON object");
    if (path == "/api/tax/laffer") return laffer(st, j);
    if (path == "/api/tax/steady-state") return steady(st, j);
    if (path == "/api/tax/optimum") return optimum(st, j);
    return estate(j);
  } catch (const BadRequest& e) {
    return error(400, "bad_request", e.what());
  } catch (const std::exception& e) {
    return error(422, "computation_error", e.what());
  }
}

struct HttpService::Impl {
  ServiceState state;
  httplib::Server server;
};

HttpService::HttpService(ServiceState state) : impl_(std::make_unique<Impl>()) {
  impl_->state = std::move(state);
  const auto route = [this](const httplib::Request& req, httplib::Response& res) {
    const HttpResponse r = handle_request(impl_->state, req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  impl_->server.Get(R"(/.*)", route);
  impl_->server.Post(R"(/.*)", route);
  impl_->server.Put(R"(/.*)", route);
  impl_->server.Delete(R"(/.*)", route);
}

HttpService::~HttpService() { stop(); }

int HttpService::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool HttpService::listen() { return impl_->server.listen_after_bind(); }

void HttpService::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace wealthdyn
