#pragma once

#include <memory>
#include <string>

#include "wealthdyn/grid.hpp"
#include "wealthdyn/synthetic.hpp"
#include "wealthdyn/tax.hpp"

namespace wealthdyn {

/// Immutable state shared by all requests.
struct ServiceState {
  ParetoBaseline spec;
  DistributionSnapshot baseline;
  TaxEnvironment env;
  double default_threshold = 600.0;

  static ServiceState from_baseline(const ParetoBaseline& spec, double threshold);
};

struct HttpResponse {
  int status = 200;
  std::string body;  // JSON
};

/// Routes one request. Malformed bodies give 400, module errors 422, both with {error, detail}.
HttpResponse handle_request(const ServiceState& state, const std::string& method, const std::string& path,
                            const std::string& body);

/// HTTP front end over handle_request. Handlers run concurrently on the server's thread pool.
class HttpService {
 public:
  explicit HttpService(ServiceState state);
  ~HttpService();
  HttpService(const HttpService&) = delete;
  HttpService& operator=(const HttpService&) = delete;

  /// Binds host:port (port 0 picks a free port); returns the bound port or -1.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  bool listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace wealthdyn
