#pragma once

#include <string>

#include "knobo/concept_gen.hpp"
#include "knobo/grounding.hpp"
#include "knobo/predictor.hpp"

namespace knobo {

/// Where a remote oracle service lives. The URL is read from an environment
/// variable (default KNOBO_ENDPOINT) and an optional bearer token from
/// <VAR>_TOKEN. Only plain http:// URLs are supported.
struct RemoteEndpoint {
  std::string scheme_host_port;  // "http://host:port"
  std::string base_path;         // "" or "/prefix"
  std::string token;
  int timeout_seconds = 60;

  static RemoteEndpoint parse(const std::string& url, std::string token = {});
  static RemoteEndpoint from_env(const std::string& var = "KNOBO_ENDPOINT");

  /// POSTs a JSON body to base_path + path; returns the response body.
  /// Connection failures and non-2xx statuses throw RemoteError.
  [[nodiscard]] std::string post_json(const std::string& path, const nlohmann::json& body) const;
};

/// POST /propose with the ProposalRequest JSON; the response body is the
/// proposer's plain-text lines.
class HttpProposer final : public ConceptProposer {
 public:
  explicit HttpProposer(RemoteEndpoint endpoint) : endpoint_(std::move(endpoint)) {}
  std::string propose(const ProposalRequest& request) override;

 private:
  RemoteEndpoint endpoint_;
};

/// POST /groundable {question} -> {answer: "Yes"|"No"}.
class HttpGroundabilityOracle final : public GroundabilityOracle {
 public:
  explicit HttpGroundabilityOracle(RemoteEndpoint endpoint) : endpoint_(std::move(endpoint)) {}
  bool is_groundable(const std::string& question) override;

 private:
  RemoteEndpoint endpoint_;
};

/// POST /annotate {report, concept_question} -> {answer: "Yes"|"No"}.
/// Anything else throws RemoteError, which annotate() maps to unknown.
class HttpAnnotationOracle final : public AnnotationOracle {
 public:
  explicit HttpAnnotationOracle(RemoteEndpoint endpoint) : endpoint_(std::move(endpoint)) {}
  AnnotationLabel annotate(const std::string& report, const std::string& concept_question) override;

 private:
  RemoteEndpoint endpoint_;
};

/// POST /prior {class_name, concept_question} -> {answer: "Yes"|"No"};
/// Yes maps to +1, No to -1.
class HttpPriorOracle final : public PriorOracle {
 public:
  explicit HttpPriorOracle(RemoteEndpoint endpoint) : endpoint_(std::move(endpoint)) {}
  int sign(const std::string& class_name, const std::string& concept_question) override;

 private:
  RemoteEndpoint endpoint_;
};

}  // namespace knobo
