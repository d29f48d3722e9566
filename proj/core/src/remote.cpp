#include "knobo/remote.hpp"

#include <cstdlib>

#include <httplib.h>

#include "knobo/error.hpp"

namespace knobo {
namespace {

bool yes_no(const std::string& body, const std::string& what) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw RemoteError(what + ": response is not JSON: " + e.what());
  }
  if (!j.is_object() || !j.contains("answer") || !j["answer"].is_string()) {
    throw RemoteError(what + ": response lacks a string \"answer\"");
  }
  const auto answer = j["answer"].get<std::string>();
  if (answer == "Yes" || answer == "yes") return true;
  if (answer == "No" || answer == "no") return false;
  throw RemoteError(what + ": unexpected answer '" + answer + "'");
}

}  // namespace

RemoteEndpoint RemoteEndpoint::parse(const std::string& url, std::string token) {
  constexpr std::string_view kScheme = "http://";
  if (url.rfind(kScheme, 0) != 0) {
    throw UsageError("remote endpoint must be an http:// URL, got '" + url + "'");
  }
  RemoteEndpoint ep;
  const auto slash = url.find('/', kScheme.size());
  ep.scheme_host_port = url.substr(0, slash);
  if (ep.scheme_host_port.size() == kScheme.size()) throw UsageError("remote endpoint has no host: '" + url + "'");
  if (slash != std::string::npos) {
    ep.base_path = url.substr(slash);
    while (!ep.base_path.empty() && ep.base_path.back() == '/') ep.base_path.pop_back();
  }
  ep.token = std::move(token);
  return ep;
}

RemoteEndpoint RemoteEndpoint::from_env(const std::string& var) {
  const char* url = std::getenv(var.c_str());
  if (url == nullptr || *url == '\0') {
    throw UsageError("remote oracle mode needs the endpoint URL in $" + var);
  }
  const char* token = std::getenv((var + "_TOKEN").c_str());
  return parse(url, token != nullptr ? token : "");
}

std::string RemoteEndpoint::post_json(const std::string& path, const nlohmann::json& body) const {
  httplib::Client client(scheme_host_port);
  client.set_connection_timeout(timeout_seconds, 0);
  client.set_read_timeout(timeout_seconds, 0);
  httplib::Headers headers;
  if (!token.empty()) headers.emplace("Authorization", "Bearer " + token);
  const auto full_path = base_path + path;
  auto res = client.Post(full_path, headers, body.dump(), "application/json");
  if (!res) {
    throw RemoteError("POST " + scheme_host_port + full_path + " failed: " + httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) {
    throw RemoteError("POST " + scheme_host_port + full_path + " returned HTTP " + std::to_string(res->status));
  }
  return res->body;
}

std::string HttpProposer::propose(const ProposalRequest& request) {
  return endpoint_.post_json("/propose", request.to_json());
}

bool HttpGroundabilityOracle::is_groundable(const std::string& question) {
  return yes_no(endpoint_.post_json("/groundable", {{"question", question}}), "groundability oracle");
}

AnnotationLabel HttpAnnotationOracle::annotate(const std::string& report, const std::string& concept_question) {
  const auto body = endpoint_.post_json("/annotate", {{"report", report}, {"concept_question", concept_question}});
  return yes_no(body, "annotation oracle") ? AnnotationLabel::positive : AnnotationLabel::negative;
}

int HttpPriorOracle::sign(const std::string& class_name, const std::string& concept_question) {
  const auto body = endpoint_.post_json("/prior", {{"class_name", class_name}, {"concept_question", concept_question}});
  return yes_no(body, "prior oracle") ? 1 : -1;
}

}  // namespace knobo
