// Copyright 2026 The Interleave Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "forge/review_server.hpp"

#include <httplib.h>

#include "forge/digest.hpp"
#include "forge/error.hpp"

namespace forge::bench {
using clients::Json;

namespace {

void SendJson(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void SendError(httplib::Response& res, int status, const std::string& code,
               const std::string& message) {
  SendJson(res, status, {{"error", code}, {"message", message}});
}

int StatusFor(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUnknownCase: return 404;
    case ErrorCode::kAlreadyDecided:
    case ErrorCode::kLeaseConflict: return 409;
    case ErrorCode::kInvalidArgument: return 400;
    default: return 500;
  }
}

}  // namespace

Json CaseResponse(const BenchCase& c) {
  Json j = c.ToJson();
  for (Json& r : j["references"]) r["url"] = "/api/blobs/" + r["digest"].get<std::string>();
  j["slots"] = c.instruction.slot_order();
  return j;
}

ReviewServer::ReviewServer(ReviewQueue& queue)
    : queue_(queue), server_(std::make_unique<httplib::Server>()) {
  server_->Get("/api/cases/next", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string reviewer = req.get_param_value("reviewer");
    if (reviewer.empty()) return SendError(res, 400, "InvalidArgument", "reviewer is required");
    const auto c = queue_.Next(reviewer);
    if (!c) {
      res.status = 204;
      return;
    }
    SendJson(res, 200, CaseResponse(*c));
  });

  server_->Post(R"(/api/cases/([^/]+)/decision)",
                [this](const httplib::Request& req, httplib::Response& res) {
    Json body;
    try {
      body = Json::parse(req.body);
    } catch (const Json::exception& e) {
      return SendError(res, 400, "InvalidArgument", std::string("body is not JSON: ") + e.what());
    }
    if (!body.is_object() || !body.contains("decision") || !body["decision"].is_string() ||
        !body.contains("reviewer") || !body["reviewer"].is_string() ||
        (body.contains("reason") && !body["reason"].is_string())) {
      return SendError(res, 400, "InvalidArgument",
                       "expected {\"decision\", \"reason\"?, \"reviewer\"}");
    }
    const std::string decision = body["decision"];
    if (decision != "accepted" && decision != "rejected") {
      return SendError(res, 400, "InvalidArgument", "decision must be accepted or rejected");
    }
    try {
      const BenchCase c =
          queue_.Decide(req.matches[1], {decision == "accepted", body.value("reason", "")},
                        body["reviewer"].get<std::string>());
      SendJson(res, 200, CaseResponse(c));
    } catch (const Error& e) {
      SendError(res, StatusFor(e.code()), std::string(ErrorCodeName(e.code())), e.detail());
    }
  });

  server_->Get("/api/cases/stats", [this](const httplib::Request&, httplib::Response& res) {
    const ReviewStats s = queue_.Stats();
    SendJson(res, 200, {{"pending", s.pending}, {"accepted", s.accepted}, {"rejected", s.rejected}});
  });

  server_->Get(R"(/api/blobs/([0-9a-f]+))", [this](const httplib::Request& req, httplib::Response& res) {
    try {
      const Bytes png = queue_.LoadBlob(req.matches[1]);
      res.set_content(std::string(png.begin(), png.end()), "image/png");
    } catch (const Error& e) {
      SendError(res, 404, std::string(ErrorCodeName(e.code())), e.detail());
    }
  });

  server_->set_exception_handler([](const httplib::Request&, httplib::Response& res,
                                    std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const Error& e) {
      SendError(res, StatusFor(e.code()), std::string(ErrorCodeName(e.code())), e.detail());
    } catch (const std::exception& e) {
      SendError(res, 500, "Internal", e.what());
    }
  });
}

ReviewServer::~ReviewServer() { Stop(); }

int ReviewServer::Start(const std::string& host, int port) {
  const int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error(ErrorCode::kIoFailure, "cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return bound;
}

void ReviewServer::Stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace forge::bench
