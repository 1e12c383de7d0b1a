// Copyright 2026 The Interleave Forge Authors
// SPDX-License-Identifier: Apache-2.0

// JSON-over-HTTP front of the review queue, consumed by the review UI.
//
//   GET  /api/cases/next?reviewer=R   200 case | 204 when nothing is pending
//   POST /api/cases/{id}/decision     {"decision": "accepted"|"rejected",
//                                      "reason"?, "reviewer"}
//                                     200 case | 400 | 404 | 409
//   GET  /api/cases/stats             {"pending", "accepted", "rejected"}
//   GET  /api/blobs/{sha256}          image/png | 404
//
// Case bodies list their reference images as /api/blobs/ URLs.

#pragma once

#include <memory>
#include <string>
#include <thread>

#include "forge/review_queue.hpp"

namespace httplib {
class Server;
}

namespace forge::bench {

class ReviewServer {
 public:
  explicit ReviewServer(ReviewQueue& queue);
  ~ReviewServer();
  ReviewServer(const ReviewServer&) = delete;
  ReviewServer& operator=(const ReviewServer&) = delete;

  // Binds (port 0 picks a free port) and serves on a background thread.
  // Returns the bound port. Throws Error(kIoFailure) if binding fails.
  int Start(const std::string& host, int port);
  void Stop();

 private:
  ReviewQueue& queue_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

// Case body as served to reviewers.
clients::Json CaseResponse(const BenchCase& c);

}  // namespace forge::bench
