// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace fairview {

// Error taxonomy shared by the on-disk containers and the pipeline stages.
// The CLI maps these onto process exit codes (config -> 2, stage -> 3,
// staleness -> 4).
enum class Errc {
  config_invalid,
  bad_container_header,
  truncated_payload,
  checksum_mismatch,
  manifest_payload_mismatch,
  schema_mismatch,
  stale_artifact,
  stage_failure,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::config_invalid: return "config_invalid";
    case Errc::bad_container_header: return "bad_container_header";
    case Errc::truncated_payload: return "truncated_payload";
    case Errc::checksum_mismatch: return "checksum_mismatch";
    case Errc::manifest_payload_mismatch: return "manifest_payload_mismatch";
    case Errc::schema_mismatch: return "schema_mismatch";
    case Errc::stale_artifact: return "stale_artifact";
    case Errc::stage_failure: return "stage_failure";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}
  Errc code() const { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool ok, Errc code, const std::string& what) {
  if (!ok) fail(code, what);
}

}  // namespace fairview
