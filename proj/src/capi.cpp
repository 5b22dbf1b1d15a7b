#include "sgt/sgt.h"

#include <cstring>
#include <string>

#include "sgt/commands.hpp"
#include "sgt/errors.hpp"

struct sgt_session {
  sgt::run::RunConfig config;
  std::string last_error;
  std::string config_json;  // cache for sgt_session_config
};

namespace {

void copy_error(const std::string& msg, char* errbuf, size_t errbuf_len) {
  if (!errbuf || errbuf_len == 0) return;
  const size_t n = std::min(msg.size(), errbuf_len - 1);
  std::memcpy(errbuf, msg.c_str(), n);
  errbuf[n] = '\0';
}

int status_for(const std::exception& e) {
  if (dynamic_cast<const sgt::ConfigError*>(&e)) return SGT_ERR_CONFIG;
  if (dynamic_cast<const sgt::DataError*>(&e)) return SGT_ERR_DATA;
  return SGT_ERR_NUMERIC;
}

}  // namespace

extern "C" {

const char* sgt_default_config(void) {
  static const std::string defaults = sgt::run::RunConfig{}.to_json();
  return defaults.c_str();
}

const char* sgt_commands(void) {
  static const std::string names = [] {
    std::string out;
    for (const auto& name : sgt::run::command_names()) {
      if (!out.empty()) out += " ";
      out += name;
    }
    return out;
  }();
  return names.c_str();
}

int sgt_session_create(const char* config_json, sgt_session** out, char* errbuf,
                       size_t errbuf_len) {
  if (!out) return SGT_ERR_CONFIG;
  *out = nullptr;
  try {
    auto session = new sgt_session;
    session->config = sgt::run::RunConfig::from_json(config_json ? config_json : "{}");
    *out = session;
    return SGT_OK;
  } catch (const std::exception& e) {
    copy_error(e.what(), errbuf, errbuf_len);
    return status_for(e);
  }
}

void sgt_session_destroy(sgt_session* session) { delete session; }

int sgt_run(sgt_session* session, const char* command) {
  if (!session) return SGT_ERR_CONFIG;
  session->last_error.clear();
  if (!command) {
    session->last_error = "command must be non-NULL";
    return SGT_ERR_CONFIG;
  }
  try {
    const bool ok = sgt::run::run_command(session->config, command);
    if (!ok) {
      session->last_error = "selftest reported failures";
      return SGT_ERR_NUMERIC;
    }
    return SGT_OK;
  } catch (const std::exception& e) {
    session->last_error = e.what();
    return status_for(e);
  }
}

const char* sgt_session_error(const sgt_session* session) {
  return session ? session->last_error.c_str() : "";
}

const char* sgt_session_config(sgt_session* session) {
  if (!session) return "";
  session->config_json = session->config.to_json();
  return session->config_json.c_str();
}

}  // extern "C"
