// Command-line front end. Links only the C API (sgt/sgt.h); config handling
// is plain JSON merging on the client side.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sgt/sgt.h"

namespace {

int fail(int code, const std::string& message) {
  std::fprintf(stderr, "ERROR %d: %s\n", code, message.c_str());
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-supervised graph-transformer forgery detection pipeline"};
  app.set_help_flag("-h,--help", "Print usage");

  std::string command;
  std::string config_path;
  std::vector<std::string> overrides;
  bool print_config = false;

  const std::string commands = sgt_commands();
  app.add_option("command", command, "One of: " + commands)->required();
  app.add_option("-c,--config", config_path, "JSON configuration file");
  app.add_option("-s,--set", overrides, "Override a config key (key=value, repeatable)");
  app.add_flag("--print-config", print_config, "Print the effective config and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(SGT_ERR_CONFIG, e.what());
  }

  nlohmann::json config = nlohmann::json::object();
  if (!config_path.empty()) {
    std::ifstream is(config_path);
    if (!is) return fail(SGT_ERR_DATA, "cannot open config file '" + config_path + "'");
    config = nlohmann::json::parse(is, nullptr, false);
    if (config.is_discarded() || !config.is_object()) {
      return fail(SGT_ERR_CONFIG, "config file '" + config_path + "' is not a JSON object");
    }
  }
  for (const std::string& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      return fail(SGT_ERR_CONFIG, "--set expects key=value, got '" + kv + "'");
    }
    const std::string key = kv.substr(0, eq);
    const std::string raw = kv.substr(eq + 1);
    nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;  // plain strings need no quoting
    config[key] = value;
  }

  sgt_session* session = nullptr;
  char errbuf[512];
  int status = sgt_session_create(config.dump().c_str(), &session, errbuf, sizeof(errbuf));
  if (status != SGT_OK) return fail(status, errbuf);

  if (print_config) {
    std::printf("%s", sgt_session_config(session));
    sgt_session_destroy(session);
    return SGT_OK;
  }

  status = sgt_run(session, command.c_str());
  if (status != SGT_OK) {
    const std::string message = sgt_session_error(session);
    sgt_session_destroy(session);
    return fail(status, message);
  }
  sgt_session_destroy(session);
  return SGT_OK;
}
